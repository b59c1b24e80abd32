#include "evoprune/obs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "evoprune/parallel.hpp"

namespace evoprune {

void LayerHessian::accumulate(const Matrix& inputs) {
    if (inputs.cols() < 1) throw ContractViolation("LayerHessian: need at least one token column");
    if (!h.empty() && inputs.rows() != h.rows())
        throw ContractViolation("LayerHessian: input dimension changed between batches");
    const Matrix outer = sym_outer(inputs);
    const long m = static_cast<long>(inputs.cols());
    if (h.empty()) {
        h = Matrix(inputs.rows(), inputs.rows());
        for (std::size_t i = 0; i < h.size(); ++i)
            h.data()[i] = outer.data()[i] / static_cast<double>(m);
        n_accumulated = m;
        return;
    }
    const double n_old = static_cast<double>(n_accumulated);
    const double n_new = n_old + static_cast<double>(m);
    for (std::size_t i = 0; i < h.size(); ++i)
        h.data()[i] = (h.data()[i] * n_old + outer.data()[i]) / n_new;
    n_accumulated += m;
}

LayerHessian accumulate_hessian(const Matrix& inputs) {
    LayerHessian out;
    out.accumulate(inputs);
    return out;
}

PruneResult obs_prune_layer(const Matrix& w, const LayerHessian& hess, double ratio,
                            int blocksize, double damping) {
    if (w.empty()) throw ContractViolation("obs_prune_layer: empty weight");
    if (hess.in_dim() != static_cast<int>(w.cols()))
        throw ContractViolation("obs_prune_layer: hessian dim != weight cols");
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw ContractViolation("obs_prune_layer: ratio outside [0, 1]");
    if (blocksize < 1) throw ContractViolation("obs_prune_layer: blocksize must be >= 1");

    const std::size_t rows = w.rows(), cols = w.cols();
    PruneResult out;
    out.mask = Matrix(rows, cols, 1.0);
    out.weight = w;

    const long long target = std::llround(ratio * static_cast<double>(rows * cols));
    out.realized_ratio = static_cast<double>(target) / static_cast<double>(rows * cols);
    if (target == 0) return out;

    // H^-1 is computed once per layer; scores use its diagonal directly, so a
    // single removal is scored by its exact compensated reconstruction error.
    const Matrix hinv = spd_inverse(hess.h, damping);
    // Upper factor U with H^-1 = U^T U. Trailing principal submatrices of U
    // carry the conditional inverses over the not-yet-processed columns, which
    // is what the compensation sweep needs once earlier columns are frozen:
    // err = w_q / U(q,q), update row U(q, q+1:).
    const Matrix u = transpose(cholesky_lower(hinv));

    Matrix& wt = out.weight;
    std::vector<std::tuple<double, std::size_t, std::size_t>> entries;
    long long assigned = 0;

    for (std::size_t c0 = 0; c0 < cols; c0 += blocksize) {
        const std::size_t c1 = std::min(cols, c0 + static_cast<std::size_t>(blocksize));
        const long long cum_quota = std::llround(ratio * static_cast<double>(rows * c1));
        long long take = cum_quota - assigned;
        const long long capacity = static_cast<long long>(rows * (c1 - c0));
        take = std::max(0LL, std::min(take, capacity));

        if (take > 0) {
            entries.clear();
            entries.reserve(rows * (c1 - c0));
            for (std::size_t j = c0; j < c1; ++j) {
                const double djj = hinv(j, j);
                for (std::size_t r = 0; r < rows; ++r)
                    entries.emplace_back(wt(r, j) * wt(r, j) / djj, r, j);
            }
            std::sort(entries.begin(), entries.end());
            for (long long e = 0; e < take; ++e)
                out.mask(std::get<1>(entries[e]), std::get<2>(entries[e])) = 0.0;
        }

        // compensation sweep: every zeroed column q pushes its error onto the
        // unprocessed columns j > q
        for (std::size_t q = c0; q < c1; ++q) {
            const double uqq = u(q, q);
            for (std::size_t r = 0; r < rows; ++r) {
                if (out.mask(r, q) != 0.0) continue;
                const double err = wt(r, q) / uqq;
                wt(r, q) = 0.0;
                for (std::size_t j = q + 1; j < cols; ++j) wt(r, j) -= err * u(q, j);
            }
        }
        assigned += take;
    }

    if (assigned != target)
        throw ContractViolation("obs_prune_layer: block quota carry failed to hit the target");
    require_finite(out.weight, "obs_prune_layer");
    return out;
}

std::size_t MaskSet::zero_count() const {
    std::size_t zeros = 0;
    for (const auto& block : masks)
        for (const auto& m : block)
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m.data()[i] == 0.0) ++zeros;
    return zeros;
}

std::size_t MaskSet::total_count() const {
    std::size_t total = 0;
    for (const auto& block : masks)
        for (const auto& m : block) total += m.size();
    return total;
}

PolicyApplication apply_policy(const ToyVlm& model, const Policy& policy,
                               const std::vector<Sample>& calib, double damping,
                               int blocksize) {
    if (policy.size() != model.config.n_blocks)
        throw ContractViolation("apply_policy: policy length != n_blocks");
    if (calib.empty()) throw ContractViolation("apply_policy: empty calibration batch");
    for (const auto& s : calib) validate_sample(s, model.config);

    PolicyApplication out;
    out.model = model;
    out.masks.masks.resize(model.config.n_blocks);

    // streaming activations: after block b is pruned, the batch is advanced
    // through the pruned block, so block b+1 calibrates on pruned activations
    std::vector<Matrix> xs(calib.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(calib.size()); ++i)
        xs[i] = embed_sequence(model, calib[i].vision_feature, calib[i].tokens);

    for (int b = 0; b < model.config.n_blocks; ++b) {
        auto& block = out.model.blocks[b];

        // capture the inputs of all six prunable matrices with the block's
        // current dense weights (shared read-only activations)
        std::vector<BlockCache> caches(calib.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(calib.size()); ++i)
            apply_block(block, xs[i], &caches[i]);

        LayerHessian h_qkv, h_o, h_up, h_down;
        for (const auto& cache : caches) {
            h_qkv.accumulate(cache.z1);
            h_o.accumulate(cache.mix);
            h_up.accumulate(cache.z2);
            h_down.accumulate(cache.g);
        }

        const double ratio = policy.ratio(b);
        auto prune_one = [&](MatrixRole role, const LayerHessian& hess) {
            try {
                PruneResult res = obs_prune_layer(block.matrix(role), hess, ratio, blocksize, damping);
                out.masks.masks[b][static_cast<int>(role)] = std::move(res.mask);
                block.matrix(role) = std::move(res.weight);
            } catch (const SingularHessianError& e) {
                throw SingularHessianError("block " + std::to_string(b) + " " + role_name(role) +
                                           ": " + e.what());
            } catch (const ContractViolation& e) {
                throw ContractViolation("block " + std::to_string(b) + " " + role_name(role) +
                                        ": " + e.what());
            }
        };
        prune_one(MatrixRole::Wq, h_qkv);
        prune_one(MatrixRole::Wk, h_qkv);
        prune_one(MatrixRole::Wv, h_qkv);
        prune_one(MatrixRole::Wo, h_o);
        prune_one(MatrixRole::Wup, h_up);
        prune_one(MatrixRole::Wdown, h_down);

        // advance the batch through the pruned block
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(calib.size()); ++i)
            xs[i] = apply_block(block, xs[i], nullptr);
    }

    out.realized_sparsity = static_cast<double>(out.masks.zero_count()) /
                            static_cast<double>(out.masks.total_count());
    return out;
}

ToyVlm apply_masks(const ToyVlm& model, const MaskSet& masks) {
    if (masks.masks.size() != model.blocks.size())
        throw ContractViolation("apply_masks: mask set does not match block count");
    ToyVlm out = model;
    for (std::size_t b = 0; b < out.blocks.size(); ++b) {
        for (int r = 0; r < kRolesPerBlock; ++r) {
            Matrix& w = out.blocks[b].matrix(static_cast<MatrixRole>(r));
            const Matrix& m = masks.masks[b][r];
            if (!m.same_shape(w))
                throw ContractViolation("apply_masks: mask shape mismatch at block " +
                                        std::to_string(b));
            for (std::size_t i = 0; i < w.size(); ++i)
                if (m.data()[i] == 0.0) w.data()[i] = 0.0;
        }
    }
    return out;
}

void export_masks(const std::string& path, const MaskSet& masks) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("export_masks: cannot open " + path);
    for (std::size_t b = 0; b < masks.masks.size(); ++b) {
        for (int r = 0; r < kRolesPerBlock; ++r) {
            const Matrix& m = masks.masks[b][r];
            os << "block=" << b << " role=" << role_name(static_cast<MatrixRole>(r))
               << " rows=" << m.rows() << " cols=" << m.cols() << '\n';
            for (std::size_t i = 0; i < m.rows(); ++i) {
                for (std::size_t j = 0; j < m.cols(); ++j)
                    os << (m(i, j) == 0.0 ? '0' : '1');
                os << '\n';
            }
        }
    }
    if (!os) throw ContractViolation("export_masks: write failed for " + path);
}

} // namespace evoprune
