#include "evoprune/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "evoprune/model.hpp"
#include "evoprune/obs.hpp"
#include "evoprune/reference.hpp"
#include "evoprune/rng.hpp"
#include "evoprune/space.hpp"
#include "evoprune/textio.hpp"

namespace evoprune::selfcheck {

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
    return m;
}

// Gaussian elimination with partial pivoting; deliberately not the Cholesky
// path used by spd_inverse.
std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
        if (a(pivot, col) == 0.0) throw ContractViolation("solve_dense: singular system");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a(i, c) * x[c];
        x[i] = acc / a(i, i);
    }
    return x;
}

// Reconstruction error of zeroing w(r, q) with optimal least-squares
// compensation of the surviving entries in row r.
double removal_error(const Matrix& w, const Matrix& x, const Matrix& h, std::size_t r,
                     std::size_t q) {
    const std::size_t n = w.cols();
    Matrix h_ss(n - 1, n - 1);
    std::vector<double> h_sq(n - 1);
    std::size_t ii = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == q) continue;
        std::size_t jj = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == q) continue;
            h_ss(ii, jj++) = h(i, j);
        }
        h_sq[ii++] = h(i, q);
    }
    const std::vector<double> y = solve_dense(h_ss, h_sq);

    std::vector<double> v(n, 0.0);
    ii = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == q) continue;
        v[i] = w(r, i) + w(r, q) * y[ii++];
    }
    double err = 0.0;
    for (std::size_t t = 0; t < x.cols(); ++t) {
        double diff = 0.0;
        for (std::size_t j = 0; j < n; ++j) diff += (v[j] - w(r, j)) * x(j, t);
        err += diff * diff;
    }
    return err;
}

} // namespace

ObsOptimalityOutcome obs_single_removal(int trials, std::uint64_t seed, int rows, int cols,
                                        int tokens) {
    ObsOptimalityOutcome out;
    out.trials = trials;
    const auto t0 = std::chrono::steady_clock::now();
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, "obs-oracle", static_cast<std::uint64_t>(trial)));
        const Matrix w = gaussian_matrix(rows, cols, rng);
        const Matrix x = gaussian_matrix(cols, tokens, rng);

        const double ratio = 1.0 / static_cast<double>(rows * cols);
        const PruneResult pruned =
            obs_prune_layer(w, accumulate_hessian(x), ratio, rows * cols, 0.0);
        std::size_t got_r = 0, got_c = 0;
        bool found = false;
        for (std::size_t r = 0; r < pruned.mask.rows() && !found; ++r)
            for (std::size_t c = 0; c < pruned.mask.cols() && !found; ++c)
                if (pruned.mask(r, c) == 0.0) {
                    got_r = r;
                    got_c = c;
                    found = true;
                }

        const Matrix h = ref::sym_outer(x);
        double best_err = std::numeric_limits<double>::infinity();
        std::size_t best_r = 0, best_c = 0;
        for (std::size_t r = 0; r < w.rows(); ++r)
            for (std::size_t q = 0; q < w.cols(); ++q) {
                const double err = removal_error(w, x, h, r, q);
                if (err < best_err) {
                    best_err = err;
                    best_r = r;
                    best_c = q;
                }
            }
        if (found && got_r == best_r && got_c == best_c) ++out.agreements;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

SparsityOutcome exact_sparsity(int trials, std::uint64_t seed) {
    SparsityOutcome out;
    out.trials = trials;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, "sparsity-oracle", static_cast<std::uint64_t>(trial)));
        const int rows = 2 + static_cast<int>(rng.below(23));
        const int cols = 2 + static_cast<int>(rng.below(23));
        const double p0 = 0.3 + 0.1 * static_cast<double>(rng.below(3));
        const int offset = static_cast<int>(rng.below(5)) - 2;
        const double ratio = p0 + 0.05 * offset;
        const int blocksize = 1 + static_cast<int>(rng.below(cols + 4));

        const Matrix x = gaussian_matrix(cols, cols + 8, rng);
        const Matrix w = gaussian_matrix(rows, cols, rng);
        const PruneResult pruned = obs_prune_layer(w, accumulate_hessian(x), ratio, blocksize, 0.01);

        long long zeros = 0;
        for (std::size_t i = 0; i < pruned.mask.size(); ++i)
            if (pruned.mask.data()[i] == 0.0) ++zeros;
        const long long want = std::llround(ratio * static_cast<double>(rows * cols));
        if (zeros != want) ++out.mismatches;

        // masked entries of the compensated weight must be exactly zero
        for (std::size_t i = 0; i < pruned.mask.size(); ++i)
            if (pruned.mask.data()[i] == 0.0 && pruned.weight.data()[i] != 0.0) ++out.mismatches;
    }
    return out;
}

GradCheckOutcome projector_gradcheck(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.d_vision = 4;
    cfg.d_model = 4;
    cfg.n_blocks = 2;
    cfg.d_ff = 8;
    cfg.vocab_size = 16;
    cfg.seq_len = 8;
    ToyVlm model = init_model(cfg, derive_seed(seed, "gradcheck-model", 0));

    std::vector<Sample> batch;
    for (int i = 0; i < 4; ++i) {
        Rng rng(derive_seed(seed, "gradcheck-data", static_cast<std::uint64_t>(i)));
        std::vector<double> vision(cfg.d_vision);
        for (auto& v : vision) v = rng.gaussian();
        std::vector<int> tokens(cfg.seq_len);
        for (auto& t : tokens) t = static_cast<int>(rng.below(cfg.vocab_size));
        batch.push_back(make_sample(std::move(vision), std::move(tokens)));
    }

    const Matrix grad = grad_projector(model, batch);
    constexpr double h = 1e-4;
    GradCheckOutcome out;
    out.min_abs_grad = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.d_model; ++i) {
        for (int j = 0; j < cfg.d_vision; ++j) {
            const double keep = model.projector(i, j);
            model.projector(i, j) = keep + h;
            const double up = loss(model, batch);
            model.projector(i, j) = keep - h;
            const double down = loss(model, batch);
            model.projector(i, j) = keep;
            const double fd = (up - down) / (2.0 * h);
            const double g = grad(i, j);
            const double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-12});
            out.max_rel_err = std::max(out.max_rel_err, rel);
            out.min_abs_grad = std::min(out.min_abs_grad, std::fabs(g));
        }
    }
    return out;
}

ImportanceOutcome importance_checks() {
    ImportanceOutcome out;

    // hand case: single-block policies at ratios p0, p0+0.05, p0+0.10 with
    // neighborhood 2; d = (0.0125, 0.005, 0.0125)
    std::vector<Policy> cands = {Policy(0.5, {0}), Policy(0.5, {1}), Policy(0.5, {2})};
    out.actual = importance_weights(cands, 2).weights;
    std::vector<double> d(3, 0.0);
    for (int i = 0; i < 3; ++i) {
        std::vector<double> d2;
        for (int j = 0; j < 3; ++j) {
            if (j == i) continue;
            const double e = cands[i].ratio(0) - cands[j].ratio(0);
            d2.push_back(e * e);
        }
        std::sort(d2.begin(), d2.end());
        d[i] = d2[0] + d2[1];
    }
    double denom = 0.0;
    std::vector<double> expected(3);
    for (int i = 0; i < 3; ++i) denom += std::exp(-d[i]);
    for (int i = 0; i < 3; ++i) expected[i] = std::exp(-d[i]) / denom;
    out.expected = expected;
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        out.max_abs_err = std::max(out.max_abs_err, std::fabs(out.actual[i] - expected[i]));
        sum += out.actual[i];
    }
    out.sum_err = std::fabs(sum - 1.0);

    out.single_ok = importance_weights({Policy(0.5, {0, 0})}, 5).weights == std::vector<double>{1.0};

    const auto uni = importance_weights(std::vector<Policy>(4, Policy(0.5, {1, -1})), 5).weights;
    out.uniform_ok = true;
    for (double w : uni)
        if (std::fabs(w - 0.25) > 1e-15) out.uniform_ok = false;

    // dyadic distances and shift keep every sum exact, so the softmax must be
    // bit-identical after the shift
    const std::vector<double> base = {0.25, 0.5, 1.0, 0.75};
    std::vector<double> shifted = base;
    for (auto& v : shifted) v += 1.0;
    out.shift_exact = importance_from_distances(base) == importance_from_distances(shifted);
    return out;
}

double spd_inverse_residual(int n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "spd-oracle", 0));
    const Matrix m = gaussian_matrix(n, 2 * n, rng);
    Matrix h = ref::sym_outer(m);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] /= static_cast<double>(2 * n);
    for (int i = 0; i < n; ++i) h(i, i) += 0.1;

    const Matrix inv = spd_inverse(h, 0.0);
    const Matrix prod = ref::gemm(h, inv);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double e = prod(i, j) - (i == j ? 1.0 : 0.0);
            acc += e * e;
        }
    return std::sqrt(acc);
}

std::vector<CheckResult> run_all() {
    std::vector<CheckResult> out;

    {
        const auto r = obs_single_removal(20, 20250101);
        out.push_back({"obs-single-removal-optimality", r.agreements == r.trials,
                       std::to_string(r.agreements) + "/" + std::to_string(r.trials) +
                           " agreements in " + fmt_g17(r.seconds) + "s"});
    }
    {
        const auto r = exact_sparsity(100, 20250102);
        out.push_back({"exact-sparsity", r.mismatches == 0,
                       std::to_string(r.trials - r.mismatches) + "/" + std::to_string(r.trials) +
                           " exact zero counts"});
    }
    {
        const auto r = projector_gradcheck(20250103);
        out.push_back({"projector-gradient-vs-finite-differences", r.max_rel_err <= 1e-4,
                       "max rel err " + fmt_g17(r.max_rel_err)});
    }
    {
        const auto r = importance_checks();
        const bool pass = r.max_abs_err <= 1e-6 && r.sum_err <= 1e-12 && r.single_ok &&
                          r.uniform_ok && r.shift_exact;
        out.push_back({"importance-weights", pass,
                       "hand-case err " + fmt_g17(r.max_abs_err) + ", sum err " +
                           fmt_g17(r.sum_err) + ", shift " + (r.shift_exact ? "exact" : "BROKEN")});
    }
    {
        const double r = spd_inverse_residual(24, 20250104);
        out.push_back({"spd-inverse-residual", r < 1e-8, "residual " + fmt_g17(r)});
    }
    return out;
}

} // namespace evoprune::selfcheck
