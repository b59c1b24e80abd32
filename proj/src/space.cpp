#include "evoprune/space.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evoprune/parallel.hpp"

namespace evoprune {

std::vector<double> importance_from_distances(const std::vector<double>& distances) {
    if (distances.empty()) throw ContractViolation("importance_from_distances: empty input");
    const double d_min = *std::min_element(distances.begin(), distances.end());
    std::vector<double> w(distances.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        w[i] = std::exp(d_min - distances[i]);
        denom += w[i];
    }
    for (auto& v : w) v /= denom;
    return w;
}

ImportanceWeights importance_weights(const std::vector<Policy>& candidates,
                                     int neighborhood_size) {
    if (candidates.empty()) throw ContractViolation("importance_weights: no candidates");
    if (neighborhood_size < 1)
        throw ContractViolation("importance_weights: neighborhood_size must be >= 1");
    const int m = static_cast<int>(candidates.size());
    const int k = std::min(neighborhood_size, m - 1);

    std::vector<double> dist(m, 0.0);
    if (k > 0) {
        std::vector<std::vector<double>> ratios(m);
        for (int i = 0; i < m; ++i) ratios[i] = candidates[i].ratios();
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<double, int>> others;
            others.reserve(m - 1);
            for (int j = 0; j < m; ++j) {
                if (j == i) continue;
                if (ratios[j].size() != ratios[i].size())
                    throw ContractViolation("importance_weights: mixed policy lengths");
                double d2 = 0.0;
                for (std::size_t b = 0; b < ratios[i].size(); ++b) {
                    const double e = ratios[i][b] - ratios[j][b];
                    d2 += e * e;
                }
                others.emplace_back(d2, j);
            }
            std::sort(others.begin(), others.end());  // ties broken by candidate index
            double acc = 0.0;
            for (int n = 0; n < k; ++n) acc += others[n].first;
            dist[i] = acc;
        }
    }

    ImportanceWeights out;
    out.neighborhood_size = neighborhood_size;
    out.weights = importance_from_distances(dist);
    return out;
}

ToyVlm evolve_projector(const ToyVlm& model, const std::vector<EvolutionCandidate>& candidates,
                        const ImportanceWeights& weights, const std::vector<Sample>& proxy,
                        double lr, int steps, std::vector<double>* objective_trace) {
    if (candidates.empty()) throw ContractViolation("evolve_projector: no candidates");
    if (weights.weights.size() != candidates.size())
        throw ContractViolation("evolve_projector: weights/candidates size mismatch");
    if (!(lr > 0.0)) throw ContractViolation("evolve_projector: lr must be > 0");
    if (steps < 0) throw ContractViolation("evolve_projector: steps must be >= 0");
    if (proxy.empty()) throw ContractViolation("evolve_projector: empty proxy data");

    ToyVlm out = model;
    if (objective_trace) objective_trace->clear();

    // masked prunable weights are fixed; only the projector moves
    std::vector<ToyVlm> masked(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
        masked[c] = apply_masks(model, candidates[c].masks);

    const std::size_t n_cand = candidates.size();
    std::vector<Matrix> grads(n_cand);
    std::vector<double> losses(n_cand, 0.0);

    for (int step = 0; step <= steps; ++step) {
        const bool last = step == steps;
        if (last && !objective_trace) break;
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_cand); ++c) {
            masked[c].projector = out.projector;
            if (!last) grads[c] = grad_projector(masked[c], proxy);
            if (objective_trace) losses[c] = loss(masked[c], proxy);
        }
        if (objective_trace) {
            double obj = 0.0;
            for (std::size_t c = 0; c < n_cand; ++c) obj += weights.weights[c] * losses[c];
            objective_trace->push_back(obj);
        }
        if (last) break;

        Matrix total(out.projector.rows(), out.projector.cols());
        for (std::size_t c = 0; c < n_cand; ++c) {
            const double wc = weights.weights[c];
            for (std::size_t i = 0; i < total.size(); ++i)
                total.data()[i] += wc * grads[c].data()[i];
        }
        for (std::size_t i = 0; i < total.size(); ++i) {
            if (!std::isfinite(total.data()[i]))
                throw ContractViolation("evolve_projector: non-finite weighted gradient at step " +
                                        std::to_string(step));
            out.projector.data()[i] -= lr * total.data()[i];
        }
    }
    return out;
}

} // namespace evoprune
