#pragma once

#include <vector>

#include "evoprune/obs.hpp"
#include "evoprune/policy.hpp"

namespace evoprune {

struct ImportanceWeights {
    std::vector<double> weights;  // all > 0, sum == 1 within 1e-12
    int neighborhood_size = 5;
};

// softmax(-d) with the max exponent subtracted; adding a constant to every
// distance leaves the weights unchanged.
std::vector<double> importance_from_distances(const std::vector<double>& distances);

// For each candidate m, d_m sums the squared Euclidean ratio-space distances
// to its min(neighborhood_size, M-1) nearest other candidates (ties broken by
// candidate index); weights are softmax(-d). Denser candidates get larger
// weights.
ImportanceWeights importance_weights(const std::vector<Policy>& candidates,
                                     int neighborhood_size);

struct EvolutionCandidate {
    Policy policy;
    MaskSet masks;
};

// `steps` full-batch gradient-descent updates of the projector on the
// importance-weighted proxy loss. Candidate m contributes the loss of the
// model with its masks applied (masked weights held at zero); every other
// parameter is frozen. Per-candidate gradients may run concurrently; the
// weighted reduction and the update are serialized in candidate order. Only
// the projector differs between input and output. When `objective_trace` is
// non-null it receives the weighted objective before each step and after the
// last one (steps + 1 values).
ToyVlm evolve_projector(const ToyVlm& model, const std::vector<EvolutionCandidate>& candidates,
                        const ImportanceWeights& weights, const std::vector<Sample>& proxy,
                        double lr, int steps, std::vector<double>* objective_trace = nullptr);

} // namespace evoprune
