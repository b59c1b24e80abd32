#pragma once

#include <string>
#include <vector>

#include "evoprune/matrix.hpp"
#include "evoprune/rng.hpp"

namespace evoprune {

inline constexpr double kGridStep = 0.05;
inline constexpr int kGridHalfSpan = 2;  // grid = p0 + {-2..2} * 0.05

// Per-block pruning ratios on the 5-point grid around p0, stored as integer
// grid offsets so the mean-sparsity constraint is checked in exact integer
// arithmetic: |mean - p0| <= 0.01  <=>  5 * |sum(steps)| <= n_blocks.
class Policy {
public:
    Policy() = default;
    Policy(double p0, std::vector<int> steps);

    static Policy center(double p0, int n_blocks);

    // Quantizes ratios back onto the grid; each must match a grid point
    // exactly (within 1e-9), otherwise a ContractViolation is thrown.
    static Policy from_ratios(double p0, const std::vector<double>& ratios);

    double p0() const { return p0_; }
    int size() const { return static_cast<int>(steps_.size()); }
    const std::vector<int>& steps() const { return steps_; }
    double ratio(int i) const { return p0_ + kGridStep * steps_[i]; }
    std::vector<double> ratios() const;
    double mean_ratio() const;
    int step_sum() const;

    bool feasible() const;
    void require_feasible(const std::string& context) const;

    // comma-joined ratios, full double precision
    std::string to_string() const;

    bool operator==(const Policy&) const = default;

private:
    double p0_ = 0.0;
    std::vector<int> steps_;
};

// Uniform over the grid per block, then repaired onto the constraint slab.
// Requires 0.1 <= p0 <= 0.9 so the whole grid stays inside [0, 1].
Policy sample_policy(double p0, int n_blocks, Rng& rng);

// While the mean is out of bounds, moves one uniformly chosen offending gene
// one grid step toward p0. Each move shifts the mean by 0.05 / n_blocks
// toward p0, so this terminates; feasible inputs are returned unchanged.
Policy repair(Policy policy, Rng& rng);

// Each gene shifts +-1 grid step with probability `rate`, clamped to the grid
// ends; repaired afterwards.
Policy mutate(const Policy& policy, double rate, Rng& rng);

// Uniform per-gene pick from a or b; repaired afterwards.
Policy crossover(const Policy& a, const Policy& b, Rng& rng);

struct Population {
    std::vector<Policy> members;
    long generation = 0;
};

std::string serialize_population(const Population& pop);
Population deserialize_population(const std::string& text);

} // namespace evoprune
