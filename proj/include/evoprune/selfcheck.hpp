#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evoprune::selfcheck {

// Oracle suites behind the `verify` subcommand. Every oracle here is
// independent of the implementation path it checks: the single-removal oracle
// enumerates candidates with its own Gaussian-elimination solver, the
// gradient oracle uses central finite differences of the loss, and the
// importance oracle evaluates the softmax formula directly.

struct ObsOptimalityOutcome {
    int agreements = 0;
    int trials = 0;
    double seconds = 0.0;
};

// Random W (rows x cols) and X (cols x tokens); the pruner removes exactly
// one weight and the oracle enumerates all optimally-compensated single
// removals by reconstruction error, ties broken by lowest (row, col).
ObsOptimalityOutcome obs_single_removal(int trials, std::uint64_t seed, int rows = 6,
                                        int cols = 6, int tokens = 16);

struct SparsityOutcome {
    int mismatches = 0;
    int trials = 0;
};

// Random shapes, grid ratios and block sizes; zeros(mask) must equal
// round(ratio * numel) with zero tolerance.
SparsityOutcome exact_sparsity(int trials, std::uint64_t seed);

struct GradCheckOutcome {
    double max_rel_err = 0.0;
    double min_abs_grad = 0.0;
};

// Central finite differences (h = 1e-4) over every projector entry of a
// 2-block model with a 4x4 projector.
GradCheckOutcome projector_gradcheck(std::uint64_t seed);

struct ImportanceOutcome {
    std::vector<double> actual;
    std::vector<double> expected;
    double max_abs_err = 0.0;
    double sum_err = 0.0;
    bool single_ok = false;
    bool uniform_ok = false;
    bool shift_exact = false;
};

// The 3-candidate hand case, the single/identical-candidate edge cases, and
// exact shift invariance on dyadic distances.
ImportanceOutcome importance_checks();

// || H * spd_inverse(H, 0) - I ||_F for a random well-conditioned SPD H.
double spd_inverse_residual(int n, std::uint64_t seed);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Quick oracle suite; one result per check.
std::vector<CheckResult> run_all();

} // namespace evoprune::selfcheck
