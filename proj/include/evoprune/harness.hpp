#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evoprune/calib.hpp"
#include "evoprune/fitness.hpp"
#include "evoprune/search.hpp"
#include "evoprune/space.hpp"

namespace evoprune {

struct ExperimentConfig {
    ModelConfig model;

    double p0 = 0.5;
    int n_pop = 16;
    int k_elite = 4;
    int rounds = 10;
    // calibrated so the norm term participates in candidate ranking: the
    // between-candidate gen-proxy spread is ~1e-3 nats against a proxy-loss
    // spread of ~0.27, so values below ~1 are numerically inert
    double eta = 5.0;
    int n_proxy = 64;
    int n_holdout = 64;
    int proxy_len = 32;
    // 4 steps of 2e-2 move the projector as far per round as 8 steps of 1e-2
    // at half the gradient cost; the guarded update absorbs overshoot
    double lr = 2e-2;
    int evo_steps = 4;
    double damping = 0.01;
    int blocksize = 16;
    double mutation_rate = 0.2;
    int neighborhood = 5;
    std::uint64_t master_seed = 0;
    // draw holdout data from a separately seeded teacher (distribution shift)
    bool holdout_shift = false;

    void validate() const;

    // canonical key=value text; doubles as the config-file format
    std::string to_text() const;
    static ExperimentConfig from_text(const std::string& text);
    void to_file(const std::string& path) const;
    static ExperimentConfig from_file(const std::string& path);
};

enum class Arm { full, uniform, no_gen, no_evo, evo_no_ub };
const char* arm_name(Arm arm);
Arm arm_from_name(const std::string& name);

// hex digest over (config text, arm); guards resume against config drift
std::string config_fingerprint(const ExperimentConfig& config, Arm arm);

struct PhaseClock {
    double data_s = 0.0;
    double eval_s = 0.0;
    double evolve_s = 0.0;
    double final_s = 0.0;
    double total_s = 0.0;
};

struct LoggedRecord {
    int round = 0;
    int member = 0;
    FitnessRecord record;
};

struct RunOptions {
    std::string out_dir;  // empty = in-memory run, no files
    bool overwrite = false;
    bool resume = false;
    int stop_after_rounds = -1;  // stop early without finalizing (resume later)
    bool dump_masks = false;
};

struct RunResult {
    Arm arm = Arm::full;
    ExperimentConfig config;
    bool completed = false;
    Policy best_policy;
    FitnessRecord best_record;
    int best_round = -1;
    int best_member = -1;
    std::vector<LoggedRecord> records;
    double holdout_loss = 0.0;
    double uniform_baseline_holdout = 0.0;
    double realized_sparsity = 0.0;
    PhaseClock clock;
};

// The full loop: sample the initial population; each round prune and score
// every candidate against the current model, keep the elites, breed the rest,
// compute importance weights over the elites and evolve the projector. The
// best-fitness policy seen is re-pruned against the final projector for the
// holdout evaluation. Runs are bit-reproducible per (config, arm).
RunResult run_search(const ExperimentConfig& config, const RunOptions& options = {});

// Ablation arms: uniform ratios / eta forced to 0 / no projector evolution /
// evolution with uniform importance weights.
RunResult run_uniform(const ExperimentConfig& config, const RunOptions& options = {});
RunResult run_auto_no_gen(const ExperimentConfig& config, const RunOptions& options = {});
RunResult run_no_evo(const ExperimentConfig& config, const RunOptions& options = {});
RunResult run_evo_no_ub(const ExperimentConfig& config, const RunOptions& options = {});
RunResult run_arm(Arm arm, const ExperimentConfig& config, const RunOptions& options = {});

// Cartesian (n_proxy, proxy_len) sweep; datasets are prefix-stable across
// cells by construction, so cells share their common sample prefixes.
std::vector<RunResult> run_ablation_grid(const ExperimentConfig& config,
                                         const std::vector<int>& n_values,
                                         const std::vector<int>& s_values,
                                         const std::string& out_dir = "");

// Checks a results log: every policy satisfies its constraints and the
// per-round best fitness is non-increasing. Returns false with a diagnostic
// on the first violation.
bool verify_results_log(const std::string& path, std::string& message);

// Aggregates run summary files (argument order preserved) into the report
// CSV: arm,p0,seed,holdout_loss,sparsity,wall_clock.
void write_report_csv(std::ostream& os, const std::vector<std::string>& summary_paths);

// plain text matrix io used for projector snapshots
void write_text_matrix(const std::string& path, const Matrix& m);
Matrix read_text_matrix(const std::string& path);

} // namespace evoprune
