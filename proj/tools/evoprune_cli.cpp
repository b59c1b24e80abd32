#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evoprune/harness.hpp"
#include "evoprune/selfcheck.hpp"
#include "evoprune/textio.hpp"

using namespace evoprune;

namespace {

void add_config_flags(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--config", [&cfg](const std::vector<std::string>& paths) {
           cfg = ExperimentConfig::from_file(paths.back());
           return true;
       },
       "key=value config file; explicit flags override it");
    cmd->add_option("--p0", cfg.p0, "average pruning ratio");
    cmd->add_option("--n-pop", cfg.n_pop, "policy candidates per round");
    cmd->add_option("--k-elite", cfg.k_elite, "elites kept per round");
    cmd->add_option("--rounds", cfg.rounds, "search/evolution rounds");
    cmd->add_option("--eta", cfg.eta, "generalization-proxy weight");
    cmd->add_option("--n-proxy", cfg.n_proxy, "proxy samples");
    cmd->add_option("--n-holdout", cfg.n_holdout, "holdout samples");
    cmd->add_option("--proxy-len", cfg.proxy_len, "tokens per proxy sample");
    cmd->add_option("--lr", cfg.lr, "projector learning rate");
    cmd->add_option("--evo-steps", cfg.evo_steps, "projector steps per round");
    cmd->add_option("--damping", cfg.damping, "hessian damping fraction");
    cmd->add_option("--blocksize", cfg.blocksize, "obs column block size");
    cmd->add_option("--mutation-rate", cfg.mutation_rate, "per-gene mutation rate");
    cmd->add_option("--neighborhood", cfg.neighborhood, "importance-weight neighbors");
    cmd->add_flag("--holdout-shift", cfg.holdout_shift, "holdout from a shifted teacher");
    cmd->add_option("--d-vision", cfg.model.d_vision, "vision feature width");
    cmd->add_option("--d-model", cfg.model.d_model, "residual width");
    cmd->add_option("--n-blocks", cfg.model.n_blocks, "transformer blocks");
    cmd->add_option("--d-ff", cfg.model.d_ff, "mlp hidden width");
    cmd->add_option("--vocab-size", cfg.model.vocab_size, "vocabulary size");
    cmd->add_option("--seq-len", cfg.model.seq_len, "model sequence length");
    cmd->add_option("--n-prefix", cfg.model.n_prefix, "prefix vision tokens");
}

void print_run(const RunResult& res) {
    std::printf("arm=%s seed=%llu best_policy=[%s] best_fitness=%s\n", arm_name(res.arm),
                static_cast<unsigned long long>(res.config.master_seed),
                res.best_policy.to_string().c_str(), fmt_g17(res.best_record.fitness).c_str());
    std::printf("holdout_loss=%s uniform_baseline=%s sparsity=%s wall=%.2fs\n",
                fmt_g17(res.holdout_loss).c_str(),
                fmt_g17(res.uniform_baseline_holdout).c_str(),
                fmt_g17(res.realized_sparsity).c_str(), res.clock.total_s);
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        out.push_back(std::stoi(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale auto-pruning lab: OBS pruning, constrained policy "
                 "evolution, and projector search-space evolution"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "export a teacher-generated dataset");
    ExperimentConfig gen_cfg;
    std::uint64_t gen_seed = 0;
    int gen_n = 64;
    int gen_len = 0;
    std::string gen_split = "proxy";
    std::string gen_out = "dataset.txt";
    add_config_flags(gen, gen_cfg);
    gen->add_option("--seed", gen_seed, "master seed")->required();
    gen->add_option("--n", gen_n, "sample count");
    gen->add_option("--len", gen_len, "tokens per sample (default: proxy_len)");
    gen->add_option("--split", gen_split, "proxy or holdout")
        ->check(CLI::IsMember({"proxy", "holdout"}));
    gen->add_option("--out", gen_out, "output file");

    // search and single-arm runs
    ExperimentConfig run_cfg;
    std::uint64_t run_seed = 0;
    std::string out_dir;
    std::string arm_flag = "full";
    bool overwrite = false, resume = false, dump_masks = false;
    int stop_after = -1;

    auto* search = app.add_subcommand("search", "run the full search-space evolution loop");
    add_config_flags(search, run_cfg);
    search->add_option("--seed", run_seed, "master seed")->required();
    search->add_option("--out-dir", out_dir, "output directory (results.log, checkpoints)");
    search->add_option("--arm", arm_flag, "full|no_gen|no_evo|evo_no_ub")
        ->check(CLI::IsMember({"full", "no_gen", "no_evo", "evo_no_ub"}));
    search->add_flag("--overwrite", overwrite, "replace an existing results log");
    search->add_flag("--resume", resume, "resume an interrupted run");
    search->add_flag("--dump-masks", dump_masks, "export final per-layer masks");
    search->add_option("--stop-after", stop_after, "stop after N rounds without finalizing");

    auto* uniform = app.add_subcommand("uniform", "uniform-ratio baseline run");
    add_config_flags(uniform, run_cfg);
    uniform->add_option("--seed", run_seed, "master seed");
    uniform->add_option("--out-dir", out_dir, "output directory");
    uniform->add_flag("--overwrite", overwrite, "replace an existing results log");
    uniform->add_flag("--dump-masks", dump_masks, "export final per-layer masks");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "arm sweeps and (n, s) grids");
    ExperimentConfig ab_cfg;
    std::string ab_arms = "full,uniform,no_gen,no_evo";
    std::string ab_seeds = "1";
    std::string ab_grid_n, ab_grid_s;
    std::string ab_out_dir = "ablation";
    add_config_flags(ablate, ab_cfg);
    ablate->add_option("--arms", ab_arms, "comma-separated arm list");
    ablate->add_option("--seeds", ab_seeds, "comma-separated master seeds");
    ablate->add_option("--grid-n", ab_grid_n, "proxy-count grid (switches to grid mode)");
    ablate->add_option("--grid-s", ab_grid_s, "proxy-length grid (grid mode)");
    ablate->add_option("--out-dir", ab_out_dir, "output directory");

    // report
    auto* report = app.add_subcommand("report", "aggregate run summaries into csv");
    std::vector<std::string> report_inputs;
    std::string report_out;
    report->add_option("summaries", report_inputs, "summary.txt files")->required();
    report->add_option("--out", report_out, "csv output path (default stdout)");

    // verify
    auto* verify = app.add_subcommand("verify", "oracle suites / results-log checks");
    std::string verify_log;
    verify->add_option("--log", verify_log, "check a results log instead of the oracle suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_cfg.validate();
            const ToyVlm teacher = make_teacher(gen_cfg.model, gen_seed);
            DatasetSpec spec;
            spec.n_samples = gen_n;
            spec.seq_len = gen_len > 0 ? gen_len : gen_cfg.proxy_len;
            spec.seed = gen_seed;
            spec.split =
                gen_split == "proxy" ? DatasetSpec::Split::proxy : DatasetSpec::Split::holdout;
            save_dataset(gen_out, sample_dataset(teacher, spec));
            std::printf("wrote %d %s samples to %s\n", gen_n, gen_split.c_str(), gen_out.c_str());
            return 0;
        }

        if (search->parsed() || uniform->parsed()) {
            run_cfg.master_seed = run_seed;
            run_cfg.validate();
            RunOptions opt;
            opt.out_dir = out_dir;
            opt.overwrite = overwrite;
            opt.resume = resume;
            opt.stop_after_rounds = stop_after;
            opt.dump_masks = dump_masks;
            const Arm arm = uniform->parsed() ? Arm::uniform : arm_from_name(arm_flag);
            const RunResult res = run_arm(arm, run_cfg, opt);
            if (!res.completed) {
                std::printf("stopped after %d round(s); resume with --resume\n", stop_after);
                return 0;
            }
            print_run(res);
            return 0;
        }

        if (ablate->parsed()) {
            ab_cfg.validate();
            if (!ab_grid_n.empty() || !ab_grid_s.empty()) {
                const std::vector<int> ns =
                    ab_grid_n.empty() ? std::vector<int>{ab_cfg.n_proxy} : parse_int_list(ab_grid_n);
                const std::vector<int> ss =
                    ab_grid_s.empty() ? std::vector<int>{ab_cfg.proxy_len} : parse_int_list(ab_grid_s);
                const auto rows = run_ablation_grid(ab_cfg, ns, ss, ab_out_dir);
                const std::string csv_path = ab_out_dir + "/grid.csv";
                std::ofstream csv(csv_path, std::ios::trunc);
                csv << "arm,p0,seed,n,s,holdout_loss,sparsity,wall_clock\n";
                for (const auto& r : rows)
                    csv << arm_name(r.arm) << ',' << fmt_g17(r.config.p0) << ','
                        << r.config.master_seed << ',' << r.config.n_proxy << ','
                        << r.config.proxy_len << ',' << fmt_g17(r.holdout_loss) << ','
                        << fmt_g17(r.realized_sparsity) << ',' << fmt_g17(r.clock.total_s) << '\n';
                std::printf("wrote %zu grid rows to %s\n", rows.size(), csv_path.c_str());
                return 0;
            }
            std::vector<std::string> summaries;
            for (const int seed : parse_int_list(ab_seeds)) {
                std::size_t pos = 0;
                while (pos < ab_arms.size()) {
                    std::size_t next = ab_arms.find(',', pos);
                    if (next == std::string::npos) next = ab_arms.size();
                    const std::string name = ab_arms.substr(pos, next - pos);
                    pos = next + 1;
                    const Arm arm = arm_from_name(name);
                    ExperimentConfig cfg = ab_cfg;
                    cfg.master_seed = static_cast<std::uint64_t>(seed);
                    RunOptions opt;
                    opt.out_dir = ab_out_dir + "/" + name + "_seed" + std::to_string(seed);
                    opt.overwrite = true;
                    const RunResult res = run_arm(arm, cfg, opt);
                    print_run(res);
                    summaries.push_back(opt.out_dir + "/summary.txt");
                }
            }
            const std::string csv_path = ab_out_dir + "/report.csv";
            std::ofstream csv(csv_path, std::ios::trunc);
            write_report_csv(csv, summaries);
            std::printf("wrote %zu runs to %s\n", summaries.size(), csv_path.c_str());
            return 0;
        }

        if (report->parsed()) {
            if (report_out.empty()) {
                write_report_csv(std::cout, report_inputs);
            } else {
                std::ofstream os(report_out, std::ios::trunc);
                if (!os) throw ContractViolation("report: cannot open " + report_out);
                write_report_csv(os, report_inputs);
                std::printf("wrote %s\n", report_out.c_str());
            }
            return 0;
        }

        if (verify->parsed()) {
            if (!verify_log.empty()) {
                std::string message;
                const bool ok = verify_results_log(verify_log, message);
                std::printf("[%s] results-log: %s\n", ok ? "PASS" : "FAIL", message.c_str());
                return ok ? 0 : 1;
            }
            bool all = true;
            for (const auto& check : selfcheck::run_all()) {
                std::printf("[%s] %s: %s\n", check.pass ? "PASS" : "FAIL", check.name.c_str(),
                            check.detail.c_str());
                all = all && check.pass;
            }
            return all ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
