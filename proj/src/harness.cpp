#include "evoprune/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "evoprune/textio.hpp"

namespace fs = std::filesystem;

namespace evoprune {

// ---------------------------------------------------------------------------
// config

void ExperimentConfig::validate() const {
    model.validate();
    if (p0 < 0.1 || p0 > 0.9)
        throw ContractViolation("ExperimentConfig: p0 must be in [0.1, 0.9]");
    if (n_pop < 1 || rounds < 1 || n_proxy < 1 || n_holdout < 1 || evo_steps < 0)
        throw ContractViolation("ExperimentConfig: counts must be >= 1");
    if (k_elite < 1 || k_elite > n_pop)
        throw ContractViolation("ExperimentConfig: k_elite must be in [1, n_pop]");
    if (proxy_len < 2 || proxy_len > model.seq_len)
        throw ContractViolation("ExperimentConfig: proxy_len must be in [2, model seq_len]");
    if (eta < 0.0) throw ContractViolation("ExperimentConfig: eta must be >= 0");
    if (!(lr > 0.0)) throw ContractViolation("ExperimentConfig: lr must be > 0");
    if (damping < 0.0) throw ContractViolation("ExperimentConfig: damping must be >= 0");
    if (blocksize < 1) throw ContractViolation("ExperimentConfig: blocksize must be >= 1");
    if (mutation_rate < 0.0 || mutation_rate > 1.0)
        throw ContractViolation("ExperimentConfig: mutation_rate must be in [0, 1]");
    if (neighborhood < 1) throw ContractViolation("ExperimentConfig: neighborhood must be >= 1");
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream os;
    os << "p0=" << fmt_g17(p0) << '\n'
       << "n_pop=" << n_pop << '\n'
       << "k_elite=" << k_elite << '\n'
       << "rounds=" << rounds << '\n'
       << "eta=" << fmt_g17(eta) << '\n'
       << "n_proxy=" << n_proxy << '\n'
       << "n_holdout=" << n_holdout << '\n'
       << "proxy_len=" << proxy_len << '\n'
       << "lr=" << fmt_g17(lr) << '\n'
       << "evo_steps=" << evo_steps << '\n'
       << "damping=" << fmt_g17(damping) << '\n'
       << "blocksize=" << blocksize << '\n'
       << "mutation_rate=" << fmt_g17(mutation_rate) << '\n'
       << "neighborhood=" << neighborhood << '\n'
       << "master_seed=" << master_seed << '\n'
       << "holdout_shift=" << (holdout_shift ? 1 : 0) << '\n'
       << "model.d_vision=" << model.d_vision << '\n'
       << "model.d_model=" << model.d_model << '\n'
       << "model.n_blocks=" << model.n_blocks << '\n'
       << "model.d_ff=" << model.d_ff << '\n'
       << "model.vocab_size=" << model.vocab_size << '\n'
       << "model.seq_len=" << model.seq_len << '\n'
       << "model.n_prefix=" << model.n_prefix << '\n';
    return os.str();
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ContractViolation("config: bad line '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        // tolerate "key = value" spacing
        while (!key.empty() && key.back() == ' ') key.pop_back();
        while (!value.empty() && value.front() == ' ') value.erase(value.begin());

        if (key == "p0") cfg.p0 = std::stod(value);
        else if (key == "n_pop") cfg.n_pop = std::stoi(value);
        else if (key == "k_elite") cfg.k_elite = std::stoi(value);
        else if (key == "rounds") cfg.rounds = std::stoi(value);
        else if (key == "eta") cfg.eta = std::stod(value);
        else if (key == "n_proxy") cfg.n_proxy = std::stoi(value);
        else if (key == "n_holdout") cfg.n_holdout = std::stoi(value);
        else if (key == "proxy_len") cfg.proxy_len = std::stoi(value);
        else if (key == "lr") cfg.lr = std::stod(value);
        else if (key == "evo_steps") cfg.evo_steps = std::stoi(value);
        else if (key == "damping") cfg.damping = std::stod(value);
        else if (key == "blocksize") cfg.blocksize = std::stoi(value);
        else if (key == "mutation_rate") cfg.mutation_rate = std::stod(value);
        else if (key == "neighborhood") cfg.neighborhood = std::stoi(value);
        else if (key == "master_seed") cfg.master_seed = std::stoull(value);
        else if (key == "holdout_shift") cfg.holdout_shift = std::stoi(value) != 0;
        else if (key == "model.d_vision") cfg.model.d_vision = std::stoi(value);
        else if (key == "model.d_model") cfg.model.d_model = std::stoi(value);
        else if (key == "model.n_blocks") cfg.model.n_blocks = std::stoi(value);
        else if (key == "model.d_ff") cfg.model.d_ff = std::stoi(value);
        else if (key == "model.vocab_size") cfg.model.vocab_size = std::stoi(value);
        else if (key == "model.seq_len") cfg.model.seq_len = std::stoi(value);
        else if (key == "model.n_prefix") cfg.model.n_prefix = std::stoi(value);
        else throw ContractViolation("config: unknown key '" + key + "'");
    }
    return cfg;
}

void ExperimentConfig::to_file(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("config: cannot open " + path);
    os << to_text();
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractViolation("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
}

const char* arm_name(Arm arm) {
    switch (arm) {
        case Arm::full: return "full";
        case Arm::uniform: return "uniform";
        case Arm::no_gen: return "no_gen";
        case Arm::no_evo: return "no_evo";
        case Arm::evo_no_ub: return "evo_no_ub";
    }
    return "?";
}

Arm arm_from_name(const std::string& name) {
    for (Arm a : {Arm::full, Arm::uniform, Arm::no_gen, Arm::no_evo, Arm::evo_no_ub})
        if (name == arm_name(a)) return a;
    throw ContractViolation("unknown arm '" + name + "'");
}

std::string config_fingerprint(const ExperimentConfig& config, Arm arm) {
    const std::string text = config.to_text() + "arm=" + arm_name(arm) + "\n";
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// small io helpers

void write_text_matrix(const std::string& path, const Matrix& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("write_text_matrix: cannot open " + path);
    os << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) os << ' ';
            os << fmt_g17(m(i, j));
        }
        os << '\n';
    }
    if (!os) throw ContractViolation("write_text_matrix: write failed for " + path);
}

Matrix read_text_matrix(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractViolation("read_text_matrix: cannot open " + path);
    std::size_t rows = 0, cols = 0;
    is >> rows >> cols;
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) is >> m.data()[i];
    if (!is) throw ContractViolation("read_text_matrix: truncated " + path);
    return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string record_line(int round, int member, const FitnessRecord& rec) {
    return "round=" + std::to_string(round) + " member=" + std::to_string(member) + " " +
           rec.to_line();
}

std::string log_header(const ExperimentConfig& cfg, Arm arm) {
    return "# evoprune-results v1 fingerprint=" + config_fingerprint(cfg, arm) +
           " arm=" + arm_name(arm) + " p0=" + fmt_g17(cfg.p0) +
           " n_blocks=" + std::to_string(cfg.model.n_blocks) +
           " seed=" + std::to_string(cfg.master_seed);
}

struct SearchState {
    int rounds_done = 0;
    long records_logged = 0;
    Population population;
    Matrix projector;
    bool has_best = false;
    int best_round = -1;
    int best_member = -1;
    FitnessRecord best;
};

void write_state(const std::string& path, const std::string& fingerprint, const SearchState& st) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("state: cannot open " + path);
    os << "evoprune-state v1\n";
    os << "fingerprint=" << fingerprint << '\n';
    os << "rounds_done=" << st.rounds_done << '\n';
    os << "records_logged=" << st.records_logged << '\n';
    os << "best_round=" << st.best_round << " best_member=" << st.best_member << '\n';
    if (st.has_best) os << "best " << st.best.to_line() << '\n';
    os << serialize_population(st.population);
    os << "projector " << st.projector.rows() << ' ' << st.projector.cols() << '\n';
    for (std::size_t i = 0; i < st.projector.size(); ++i) {
        if (i) os << ' ';
        os << fmt_g17(st.projector.data()[i]);
    }
    os << '\n';
    if (!os) throw ContractViolation("state: write failed for " + path);
}

SearchState read_state(const std::string& path, const std::string& expected_fingerprint,
                       double p0) {
    std::ifstream is(path);
    if (!is) throw ContractViolation("state: cannot open " + path);
    std::string line;
    std::getline(is, line);
    if (line != "evoprune-state v1") throw ContractViolation("state: bad header in " + path);
    SearchState st;
    std::getline(is, line);
    if (line.rfind("fingerprint=", 0) != 0 || line.substr(12) != expected_fingerprint)
        throw ContractViolation("state: fingerprint mismatch; refusing to resume a different run");
    std::getline(is, line);
    st.rounds_done = std::stoi(line.substr(line.find('=') + 1));
    std::getline(is, line);
    st.records_logged = std::stol(line.substr(line.find('=') + 1));
    std::getline(is, line);
    if (std::sscanf(line.c_str(), "best_round=%d best_member=%d", &st.best_round,
                    &st.best_member) != 2)
        throw ContractViolation("state: bad best line in " + path);
    std::streampos after_best = is.tellg();
    std::getline(is, line);
    if (line.rfind("best ", 0) == 0) {
        st.has_best = true;
        st.best = FitnessRecord::from_line(line.substr(5), p0);
    } else {
        is.seekg(after_best);
    }
    std::ostringstream pop_text;
    std::getline(is, line);
    pop_text << line << '\n';
    long n_members = 0;
    if (std::sscanf(line.c_str(), "generation=%*d n=%ld", &n_members) != 1)
        throw ContractViolation("state: bad population header in " + path);
    for (long i = 0; i < n_members; ++i) {
        std::getline(is, line);
        pop_text << line << '\n';
    }
    st.population = deserialize_population(pop_text.str());
    std::size_t rows = 0, cols = 0;
    std::string word;
    is >> word >> rows >> cols;
    if (word != "projector") throw ContractViolation("state: bad projector header in " + path);
    st.projector = Matrix(rows, cols);
    for (std::size_t i = 0; i < st.projector.size(); ++i) is >> st.projector.data()[i];
    if (!is) throw ContractViolation("state: truncated " + path);
    return st;
}

long count_lines(const std::string& path) {
    std::ifstream is(path);
    long n = 0;
    std::string line;
    while (std::getline(is, line)) ++n;
    return n;
}

void write_summary(const std::string& dir, const RunResult& res) {
    std::ofstream os(dir + "/summary.txt", std::ios::trunc);
    if (!os) throw ContractViolation("run: cannot open " + dir + "/summary.txt");
    os << "arm=" << arm_name(res.arm) << '\n'
       << "p0=" << fmt_g17(res.config.p0) << '\n'
       << "seed=" << res.config.master_seed << '\n'
       << "holdout_loss=" << fmt_g17(res.holdout_loss) << '\n'
       << "uniform_holdout=" << fmt_g17(res.uniform_baseline_holdout) << '\n'
       << "sparsity=" << fmt_g17(res.realized_sparsity) << '\n'
       << "wall_clock=" << fmt_g17(res.clock.total_s) << '\n'
       << "wall_data=" << fmt_g17(res.clock.data_s) << '\n'
       << "wall_eval=" << fmt_g17(res.clock.eval_s) << '\n'
       << "wall_evolve=" << fmt_g17(res.clock.evolve_s) << '\n'
       << "wall_final=" << fmt_g17(res.clock.final_s) << '\n'
       << "best_policy=" << res.best_policy.to_string() << '\n'
       << "best_fitness=" << fmt_g17(res.best_record.fitness) << '\n'
       << "best_round=" << res.best_round << '\n'
       << "best_member=" << res.best_member << '\n'
       << "rounds=" << res.config.rounds << '\n'
       << "n_proxy=" << res.config.n_proxy << '\n'
       << "proxy_len=" << res.config.proxy_len << '\n'
       << "completed=" << (res.completed ? 1 : 0) << '\n';
}

} // namespace

// ---------------------------------------------------------------------------
// runs

RunResult run_arm(Arm arm, const ExperimentConfig& cfg, const RunOptions& opt) {
    cfg.validate();
    if (opt.resume && opt.overwrite)
        throw ContractViolation("run: resume and overwrite are mutually exclusive");

    RunResult res;
    res.arm = arm;
    res.config = cfg;

    const bool with_files = !opt.out_dir.empty();
    const std::string fingerprint = config_fingerprint(cfg, arm);
    std::string results_path, state_path;
    bool resuming = false;
    SearchState st;

    if (with_files) {
        fs::create_directories(opt.out_dir);
        results_path = opt.out_dir + "/results.log";
        state_path = opt.out_dir + "/state.snap";
        if (fs::exists(results_path)) {
            if (opt.overwrite) {
                fs::remove(results_path);
                fs::remove(state_path);
            } else if (opt.resume) {
                st = read_state(state_path, fingerprint, cfg.p0);
                if (count_lines(results_path) != st.records_logged + 1)  // +1 header
                    throw ContractViolation(
                        "run: results log does not match the snapshot; refusing to mix runs");
                resuming = true;
            } else {
                throw ContractViolation("run: " + results_path +
                                        " already exists; pass overwrite or resume");
            }
        } else if (opt.resume) {
            throw ContractViolation("run: nothing to resume in " + opt.out_dir);
        }
    } else if (opt.resume) {
        throw ContractViolation("run: resume requires an output directory");
    }

    const auto t_start = Clock::now();
    auto t_phase = t_start;
    auto bump = [&](double& slot) {
        slot += seconds_since(t_phase);
        t_phase = Clock::now();
    };

    // data generation (subject model, teacher, proxy and holdout splits)
    const ToyVlm subject = init_model(cfg.model, derive_seed(cfg.master_seed, "model", 0));
    const ToyVlm teacher = make_teacher(cfg.model, cfg.master_seed);
    DatasetSpec proxy_spec{cfg.n_proxy, cfg.proxy_len, cfg.master_seed, DatasetSpec::Split::proxy};
    const std::vector<Sample> proxy = sample_dataset(teacher, proxy_spec);
    DatasetSpec holdout_spec{cfg.n_holdout, cfg.proxy_len, cfg.master_seed,
                             DatasetSpec::Split::holdout};
    const ToyVlm holdout_teacher =
        cfg.holdout_shift ? make_teacher(cfg.model, derive_seed(cfg.master_seed, "holdout-teacher", 0))
                          : teacher;
    const std::vector<Sample> holdout = sample_dataset(holdout_teacher, holdout_spec);
    bump(res.clock.data_s);

    std::ofstream log;
    if (with_files) {
        log.open(results_path, resuming ? std::ios::app : std::ios::trunc);
        if (!log) throw ContractViolation("run: cannot open " + results_path);
        if (!resuming) log << log_header(cfg, arm) << '\n';
        log.flush();
    }
    auto emit = [&](int round, int member, const FitnessRecord& rec) {
        res.records.push_back({round, member, rec});
        if (with_files) log << record_line(round, member, rec) << '\n';
        ++st.records_logged;
    };
    auto track_best = [&](int round, int member, const FitnessRecord& rec) {
        if (!st.has_best || rec.fitness < st.best.fitness) {
            st.has_best = true;
            st.best = rec;
            st.best_round = round;
            st.best_member = member;
        }
    };

    const double eta_eff = arm == Arm::no_gen ? 0.0 : cfg.eta;

    if (arm == Arm::uniform) {
        const Policy center = Policy::center(cfg.p0, cfg.model.n_blocks);
        const PolicyApplication app =
            apply_policy(subject, center, proxy, cfg.damping, cfg.blocksize);
        FitnessRecord rec = fitness(app.model, proxy, eta_eff);
        rec.policy = center;
        rec.eval_seed = derive_seed(cfg.master_seed, "eval", 0);
        emit(0, 0, rec);
        track_best(0, 0, rec);
        if (with_files) log.flush();
        bump(res.clock.eval_s);

        res.holdout_loss = loss(app.model, holdout);
        res.uniform_baseline_holdout = res.holdout_loss;
        res.realized_sparsity = app.realized_sparsity;
        res.best_policy = center;
        res.best_record = rec;
        res.best_round = 0;
        res.best_member = 0;
        res.completed = true;
        if (with_files) {
            save_model(opt.out_dir + "/model_final.ckpt", app.model);
            if (opt.dump_masks) export_masks(opt.out_dir + "/masks.txt", app.masks);
        }
        bump(res.clock.final_s);
        res.clock.total_s = seconds_since(t_start);
        if (with_files) write_summary(opt.out_dir, res);
        return res;
    }

    ToyVlm model = subject;
    int start_round = 0;
    if (resuming) {
        model.projector = st.projector;
        start_round = st.rounds_done;
        // replay the already-logged records into the in-memory result
        std::ifstream prev(results_path);
        std::string line;
        std::getline(prev, line);  // header
        while (std::getline(prev, line)) {
            int round = 0, member = 0;
            if (std::sscanf(line.c_str(), "round=%d member=%d", &round, &member) != 2)
                throw ContractViolation("run: unparsable log line on resume: " + line);
            const std::size_t at = line.find(" policy=");
            res.records.push_back(
                {round, member, FitnessRecord::from_line(line.substr(at + 1), cfg.p0)});
        }
    } else {
        st.population.generation = 0;
        st.population.members.reserve(cfg.n_pop);
        for (int i = 0; i < cfg.n_pop; ++i) {
            Rng rng(derive_seed(cfg.master_seed, "init", static_cast<std::uint64_t>(i)));
            st.population.members.push_back(sample_policy(cfg.p0, cfg.model.n_blocks, rng));
        }
    }

    for (int round = start_round; round < cfg.rounds; ++round) {
        RoundResult rr = evolve_round(st.population, model, proxy, eta_eff, cfg.k_elite,
                                      cfg.damping, cfg.blocksize, cfg.master_seed,
                                      cfg.mutation_rate);
        for (int m = 0; m < static_cast<int>(rr.records.size()); ++m) {
            emit(round, m, rr.records[m]);
            track_best(round, m, rr.records[m]);
        }
        if (with_files) log.flush();
        bump(res.clock.eval_s);

        if (arm != Arm::no_evo) {
            const std::vector<int> elite_idx = select_elites(rr.records, cfg.k_elite);
            std::vector<Policy> elite_policies;
            std::vector<EvolutionCandidate> candidates;
            elite_policies.reserve(elite_idx.size());
            candidates.reserve(elite_idx.size());
            for (int e : elite_idx) {
                const Policy& pol = st.population.members[e];
                PolicyApplication app = apply_policy(model, pol, proxy, cfg.damping, cfg.blocksize);
                elite_policies.push_back(pol);
                candidates.push_back({pol, std::move(app.masks)});
            }
            ImportanceWeights weights;
            if (arm == Arm::evo_no_ub) {
                weights.neighborhood_size = cfg.neighborhood;
                weights.weights.assign(candidates.size(), 1.0 / candidates.size());
            } else {
                weights = importance_weights(elite_policies, cfg.neighborhood);
            }

            // Guarded update: a projector step is accepted only if the round's
            // best candidate, re-pruned against the updated projector, does
            // not regress past the round's best fitness. The retained elite
            // then anchors the next round's minimum, so the logged per-round
            // best fitness stays non-increasing even though the landscape
            // moves. Regressions are mostly discrete re-pruning flips, so the
            // backtracking scales the already-computed displacement instead of
            // re-running the optimizer.
            const double round_best = rr.records[elite_idx[0]].fitness;
            const Policy& best_pol = elite_policies[0];
            const ToyVlm evolved =
                evolve_projector(model, candidates, weights, proxy, cfg.lr, cfg.evo_steps);
            for (double alpha : {1.0, 0.25, 0.0625, 0.015625}) {
                ToyVlm trial = model;
                for (std::size_t i = 0; i < trial.projector.size(); ++i)
                    trial.projector.data()[i] +=
                        alpha * (evolved.projector.data()[i] - model.projector.data()[i]);
                const PolicyApplication check =
                    apply_policy(trial, best_pol, proxy, cfg.damping, cfg.blocksize);
                if (fitness(check.model, proxy, eta_eff).fitness <= round_best) {
                    model = std::move(trial);
                    break;
                }
            }
        }
        st.population = std::move(rr.next);
        st.rounds_done = round + 1;
        if (with_files) {
            write_text_matrix(opt.out_dir + "/projector_round_" + std::to_string(round) + ".mat",
                              model.projector);
            st.projector = model.projector;
            write_state(state_path, fingerprint, st);
        }
        bump(res.clock.evolve_s);

        if (opt.stop_after_rounds >= 0 && st.rounds_done >= opt.stop_after_rounds &&
            st.rounds_done < cfg.rounds) {
            res.completed = false;
            res.clock.total_s = seconds_since(t_start);
            return res;
        }
    }

    // final evaluation: best policy re-pruned against the final projector;
    // the uniform baseline is the center policy on the untouched subject model
    res.best_policy = st.best.policy;
    res.best_record = st.best;
    res.best_round = st.best_round;
    res.best_member = st.best_member;
    const PolicyApplication final_app =
        apply_policy(model, res.best_policy, proxy, cfg.damping, cfg.blocksize);
    res.holdout_loss = loss(final_app.model, holdout);
    const PolicyApplication uniform_app = apply_policy(
        subject, Policy::center(cfg.p0, cfg.model.n_blocks), proxy, cfg.damping, cfg.blocksize);
    res.uniform_baseline_holdout = loss(uniform_app.model, holdout);
    res.realized_sparsity = final_app.realized_sparsity;
    res.completed = true;
    if (with_files) {
        save_model(opt.out_dir + "/model_final.ckpt", final_app.model);
        std::ofstream bp(opt.out_dir + "/best_policy.txt", std::ios::trunc);
        bp << res.best_policy.to_string() << '\n' << res.best_record.to_line() << '\n';
        if (opt.dump_masks) export_masks(opt.out_dir + "/masks.txt", final_app.masks);
    }
    bump(res.clock.final_s);
    res.clock.total_s = seconds_since(t_start);
    if (with_files) write_summary(opt.out_dir, res);
    return res;
}

RunResult run_search(const ExperimentConfig& config, const RunOptions& options) {
    return run_arm(Arm::full, config, options);
}

RunResult run_uniform(const ExperimentConfig& config, const RunOptions& options) {
    return run_arm(Arm::uniform, config, options);
}

RunResult run_auto_no_gen(const ExperimentConfig& config, const RunOptions& options) {
    return run_arm(Arm::no_gen, config, options);
}

RunResult run_no_evo(const ExperimentConfig& config, const RunOptions& options) {
    return run_arm(Arm::no_evo, config, options);
}

RunResult run_evo_no_ub(const ExperimentConfig& config, const RunOptions& options) {
    return run_arm(Arm::evo_no_ub, config, options);
}

std::vector<RunResult> run_ablation_grid(const ExperimentConfig& config,
                                         const std::vector<int>& n_values,
                                         const std::vector<int>& s_values,
                                         const std::string& out_dir) {
    if (n_values.empty() || s_values.empty())
        throw ContractViolation("run_ablation_grid: empty value list");
    std::vector<RunResult> out;
    out.reserve(n_values.size() * s_values.size());
    for (int n : n_values) {
        for (int s : s_values) {
            ExperimentConfig cell = config;
            cell.n_proxy = n;
            cell.proxy_len = s;
            RunOptions opt;
            if (!out_dir.empty())
                opt.out_dir = out_dir + "/grid_n" + std::to_string(n) + "_s" + std::to_string(s);
            out.push_back(run_arm(Arm::full, cell, opt));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// log verification and reporting

bool verify_results_log(const std::string& path, std::string& message) {
    std::ifstream is(path);
    if (!is) {
        message = "cannot open " + path;
        return false;
    }
    std::string line;
    if (!std::getline(is, line) || line.rfind("# evoprune-results v1", 0) != 0) {
        message = "missing results header in " + path;
        return false;
    }
    double p0 = 0.0;
    {
        const std::size_t at = line.find(" p0=");
        if (at == std::string::npos) {
            message = "header lacks p0 in " + path;
            return false;
        }
        p0 = std::stod(line.substr(at + 4));
    }

    std::map<int, double> round_best;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        int round = 0, member = 0;
        if (std::sscanf(line.c_str(), "round=%d member=%d", &round, &member) != 2) {
            message = path + ":" + std::to_string(lineno) + ": unparsable record";
            return false;
        }
        FitnessRecord rec;
        try {
            const std::size_t at = line.find(" policy=");
            rec = FitnessRecord::from_line(line.substr(at + 1), p0);
        } catch (const std::exception& e) {
            message = path + ":" + std::to_string(lineno) + ": " + e.what();
            return false;
        }
        if (!rec.policy.feasible()) {
            message = path + ":" + std::to_string(lineno) + ": infeasible policy [" +
                      rec.policy.to_string() + "]";
            return false;
        }
        auto [it, inserted] = round_best.try_emplace(round, rec.fitness);
        if (!inserted) it->second = std::min(it->second, rec.fitness);
    }

    double prev = std::numeric_limits<double>::infinity();
    int prev_round = -1;
    for (const auto& [round, best] : round_best) {
        if (best > prev) {
            message = path + ": best fitness increased from round " + std::to_string(prev_round) +
                      " (" + fmt_g17(prev) + ") to round " + std::to_string(round) + " (" +
                      fmt_g17(best) + ")";
            return false;
        }
        prev = best;
        prev_round = round;
    }
    message = "ok: " + std::to_string(round_best.size()) + " rounds, per-round best non-increasing";
    return true;
}

void write_report_csv(std::ostream& os, const std::vector<std::string>& summary_paths) {
    os << "arm,p0,seed,holdout_loss,sparsity,wall_clock\n";
    for (const auto& path : summary_paths) {
        std::ifstream is(path);
        if (!is) throw ContractViolation("report: cannot open " + path);
        std::map<std::string, std::string> kv;
        std::string line;
        while (std::getline(is, line)) {
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        for (const char* key : {"arm", "p0", "seed", "holdout_loss", "sparsity", "wall_clock"})
            if (!kv.count(key))
                throw ContractViolation("report: " + path + " lacks field '" + key + "'");
        os << kv["arm"] << ',' << kv["p0"] << ',' << kv["seed"] << ',' << kv["holdout_loss"]
           << ',' << kv["sparsity"] << ',' << kv["wall_clock"] << '\n';
    }
}

} // namespace evoprune
