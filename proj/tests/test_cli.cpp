#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = EVOPRUNE_CLI_PATH;

// small-model flags shared by every run below
const std::string kDims =
    " --d-vision 8 --d-model 16 --n-blocks 4 --d-ff 32 --vocab-size 32 --seq-len 16"
    " --proxy-len 16 --n-proxy 6 --n-holdout 6 --n-pop 4 --k-elite 2 --rounds 2 --evo-steps 1";

int run(const std::string& args) {
    return std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
}

std::string run_capture(const std::string& args, const fs::path& tmp) {
    const fs::path out = tmp / "stdout.txt";
    std::system((kCli + " " + args + " > " + out.string() + " 2>&1").c_str());
    std::ifstream is(out);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

long line_count(const fs::path& p) {
    std::ifstream is(p);
    long n = 0;
    std::string line;
    while (std::getline(is, line)) ++n;
    return n;
}

} // namespace

TEST_CASE("search requires a seed") {
    CHECK(run("search") != 0);
}

TEST_CASE("gen-data writes the requested sample count") {
    TempDir dir("evoprune_cli_gen");
    const fs::path out = dir.path / "data.txt";
    CHECK(run("gen-data --seed 3 --n 5 --len 8" + kDims + " --out " + out.string()) == 0);
    CHECK(line_count(out) == 5);
}

TEST_CASE("search runs, refuses to clobber, and verify accepts its log") {
    TempDir dir("evoprune_cli_search");
    const std::string out_dir = (dir.path / "run").string();
    CHECK(run("search --seed 7 --out-dir " + out_dir + kDims + " --dump-masks") == 0);
    CHECK(fs::exists(out_dir + "/results.log"));
    CHECK(fs::exists(out_dir + "/model_final.ckpt"));
    CHECK(fs::exists(out_dir + "/summary.txt"));
    CHECK(fs::exists(out_dir + "/best_policy.txt"));
    CHECK(fs::exists(out_dir + "/masks.txt"));

    CHECK(run("search --seed 7 --out-dir " + out_dir + kDims) != 0);
    CHECK(run("search --seed 7 --out-dir " + out_dir + kDims + " --overwrite") == 0);
    CHECK(run("verify --log " + out_dir + "/results.log") == 0);
}

TEST_CASE("interrupted runs resume from the snapshot") {
    TempDir dir("evoprune_cli_resume");
    const std::string out_dir = (dir.path / "run").string();
    CHECK(run("search --seed 9 --out-dir " + out_dir + kDims + " --stop-after 1") == 0);
    CHECK(!fs::exists(out_dir + "/model_final.ckpt"));
    CHECK(run("search --seed 9 --out-dir " + out_dir + kDims + " --resume") == 0);
    CHECK(fs::exists(out_dir + "/model_final.ckpt"));
}

TEST_CASE("uniform baseline and report csv") {
    TempDir dir("evoprune_cli_uniform");
    const std::string out_dir = (dir.path / "run").string();
    CHECK(run("uniform --seed 5 --out-dir " + out_dir + kDims) == 0);
    const std::string csv = run_capture("report " + out_dir + "/summary.txt", dir.path);
    CHECK(csv.find("arm,p0,seed,holdout_loss,sparsity,wall_clock") != std::string::npos);
    CHECK(csv.find("uniform,") != std::string::npos);
}

TEST_CASE("ablate arms mode writes one summary per run plus a report") {
    TempDir dir("evoprune_cli_ablate");
    const std::string out_dir = (dir.path / "ab").string();
    CHECK(run("ablate --arms uniform,no_evo --seeds 1,2 --out-dir " + out_dir + kDims) == 0);
    CHECK(fs::exists(out_dir + "/uniform_seed1/summary.txt"));
    CHECK(fs::exists(out_dir + "/no_evo_seed2/summary.txt"));
    CHECK(line_count(out_dir + "/report.csv") == 5);  // header + 4 runs
}

TEST_CASE("ablate grid mode emits one row per cell") {
    TempDir dir("evoprune_cli_grid");
    const std::string out_dir = (dir.path / "grid").string();
    CHECK(run("ablate --seeds 1 --grid-n 4,6 --grid-s 8 --out-dir " + out_dir + kDims) == 0);
    CHECK(line_count(out_dir + "/grid.csv") == 3);  // header + 2 cells
}

TEST_CASE("verify oracle suite passes and prints one line per check") {
    TempDir dir("evoprune_cli_verify");
    const std::string text = run_capture("verify", dir.path);
    CHECK(text.find("[PASS] obs-single-removal-optimality") != std::string::npos);
    CHECK(text.find("[PASS] exact-sparsity") != std::string::npos);
    CHECK(text.find("[PASS] projector-gradient") != std::string::npos);
    CHECK(text.find("[PASS] importance-weights") != std::string::npos);
    CHECK(text.find("[FAIL]") == std::string::npos);
    CHECK(run("verify") == 0);
}

TEST_CASE("verify rejects a tampered log") {
    TempDir dir("evoprune_cli_tamper");
    const std::string out_dir = (dir.path / "run").string();
    CHECK(run("search --seed 11 --out-dir " + out_dir + kDims) == 0);
    std::ofstream os(out_dir + "/results.log", std::ios::app);
    os << "round=5 member=0 policy=0.5,0.5,0.5,0.5 proxy_loss=99 gen_proxy=0 fitness=99 seed=1\n";
    os.close();
    CHECK(run("verify --log " + out_dir + "/results.log") != 0);
}

TEST_CASE("config files feed runs and flags override them") {
    TempDir dir("evoprune_cli_cfg");
    const fs::path cfg_path = dir.path / "run.cfg";
    std::ofstream cfg(cfg_path);
    cfg << "p0=0.4\nn_pop=4\nk_elite=2\nrounds=1\nn_proxy=6\nn_holdout=6\nproxy_len=16\n"
        << "evo_steps=1\nmodel.d_vision=8\nmodel.d_model=16\nmodel.n_blocks=4\n"
        << "model.d_ff=32\nmodel.vocab_size=32\nmodel.seq_len=16\n";
    cfg.close();
    const std::string out_dir = (dir.path / "run").string();
    CHECK(run("search --seed 3 --config " + cfg_path.string() + " --rounds 2 --out-dir " +
              out_dir) == 0);
    std::ifstream sm(out_dir + "/summary.txt");
    std::string text((std::istreambuf_iterator<char>(sm)), std::istreambuf_iterator<char>());
    CHECK(text.find("p0=0.40000000000000002") != std::string::npos);  // from the file
    CHECK(text.find("rounds=2") != std::string::npos);                // flag override
}
