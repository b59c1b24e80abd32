#include "evoprune/calib.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "evoprune/parallel.hpp"
#include "evoprune/rng.hpp"
#include "evoprune/textio.hpp"

namespace evoprune {

const char* split_name(DatasetSpec::Split split) {
    return split == DatasetSpec::Split::proxy ? "proxy" : "holdout";
}

ToyVlm make_teacher(const ModelConfig& config, std::uint64_t seed) {
    return init_model(config, derive_seed(seed, "teacher", 0));
}

namespace {

int sample_token(const ToyVlm& teacher, const std::vector<double>& vision,
                 const std::vector<int>& tokens_so_far, Rng& rng) {
    const Matrix hidden = forward_hidden(teacher, vision, tokens_so_far);
    const std::size_t last = hidden.cols() - 1;
    const int vocab = teacher.config.vocab_size;

    std::vector<double> logits(vocab);
    double max_l = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < vocab; ++c) {
        double acc = 0.0;
        for (int dd = 0; dd < teacher.config.d_model; ++dd)
            acc += teacher.head(c, dd) * hidden(dd, last);
        logits[c] = acc;
        max_l = std::max(max_l, acc);
    }
    double denom = 0.0;
    for (int c = 0; c < vocab; ++c) {
        logits[c] = std::exp(logits[c] - max_l);
        denom += logits[c];
    }
    const double u = rng.uniform();
    double cum = 0.0;
    for (int c = 0; c < vocab; ++c) {
        cum += logits[c] / denom;
        if (u < cum) return c;
    }
    return vocab - 1;
}

} // namespace

std::vector<Sample> sample_dataset(const ToyVlm& teacher, const DatasetSpec& spec) {
    if (spec.n_samples < 0) throw ContractViolation("sample_dataset: negative n_samples");
    if (spec.seq_len < 1 || spec.seq_len > teacher.config.seq_len)
        throw ContractViolation("sample_dataset: seq_len must be in [1, model seq_len]");

    const std::string stream = std::string("data/") + split_name(spec.split);
    std::vector<Sample> out(spec.n_samples);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(spec.n_samples); ++i) {
        Rng rng(derive_seed(spec.seed, stream, static_cast<std::uint64_t>(i)));
        std::vector<double> vision(teacher.config.d_vision);
        for (auto& v : vision) v = rng.gaussian();
        std::vector<int> tokens;
        tokens.reserve(spec.seq_len);
        for (int t = 0; t < spec.seq_len; ++t)
            tokens.push_back(sample_token(teacher, vision, tokens, rng));
        out[i] = make_sample(std::move(vision), std::move(tokens));
    }
    return out;
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("save_dataset: cannot open " + path);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < s.vision_feature.size(); ++i) {
            if (i) os << ' ';
            os << fmt_g17(s.vision_feature[i]);
        }
        os << " |";
        for (int t : s.tokens) os << ' ' << t;
        os << '\n';
    }
    if (!os) throw ContractViolation("save_dataset: write failed for " + path);
}

std::vector<Sample> load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractViolation("load_dataset: cannot open " + path);
    std::vector<Sample> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<double> vision;
        std::vector<int> tokens;
        std::string tok;
        bool in_tokens = false;
        while (ls >> tok) {
            if (tok == "|") {
                in_tokens = true;
            } else if (in_tokens) {
                tokens.push_back(std::stoi(tok));
            } else {
                vision.push_back(std::stod(tok));
            }
        }
        if (!in_tokens) throw ContractViolation("load_dataset: missing '|' separator in " + path);
        out.push_back(make_sample(std::move(vision), std::move(tokens)));
    }
    return out;
}

} // namespace evoprune
