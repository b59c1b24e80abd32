#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoprune/model.hpp"

namespace evoprune {

// Synthetic proxy/holdout data drawn from a frozen random teacher. Teacher
// data is self-predictable, so pruning quality is actually measurable;
// uniform-random tokens would give every policy the same irreducible loss.
struct DatasetSpec {
    enum class Split { proxy, holdout };

    int n_samples = 64;
    int seq_len = 32;  // capped at the model's seq_len
    std::uint64_t seed = 0;
    Split split = Split::proxy;
};

const char* split_name(DatasetSpec::Split split);

// Frozen generator model on its own seed stream, distinct from the subject
// model stream by construction.
ToyVlm make_teacher(const ModelConfig& config, std::uint64_t seed);

// Vision features standard-normal; tokens sampled ancestrally from the
// teacher softmax at temperature 1. Pure function of (teacher, spec):
// per-sample seed streams make the dataset prefix-stable in both the sample
// count and the sequence length.
std::vector<Sample> sample_dataset(const ToyVlm& teacher, const DatasetSpec& spec);

// Line-delimited text, one sample per line: vision values, '|', token ids.
void save_dataset(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::string& path);

} // namespace evoprune
