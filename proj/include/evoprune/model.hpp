#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoprune/matrix.hpp"

namespace evoprune {

struct ModelConfig {
    int d_vision = 16;
    int d_model = 32;
    int n_blocks = 4;
    int d_ff = 64;
    int vocab_size = 64;
    int seq_len = 32;
    int n_prefix = 1;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-5;

// The six prunable matrices of a transformer block, in fixed order.
enum class MatrixRole { Wq = 0, Wk, Wv, Wo, Wup, Wdown };
inline constexpr int kRolesPerBlock = 6;
const char* role_name(MatrixRole role);

struct BlockWeights {
    Matrix w_q, w_k, w_v, w_o;  // d_model x d_model
    Matrix w_up;                // d_ff x d_model
    Matrix w_down;              // d_model x d_ff
    std::vector<double> ln1_gain, ln1_bias;  // d_model
    std::vector<double> ln2_gain, ln2_bias;  // d_model

    Matrix& matrix(MatrixRole role);
    const Matrix& matrix(MatrixRole role) const;
};

// Projector + causal transformer body. The prunable set is exactly the
// per-block attention/MLP matrices; projector, embedding, head and norms are
// never pruned, and the projector is the only trained parameter.
struct ToyVlm {
    ModelConfig config;
    Matrix projector;  // d_model x d_vision
    Matrix embedding;  // vocab x d_model
    Matrix head;       // vocab x d_model
    std::vector<BlockWeights> blocks;
};

std::vector<const Matrix*> prunable_matrices(const ToyVlm& model);
std::vector<Matrix*> prunable_matrices(ToyVlm& model);

struct Sample {
    std::vector<double> vision_feature;  // d_vision
    std::vector<int> tokens;             // length <= config.seq_len
    std::vector<int> targets;            // targets[t] == tokens[t + 1]
};

Sample make_sample(std::vector<double> vision_feature, std::vector<int> tokens);
void validate_sample(const Sample& sample, const ModelConfig& config);

// Per-block intermediates. z1/mix/z2/g are the input matrices of the four
// prunable roles (w_q|w_k|w_v share z1), which is all the Hessian
// accumulation needs; the rest feeds backprop.
struct BlockCache {
    Matrix x_in;     // d x T
    Matrix z1;       // d x T, input to w_q / w_k / w_v
    Matrix q, k, v;  // d x T
    Matrix probs;    // T x T, row = query position, causal
    Matrix mix;      // d x T, input to w_o
    Matrix h;        // d x T, residual after attention
    Matrix z2;       // d x T, input to w_up
    Matrix up;       // d_ff x T, pre-GELU
    Matrix g;        // d_ff x T, input to w_down
};

struct ActivationCache {
    std::vector<BlockCache> blocks;
    Matrix x_final;  // d x T
};

struct ForwardResult {
    Matrix logits;  // text positions x vocab
    ActivationCache cache;
};

// Weights drawn from a seeded gaussian with scale 1/sqrt(fan_in), where
// fan_in is the column count of the stored matrix. Per-matrix derived
// streams, so the same (config, seed) is bit-reproducible.
ToyVlm init_model(const ModelConfig& config, std::uint64_t seed);

// Projected vision token(s) prepended as prefix, then pre-norm residual
// blocks with single-head causal attention and a GELU MLP. Logits cover the
// text positions only.
ForwardResult forward(const ToyVlm& model, const Sample& sample);

// Final hidden states (d x T) for an arbitrary, possibly empty, token list;
// used by autoregressive generation. No cache is built.
Matrix forward_hidden(const ToyVlm& model, const std::vector<double>& vision_feature,
                      const std::vector<int>& tokens);

// One transformer block; cache may be null.
Matrix apply_block(const BlockWeights& block, const Matrix& x_in, BlockCache* cache);

// Prefix columns (projector * vision feature) followed by token embeddings.
Matrix embed_sequence(const ToyVlm& model, const std::vector<double>& vision_feature,
                      const std::vector<int>& tokens);

// Unnormalized cross-entropy sum over one sample's target positions.
double sample_loss_sum(const ToyVlm& model, const Sample& sample);

// Unnormalized d(sample_loss_sum)/d(projector) for one sample.
Matrix sample_projector_grad_raw(const ToyVlm& model, const Sample& sample);

// Mean next-token cross-entropy over all text positions with a target;
// prefix positions carry no loss. Per-sample terms are computed in parallel
// and reduced in sample order, so the value is thread-count independent.
double loss(const ToyVlm& model, const std::vector<Sample>& batch);

// Exact reverse-mode gradient of loss() with respect to the projector; all
// other parameters are treated as constants.
Matrix grad_projector(const ToyVlm& model, const std::vector<Sample>& batch);

// Checkpoint round-trips are bit-exact.
void save_model(const std::string& path, const ToyVlm& model);
ToyVlm load_model(const std::string& path);

} // namespace evoprune
