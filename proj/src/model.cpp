#include "evoprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "evoprune/parallel.hpp"
#include "evoprune/rng.hpp"

namespace evoprune {

void ModelConfig::validate() const {
    if (d_vision < 1 || d_model < 1 || n_blocks < 1 || d_ff < 1 || n_prefix < 1)
        throw ContractViolation("ModelConfig: all dimensions must be >= 1");
    if (seq_len < 2) throw ContractViolation("ModelConfig: seq_len must be >= 2");
    if (vocab_size < 2) throw ContractViolation("ModelConfig: vocab_size must be >= 2");
}

const char* role_name(MatrixRole role) {
    switch (role) {
        case MatrixRole::Wq: return "w_q";
        case MatrixRole::Wk: return "w_k";
        case MatrixRole::Wv: return "w_v";
        case MatrixRole::Wo: return "w_o";
        case MatrixRole::Wup: return "w_up";
        case MatrixRole::Wdown: return "w_down";
    }
    return "?";
}

Matrix& BlockWeights::matrix(MatrixRole role) {
    switch (role) {
        case MatrixRole::Wq: return w_q;
        case MatrixRole::Wk: return w_k;
        case MatrixRole::Wv: return w_v;
        case MatrixRole::Wo: return w_o;
        case MatrixRole::Wup: return w_up;
        case MatrixRole::Wdown: return w_down;
    }
    throw ContractViolation("BlockWeights::matrix: bad role");
}

const Matrix& BlockWeights::matrix(MatrixRole role) const {
    return const_cast<BlockWeights*>(this)->matrix(role);
}

std::vector<const Matrix*> prunable_matrices(const ToyVlm& model) {
    std::vector<const Matrix*> out;
    out.reserve(model.blocks.size() * kRolesPerBlock);
    for (const auto& b : model.blocks)
        for (int r = 0; r < kRolesPerBlock; ++r)
            out.push_back(&b.matrix(static_cast<MatrixRole>(r)));
    return out;
}

std::vector<Matrix*> prunable_matrices(ToyVlm& model) {
    std::vector<Matrix*> out;
    out.reserve(model.blocks.size() * kRolesPerBlock);
    for (auto& b : model.blocks)
        for (int r = 0; r < kRolesPerBlock; ++r)
            out.push_back(&b.matrix(static_cast<MatrixRole>(r)));
    return out;
}

Sample make_sample(std::vector<double> vision_feature, std::vector<int> tokens) {
    Sample s;
    s.vision_feature = std::move(vision_feature);
    s.tokens = std::move(tokens);
    if (s.tokens.size() > 1) s.targets.assign(s.tokens.begin() + 1, s.tokens.end());
    return s;
}

void validate_sample(const Sample& sample, const ModelConfig& config) {
    if (sample.vision_feature.size() != static_cast<std::size_t>(config.d_vision))
        throw ContractViolation("Sample: vision feature size != d_vision");
    if (sample.tokens.size() > static_cast<std::size_t>(config.seq_len))
        throw ContractViolation("Sample: more tokens than config.seq_len");
    for (int t : sample.tokens)
        if (t < 0 || t >= config.vocab_size)
            throw ContractViolation("Sample: token id out of range");
    if (!sample.targets.empty()) {
        if (sample.targets.size() + 1 != sample.tokens.size())
            throw ContractViolation("Sample: targets length != tokens length - 1");
        for (std::size_t t = 0; t < sample.targets.size(); ++t)
            if (sample.targets[t] != sample.tokens[t + 1])
                throw ContractViolation("Sample: targets are not the next-token shift");
    }
}

// ---------------------------------------------------------------------------
// init

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
    return m;
}

} // namespace

ToyVlm init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ToyVlm m;
    m.config = config;
    m.projector = random_matrix(config.d_model, config.d_vision, derive_seed(seed, "projector", 0));
    m.embedding = random_matrix(config.vocab_size, config.d_model, derive_seed(seed, "embedding", 0));
    m.head = random_matrix(config.vocab_size, config.d_model, derive_seed(seed, "head", 0));
    m.blocks.resize(config.n_blocks);
    for (int b = 0; b < config.n_blocks; ++b) {
        auto& blk = m.blocks[b];
        const auto idx = static_cast<std::uint64_t>(b);
        blk.w_q = random_matrix(config.d_model, config.d_model, derive_seed(seed, "w_q", idx));
        blk.w_k = random_matrix(config.d_model, config.d_model, derive_seed(seed, "w_k", idx));
        blk.w_v = random_matrix(config.d_model, config.d_model, derive_seed(seed, "w_v", idx));
        blk.w_o = random_matrix(config.d_model, config.d_model, derive_seed(seed, "w_o", idx));
        blk.w_up = random_matrix(config.d_ff, config.d_model, derive_seed(seed, "w_up", idx));
        blk.w_down = random_matrix(config.d_model, config.d_ff, derive_seed(seed, "w_down", idx));
        blk.ln1_gain.assign(config.d_model, 1.0);
        blk.ln1_bias.assign(config.d_model, 0.0);
        blk.ln2_gain.assign(config.d_model, 1.0);
        blk.ln2_bias.assign(config.d_model, 0.0);
    }
    return m;
}

// ---------------------------------------------------------------------------
// forward

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_derivative(double x) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    return cdf + x * phi;
}

Matrix layer_norm(const Matrix& x, const std::vector<double>& gain,
                  const std::vector<double>& bias) {
    const std::size_t d = x.rows(), t = x.cols();
    Matrix y(d, t);
    for (std::size_t c = 0; c < t; ++c) {
        double mu = 0.0;
        for (std::size_t i = 0; i < d; ++i) mu += x(i, c);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double e = x(i, c) - mu;
            var += e * e;
        }
        var /= static_cast<double>(d);
        const double inv_s = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t i = 0; i < d; ++i)
            y(i, c) = gain[i] * ((x(i, c) - mu) * inv_s) + bias[i];
    }
    return y;
}

// dL/dx for y = gain .* normalize(x) + bias, given dL/dy.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& x, const std::vector<double>& gain) {
    const std::size_t d = x.rows(), t = x.cols();
    Matrix dx(d, t);
    std::vector<double> xhat(d);
    for (std::size_t c = 0; c < t; ++c) {
        double mu = 0.0;
        for (std::size_t i = 0; i < d; ++i) mu += x(i, c);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double e = x(i, c) - mu;
            var += e * e;
        }
        var /= static_cast<double>(d);
        const double inv_s = 1.0 / std::sqrt(var + kLayerNormEps);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            xhat[i] = (x(i, c) - mu) * inv_s;
            const double dxhat = gain[i] * dy(i, c);
            m1 += dxhat;
            m2 += dxhat * xhat[i];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double dxhat = gain[i] * dy(i, c);
            dx(i, c) = (dxhat - m1 - xhat[i] * m2) * inv_s;
        }
    }
    return dx;
}

// Causal softmax over scaled q^T k scores; row i covers key positions <= i.
Matrix attention_probs(const Matrix& q, const Matrix& k) {
    const std::size_t d = q.rows(), t = q.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix probs = gemm(transpose(q), k);
    for (std::size_t i = 0; i < t; ++i) {
        double* row = probs.row(i);
        double max_s = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) max_s = std::max(max_s, row[j] * scale);
        double denom = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
            row[j] = std::exp(row[j] * scale - max_s);
            denom += row[j];
        }
        for (std::size_t j = 0; j <= i; ++j) row[j] /= denom;
        for (std::size_t j = i + 1; j < t; ++j) row[j] = 0.0;
    }
    return probs;
}

} // namespace

Matrix embed_sequence(const ToyVlm& model, const std::vector<double>& vision_feature,
                      const std::vector<int>& tokens) {
    const auto& cfg = model.config;
    const std::size_t d = cfg.d_model;
    const std::size_t t_total = cfg.n_prefix + tokens.size();
    Matrix x(d, t_total);
    // prefix token = projector * vision feature, replicated n_prefix times
    std::vector<double> prefix(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < vision_feature.size(); ++j)
            acc += model.projector(i, j) * vision_feature[j];
        prefix[i] = acc;
    }
    for (int c = 0; c < cfg.n_prefix; ++c)
        for (std::size_t i = 0; i < d; ++i) x(i, c) = prefix[i];
    for (std::size_t t = 0; t < tokens.size(); ++t)
        for (std::size_t i = 0; i < d; ++i)
            x(i, cfg.n_prefix + t) = model.embedding(tokens[t], i);
    return x;
}

Matrix apply_block(const BlockWeights& block, const Matrix& x_in, BlockCache* cache) {
    Matrix z1 = layer_norm(x_in, block.ln1_gain, block.ln1_bias);
    Matrix q = gemm(block.w_q, z1);
    Matrix k = gemm(block.w_k, z1);
    Matrix v = gemm(block.w_v, z1);
    Matrix probs = attention_probs(q, k);
    Matrix mix = gemm(v, transpose(probs));
    const Matrix attn = gemm(block.w_o, mix);

    Matrix h = x_in;
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += attn.data()[i];

    Matrix z2 = layer_norm(h, block.ln2_gain, block.ln2_bias);
    Matrix up = gemm(block.w_up, z2);
    Matrix g = up;
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = gelu(g.data()[i]);
    const Matrix down = gemm(block.w_down, g);

    Matrix x_out = h;
    for (std::size_t i = 0; i < x_out.size(); ++i) x_out.data()[i] += down.data()[i];

    if (cache) {
        cache->x_in = x_in;
        cache->z1 = std::move(z1);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->mix = std::move(mix);
        cache->h = std::move(h);
        cache->z2 = std::move(z2);
        cache->up = std::move(up);
        cache->g = std::move(g);
    }
    return x_out;
}

ForwardResult forward(const ToyVlm& model, const Sample& sample) {
    validate_sample(sample, model.config);
    const auto& cfg = model.config;
    ForwardResult out;
    out.cache.blocks.resize(cfg.n_blocks);
    Matrix x = embed_sequence(model, sample.vision_feature, sample.tokens);
    for (int b = 0; b < cfg.n_blocks; ++b) x = apply_block(model.blocks[b], x, &out.cache.blocks[b]);
    out.cache.x_final = x;

    const std::size_t n_text = sample.tokens.size();
    out.logits = Matrix(n_text, cfg.vocab_size);
    for (std::size_t t = 0; t < n_text; ++t) {
        const std::size_t col = cfg.n_prefix + t;
        for (int c = 0; c < cfg.vocab_size; ++c) {
            double acc = 0.0;
            for (int dd = 0; dd < cfg.d_model; ++dd) acc += model.head(c, dd) * x(dd, col);
            out.logits(t, c) = acc;
        }
    }
    return out;
}

Matrix forward_hidden(const ToyVlm& model, const std::vector<double>& vision_feature,
                      const std::vector<int>& tokens) {
    Matrix x = embed_sequence(model, vision_feature, tokens);
    for (const auto& block : model.blocks) x = apply_block(block, x, nullptr);
    return x;
}

// ---------------------------------------------------------------------------
// loss and projector gradient

namespace {

// Sum of next-token cross-entropy terms for one sample (not yet averaged).
double sample_ce_sum(const Matrix& logits, const std::vector<int>& targets) {
    double total = 0.0;
    const std::size_t vocab = logits.cols();
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const double* row = logits.row(t);
        double max_l = row[0];
        for (std::size_t c = 1; c < vocab; ++c) max_l = std::max(max_l, row[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) denom += std::exp(row[c] - max_l);
        total += (std::log(denom) + max_l) - row[targets[t]];
    }
    return total;
}

Matrix backward_block(const BlockWeights& block, const BlockCache& cache, const Matrix& dx_out) {
    const std::size_t t = cache.x_in.cols();

    // MLP branch
    const Matrix dg = gemm(transpose(block.w_down), dx_out);
    Matrix dup = dg;
    for (std::size_t i = 0; i < dup.size(); ++i)
        dup.data()[i] *= gelu_derivative(cache.up.data()[i]);
    const Matrix dz2 = gemm(transpose(block.w_up), dup);

    Matrix dh = dx_out;
    {
        const Matrix dh_ln = layer_norm_backward(dz2, cache.h, block.ln2_gain);
        for (std::size_t i = 0; i < dh.size(); ++i) dh.data()[i] += dh_ln.data()[i];
    }

    // attention branch
    const Matrix dmix = gemm(transpose(block.w_o), dh);
    const Matrix dv = gemm(dmix, cache.probs);
    const Matrix dp = gemm(transpose(dmix), cache.v);

    Matrix ds(t, t);
    for (std::size_t i = 0; i < t; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) dot += dp(i, j) * cache.probs(i, j);
        for (std::size_t j = 0; j <= i; ++j)
            ds(i, j) = cache.probs(i, j) * (dp(i, j) - dot);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(cache.q.rows()));
    Matrix dq = gemm(cache.k, transpose(ds));
    Matrix dk = gemm(cache.q, ds);
    for (std::size_t i = 0; i < dq.size(); ++i) dq.data()[i] *= scale;
    for (std::size_t i = 0; i < dk.size(); ++i) dk.data()[i] *= scale;

    Matrix dz1 = gemm(transpose(block.w_q), dq);
    {
        const Matrix a = gemm(transpose(block.w_k), dk);
        const Matrix b = gemm(transpose(block.w_v), dv);
        for (std::size_t i = 0; i < dz1.size(); ++i)
            dz1.data()[i] += a.data()[i] + b.data()[i];
    }

    Matrix dx_in = dh;
    {
        const Matrix dx_ln = layer_norm_backward(dz1, cache.x_in, block.ln1_gain);
        for (std::size_t i = 0; i < dx_in.size(); ++i) dx_in.data()[i] += dx_ln.data()[i];
    }
    return dx_in;
}

// Unnormalized d(sum of CE)/d(projector) for one sample.
Matrix backward_projector_sample(const ToyVlm& model, const Sample& sample,
                                 const ForwardResult& fr) {
    const auto& cfg = model.config;
    const std::size_t d = cfg.d_model;
    const std::size_t t_total = cfg.n_prefix + sample.tokens.size();

    Matrix dx(d, t_total);
    const std::size_t vocab = cfg.vocab_size;
    std::vector<double> dlogit(vocab);
    for (std::size_t t = 0; t < sample.targets.size(); ++t) {
        const double* row = fr.logits.row(t);
        double max_l = row[0];
        for (std::size_t c = 1; c < vocab; ++c) max_l = std::max(max_l, row[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) denom += std::exp(row[c] - max_l);
        for (std::size_t c = 0; c < vocab; ++c)
            dlogit[c] = std::exp(row[c] - max_l) / denom;
        dlogit[sample.targets[t]] -= 1.0;

        const std::size_t col = cfg.n_prefix + t;
        for (std::size_t c = 0; c < vocab; ++c) {
            const double g = dlogit[c];
            for (std::size_t dd = 0; dd < d; ++dd) dx(dd, col) += model.head(c, dd) * g;
        }
    }

    for (int b = cfg.n_blocks - 1; b >= 0; --b)
        dx = backward_block(model.blocks[b], fr.cache.blocks[b], dx);

    Matrix dwp(d, cfg.d_vision);
    for (int c = 0; c < cfg.n_prefix; ++c)
        for (std::size_t i = 0; i < d; ++i)
            for (int j = 0; j < cfg.d_vision; ++j)
                dwp(i, j) += dx(i, c) * sample.vision_feature[j];
    return dwp;
}

} // namespace

double sample_loss_sum(const ToyVlm& model, const Sample& sample) {
    validate_sample(sample, model.config);
    if (sample.targets.empty())
        throw ContractViolation("sample_loss_sum: sample has no target positions");
    const ForwardResult fr = forward(model, sample);
    return sample_ce_sum(fr.logits, sample.targets);
}

Matrix sample_projector_grad_raw(const ToyVlm& model, const Sample& sample) {
    validate_sample(sample, model.config);
    if (sample.targets.empty())
        throw ContractViolation("sample_projector_grad_raw: sample has no target positions");
    const ForwardResult fr = forward(model, sample);
    return backward_projector_sample(model, sample, fr);
}

double loss(const ToyVlm& model, const std::vector<Sample>& batch) {
    if (batch.empty()) throw ContractViolation("loss: empty batch");
    for (const auto& s : batch) {
        validate_sample(s, model.config);
        if (s.targets.empty()) throw ContractViolation("loss: sample has no target positions");
    }
    std::vector<double> sums(batch.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i)
        sums[i] = sample_loss_sum(model, batch[i]);
    // fixed-order reduction: identical for any thread count
    double total = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        total += sums[i];
        n += static_cast<long>(batch[i].targets.size());
    }
    return total / static_cast<double>(n);
}

Matrix grad_projector(const ToyVlm& model, const std::vector<Sample>& batch) {
    if (batch.empty()) throw ContractViolation("grad_projector: empty batch");
    for (const auto& s : batch) {
        validate_sample(s, model.config);
        if (s.targets.empty()) throw ContractViolation("grad_projector: sample has no target positions");
    }
    std::vector<Matrix> grads(batch.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i)
        grads[i] = sample_projector_grad_raw(model, batch[i]);
    Matrix total(model.config.d_model, model.config.d_vision);
    long n = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t k = 0; k < total.size(); ++k) total.data()[k] += grads[i].data()[k];
        n += static_cast<long>(batch[i].targets.size());
    }
    for (std::size_t k = 0; k < total.size(); ++k) total.data()[k] /= static_cast<double>(n);
    return total;
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kMagic[4] = {'E', 'V', 'P', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void write_named_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(m.rows()));
    write_u32(os, static_cast<std::uint32_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_named_matrix(std::istream& is, const std::string& expected_name) {
    const std::uint32_t len = read_u32(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (name != expected_name)
        throw ContractViolation("checkpoint: expected matrix '" + expected_name + "', found '" +
                                name + "'");
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    Matrix m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw ContractViolation("checkpoint: truncated matrix '" + expected_name + "'");
    return m;
}

void write_vector(std::ostream& os, const std::vector<double>& v) {
    write_u32(os, static_cast<std::uint32_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_vector(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}

} // namespace

void save_model(const std::string& path, const ToyVlm& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ContractViolation("save_model: cannot open " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    const auto& c = model.config;
    for (int v : {c.d_vision, c.d_model, c.n_blocks, c.d_ff, c.vocab_size, c.seq_len, c.n_prefix})
        write_u32(os, static_cast<std::uint32_t>(v));
    write_named_matrix(os, "projector", model.projector);
    write_named_matrix(os, "embedding", model.embedding);
    write_named_matrix(os, "head", model.head);
    for (int b = 0; b < c.n_blocks; ++b) {
        const auto& blk = model.blocks[b];
        const std::string prefix = "block" + std::to_string(b) + "/";
        for (int r = 0; r < kRolesPerBlock; ++r) {
            const auto role = static_cast<MatrixRole>(r);
            write_named_matrix(os, prefix + role_name(role), blk.matrix(role));
        }
        write_vector(os, blk.ln1_gain);
        write_vector(os, blk.ln1_bias);
        write_vector(os, blk.ln2_gain);
        write_vector(os, blk.ln2_bias);
    }
    if (!os) throw ContractViolation("save_model: write failed for " + path);
}

ToyVlm load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractViolation("load_model: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ContractViolation("load_model: bad magic in " + path);
    if (read_u32(is) != kVersion) throw ContractViolation("load_model: unsupported version");
    ToyVlm m;
    auto& c = m.config;
    c.d_vision = static_cast<int>(read_u32(is));
    c.d_model = static_cast<int>(read_u32(is));
    c.n_blocks = static_cast<int>(read_u32(is));
    c.d_ff = static_cast<int>(read_u32(is));
    c.vocab_size = static_cast<int>(read_u32(is));
    c.seq_len = static_cast<int>(read_u32(is));
    c.n_prefix = static_cast<int>(read_u32(is));
    c.validate();
    m.projector = read_named_matrix(is, "projector");
    m.embedding = read_named_matrix(is, "embedding");
    m.head = read_named_matrix(is, "head");
    m.blocks.resize(c.n_blocks);
    for (int b = 0; b < c.n_blocks; ++b) {
        auto& blk = m.blocks[b];
        const std::string prefix = "block" + std::to_string(b) + "/";
        for (int r = 0; r < kRolesPerBlock; ++r) {
            const auto role = static_cast<MatrixRole>(r);
            blk.matrix(role) = read_named_matrix(is, prefix + role_name(role));
        }
        blk.ln1_gain = read_vector(is);
        blk.ln1_bias = read_vector(is);
        blk.ln2_gain = read_vector(is);
        blk.ln2_bias = read_vector(is);
    }
    if (!is) throw ContractViolation("load_model: truncated file " + path);
    return m;
}

} // namespace evoprune
