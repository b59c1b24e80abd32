#pragma once

#include <array>
#include <string>
#include <vector>

#include "evoprune/model.hpp"
#include "evoprune/policy.hpp"

namespace evoprune {

// Layer input Hessian H = X X^T normalized by the token count, accumulated in
// a fixed batch order.
struct LayerHessian {
    Matrix h;                // in_dim x in_dim
    long n_accumulated = 0;  // token columns folded in

    int in_dim() const { return static_cast<int>(h.rows()); }
    void accumulate(const Matrix& inputs);
};

LayerHessian accumulate_hessian(const Matrix& inputs);

struct PruneResult {
    Matrix mask;    // {0,1}, zeros(mask) == round(ratio * numel) exactly
    Matrix weight;  // compensated, exactly zero where mask is zero
    double realized_ratio = 0.0;
};

// Block-wise OBS pruning of one weight matrix. Columns are processed left to
// right in blocks of `blocksize`; per block, the entries with the lowest
// scores w^2 / [H^-1]_jj are zeroed (a running remainder keeps the global
// zero count exact), and each zeroed entry compensates all columns to its
// right via the Cholesky factor of H^-1.
PruneResult obs_prune_layer(const Matrix& w, const LayerHessian& hess, double ratio,
                            int blocksize, double damping);

// masks[block][role] in the prunable-matrix order.
struct MaskSet {
    std::vector<std::array<Matrix, kRolesPerBlock>> masks;

    std::size_t zero_count() const;
    std::size_t total_count() const;
};

struct PolicyApplication {
    ToyVlm model;
    MaskSet masks;
    double realized_sparsity = 0.0;
};

// Prunes blocks strictly in order 0..n_blocks-1. Calibration activations for
// block i come from forwarding the calib batch through the already-pruned
// blocks < i; the six matrices of block i all share that one activation
// capture and are pruned at ratio policy[i]. Projector, embedding, head and
// norms are untouched.
PolicyApplication apply_policy(const ToyVlm& model, const Policy& policy,
                               const std::vector<Sample>& calib, double damping,
                               int blocksize = 16);

// Zeroes masked entries; kept entries are copied bit-exactly.
ToyVlm apply_masks(const ToyVlm& model, const MaskSet& masks);

// Per-layer bitmap dump, named by block and matrix role.
void export_masks(const std::string& path, const MaskSet& masks);

} // namespace evoprune
