#pragma once

#include <vector>

#include "evoprune/matrix.hpp"
#include "evoprune/model.hpp"

// Serial reference implementations of the OpenMP-parallel kernels. Kept for
// testing and for the benchmark tool: each pair must agree bit-for-bit, since
// the parallel versions only distribute independent work units and never
// reassociate a reduction.
namespace evoprune::ref {

// naive serial triple loop, k-ascending accumulation per entry
Matrix gemm(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);

Matrix sym_outer(const Matrix& x);

// serial sample loop with the same sample-order reduction as loss()
double batch_loss(const ToyVlm& model, const std::vector<Sample>& batch);

Matrix batch_grad_projector(const ToyVlm& model, const std::vector<Sample>& batch);

} // namespace evoprune::ref
