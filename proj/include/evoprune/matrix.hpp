#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoprune {

// Contract violations (bad dimensions, invalid arguments). Numeric failures
// of the Hessian factorization get their own type so pruning code can
// annotate them with layer context.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SingularHessianError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Weights, masks, activation batches and
// Hessians all use this one carrier type.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Exact bit-level equality; distinguishes -0.0 from 0.0, NaN never equal.
bool bit_equal(const Matrix& a, const Matrix& b);

// Throws ContractViolation if any entry is NaN or infinite.
void require_finite(const Matrix& m, const std::string& context);

Matrix transpose(const Matrix& m);

// c = a * b. Per output entry the summation runs over k in ascending order,
// independent of the OpenMP schedule (rows are distributed, never split), so
// repeated calls are bit-identical for any thread count.
Matrix gemm(const Matrix& a, const Matrix& b);

// sqrt of the sum of squared entries, fixed accumulation order.
double frobenius_norm(const Matrix& m);

// x * x^T with the upper triangle computed and mirrored, so the result is
// exactly symmetric.
Matrix sym_outer(const Matrix& x);

// Lower-triangular L with m = L * L^T. Throws SingularHessianError when a
// pivot is not strictly positive and finite.
Matrix cholesky_lower(const Matrix& m);

// (h + damping * mean(diag h) * I)^-1 via Cholesky; the result is exactly
// symmetric. `h` must be square and symmetric, damping >= 0.
Matrix spd_inverse(const Matrix& h, double damping);

} // namespace evoprune
