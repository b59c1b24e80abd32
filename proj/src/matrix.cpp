#include "evoprune/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace evoprune {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void require_finite(const Matrix& m, const std::string& context) {
    const double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(p[i])) {
            throw ContractViolation(context + ": non-finite entry at flat index " +
                                    std::to_string(i));
        }
    }
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix gemm(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractViolation("gemm: dimension mismatch, a is " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + ", b is " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
    Matrix c(m, n);
#pragma omp parallel for schedule(static) if (m * n * kk > 32768)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        double* crow = c.row(static_cast<std::size_t>(i));
        const double* arow = a.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < kk; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    require_finite(c, "gemm");
    return c;
}

double frobenius_norm(const Matrix& m) {
    double acc = 0.0;
    const double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) acc += p[i] * p[i];
    return std::sqrt(acc);
}

Matrix sym_outer(const Matrix& x) {
    const std::size_t n = x.rows(), t = x.cols();
    Matrix h(n, n);
#pragma omp parallel for schedule(static) if (n * n * t > 32768)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            const double* xi = x.row(i);
            const double* xj = x.row(j);
            for (std::size_t k = 0; k < t; ++k) acc += xi[k] * xj[k];
            h(i, j) = acc;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) h(i, j) = h(j, i);
    require_finite(h, "sym_outer");
    return h;
}

Matrix cholesky_lower(const Matrix& m) {
    if (m.rows() != m.cols()) throw ContractViolation("cholesky_lower: matrix not square");
    const std::size_t n = m.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw SingularHessianError("cholesky: non-positive pivot at column " +
                                       std::to_string(j));
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = m(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            l(i, j) = acc / ljj;
        }
    }
    return l;
}

Matrix spd_inverse(const Matrix& h, double damping) {
    if (h.rows() != h.cols()) throw ContractViolation("spd_inverse: matrix not square");
    if (damping < 0.0) throw ContractViolation("spd_inverse: negative damping");
    const std::size_t n = h.rows();
    if (n == 0) throw ContractViolation("spd_inverse: empty matrix");

    double max_abs = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) max_abs = std::max(max_abs, std::fabs(h.data()[i]));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::fabs(h(i, j) - h(j, i)) > 1e-12 * (1.0 + max_abs)) {
                throw ContractViolation("spd_inverse: matrix not symmetric at (" +
                                        std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }

    double mean_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_diag += h(i, i);
    mean_diag /= static_cast<double>(n);

    Matrix damped = h;
    for (std::size_t i = 0; i < n; ++i) damped(i, i) += damping * mean_diag;

    const Matrix l = cholesky_lower(damped);

    // K = L^-1 by forward substitution, then inv = K^T K (upper triangle
    // computed, mirrored) so the result is exactly symmetric.
    Matrix k(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        k(j, j) = 1.0 / l(j, j);
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t kk = j; kk < i; ++kk) acc += l(i, kk) * k(kk, j);
            k(i, j) = -acc / l(i, i);
        }
    }
    Matrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t kk = j; kk < n; ++kk) acc += k(kk, i) * k(kk, j);
            inv(i, j) = acc;
            inv(j, i) = acc;
        }
    }
    require_finite(inv, "spd_inverse");
    return inv;
}

} // namespace evoprune
