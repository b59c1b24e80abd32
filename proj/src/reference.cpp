#include "evoprune/reference.hpp"

#include <cmath>

namespace evoprune::ref {

Matrix gemm(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ContractViolation("ref::gemm: dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    return c;
}

double frobenius_norm(const Matrix& m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += m.data()[i] * m.data()[i];
    return std::sqrt(acc);
}

Matrix sym_outer(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.cols(); ++k) acc += x(i, k) * x(j, k);
            h(i, j) = acc;
            h(j, i) = acc;
        }
    return h;
}

double batch_loss(const ToyVlm& model, const std::vector<Sample>& batch) {
    if (batch.empty()) throw ContractViolation("ref::batch_loss: empty batch");
    double total = 0.0;
    long n = 0;
    for (const auto& sample : batch) {
        total += sample_loss_sum(model, sample);
        n += static_cast<long>(sample.targets.size());
    }
    return total / static_cast<double>(n);
}

Matrix batch_grad_projector(const ToyVlm& model, const std::vector<Sample>& batch) {
    if (batch.empty()) throw ContractViolation("ref::batch_grad_projector: empty batch");
    Matrix total(model.config.d_model, model.config.d_vision);
    long n = 0;
    for (const auto& sample : batch) {
        const Matrix g = sample_projector_grad_raw(model, sample);
        for (std::size_t k = 0; k < total.size(); ++k) total.data()[k] += g.data()[k];
        n += static_cast<long>(sample.targets.size());
    }
    for (std::size_t k = 0; k < total.size(); ++k) total.data()[k] /= static_cast<double>(n);
    return total;
}

} // namespace evoprune::ref
