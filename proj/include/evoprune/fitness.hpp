#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoprune/model.hpp"
#include "evoprune/policy.hpp"

namespace evoprune {

// One scored candidate. fitness == proxy_loss + eta * gen_proxy, lower is
// better.
struct FitnessRecord {
    Policy policy;
    double proxy_loss = 0.0;
    double gen_proxy = 0.0;
    double fitness = 0.0;
    std::uint64_t eval_seed = 0;

    std::string to_line() const;
    static FitnessRecord from_line(const std::string& line, double p0);
};

// Log-space surrogate for the product of prunable-matrix Frobenius norms:
// (1/K) * sum_i ln(||W_i||_F + 1e-12). A strictly increasing transform of the
// raw product, so policy rankings are preserved while 24-factor products
// cannot overflow.
double rademacher_proxy(const ToyVlm& model);

// proxy loss + eta * generalization proxy. The record's policy/eval_seed are
// left for the caller to fill.
FitnessRecord fitness(const ToyVlm& model, const std::vector<Sample>& proxy_data, double eta);

} // namespace evoprune
