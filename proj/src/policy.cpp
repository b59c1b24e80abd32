#include "evoprune/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "evoprune/textio.hpp"

namespace evoprune {

Policy::Policy(double p0, std::vector<int> steps) : p0_(p0), steps_(std::move(steps)) {}

Policy Policy::center(double p0, int n_blocks) {
    return Policy(p0, std::vector<int>(n_blocks, 0));
}

Policy Policy::from_ratios(double p0, const std::vector<double>& ratios) {
    std::vector<int> steps;
    steps.reserve(ratios.size());
    for (double r : ratios) {
        const double raw = (r - p0) / kGridStep;
        const int s = static_cast<int>(std::lround(raw));
        if (std::fabs(raw - s) > 1e-9 / kGridStep || std::abs(s) > kGridHalfSpan)
            throw ContractViolation("Policy::from_ratios: ratio not on the grid");
        steps.push_back(s);
    }
    return Policy(p0, std::move(steps));
}

std::vector<double> Policy::ratios() const {
    std::vector<double> out;
    out.reserve(steps_.size());
    for (int s : steps_) out.push_back(p0_ + kGridStep * s);
    return out;
}

double Policy::mean_ratio() const {
    double acc = 0.0;
    for (int i = 0; i < size(); ++i) acc += ratio(i);
    return acc / size();
}

int Policy::step_sum() const {
    int acc = 0;
    for (int s : steps_) acc += s;
    return acc;
}

bool Policy::feasible() const {
    if (steps_.empty()) return false;
    for (int s : steps_) {
        if (std::abs(s) > kGridHalfSpan) return false;
        const double r = p0_ + kGridStep * s;
        if (r < -1e-12 || r > 1.0 + 1e-12) return false;
    }
    return 5 * std::abs(step_sum()) <= size();
}

void Policy::require_feasible(const std::string& context) const {
    if (!feasible())
        throw ContractViolation(context + ": infeasible policy [" + to_string() + "]");
}

std::string Policy::to_string() const {
    std::string out;
    char buf[40];
    for (int i = 0; i < size(); ++i) {
        if (i) out += ',';
        std::snprintf(buf, sizeof buf, "%.17g", ratio(i));
        out += buf;
    }
    return out;
}

Policy sample_policy(double p0, int n_blocks, Rng& rng) {
    if (p0 < 0.1 || p0 > 0.9)
        throw ContractViolation("sample_policy: p0 must be in [0.1, 0.9] so the grid fits [0, 1]");
    if (n_blocks < 1) throw ContractViolation("sample_policy: n_blocks must be >= 1");
    std::vector<int> steps(n_blocks);
    for (auto& s : steps)
        s = static_cast<int>(rng.below(2 * kGridHalfSpan + 1)) - kGridHalfSpan;
    return repair(Policy(p0, std::move(steps)), rng);
}

Policy repair(Policy policy, Rng& rng) {
    const int n = policy.size();
    if (n < 1) throw ContractViolation("repair: empty policy");
    std::vector<int> steps = policy.steps();
    int sum = policy.step_sum();
    while (5 * std::abs(sum) > n) {
        const int sign = sum > 0 ? 1 : -1;
        // genes on the heavy side; one of them always exists when |sum| > 0
        std::vector<int> offenders;
        for (int i = 0; i < n; ++i)
            if (steps[i] * sign > 0) offenders.push_back(i);
        const int pick = offenders[rng.below(offenders.size())];
        steps[pick] -= sign;
        sum -= sign;
    }
    Policy out(policy.p0(), std::move(steps));
    out.require_feasible("repair");
    return out;
}

Policy mutate(const Policy& policy, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw ContractViolation("mutate: rate must be in [0, 1]");
    std::vector<int> steps = policy.steps();
    for (auto& s : steps) {
        if (rng.uniform() < rate) {
            const int dir = rng.below(2) == 0 ? 1 : -1;
            s = std::max(-kGridHalfSpan, std::min(kGridHalfSpan, s + dir));
        }
    }
    return repair(Policy(policy.p0(), std::move(steps)), rng);
}

Policy crossover(const Policy& a, const Policy& b, Rng& rng) {
    if (a.size() != b.size() || a.p0() != b.p0())
        throw ContractViolation("crossover: incompatible policies");
    std::vector<int> steps(a.size());
    for (int i = 0; i < a.size(); ++i)
        steps[i] = rng.below(2) == 0 ? a.steps()[i] : b.steps()[i];
    return repair(Policy(a.p0(), std::move(steps)), rng);
}

std::string serialize_population(const Population& pop) {
    std::ostringstream os;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", pop.members.empty() ? 0.0 : pop.members[0].p0());
    os << "generation=" << pop.generation << " n=" << pop.members.size() << " p0=" << buf << "\n";
    for (const auto& m : pop.members) {
        for (int i = 0; i < m.size(); ++i) {
            if (i) os << ' ';
            os << m.steps()[i];
        }
        os << '\n';
    }
    return os.str();
}

Population deserialize_population(const std::string& text) {
    std::istringstream is(text);
    std::string header;
    if (!std::getline(is, header))
        throw ContractViolation("deserialize_population: empty text");
    long generation = 0;
    std::size_t n = 0;
    double p0 = 0.0;
    if (std::sscanf(header.c_str(), "generation=%ld n=%zu p0=%lf", &generation, &n, &p0) != 3)
        throw ContractViolation("deserialize_population: bad header");
    Population pop;
    pop.generation = generation;
    std::string line;
    while (pop.members.size() < n && std::getline(is, line)) {
        std::istringstream ls(line);
        std::vector<int> steps;
        int s;
        while (ls >> s) steps.push_back(s);
        pop.members.emplace_back(p0, std::move(steps));
    }
    if (pop.members.size() != n)
        throw ContractViolation("deserialize_population: truncated member list");
    return pop;
}

} // namespace evoprune
