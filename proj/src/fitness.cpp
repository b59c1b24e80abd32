#include "evoprune/fitness.hpp"

#include <cmath>

#include "evoprune/textio.hpp"

namespace evoprune {

namespace {

constexpr double kNormFloor = 1e-12;

} // namespace

std::string FitnessRecord::to_line() const {
    return "policy=" + policy.to_string() + " proxy_loss=" + fmt_g17(proxy_loss) +
           " gen_proxy=" + fmt_g17(gen_proxy) + " fitness=" + fmt_g17(fitness) +
           " seed=" + std::to_string(eval_seed);
}

FitnessRecord FitnessRecord::from_line(const std::string& line, double p0) {
    FitnessRecord rec;
    auto field = [&](const std::string& key) -> std::string {
        const std::string needle = key + "=";
        const std::size_t at = line.find(needle);
        if (at == std::string::npos)
            throw ContractViolation("FitnessRecord: missing field '" + key + "' in: " + line);
        const std::size_t start = at + needle.size();
        const std::size_t end = line.find(' ', start);
        return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    };
    std::vector<double> ratios;
    {
        const std::string pol = field("policy");
        std::size_t pos = 0;
        while (pos < pol.size()) {
            std::size_t next = pol.find(',', pos);
            if (next == std::string::npos) next = pol.size();
            ratios.push_back(std::stod(pol.substr(pos, next - pos)));
            pos = next + 1;
        }
    }
    rec.policy = Policy::from_ratios(p0, ratios);
    rec.proxy_loss = std::stod(field("proxy_loss"));
    rec.gen_proxy = std::stod(field("gen_proxy"));
    rec.fitness = std::stod(field("fitness"));
    rec.eval_seed = std::stoull(field("seed"));
    return rec;
}

double rademacher_proxy(const ToyVlm& model) {
    const auto weights = prunable_matrices(model);
    double acc = 0.0;
    for (const Matrix* w : weights) acc += std::log(frobenius_norm(*w) + kNormFloor);
    return acc / static_cast<double>(weights.size());
}

FitnessRecord fitness(const ToyVlm& model, const std::vector<Sample>& proxy_data, double eta) {
    if (proxy_data.empty()) throw ContractViolation("fitness: empty proxy data");
    if (eta < 0.0) throw ContractViolation("fitness: eta must be >= 0");
    FitnessRecord rec;
    rec.proxy_loss = loss(model, proxy_data);
    rec.gen_proxy = rademacher_proxy(model);
    rec.fitness = rec.proxy_loss + eta * rec.gen_proxy;
    return rec;
}

} // namespace evoprune
