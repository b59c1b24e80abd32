#include "evoprune/search.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "evoprune/parallel.hpp"

namespace evoprune {

std::vector<int> select_elites(const std::vector<FitnessRecord>& records, int k_elite) {
    std::vector<int> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return records[a].fitness < records[b].fitness;
    });
    order.resize(std::min<std::size_t>(order.size(), k_elite));
    return order;
}

RoundResult evolve_round(const Population& pop, const ToyVlm& model,
                         const std::vector<Sample>& proxy, double eta, int k_elite,
                         double damping, int blocksize, std::uint64_t master_seed,
                         double mutation_rate) {
    const int n_pop = static_cast<int>(pop.members.size());
    if (n_pop < 1) throw ContractViolation("evolve_round: empty population");
    if (k_elite < 1 || k_elite > n_pop)
        throw ContractViolation("evolve_round: k_elite must be in [1, n_pop]");
    for (int m = 0; m < n_pop; ++m)
        pop.members[m].require_feasible("evolve_round member " + std::to_string(m));

    // fitness cache: identical policies in one generation are scored once
    std::map<std::vector<int>, int> unique_of;
    std::vector<const Policy*> uniques;
    std::vector<int> member_unique(n_pop);
    for (int m = 0; m < n_pop; ++m) {
        auto [it, inserted] = unique_of.try_emplace(pop.members[m].steps(),
                                                    static_cast<int>(uniques.size()));
        if (inserted) uniques.push_back(&pop.members[m]);
        member_unique[m] = it->second;
    }

    std::vector<FitnessRecord> unique_recs(uniques.size());
    std::vector<std::string> errors(uniques.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(uniques.size()); ++u) {
        try {
            const PolicyApplication app =
                apply_policy(model, *uniques[u], proxy, damping, blocksize);
            unique_recs[u] = fitness(app.model, proxy, eta);
            unique_recs[u].policy = *uniques[u];
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    }
    for (std::size_t u = 0; u < uniques.size(); ++u) {
        if (!errors[u].empty())
            throw ContractViolation("evolve_round: candidate [" + uniques[u]->to_string() +
                                    "] failed: " + errors[u]);
    }

    RoundResult out;
    out.records.reserve(n_pop);
    for (int m = 0; m < n_pop; ++m) {
        FitnessRecord rec = unique_recs[member_unique[m]];
        rec.eval_seed = derive_seed(master_seed, "eval",
                                    (static_cast<std::uint64_t>(pop.generation) << 20) +
                                        static_cast<std::uint64_t>(m));
        out.records.push_back(std::move(rec));
    }

    const std::vector<int> elites = select_elites(out.records, k_elite);
    out.next.generation = pop.generation + 1;
    out.next.members.reserve(n_pop);
    for (int e : elites) out.next.members.push_back(pop.members[e]);

    for (int slot = k_elite; slot < n_pop; ++slot) {
        Rng rng(derive_seed(master_seed, "repro",
                            (static_cast<std::uint64_t>(pop.generation) << 20) +
                                static_cast<std::uint64_t>(slot)));
        // tournament of two uniform elite picks; elites are fitness-sorted so
        // the lower rank wins
        auto tournament = [&]() {
            const auto a = rng.below(elites.size());
            const auto b = rng.below(elites.size());
            return std::min(a, b);
        };
        const auto pa = tournament();
        const auto pb = tournament();
        Policy child = crossover(out.next.members[pa], out.next.members[pb], rng);
        child = mutate(child, mutation_rate, rng);
        out.next.members.push_back(std::move(child));
    }
    return out;
}

} // namespace evoprune
