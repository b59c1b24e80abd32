#pragma once

#include <cstdint>
#include <vector>

#include "evoprune/fitness.hpp"
#include "evoprune/obs.hpp"
#include "evoprune/policy.hpp"

namespace evoprune {

struct RoundResult {
    Population next;
    std::vector<FitnessRecord> records;  // one per member, in member order
};

// Member indices of the k lowest-fitness records, ties broken by member
// index. Shared by evolve_round and the harness so both pick the same elites.
std::vector<int> select_elites(const std::vector<FitnessRecord>& records, int k_elite);

// One generation: every member is pruned from `model` via apply_policy and
// scored on the proxy data; the top k_elite lowest-fitness members survive
// unchanged and the remaining slots are offspring of two tournament-selected
// elites (crossover then mutation). Candidate evaluations run concurrently;
// all randomness is derived from (master_seed, generation, slot), so the
// result is independent of the schedule and thread count. Identical policies
// within a generation are scored once.
RoundResult evolve_round(const Population& pop, const ToyVlm& model,
                         const std::vector<Sample>& proxy, double eta, int k_elite,
                         double damping, int blocksize, std::uint64_t master_seed,
                         double mutation_rate);

} // namespace evoprune
