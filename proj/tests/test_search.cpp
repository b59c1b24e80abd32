#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "evoprune/calib.hpp"
#include "evoprune/fitness.hpp"
#include "evoprune/search.hpp"
#include "evoprune/selfcheck.hpp"
#include "evoprune/space.hpp"

using namespace evoprune;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.d_vision = 8;
    cfg.d_model = 16;
    cfg.n_blocks = 4;
    cfg.d_ff = 32;
    cfg.vocab_size = 32;
    cfg.seq_len = 16;
    return cfg;
}

std::vector<Sample> proxy_for(const ModelConfig& cfg, int n, std::uint64_t seed) {
    return sample_dataset(make_teacher(cfg, seed), {n, cfg.seq_len, seed, DatasetSpec::Split::proxy});
}

} // namespace

// --- srm fitness -----------------------------------------------------------

TEST_CASE("rademacher proxy closed form for identity weights") {
    ModelConfig cfg;
    cfg.d_ff = 32;  // all six matrices square, 32x32
    ToyVlm m = init_model(cfg, 1);
    for (Matrix* w : prunable_matrices(m)) *w = Matrix::identity(32);
    CHECK(rademacher_proxy(m) == doctest::Approx(std::log(std::sqrt(32.0))).epsilon(1e-9));
    CHECK(rademacher_proxy(m) == doctest::Approx(1.7329).epsilon(1e-4));
}

TEST_CASE("masking half of one matrix strictly decreases the proxy") {
    const ModelConfig cfg = small_config();
    ToyVlm m = init_model(cfg, 2);
    const double before = rademacher_proxy(m);
    Matrix& w = m.blocks[1].w_up;
    for (std::size_t i = 0; i < w.size(); i += 2) w.data()[i] = 0.0;
    CHECK(rademacher_proxy(m) < before);
}

TEST_CASE("log-space proxy equals the direct product route at small K") {
    const ModelConfig cfg = small_config();  // K = 24 still fine in double
    ModelConfig two_blocks = cfg;
    two_blocks.n_blocks = 2;  // K = 12 per the ranking-preservation bound
    const ToyVlm m = init_model(two_blocks, 3);
    double product = 1.0;
    int k = 0;
    for (const Matrix* w : prunable_matrices(m)) {
        product *= frobenius_norm(*w);
        ++k;
    }
    CHECK(rademacher_proxy(m) ==
          doctest::Approx(std::log(product) / static_cast<double>(k)).epsilon(1e-10));
}

TEST_CASE("ranking preservation between log space and the direct product") {
    ModelConfig cfg = small_config();
    cfg.n_blocks = 2;
    for (int trial = 0; trial < 10; ++trial) {
        const ToyVlm a = init_model(cfg, 100 + trial);
        const ToyVlm b = init_model(cfg, 200 + trial);
        double pa = 1.0, pb = 1.0;
        for (const Matrix* w : prunable_matrices(a)) pa *= frobenius_norm(*w);
        for (const Matrix* w : prunable_matrices(b)) pb *= frobenius_norm(*w);
        const double ga = rademacher_proxy(a), gb = rademacher_proxy(b);
        CHECK(((ga > gb) == (pa > pb)));
    }
}

TEST_CASE("gen proxy of an all-zero prunable set stays finite at the floor") {
    const ModelConfig cfg = small_config();
    ToyVlm m = init_model(cfg, 99);
    for (Matrix* w : prunable_matrices(m)) *w = Matrix(w->rows(), w->cols());
    const double proxy = rademacher_proxy(m);
    CHECK(std::isfinite(proxy));
    CHECK(proxy == doctest::Approx(std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("fitness combines loss and proxy with the documented sign") {
    const ModelConfig cfg = small_config();
    const ToyVlm m = init_model(cfg, 4);
    const auto proxy = proxy_for(cfg, 6, 5);
    const FitnessRecord zero = fitness(m, proxy, 0.0);
    CHECK(zero.fitness == zero.proxy_loss);  // exact: adding 0 * finite
    const FitnessRecord one = fitness(m, proxy, 1.0);
    CHECK(one.fitness - zero.fitness == doctest::Approx(one.gen_proxy).epsilon(1e-12));
    CHECK(one.gen_proxy == zero.gen_proxy);
    CHECK_THROWS_AS(fitness(m, {}, 0.1), ContractViolation);
}

TEST_CASE("fitness record line round-trips") {
    FitnessRecord rec;
    rec.policy = Policy(0.5, {1, -1, 0, 0});
    rec.proxy_loss = 3.25;
    rec.gen_proxy = -0.125;
    rec.fitness = 3.2375;
    rec.eval_seed = 77;
    const FitnessRecord back = FitnessRecord::from_line(rec.to_line(), 0.5);
    CHECK(back.policy == rec.policy);
    CHECK(back.proxy_loss == rec.proxy_loss);
    CHECK(back.gen_proxy == rec.gen_proxy);
    CHECK(back.fitness == rec.fitness);
    CHECK(back.eval_seed == rec.eval_seed);
}

// --- policy ------------------------------------------------------------------

TEST_CASE("single-block sampling can only return the center") {
    Rng rng(10);
    for (int i = 0; i < 50; ++i) {
        const Policy p = sample_policy(0.5, 1, rng);
        REQUIRE(p.size() == 1);
        CHECK(p.ratio(0) == 0.5);
    }
}

TEST_CASE("sampled policies always satisfy the invariants") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const Policy p = sample_policy(0.5, 4, rng);
        CHECK(p.feasible());
        for (int b = 0; b < p.size(); ++b) {
            CHECK(p.ratio(b) >= 0.4 - 1e-12);
            CHECK(p.ratio(b) <= 0.6 + 1e-12);
        }
    }
}

TEST_CASE("per-gene marginals cover all five grid points at n_blocks=8") {
    Rng rng(12);
    std::vector<std::set<int>> seen(8);
    for (int i = 0; i < 10000; ++i) {
        const Policy p = sample_policy(0.4, 8, rng);
        for (int b = 0; b < 8; ++b) seen[b].insert(p.steps()[b]);
    }
    for (const auto& s : seen) CHECK(s.size() == 5);
}

TEST_CASE("repair leaves feasible policies unchanged and fixes any grid policy") {
    Rng rng(13);
    const Policy ok(0.5, {1, -1, 0, 0});
    CHECK(repair(ok, rng) == ok);

    const Policy heavy(0.5, {2, 2, 2, 2});
    const Policy fixed = repair(heavy, rng);
    CHECK(fixed.feasible());
    CHECK(std::fabs(fixed.mean_ratio() - 0.5) <= 0.01 + 1e-12);

    for (int i = 0; i < 1000; ++i) {
        std::vector<int> steps(6);
        for (auto& s : steps) s = static_cast<int>(rng.below(5)) - 2;
        CHECK(repair(Policy(0.45, steps), rng).feasible());
    }
}

TEST_CASE("mutation and crossover preserve the invariants") {
    Rng rng(14);
    const Policy a = sample_policy(0.5, 6, rng);
    const Policy b = sample_policy(0.5, 6, rng);
    CHECK(mutate(a, 0.0, rng) == a);
    CHECK(crossover(a, a, rng) == a);
    for (int i = 0; i < 10000; ++i) {
        const Policy m = mutate(a, 0.2, rng);
        const Policy c = crossover(a, b, rng);
        CHECK(m.feasible());
        CHECK(c.feasible());
    }
}

TEST_CASE("from_ratios rejects off-grid ratios") {
    CHECK_THROWS_AS(Policy::from_ratios(0.5, {0.47}), ContractViolation);
    const Policy p = Policy::from_ratios(0.5, {0.45, 0.55});
    CHECK(p.steps() == std::vector<int>{-1, 1});
}

TEST_CASE("population snapshot round-trips") {
    Rng rng(15);
    Population pop;
    pop.generation = 3;
    for (int i = 0; i < 5; ++i) pop.members.push_back(sample_policy(0.5, 4, rng));
    const Population back = deserialize_population(serialize_population(pop));
    CHECK(back.generation == pop.generation);
    CHECK(back.members == pop.members);
}

// --- evolve_round ------------------------------------------------------------

TEST_CASE("a population of identical policies is a fixed point at zero mutation") {
    const ModelConfig cfg = small_config();
    const ToyVlm m = init_model(cfg, 20);
    const auto proxy = proxy_for(cfg, 6, 21);
    Population pop;
    pop.members.assign(6, Policy(0.5, {1, -1, 0, 0}));
    const RoundResult rr = evolve_round(pop, m, proxy, 0.1, 2, 0.01, 16, 99, 0.0);
    REQUIRE(rr.next.members.size() == 6);
    for (const auto& mem : rr.next.members) CHECK(mem == pop.members[0]);
    CHECK(rr.next.generation == 1);
    // identical policies share one evaluation: identical numbers
    for (const auto& rec : rr.records) {
        CHECK(rec.fitness == rr.records[0].fitness);
        CHECK(rec.proxy_loss == rr.records[0].proxy_loss);
    }
}

TEST_CASE("elitism: best fitness is non-increasing over rounds at a fixed model") {
    const ModelConfig cfg = small_config();
    const ToyVlm m = init_model(cfg, 22);
    const auto proxy = proxy_for(cfg, 8, 23);
    Population pop;
    Rng rng(24);
    for (int i = 0; i < 8; ++i) pop.members.push_back(sample_policy(0.5, cfg.n_blocks, rng));

    double prev_best = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 5; ++round) {
        const RoundResult rr = evolve_round(pop, m, proxy, 0.1, 3, 0.01, 16, 7, 0.2);
        double best = rr.records[0].fitness;
        for (const auto& rec : rr.records) best = std::min(best, rec.fitness);
        CHECK(best <= prev_best);
        prev_best = best;
        pop = rr.next;
    }
}

TEST_CASE("evolve_round is deterministic generation by generation") {
    const ModelConfig cfg = small_config();
    const ToyVlm m = init_model(cfg, 25);
    const auto proxy = proxy_for(cfg, 6, 26);
    auto run = [&]() {
        Population pop;
        Rng rng(27);
        for (int i = 0; i < 6; ++i) pop.members.push_back(sample_policy(0.5, cfg.n_blocks, rng));
        std::vector<Population> gens;
        for (int round = 0; round < 3; ++round) {
            const RoundResult rr = evolve_round(pop, m, proxy, 0.1, 2, 0.01, 16, 31, 0.2);
            pop = rr.next;
            gens.push_back(pop);
        }
        return gens;
    };
    const auto a = run();
    const auto b = run();
    for (std::size_t g = 0; g < a.size(); ++g) CHECK(a[g].members == b[g].members);
}

TEST_CASE("evolve_round rejects infeasible members at entry") {
    const ModelConfig cfg = small_config();
    const ToyVlm m = init_model(cfg, 28);
    const auto proxy = proxy_for(cfg, 4, 29);
    Population pop;
    pop.members.assign(3, Policy(0.5, {2, 2, 2, 2}));  // mean far above the bound
    CHECK_THROWS_AS(evolve_round(pop, m, proxy, 0.1, 1, 0.01, 16, 1, 0.2), ContractViolation);
}

TEST_CASE("search exploits a planted cheap-to-prune block") {
    const ModelConfig cfg = small_config();
    const auto proxy = proxy_for(cfg, 12, 30);
    int wins = 0;
    for (int seed = 1; seed <= 10; ++seed) {
        ToyVlm m = init_model(cfg, 1000 + seed);
        // block 0 carries almost no signal, so pruning it is nearly free
        for (int r = 0; r < kRolesPerBlock; ++r) {
            Matrix& w = m.blocks[0].matrix(static_cast<MatrixRole>(r));
            for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] *= 1e-3;
        }
        Population pop;
        for (int i = 0; i < 8; ++i) {
            Rng rng(derive_seed(seed, "planted-init", i));
            pop.members.push_back(sample_policy(0.5, cfg.n_blocks, rng));
        }
        FitnessRecord best;
        best.fitness = std::numeric_limits<double>::infinity();
        for (int round = 0; round < 3; ++round) {
            const RoundResult rr = evolve_round(pop, m, proxy, 0.1, 3, 0.01, 16, seed, 0.2);
            for (const auto& rec : rr.records)
                if (rec.fitness < best.fitness) best = rec;
            pop = rr.next;
        }
        if (best.policy.ratio(0) >= 0.5) ++wins;
    }
    CHECK(wins >= 8);
}

// --- space evolution -----------------------------------------------------------

TEST_CASE("importance weights: oracle case, edge cases, shift invariance") {
    const auto out = selfcheck::importance_checks();
    CHECK(out.max_abs_err <= 1e-6);
    CHECK(out.sum_err <= 1e-12);
    CHECK(out.single_ok);
    CHECK(out.uniform_ok);
    CHECK(out.shift_exact);
    // frozen values from the hand-computed distances (0.0125, 0.005, 0.0125)
    CHECK(out.actual[0] == doctest::Approx(0.3324989609456323).epsilon(1e-9));
    CHECK(out.actual[1] == doctest::Approx(0.33500207810873545).epsilon(1e-9));
    CHECK(out.actual[2] == doctest::Approx(0.3324989609456323).epsilon(1e-9));
    CHECK(out.actual[1] > out.actual[0]);
}

TEST_CASE("importance weights are positive and sum to one") {
    Rng rng(40);
    std::vector<Policy> cands;
    for (int i = 0; i < 9; ++i) cands.push_back(sample_policy(0.5, 5, rng));
    const ImportanceWeights w = importance_weights(cands, 5);
    double sum = 0.0;
    for (double v : w.weights) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
}

namespace {

struct EvolutionFixture {
    ModelConfig cfg = small_config();
    ToyVlm model;
    std::vector<Sample> proxy;
    std::vector<EvolutionCandidate> candidates;
    ImportanceWeights weights;

    explicit EvolutionFixture(std::uint64_t seed, int n_candidates = 3) {
        model = init_model(cfg, seed);
        proxy = proxy_for(cfg, 8, seed + 1);
        std::vector<Policy> pols;
        for (int i = 0; i < n_candidates; ++i) {
            Rng rng(derive_seed(seed, "evofix", i));
            const Policy pol = sample_policy(0.5, cfg.n_blocks, rng);
            pols.push_back(pol);
            candidates.push_back({pol, apply_policy(model, pol, proxy, 0.01).masks});
        }
        weights = importance_weights(pols, 5);
    }
};

} // namespace

TEST_CASE("evolve_projector with zero steps returns the projector bit-exactly") {
    EvolutionFixture fx(50);
    const ToyVlm out = evolve_projector(fx.model, fx.candidates, fx.weights, fx.proxy, 1e-2, 0);
    CHECK(bit_equal(out.projector, fx.model.projector));
}

TEST_CASE("evolve_projector changes only the projector") {
    EvolutionFixture fx(51);
    const ToyVlm out = evolve_projector(fx.model, fx.candidates, fx.weights, fx.proxy, 1e-2, 2);
    CHECK(!bit_equal(out.projector, fx.model.projector));
    CHECK(bit_equal(out.embedding, fx.model.embedding));
    CHECK(bit_equal(out.head, fx.model.head));
    for (int b = 0; b < fx.cfg.n_blocks; ++b)
        for (int r = 0; r < kRolesPerBlock; ++r)
            CHECK(bit_equal(out.blocks[b].matrix(static_cast<MatrixRole>(r)),
                            fx.model.blocks[b].matrix(static_cast<MatrixRole>(r))));
    // prunable weights untouched, so the norm term is unchanged
    CHECK(rademacher_proxy(out) == rademacher_proxy(fx.model));
}

TEST_CASE("a single small step strictly decreases a single candidate's loss") {
    for (int seed = 1; seed <= 10; ++seed) {
        EvolutionFixture fx(60 + seed, 1);
        const ToyVlm masked = apply_masks(fx.model, fx.candidates[0].masks);
        const double before = loss(masked, fx.proxy);
        const ToyVlm out = evolve_projector(fx.model, fx.candidates, fx.weights, fx.proxy, 1e-3, 1);
        ToyVlm masked_after = masked;
        masked_after.projector = out.projector;
        CHECK(loss(masked_after, fx.proxy) < before);
    }
}

TEST_CASE("the weighted gradient equals the convex combination of candidate gradients") {
    EvolutionFixture fx(70);
    const ToyVlm out = evolve_projector(fx.model, fx.candidates, fx.weights, fx.proxy, 1e-2, 1);
    Matrix expected = fx.model.projector;
    for (std::size_t c = 0; c < fx.candidates.size(); ++c) {
        ToyVlm masked = apply_masks(fx.model, fx.candidates[c].masks);
        const Matrix g = grad_projector(masked, fx.proxy);
        for (std::size_t i = 0; i < expected.size(); ++i)
            expected.data()[i] -= 1e-2 * fx.weights.weights[c] * g.data()[i];
    }
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(out.projector.data()[i] ==
              doctest::Approx(expected.data()[i]).epsilon(1e-12));
}

TEST_CASE("the weighted objective trends down across steps") {
    int monotone = 0;
    for (int seed = 1; seed <= 10; ++seed) {
        EvolutionFixture fx(80 + seed);
        std::vector<double> trace;
        evolve_projector(fx.model, fx.candidates, fx.weights, fx.proxy, 1e-2, 6, &trace);
        REQUIRE(trace.size() == 7);
        bool ok = true;
        for (std::size_t s = 1; s < trace.size(); ++s)
            if (trace[s] > trace[s - 1]) ok = false;
        if (ok) ++monotone;
    }
    CHECK(monotone >= 9);
}
