// Compares the OpenMP kernels against their serial references: wall time and
// bitwise agreement. The parallel loops only distribute independent work, so
// any numeric difference is a bug, not noise.

#include <chrono>
#include <cstdio>
#include <string>

#include "evoprune/calib.hpp"
#include "evoprune/parallel.hpp"
#include "evoprune/reference.hpp"
#include "evoprune/rng.hpp"
#include "evoprune/search.hpp"

using namespace evoprune;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
    return m;
}

bool g_all_ok = true;

void report(const std::string& name, double serial_s, double parallel_s, bool identical) {
    g_all_ok = g_all_ok && identical;
    std::printf("%-28s serial %8.4fs  parallel %8.4fs  speedup %5.2fx  %s\n", name.c_str(),
                serial_s, parallel_s, serial_s / parallel_s,
                identical ? "bit-identical" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    int n = argc > 1 ? std::atoi(argv[1]) : 384;
    int reps = argc > 2 ? std::atoi(argv[2]) : 3;
    std::printf("threads: %d\n\n", omp_get_max_threads());

    {
        const Matrix a = random_matrix(n, n, 1);
        const Matrix b = random_matrix(n, n, 2);
        Matrix serial_out, parallel_out;
        double t0 = now_s();
        for (int r = 0; r < reps; ++r) serial_out = ref::gemm(a, b);
        const double serial_s = now_s() - t0;
        t0 = now_s();
        for (int r = 0; r < reps; ++r) parallel_out = gemm(a, b);
        const double parallel_s = now_s() - t0;
        report("gemm " + std::to_string(n) + "^3", serial_s, parallel_s,
               bit_equal(serial_out, parallel_out));
    }

    {
        const Matrix x = random_matrix(n, 2 * n, 3);
        Matrix serial_out, parallel_out;
        double t0 = now_s();
        for (int r = 0; r < reps; ++r) serial_out = ref::sym_outer(x);
        const double serial_s = now_s() - t0;
        t0 = now_s();
        for (int r = 0; r < reps; ++r) parallel_out = sym_outer(x);
        const double parallel_s = now_s() - t0;
        report("sym_outer (hessian)", serial_s, parallel_s, bit_equal(serial_out, parallel_out));
    }

    const ModelConfig cfg;  // desk defaults
    const ToyVlm model = init_model(cfg, 7);
    const ToyVlm teacher = make_teacher(cfg, 7);
    const auto proxy = sample_dataset(teacher, {64, cfg.seq_len, 7, DatasetSpec::Split::proxy});

    {
        double serial_out = 0.0, parallel_out = 0.0;
        double t0 = now_s();
        for (int r = 0; r < reps; ++r) serial_out = ref::batch_loss(model, proxy);
        const double serial_s = now_s() - t0;
        t0 = now_s();
        for (int r = 0; r < reps; ++r) parallel_out = loss(model, proxy);
        const double parallel_s = now_s() - t0;
        report("batch loss (64 samples)", serial_s, parallel_s, serial_out == parallel_out);
    }

    {
        Matrix serial_out, parallel_out;
        double t0 = now_s();
        for (int r = 0; r < reps; ++r) serial_out = ref::batch_grad_projector(model, proxy);
        const double serial_s = now_s() - t0;
        t0 = now_s();
        for (int r = 0; r < reps; ++r) parallel_out = grad_projector(model, proxy);
        const double parallel_s = now_s() - t0;
        report("projector gradient", serial_s, parallel_s, bit_equal(serial_out, parallel_out));
    }

    {
        Population pop;
        for (int i = 0; i < 16; ++i) {
            Rng rng(derive_seed(7, "bench-init", i));
            pop.members.push_back(sample_policy(0.5, cfg.n_blocks, rng));
        }
        const int max_threads = omp_get_max_threads();
        omp_set_num_threads(1);
        double t0 = now_s();
        const RoundResult serial_round = evolve_round(pop, model, proxy, 0.1, 4, 0.01, 16, 7, 0.2);
        const double serial_s = now_s() - t0;
        omp_set_num_threads(max_threads);
        t0 = now_s();
        const RoundResult parallel_round = evolve_round(pop, model, proxy, 0.1, 4, 0.01, 16, 7, 0.2);
        const double parallel_s = now_s() - t0;
        bool identical = serial_round.next.members == parallel_round.next.members;
        for (std::size_t i = 0; i < serial_round.records.size(); ++i)
            identical = identical &&
                        serial_round.records[i].fitness == parallel_round.records[i].fitness;
        report("evolve_round (16 policies)", serial_s, parallel_s, identical);
    }

    std::printf("\n%s\n", g_all_ok ? "all kernel pairs agree bit-for-bit"
                                   : "kernel disagreement detected");
    return g_all_ok ? 0 : 1;
}
