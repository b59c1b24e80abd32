#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evoprune/matrix.hpp"
#include "evoprune/reference.hpp"
#include "evoprune/rng.hpp"

using namespace evoprune;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
    return m;
}

Matrix random_spd(std::size_t n, std::uint64_t seed, double ridge = 0.5) {
    const Matrix m = random_matrix(n, 2 * n, seed);
    Matrix h = ref::sym_outer(m);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] /= static_cast<double>(2 * n);
    for (std::size_t i = 0; i < n; ++i) h(i, i) += ridge;
    return h;
}

} // namespace

TEST_CASE("gemm identity and annihilator") {
    const Matrix a = random_matrix(3, 5, 1);
    CHECK(bit_equal(gemm(Matrix::identity(3), a), a));
    const Matrix zero(5, 4);
    const Matrix prod = gemm(a, zero);
    for (std::size_t i = 0; i < prod.size(); ++i) CHECK(prod.data()[i] == 0.0);
}

TEST_CASE("gemm hand arithmetic") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    Matrix b(2, 1);
    b(0, 0) = 5; b(1, 0) = 6;
    const Matrix c = gemm(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 1);
    CHECK(c(0, 0) == 17.0);
    CHECK(c(1, 0) == 39.0);
}

TEST_CASE("gemm dimension mismatch throws") {
    CHECK_THROWS_AS(gemm(Matrix(2, 3), Matrix(2, 3)), ContractViolation);
}

TEST_CASE("gemm determinism and serial-reference agreement") {
    const Matrix a = random_matrix(37, 53, 2);
    const Matrix b = random_matrix(53, 29, 3);
    const Matrix c1 = gemm(a, b);
    const Matrix c2 = gemm(a, b);
    CHECK(bit_equal(c1, c2));
    CHECK(bit_equal(c1, ref::gemm(a, b)));
}

TEST_CASE("frobenius norm closed forms") {
    CHECK(frobenius_norm(Matrix::identity(4)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(frobenius_norm(Matrix(7, 3)) == 0.0);
    Matrix m(1, 2);
    m(0, 0) = 3;
    m(0, 1) = 4;
    CHECK(frobenius_norm(m) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("frobenius norm positivity and strict decrease when zeroing") {
    Matrix m = random_matrix(6, 6, 4);
    const double before = frobenius_norm(m);
    CHECK(before > 0.0);
    // zero a nonzero entry: norm strictly decreases
    REQUIRE(m(2, 3) != 0.0);
    m(2, 3) = 0.0;
    CHECK(frobenius_norm(m) < before);
    CHECK(frobenius_norm(m) == ref::frobenius_norm(m));
}

TEST_CASE("spd_inverse diagonal cases") {
    CHECK(bit_equal(spd_inverse(Matrix::identity(4), 0.0), Matrix::identity(4)));
    Matrix d(2, 2);
    d(0, 0) = 2.0;
    d(1, 1) = 4.0;
    const Matrix inv = spd_inverse(d, 0.0);
    CHECK(inv(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(inv(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(inv(0, 1) == 0.0);
}

TEST_CASE("spd_inverse residual oracle") {
    const Matrix h = random_spd(16, 5);
    const Matrix inv = spd_inverse(h, 0.0);
    const Matrix prod = ref::gemm(h, inv);
    double acc = 0.0;
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) {
            const double e = prod(i, j) - (i == j ? 1.0 : 0.0);
            acc += e * e;
        }
    CHECK(std::sqrt(acc) < 1e-8);
}

TEST_CASE("spd_inverse result symmetric and involution up to tolerance") {
    const Matrix h = random_spd(12, 6);
    const Matrix inv = spd_inverse(h, 0.0);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j) CHECK(inv(i, j) == inv(j, i));
    const Matrix back = spd_inverse(inv, 0.0);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j)
            CHECK(back(i, j) == doctest::Approx(h(i, j)).epsilon(1e-6));
}

TEST_CASE("spd_inverse rejects asymmetry and singularity") {
    Matrix bad(2, 2);
    bad(0, 0) = 1.0;
    bad(0, 1) = 0.5;
    bad(1, 0) = -0.5;
    bad(1, 1) = 1.0;
    CHECK_THROWS_AS(spd_inverse(bad, 0.0), ContractViolation);
    CHECK_THROWS_AS(spd_inverse(Matrix(3, 3), 0.0), SingularHessianError);
}

TEST_CASE("spd_inverse damping is scale-free on the mean diagonal") {
    // damping d adds d * mean(diag) * I; for the identity that is (1 + d)^-1
    const Matrix inv = spd_inverse(Matrix::identity(5), 0.5);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(inv(i, i) == doctest::Approx(1.0 / 1.5).epsilon(1e-15));
}

TEST_CASE("sym_outer matches reference and is exactly symmetric") {
    const Matrix x = random_matrix(9, 21, 7);
    const Matrix h = sym_outer(x);
    CHECK(bit_equal(h, ref::sym_outer(x)));
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) CHECK(h(i, j) == h(j, i));
}

TEST_CASE("cholesky reconstructs") {
    const Matrix h = random_spd(10, 8);
    const Matrix l = cholesky_lower(h);
    const Matrix back = ref::gemm(l, transpose(l));
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            CHECK(back(i, j) == doctest::Approx(h(i, j)).epsilon(1e-10));
}

TEST_CASE("require_finite catches NaN") {
    Matrix m(2, 2);
    m(1, 1) = std::nan("");
    CHECK_THROWS_AS(require_finite(m, "test"), ContractViolation);
}

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(derive_seed(42, "stream", 0));
    Rng b(derive_seed(42, "stream", 0));
    Rng c(derive_seed(42, "stream", 1));
    bool diverged = false;
    for (int i = 0; i < 16; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        if (va != c.next_u64()) diverged = true;
    }
    CHECK(diverged);
    CHECK(derive_seed(42, "alpha", 0) != derive_seed(42, "beta", 0));
    CHECK(derive_seed(42, "alpha", 0) != derive_seed(43, "alpha", 0));
}

TEST_CASE("rng gaussian moments") {
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng below is in range and covers values") {
    Rng rng(7);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 5000; ++i) ++hits[rng.below(5)];
    for (int h : hits) CHECK(h > 800);
}
