#include <catch_amalgamated.hpp>

#include <collab/expectation.hpp>
#include <collab/oracle.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace collab;

namespace {
GaussianSpec std_spec(int p, double beta_shift = 0.0, double mu = 0.0) {
    return GaussianSpec::isotropic(Vector::Constant(p, mu), Vector::Constant(p, beta_shift), 1.0);
}
}  // namespace

TEST_CASE("inverse-Wishart closed form: tr(W1 Omega1) = p/(n-p-1), confirmed by Monte Carlo") {
    const auto s = std_spec(10);
    const auto m = moments_from_spec(s, s, 50, 50, 200, 1);
    CHECK((m.w1 * m.omega1).trace() == Catch::Approx(10.0 / 39.0).epsilon(1e-12));
    CHECK(m.w1.isApprox(Matrix::Identity(10, 10)));

    // Monte Carlo estimate of E[(X^T X)^{-1}] with 10^4 draws; the standard error
    // of the trace at these settings is about 0.0015.
    auto rng = make_stream(2, "wishart_check");
    const Matrix lower = Matrix::Identity(10, 10);
    double sum = 0.0, sum_sq = 0.0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
        const RowMatrix x = sample_design(Vector::Zero(10), lower, 50, rng);
        const double t = Matrix(x.transpose() * x).inverse().trace();
        sum += t;
        sum_sq += t * t;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    CHECK(std::abs(mean - 10.0 / 39.0) < 4.0 * se);
}

TEST_CASE("A0 for identical standard specs matches the closed form 20/39 - 20/89") {
    const auto s = std_spec(10);
    const auto m = moments_from_spec(s, s, 50, 50, 2000, 3);
    const auto q = merge_quantities(m);
    const double expected = 20.0 / 39.0 - 20.0 / 89.0;
    // Omega_c is Monte Carlo; its trace has standard error well below 1e-3 here.
    CHECK(std::abs(q.a0 - expected) < 3e-3);
    CHECK(std::abs((m.omega_c.trace()) - 10.0 / 89.0) < 1.5e-3);
}

TEST_CASE("Gram inflation: scaling Sigma by eps scales Omega by 1/eps") {
    const double eps = 1e-3;
    auto a = std_spec(3);
    auto b = a;
    b.sigma_x *= eps;
    const auto ma = moments_from_spec(a, a, 20, 20, 50, 4);
    const auto mb = moments_from_spec(b, b, 20, 20, 50, 4);
    CHECK((mb.omega1 * eps - ma.omega1).norm() < 1e-9 * ma.omega1.norm());
    CHECK((mb.omega_c * eps - ma.omega_c).norm() < 1e-9 * ma.omega_c.norm());
    CHECK_THROWS_AS(moments_from_spec(a, a, 4, 20, 10, 1), InvalidArgument);
}

TEST_CASE("nonzero mean switches Omega_k to Monte Carlo") {
    const auto a = std_spec(4, 0.0, 1.0);
    const auto m = moments_from_spec(a, a, 30, 30, 4000, 5);
    // E[(X^T X)^{-1}] for a shifted design differs from Sigma^{-1}/(n-p-1) but
    // W Omega keeps roughly the same trace in this regime.
    CHECK(m.w1.isApprox(Matrix::Identity(4, 4) + Matrix::Ones(4, 4)));
    CHECK((m.w1 * m.omega1).trace() == Catch::Approx(4.0 / 25.0).epsilon(0.05));
}

TEST_CASE("swapping specs swaps the paired moments") {
    const auto a = std_spec(3);
    auto b = std_spec(3, 0.0, 0.5);
    b.sigma_x(0, 0) = 2.0;
    const auto ab = moments_from_spec(a, b, 20, 30, 300, 6);
    const auto ba = moments_from_spec(b, a, 30, 20, 300, 6);
    CHECK(ab.w1.isApprox(ba.w2));
    CHECK(ab.w2.isApprox(ba.w1));
    // Same replicate streams drive both calls, but the draws are assigned to
    // different slots, so agreement is statistical.
    const double tol = 4.0 * std::max(ab.mc_std_err, ba.mc_std_err);
    CHECK((ab.zwz_12 - ba.zwz_21).cwiseAbs().maxCoeff() < 3.0 * tol + 1e-12);
    CHECK((ab.zwz_21 - ba.zwz_12).cwiseAbs().maxCoeff() < 3.0 * tol + 1e-12);
    CHECK((ab.omega_c - ba.omega_c).cwiseAbs().maxCoeff() < 3.0 * tol + 1e-12);
}

TEST_CASE("identical specs give zwz_12 close to zwz_21") {
    const auto a = std_spec(5);
    const auto m = moments_from_spec(a, a, 40, 40, 2000, 7);
    CHECK((m.zwz_12 - m.zwz_21).cwiseAbs().maxCoeff() < 3.0 * std::sqrt(2.0) * m.mc_std_err);
}

TEST_CASE("Monte Carlo standard error halves when replicates quadruple") {
    const auto a = std_spec(5);
    std::vector<double> ratios;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto small = moments_from_spec(a, a, 30, 30, 250, 100 + s, false);
        const auto large = moments_from_spec(a, a, 30, 30, 1000, 200 + s, false);
        ratios.push_back(large.mc_std_err / small.mc_std_err);
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios[2];
    CHECK(median >= 0.35);
    CHECK(median <= 0.7);
}

TEST_CASE("moments are symmetric and W is PSD") {
    auto a = std_spec(4, 0.0, 0.3);
    a.sigma_x(0, 1) = a.sigma_x(1, 0) = 0.4;
    const auto m = moments_from_spec(a, std_spec(4), 25, 25, 200, 8);
    for (const Matrix* x : {&m.w1, &m.w2, &m.omega1, &m.omega2, &m.omega_c, &m.zwz_12, &m.zwz_21}) {
        CHECK((*x - x->transpose()).norm() <= 1e-8);
    }
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(m.w1).eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("moments_from_data: identical inputs, LLN, determinism") {
    const auto d = sample_synthetic(std_spec(10), 2000, 9);
    const auto m = moments_from_data(d, d, 20, 1);
    CHECK(m.w1 == m.w2);
    CHECK((m.w1 - Matrix::Identity(10, 10)).norm() < 0.5);

    const auto big = sample_synthetic(std_spec(10), 20000, 10);
    const auto mb = moments_from_data(big, big, 1, 2);
    CHECK((mb.w1 - Matrix::Identity(10, 10)).norm() < 0.1);

    const auto small = sample_synthetic(std_spec(3), 40, 11);
    const auto r1 = moments_from_data(small, small, 1, 3);
    const auto r2 = moments_from_data(small, small, 1, 3);
    CHECK(r1.zwz_12 == r2.zwz_12);
    CHECK(r1.omega_c == r2.omega_c);
}

TEST_CASE("moments_from_data redraws singular resamples and eventually fails") {
    // Two distinct rows in p = 2: a resample of size 3 is singular whenever it
    // repeats a single row, which happens with probability 1/4.
    Dataset d;
    d.id = "tiny";
    d.features.resize(2, 2);
    d.features << 1, 0, 0, 1;
    d.targets = Vector::Zero(2);
    const auto m = moments_from_data(d, d, 50, 4, 3, 3);
    CHECK(m.mc_reps == 50);

    Dataset flat = d;
    flat.features << 1, 0, 2, 0;
    CHECK_THROWS_AS(moments_from_data(flat, flat, 5, 4), SingularMatrixError);
}
