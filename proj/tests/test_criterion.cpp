#include <catch_amalgamated.hpp>

#include <collab/criterion.hpp>

#include <cmath>

using namespace collab;

namespace {
CriterionState make_state(double n0, double a0, double s2, double dn, double g, SigmaTraces t) {
    CriterionState s;
    s.n0 = n0;
    s.a0 = a0;
    s.sigma2_hat = s2;
    s.d_norm = dn;
    s.g_hat = g;
    s.traces = t;
    return s;
}

Dataset draw(int p, double beta, int n, std::uint64_t seed, double noise = 1.0) {
    return sample_synthetic(GaussianSpec::isotropic(Vector::Zero(p), Vector::Constant(p, beta), noise), n, seed);
}

Matrix random_orthogonal(int p, std::uint64_t seed) {
    auto rng = make_stream(seed, "orth");
    Matrix a(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
    return Eigen::HouseholderQR<Matrix>(a).householderQ();
}
}  // namespace

TEST_CASE("A-tilde coefficients: limits and a high-precision reference") {
    auto [a1, a2] = a_tilde_coefficients(90, 0.28808, 0.0);
    CHECK(a1 == Catch::Approx(0.28808 / 3.0).epsilon(1e-15));
    CHECK(a2 == Catch::Approx(-2.0 * 0.28808 / (3.0 * 90)).epsilon(1e-15));
    auto [z1, z2] = a_tilde_coefficients(90, 0.0, 2.5);
    CHECK(z1 == 0.0);
    CHECK(z2 == 0.0);
    // 40-digit evaluation of the displayed formulas.
    auto [r1, r2] = a_tilde_coefficients(90, 0.28808, 3.0);
    CHECK(r1 == Catch::Approx(0.05393650578606649943).epsilon(1e-13));
    CHECK(r2 == Catch::Approx(-0.001636251845498315292).epsilon(1e-13));
}

TEST_CASE("phi: vanishing difference, zero variance, and composition") {
    const SigmaTraces t{0.5, 0.1, 0.2};
    auto s = make_state(90, 0.3, 1.2, 0.0, 0.0, t);
    const auto [a1, a2] = a_tilde_coefficients(90, 0.3, 2.0);
    CHECK(phi_value(s, 2.0) == Catch::Approx(a1 * 1.2).epsilon(1e-15));
    s.sigma2_hat = 0.0;
    CHECK(phi_value(s, 2.0) == 0.0);
    s = make_state(90, 0.3, 1.2, 0.8, 0.0, t);
    CHECK(phi_value(s, 2.0) == Catch::Approx(a1 * 1.2 + a2 * 0.64).epsilon(1e-14));
    CHECK(a2 < 0.0);
}

TEST_CASE("psi matches a high-precision evaluation of the displayed constants") {
    const SigmaTraces t{0.5, 0.1, 0.2};
    // Small n0 and large alpha give c3 > 0 and a positive root.
    const auto d = psi_detail(make_state(2, 0.3, 1.3, 0.7, 0.4, t), 10.0);
    CHECK(d.c[3] == Catch::Approx(12.99175181337726837877).epsilon(1e-12));
    CHECK(d.c0 == Catch::Approx(1.159616893914550548964).epsilon(1e-12));
    CHECK(d.psi == Catch::Approx(12.88027582944638785654).epsilon(1e-12));
    CHECK_FALSE(d.c0_clamped);

    // Typical sample sizes: c3 < 0, the root is negative and clamps to zero.
    const auto big = psi_detail(make_state(90, 0.3, 1.3, 0.7, 0.4, t), 2.5);
    CHECK(big.c[3] == Catch::Approx(-118.5629653185687552604).epsilon(1e-12));
    CHECK(big.c0_clamped);
    CHECK(big.psi == Catch::Approx(0.4).epsilon(1e-14));

    // Degenerate inputs: equal fits and zero residual variance.
    const auto deg = psi_detail(make_state(2, 0.3, 0.0, 0.0, 0.0, t), 10.0);
    CHECK(deg.c0 == 0.0);
    CHECK(deg.psi == 0.0);
}

TEST_CASE("psi approaches g as the residual variance vanishes") {
    const SigmaTraces t{0.5, 0.1, 0.2};
    for (double s2 : {1e-2, 1e-4, 1e-8}) {
        const double psi = psi_value(make_state(90, 0.3, s2, 5.0, 25.0, t), 2.5);
        CHECK(std::abs(psi / 25.0 - 1.0) < 0.05);
    }
}

TEST_CASE("psi >= g-hat and monotonicity properties") {
    auto rng = make_stream(3, "psi_prop");
    for (int i = 0; i < 2000; ++i) {
        const double n0 = 1 + static_cast<double>(rng.below(200));
        const double alpha = 0.05 + 12.0 * rng.uniform();
        const SigmaTraces t{rng.uniform(), 0.1 * rng.uniform(), 0.1 * rng.uniform()};
        const auto s = make_state(n0, rng.uniform(), 2.0 * rng.uniform(), 2.0 * rng.uniform(), 3.0 * rng.uniform(), t);
        const double psi = psi_value(s, alpha);
        REQUIRE(psi >= s.g_hat * (1.0 - 1e-14));
        auto larger_g = s;
        larger_g.g_hat += 0.5;
        REQUIRE(psi_value(larger_g, alpha) >= psi);
        auto larger_d = s;
        larger_d.d_norm += 0.5;
        REQUIRE(phi_value(larger_d, alpha) <= phi_value(s, alpha));
    }
}

TEST_CASE("Sigma trace terms agree with the explicit (n1+n2)-dimensional matrix") {
    const auto d1 = draw(3, 0.0, 12, 1);
    const auto d2 = draw(3, 0.5, 15, 2);
    const auto f1 = fit_ols(d1);
    const auto f2 = fit_ols(d2);
    auto rng = make_stream(4, "b");
    Matrix b(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = rng.normal();
    const auto got = sigma_traces(b, f1, f2);

    const int n = 27, p = 3;
    Matrix x0 = Matrix::Zero(n, 2 * p);
    x0.block(0, 0, 12, p) = d1.features;
    x0.block(12, p, 15, p) = d2.features;
    Matrix c(p, 2 * p);
    c << Matrix::Identity(p, p), -Matrix::Identity(p, p);
    const Matrix g0inv = (x0.transpose() * x0).inverse();
    const Matrix sigma = x0 * g0inv * c.transpose() * b.transpose() * b * c * g0inv * x0.transpose();
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (sigma + sigma.transpose())).eigenvalues();
    CHECK(got.trace == Catch::Approx(sigma.trace()).epsilon(1e-9));
    CHECK(got.trace_sq == Catch::Approx((sigma * sigma).trace()).epsilon(1e-9));
    CHECK(got.spectral == Catch::Approx(ev.maxCoeff()).epsilon(1e-9));
}

TEST_CASE("decision is invariant to the choice of square roots") {
    const auto d1 = draw(4, 0.0, 40, 5);
    const auto d2 = draw(4, 0.2, 40, 6);
    const auto m = moments_from_data(d1, d2, 100, 7);
    const auto q = merge_quantities(m);
    auto ci = make_criterion_inputs(d1, d2, 3.0, q);
    const auto base = evaluate_criterion(prepare_criterion(ci, q), 3.0);
    ci.d_matrix = random_orthogonal(4, 8) * ci.d_matrix;
    ci.b_factor = random_orthogonal(4, 9) * ci.b_factor;
    const auto rotated = evaluate_criterion(prepare_criterion(ci, q), 3.0);
    CHECK(rotated.phi == Catch::Approx(base.phi).epsilon(1e-10));
    CHECK(rotated.psi == Catch::Approx(base.psi).epsilon(1e-10));
    CHECK(rotated.merge_suggested == base.merge_suggested);
    CHECK(phi(ci, q) == Catch::Approx(base.phi).epsilon(1e-10));
    CHECK(psi(ci, q) == Catch::Approx(base.psi).epsilon(1e-10));
}

TEST_CASE("decide_known_moments on duplicated data reduces to psi = T^2 and phi = A1 sigma^2") {
    const auto d = draw(5, 0.3, 60, 10);
    const auto m = moments_from_data(d, d, 100, 11);
    const auto q = merge_quantities(m);
    const auto out = decide_known_moments(d, d, 2.0, q);
    CHECK(out.g_hat == 0.0);
    const auto c = fit_combined(d, d);
    const auto [a1, a2] = a_tilde_coefficients(double(c.n0), q.a0, 2.0);
    CHECK(out.phi == Catch::Approx(a1 * c.sigma2_hat).epsilon(1e-12));
    const auto& t = out.sigma_traces;
    const double spread = t.trace + 2.0 * std::sqrt(t.trace_sq * 2.0) + 2.0 * t.spectral * 2.0;
    CHECK(out.psi == Catch::Approx(out.c0 * out.c0 * spread).margin(1e-15));
    CHECK(out.merge_suggested == (out.phi > out.psi));
    CHECK_THROWS_AS(evaluate_criterion(prepare_criterion(make_criterion_inputs(d, d, 2.0, q), q), 0.0), InvalidArgument);
}
