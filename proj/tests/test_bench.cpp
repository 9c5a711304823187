#include <catch_amalgamated.hpp>

#include <collab/bench.hpp>

#include <sstream>

using namespace collab;

namespace {
TunerConfig quick() {
    TunerConfig c = TunerConfig::desk();
    c.max_iterations = 20;
    c.eta = 2.0;
    c.moment_reps = 30;
    c.boot_reps_m = 10;
    c.oos_count = 100;
    return c;
}

ExperimentGrid tiny(int trials) {
    ExperimentGrid g;
    g.p_values = {10};
    g.d_values = {0.0, 0.3};
    g.trials = trials;
    g.oracle_reps = 300;
    g.seed = 4;
    return g;
}
}  // namespace

TEST_CASE("cell specs follow the shift convention") {
    const auto [a, b] = cell_specs(4, 0.3, true, 1.0);
    CHECK(a.beta.isZero(0.0));
    CHECK(b.beta.isApprox(Vector::Constant(4, 0.3)));
    CHECK(a.mu.isZero(0.0));
    CHECK(b.mu.isApprox(Vector::Ones(4)));
    CHECK(a.sigma_x.isIdentity());
    const auto [c, d] = cell_specs(4, 0.0, false, 2.0);
    CHECK(d.mu.isZero(0.0));
    CHECK(d.noise_var == 2.0);
}

TEST_CASE("direct comparison essentially never merges") {
    int merges = 0;
    for (int r = 0; r < 200; ++r) {
        const auto [s1, s2] = cell_specs(10, 0.0, false, 1.0);
        merges += direct_comparison(sample_synthetic(s1, 50, 2 * r), sample_synthetic(s2, 50, 2 * r + 1)) ? 1 : 0;
    }
    CHECK(merges == 0);
    // Identical data: merged loss equals separate loss, and the strict rule keeps them apart.
    const auto d = sample_synthetic(cell_specs(3, 0.0, false, 1.0).first, 40, 1);
    CHECK_FALSE(direct_comparison(d, d));
}

TEST_CASE("one-trial smoke run emits accuracies in {0, 1}") {
    const auto cells = run_grid(tiny(1), quick());
    REQUIRE(cells.size() == 2);
    for (const auto& c : cells) {
        CHECK(c.trials == 1);
        CHECK((c.alg_accuracy == 0.0 || c.alg_accuracy == 1.0));
        CHECK((c.direct_accuracy == 0.0 || c.direct_accuracy == 1.0));
    }
    std::ostringstream csv, txt;
    write_grid_csv(csv, tiny(1), quick(), cells);
    write_grid_text(txt, tiny(1), quick(), cells);
    CHECK(csv.str().rfind("# seed=4", 0) == 0);
    CHECK(txt.str().find("Merge?") != std::string::npos);
}

TEST_CASE("grid is deterministic and the truth column matches the tables") {
    const auto a = run_grid(tiny(6), quick());
    const auto b = run_grid(tiny(6), quick());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].alg_accuracy == b[i].alg_accuracy);
        CHECK(a[i].direct_accuracy == b[i].direct_accuracy);
        CHECK(a[i].mean_proxy_acc == b[i].mean_proxy_acc);
        CHECK(a[i].truth.margin == b[i].truth.margin);
    }
    CHECK(a[0].truth.merge);
    CHECK_FALSE(a[1].truth.merge);
    // Truth is merge at d = 0, so accuracy is the merge rate; at d = 0.3 it is the keep rate.
    CHECK(a[0].direct_accuracy == Catch::Approx(a[0].direct_merge_rate));
    CHECK(a[0].alg_accuracy == Catch::Approx(a[0].alg_merge_rate));
    CHECK(a[1].direct_accuracy == Catch::Approx(1.0 - a[1].direct_merge_rate));
}

TEST_CASE("grid validation and config overrides") {
    ExperimentGrid g;
    g.trials = 0;
    CHECK_THROWS_AS(g.validate(), InvalidArgument);
    ExperimentGrid h;
    h.apply(Config::parse("p_values = 7, 9\nd_values = 0.2\ntrials = 3\nmu_shift = 1\n"));
    CHECK(h.p_values == std::vector<int>{7, 9});
    CHECK(h.d_values == std::vector<double>{0.2});
    CHECK(h.trials == 3);
    CHECK(h.mu_shift);
    CHECK(ExperimentGrid::desk().trials == 200);
}
