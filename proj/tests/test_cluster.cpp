#include <catch_amalgamated.hpp>

#include <collab/cluster.hpp>

#include <sstream>

using namespace collab;

namespace {
TunerConfig quick(std::uint64_t seed) {
    TunerConfig c = TunerConfig::desk();
    c.max_iterations = 30;
    c.eta = 1.0;
    c.moment_reps = 40;
    c.seed = seed;
    return c;
}

std::vector<Dataset> group(int k, int p, int n, double d_between, std::uint64_t seed) {
    std::vector<Dataset> out;
    for (int i = 0; i < k; ++i) {
        const double shift = (i < k / 2) ? 0.0 : d_between;
        const auto s = GaussianSpec::isotropic(Vector::Zero(p), Vector::Constant(p, shift), 1.0);
        out.push_back(sample_synthetic(s, n, derive_seed(seed, "group", i), "D" + std::to_string(i)));
    }
    return out;
}
}  // namespace

TEST_CASE("partition helpers") {
    const auto s = Partition::singletons(4);
    CHECK(s.valid(4));
    CHECK_FALSE(s.valid(5));
    const auto p = Partition::from_clusters(4, {{0, 2}, {1}, {3}});
    CHECK(p.assignments == std::vector<int>{0, 1, 0, 2});
    CHECK_THROWS_AS(Partition::from_clusters(3, {{0, 1}, {1, 2}}), InvalidArgument);
    CHECK_THROWS_AS(Partition::from_clusters(3, {{0, 1}}), InvalidArgument);
}

TEST_CASE("a single dataset is one cluster with no comparisons") {
    const auto ds = group(1, 3, 60, 0.0, 1);
    const auto part = greedy_cluster(ds, quick(1));
    CHECK(part.clusters.size() == 1);
    CHECK(part.comparisons_made == 0);
    CHECK(part.valid(1));
    CHECK(part.total_ose > 0.0);
}

TEST_CASE("greedy output is a valid, reproducible partition within the comparison bound") {
    for (int k : {2, 3, 5}) {
        const auto ds = group(k, 3, 60, 0.5, 10 + k);
        const auto part = greedy_cluster(ds, quick(2));
        REQUIRE(part.valid(ds.size()));
        // Each greedy step compares against every unclustered dataset once.
        CHECK(part.comparisons_made <= static_cast<long long>(k * (k - 1) / 2 + k * k));
        CHECK(part.per_cluster_ose.size() == part.clusters.size());
        const auto again = greedy_cluster(ds, quick(2));
        CHECK(again.assignments == part.assignments);
        CHECK(again.total_ose == part.total_ose);
        set_max_threads(1);
        const auto serial = greedy_cluster(ds, quick(2));
        set_max_threads(0);
        CHECK(serial.assignments == part.assignments);
        CHECK(serial.total_ose == part.total_ose);
    }
}

TEST_CASE("seed dataset of each cluster is the lowest unclustered index") {
    const auto ds = group(4, 3, 60, 2.0, 5);
    const auto part = greedy_cluster(ds, quick(3));
    std::size_t prev = 0;
    for (std::size_t c = 0; c < part.clusters.size(); ++c) {
        const auto first = part.clusters[c].front();
        if (c > 0) CHECK(first > prev);
        prev = first;
        for (std::size_t i = 0; i < first; ++i) CHECK(part.assignments[i] < static_cast<int>(c) + 1);
    }
}

TEST_CASE("evaluate_partition on singletons equals the per-dataset bootstrap sum") {
    const auto ds = group(3, 4, 80, 0.3, 7);
    const auto cfg = quick(4);
    const auto parts = split_all(ds, cfg);
    const auto ev = evaluate_split_partition(parts, Partition::singletons(3), cfg);
    double sum = 0.0;
    for (double v : ev.per_dataset) sum += v;
    CHECK(ev.total_ose == Catch::Approx(sum).epsilon(1e-14));
    CHECK(ev.total_std_err > 0.0);
    // Merging everything fits one model on the union of train parts.
    const auto all = evaluate_split_partition(parts, Partition::from_clusters(3, {{0, 1, 2}}), cfg);
    CHECK(all.per_cluster.size() == 1);
    CHECK(all.per_cluster[0] == Catch::Approx(all.total_ose));
    CHECK_THROWS_AS(evaluate_split_partition(parts, Partition::singletons(2), cfg), InvalidArgument);
}

TEST_CASE("pooling identical sources lowers bootstrap error") {
    int better = 0;
    for (int r = 0; r < 10; ++r) {
        const auto ds = group(4, 10, 60, 0.0, 100 + r);
        auto cfg = quick(r);
        cfg.boot_reps_m = 20;
        cfg.oos_count = 400;
        const auto parts = split_all(ds, cfg);
        const auto single = evaluate_split_partition(parts, Partition::singletons(4), cfg);
        const auto pooled = evaluate_split_partition(parts, Partition::from_clusters(4, {{0, 1, 2, 3}}), cfg);
        better += pooled.total_ose < single.total_ose ? 1 : 0;
    }
    CHECK(better >= 8);
}

TEST_CASE("greedy partition never loses to singletons beyond bootstrap noise") {
    for (int r = 0; r < 5; ++r) {
        const auto ds = group(4, 5, 100, 1.0, 200 + r);
        const auto cfg = quick(r);
        const auto part = greedy_cluster(ds, cfg);
        const auto parts = split_all(ds, cfg);
        const auto got = evaluate_split_partition(parts, part, cfg);
        const auto single = evaluate_split_partition(parts, Partition::singletons(4), cfg);
        CHECK(got.total_ose <= single.total_ose + 2.0 * std::hypot(got.total_std_err, single.total_std_err));
    }
}

TEST_CASE("mismatched feature counts are rejected; report and CSV are written") {
    auto ds = group(2, 3, 60, 0.0, 9);
    ds.push_back(sample_synthetic(GaussianSpec::isotropic(Vector::Zero(2), Vector::Zero(2), 1.0), 60, 1, "odd"));
    CHECK_THROWS_AS(greedy_cluster(ds, quick(5)), DimensionError);
    ds.pop_back();
    const auto part = greedy_cluster(ds, quick(5));
    std::ostringstream csv, rep;
    write_partition_csv(part, ds, csv);
    write_partition_report(part, ds, rep);
    CHECK(csv.str().rfind("dataset_id,cluster_id\nD0,0\n", 0) == 0);
    CHECK(rep.str().find("total_ose") != std::string::npos);
}
