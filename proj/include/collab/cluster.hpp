#pragma once

// Greedy clustering of many datasets by repeated pairwise decisions. The
// current cluster is represented by the row-union of its members and plays
// the role of the first dataset in every comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "ols.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "tuner.hpp"

namespace collab {

struct Partition {
    std::vector<int> assignments;                 // cluster id per dataset
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<double> per_cluster_ose;
    double total_ose = 0.0;
    long long comparisons_made = 0;
    std::vector<std::string> log;                 // skipped candidates and similar notes

    bool valid(std::size_t k) const {
        if (assignments.size() != k) return false;
        std::vector<int> seen(k, 0);
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (auto i : clusters[c]) {
                if (i >= k || seen[i]++ || assignments[i] != static_cast<int>(c)) return false;
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
    }

    static Partition singletons(std::size_t k) {
        Partition p;
        for (std::size_t i = 0; i < k; ++i) {
            p.assignments.push_back(static_cast<int>(i));
            p.clusters.push_back({i});
        }
        return p;
    }

    static Partition from_clusters(std::size_t k, std::vector<std::vector<std::size_t>> clusters) {
        Partition p;
        p.assignments.assign(k, -1);
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (auto i : clusters[c]) p.assignments.at(i) = static_cast<int>(c);
        }
        p.clusters = std::move(clusters);
        if (!p.valid(k)) throw InvalidArgument("from_clusters: not a partition");
        return p;
    }
};

struct BootstrapEstimate {
    double value = 0.0;
    double std_err = 0.0;  // spread of the M resample means
};

inline BootstrapEstimate bootstrap_ose_with_se(const OlsFit& fit, const Dataset& held_out, int m, int oos_n,
                                               std::uint64_t seed) {
    if (held_out.n() < 1) throw InvalidArgument("bootstrap_ose: empty held-out set");
    const Vector sq = (held_out.targets - held_out.features * fit.beta_hat).array().square();
    auto rng = make_stream(seed, "bootstrap_ose");
    const auto n = static_cast<std::uint64_t>(held_out.n());
    double sum = 0.0, sum_sq = 0.0;
    for (int b = 0; b < m; ++b) {
        double s = 0.0;
        for (int i = 0; i < oos_n; ++i) s += sq(static_cast<Eigen::Index>(rng.below(n)));
        s /= oos_n;
        sum += s;
        sum_sq += s * s;
    }
    BootstrapEstimate e;
    e.value = sum / m;
    e.std_err = m > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / m) / (m - 1))) : 0.0;
    return e;
}

inline std::vector<SplitDataset> split_all(const std::vector<Dataset>& datasets, const TunerConfig& cfg) {
    std::vector<SplitDataset> out;
    out.reserve(datasets.size());
    for (std::size_t k = 0; k < datasets.size(); ++k) {
        out.push_back(split(datasets[k], cfg.split_fraction, derive_seed(cfg.seed, "cluster_split", k)));
    }
    return out;
}

inline SplitDataset union_of(const std::vector<SplitDataset>& parts, const std::vector<std::size_t>& members) {
    SplitDataset u = parts.at(members.front());
    for (std::size_t i = 1; i < members.size(); ++i) {
        u.train = concat(u.train, parts[members[i]].train);
        u.held_out = concat(u.held_out, parts[members[i]].held_out);
    }
    return u;
}

struct PartitionEvaluation {
    double total_ose = 0.0;
    double total_std_err = 0.0;
    std::vector<double> per_dataset;
    std::vector<double> per_cluster;
};

// One OLS fit per cluster on its training union; each dataset scored on its
// own held-out rows. Resample seeds depend only on the dataset index, so two
// partitions of the same data are compared on identical resamples.
inline PartitionEvaluation evaluate_split_partition(const std::vector<SplitDataset>& parts, const Partition& part,
                                                    const TunerConfig& cfg) {
    if (!part.valid(parts.size())) throw InvalidArgument("evaluate_partition: invalid partition");
    PartitionEvaluation ev;
    ev.per_dataset.assign(parts.size(), 0.0);
    ev.per_cluster.assign(part.clusters.size(), 0.0);
    double var = 0.0;
    for (std::size_t c = 0; c < part.clusters.size(); ++c) {
        const auto u = union_of(parts, part.clusters[c]);
        const auto fit = fit_ols(u.train);
        for (auto k : part.clusters[c]) {
            const auto e = bootstrap_ose_with_se(fit, parts[k].held_out, cfg.boot_reps_m, cfg.oos_count,
                                                 derive_seed(cfg.seed, "evaluate_partition", k));
            ev.per_dataset[k] = e.value;
            ev.per_cluster[c] += e.value;
            var += e.std_err * e.std_err;
        }
    }
    for (double v : ev.per_dataset) ev.total_ose += v;
    ev.total_std_err = std::sqrt(var);
    return ev;
}

inline PartitionEvaluation evaluate_partition(const std::vector<Dataset>& datasets, const Partition& part,
                                              const TunerConfig& cfg) {
    return evaluate_split_partition(split_all(datasets, cfg), part, cfg);
}

inline Partition greedy_cluster(const std::vector<Dataset>& datasets, const TunerConfig& cfg) {
    cfg.validate();
    const std::size_t k = datasets.size();
    if (k == 0) throw InvalidArgument("greedy_cluster: no datasets");
    for (const auto& d : datasets) {
        if (d.p() != datasets.front().p()) throw DimensionError("greedy_cluster: datasets differ in p");
    }
    const auto parts = split_all(datasets, cfg);
    Partition out;
    out.assignments.assign(k, -1);
    std::size_t step = 0;
    for (std::size_t seed_idx = 0; seed_idx < k; ++seed_idx) {
        if (out.assignments[seed_idx] >= 0) continue;
        const int cid = static_cast<int>(out.clusters.size());
        out.clusters.push_back({seed_idx});
        out.assignments[seed_idx] = cid;
        for (;;) {
            const auto current = union_of(parts, out.clusters.back());
            std::vector<std::size_t> open;
            for (std::size_t j = 0; j < k; ++j) {
                if (out.assignments[j] < 0) open.push_back(j);
            }
            struct Outcome {
                bool ok = false;
                MergeDecision dec;
                std::string error;
            };
            const auto outcomes = parallel_map<Outcome>(open.size(), [&](std::size_t c) {
                const std::size_t j = open[c];
                TunerConfig pair_cfg = cfg;
                pair_cfg.seed = derive_seed(cfg.seed, "cluster_pair", step, j);
                Outcome o;
                try {
                    const auto q = plug_in_quantities(current, parts[j], pair_cfg);
                    o.dec = decide_split_pair(current, parts[j], pair_cfg, q);
                    o.ok = true;
                } catch (const Error& e) {
                    o.error = e.what();
                }
                return o;
            });
            out.comparisons_made += static_cast<long long>(open.size());
            int best = -1;
            double best_acc = -1.0;
            for (std::size_t c = 0; c < open.size(); ++c) {
                const auto& o = outcomes[c];
                if (!o.ok) {
                    out.log.push_back("skipped candidate " + datasets[open[c]].id + " for cluster " +
                                      std::to_string(cid) + ": " + o.error);
                    continue;
                }
                // Only candidates the pairwise rule would merge are eligible; in
                // paper-literal mode this is exactly "best proxy_acc exceeds lambda".
                if (o.dec.merge && o.dec.proxy_acc > best_acc) {
                    best_acc = o.dec.proxy_acc;
                    best = static_cast<int>(open[c]);
                }
            }
            ++step;
            if (best < 0) break;
            out.clusters.back().push_back(static_cast<std::size_t>(best));
            out.assignments[static_cast<std::size_t>(best)] = cid;
        }
    }
    const auto ev = evaluate_split_partition(parts, out, cfg);
    out.per_cluster_ose = ev.per_cluster;
    out.total_ose = ev.total_ose;
    return out;
}

inline void write_partition_csv(const Partition& part, const std::vector<Dataset>& datasets, std::ostream& out) {
    out << "dataset_id,cluster_id\n";
    for (std::size_t i = 0; i < datasets.size(); ++i) out << datasets[i].id << ',' << part.assignments[i] << '\n';
}

inline void write_partition_report(const Partition& part, const std::vector<Dataset>& datasets, std::ostream& out) {
    out << "clusters: " << part.clusters.size() << "\n";
    out << "comparisons: " << part.comparisons_made << "\n";
    out << std::setprecision(6) << std::fixed;
    for (std::size_t c = 0; c < part.clusters.size(); ++c) {
        out << "cluster " << c << " ose " << part.per_cluster_ose[c] << " members";
        for (auto i : part.clusters[c]) out << ' ' << datasets[i].id;
        out << '\n';
    }
    out << "total_ose " << part.total_ose << '\n';
    for (const auto& line : part.log) out << "note: " << line << '\n';
}

}  // namespace collab
