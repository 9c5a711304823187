#pragma once

// Synthetic accuracy tables: for each (p, d) cell the oracle decides whether
// merging lowers the exact out-of-sample error, then the tuned criterion and
// the in-sample baseline are scored against it over repeated draws.

#include <Eigen/Dense>

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "data_model.hpp"
#include "errors.hpp"
#include "ols.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "tuner.hpp"

namespace collab {

struct ExperimentGrid {
    std::vector<int> p_values{10, 20};
    std::vector<double> d_values{0.0, 0.1, 0.3};
    bool mu_shift = false;     // mu_2 = 1_p instead of 0
    int n = 50;                // rows per dataset, also the sample size of the oracle
    double noise_var = 1.0;
    int trials = 1000;
    int oracle_reps = kDefaultMcReps;
    std::uint64_t seed = 0;

    void validate() const {
        if (p_values.empty() || d_values.empty()) throw InvalidArgument("grid: empty p or d list");
        for (int p : p_values) {
            if (p < 1) throw InvalidArgument("grid: p must be positive");
        }
        for (double d : d_values) {
            if (d < 0.0) throw InvalidArgument("grid: d must be nonnegative");
        }
        if (n < 1 || trials < 1 || oracle_reps < 1 || !(noise_var > 0.0)) {
            throw InvalidArgument("grid: n, trials, oracle_reps and noise_var must be positive");
        }
    }

    // Desk-scale preset: fewer repetitions, same grid.
    static ExperimentGrid desk() {
        ExperimentGrid g;
        g.trials = 200;
        g.oracle_reps = 1000;
        return g;
    }

    void apply(const Config& cfg) {
        if (cfg.has("p_values")) {
            p_values.clear();
            for (double v : cfg.get_list("p_values")) p_values.push_back(static_cast<int>(v));
        }
        if (cfg.has("d_values")) d_values = cfg.get_list("d_values");
        mu_shift = cfg.get_int("mu_shift", mu_shift ? 1 : 0) != 0;
        n = static_cast<int>(cfg.get_int("n", n));
        noise_var = cfg.get_double("noise_var", noise_var);
        trials = static_cast<int>(cfg.get_int("trials", trials));
        oracle_reps = static_cast<int>(cfg.get_int("oracle_reps", oracle_reps));
        seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(seed)));
    }
};

// beta1 = 0, beta2 = d 1_p, Sigma = I, mu1 = 0, mu2 = 1_p when shifted.
inline std::pair<GaussianSpec, GaussianSpec> cell_specs(int p, double d, bool mu_shift, double noise_var) {
    const Vector zero = Vector::Zero(p);
    const Vector ones = Vector::Ones(p);
    return {GaussianSpec::isotropic(zero, zero, noise_var),
            GaussianSpec::isotropic(mu_shift ? ones : zero, d * ones, noise_var)};
}

// Merge iff the combined fit has lower per-dataset-normalized training loss.
inline bool direct_comparison(const Dataset& d1, const Dataset& d2) {
    const auto f1 = fit_ols(d1);
    const auto f2 = fit_ols(d2);
    const auto fc = fit_combined(d1, d2);
    const double separate = f1.rss / double(d1.n()) + f2.rss / double(d2.n());
    const double merged = (d1.targets - d1.features * fc.fit.beta_hat).squaredNorm() / double(d1.n()) +
                          (d2.targets - d2.features * fc.fit.beta_hat).squaredNorm() / double(d2.n());
    return merged < separate;
}

struct CellResult {
    int p = 0;
    double d = 0.0;
    bool mu_shift = false;
    GroundTruth truth;
    int trials = 0;
    int failed = 0;
    double alg_accuracy = 0.0;     // agreement of the tuned decision with the oracle
    double direct_accuracy = 0.0;  // agreement of the baseline with the oracle
    double alg_merge_rate = 0.0;
    double direct_merge_rate = 0.0;
    double mean_proxy_acc = 0.0;
    double mean_suggestion_rate = 0.0;
};

namespace detail {
struct TrialOutcome {
    bool ok = false;
    bool alg_merge = false;
    bool direct_merge = false;
    double proxy_acc = 0.0;
    double suggestion_rate = 0.0;
};
}  // namespace detail

inline CellResult run_cell(int p, double d, bool mu_shift, const ExperimentGrid& grid, const TunerConfig& cfg,
                           std::uint64_t cell_seed) {
    const auto [s1, s2] = cell_specs(p, d, mu_shift, grid.noise_var);
    CellResult cell;
    cell.p = p;
    cell.d = d;
    cell.mu_shift = mu_shift;
    cell.trials = grid.trials;
    cell.truth = ground_truth_merge(s1, s2, grid.n, grid.n, grid.oracle_reps, derive_seed(cell_seed, "oracle"));
    const auto outcomes = parallel_map<detail::TrialOutcome>(static_cast<std::size_t>(grid.trials), [&](std::size_t t) {
        detail::TrialOutcome o;
        const auto trial_seed = derive_seed(cell_seed, "trial", t);
        const auto d1 = sample_synthetic(s1, grid.n, derive_seed(trial_seed, "data", 1), "D1");
        const auto d2 = sample_synthetic(s2, grid.n, derive_seed(trial_seed, "data", 2), "D2");
        TunerConfig tc = cfg;
        tc.seed = derive_seed(trial_seed, "tuner");
        try {
            const auto dec = decide_pair(d1, d2, tc);
            o.alg_merge = dec.merge;
            o.proxy_acc = dec.proxy_acc;
            o.suggestion_rate = dec.suggestion_rate;
            o.direct_merge = direct_comparison(d1, d2);
            o.ok = true;
        } catch (const Error&) {
            o.ok = false;
        }
        return o;
    });
    int alg_ok = 0, direct_ok = 0, alg_merge = 0, direct_merge = 0, done = 0;
    double proxy = 0.0, sugg = 0.0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++cell.failed;
            continue;
        }
        ++done;
        alg_ok += o.alg_merge == cell.truth.merge ? 1 : 0;
        direct_ok += o.direct_merge == cell.truth.merge ? 1 : 0;
        alg_merge += o.alg_merge ? 1 : 0;
        direct_merge += o.direct_merge ? 1 : 0;
        proxy += o.proxy_acc;
        sugg += o.suggestion_rate;
    }
    if (done > 0) {
        cell.alg_accuracy = double(alg_ok) / done;
        cell.direct_accuracy = double(direct_ok) / done;
        cell.alg_merge_rate = double(alg_merge) / done;
        cell.direct_merge_rate = double(direct_merge) / done;
        cell.mean_proxy_acc = proxy / done;
        cell.mean_suggestion_rate = sugg / done;
    }
    return cell;
}

inline std::vector<CellResult> run_grid(const ExperimentGrid& grid, const TunerConfig& cfg) {
    grid.validate();
    cfg.validate();
    std::vector<CellResult> cells;
    std::size_t index = 0;
    for (int p : grid.p_values) {
        for (double d : grid.d_values) {
            cells.push_back(run_cell(p, d, grid.mu_shift, grid, cfg, derive_seed(grid.seed, "cell", index)));
            ++index;
        }
    }
    return cells;
}

inline void write_grid_header(std::ostream& out, const ExperimentGrid& g, const TunerConfig& c) {
    out << "# seed=" << g.seed << " n=" << g.n << " noise_var=" << g.noise_var << " trials=" << g.trials
        << " oracle_reps=" << g.oracle_reps << " mu_shift=" << (g.mu_shift ? 1 : 0) << "\n";
    out << "# p_values=";
    for (std::size_t i = 0; i < g.p_values.size(); ++i) out << (i ? " " : "") << g.p_values[i];
    out << " d_values=";
    for (std::size_t i = 0; i < g.d_values.size(); ++i) out << (i ? " " : "") << g.d_values[i];
    out << "\n# alpha_min=" << c.alpha_min << " alpha_max=" << c.alpha_max << " eta=" << c.eta
        << " max_iterations=" << c.max_iterations << " lambda_threshold=" << c.lambda_threshold
        << " subsample_n=" << c.subsample_n << " oos_count=" << c.oos_count << " boot_reps_m=" << c.boot_reps_m
        << " split_fraction=" << c.split_fraction << " moment_reps=" << c.moment_reps
        << " mode=" << to_string(c.mode) << "\n";
}

inline void write_grid_csv(std::ostream& out, const ExperimentGrid& g, const TunerConfig& c,
                           const std::vector<CellResult>& cells) {
    write_grid_header(out, g, c);
    out << "p,d,mu_shift,merge_truth,truth_margin,truth_std_err,alg_accuracy,direct_accuracy,alg_merge_rate,"
           "direct_merge_rate,mean_proxy_acc,mean_suggestion_rate,trials,failed\n";
    out << std::setprecision(6);
    for (const auto& r : cells) {
        out << r.p << ',' << r.d << ',' << (r.mu_shift ? 1 : 0) << ',' << (r.truth.merge ? "Yes" : "No") << ','
            << r.truth.margin << ',' << r.truth.std_err << ',' << r.alg_accuracy << ',' << r.direct_accuracy << ','
            << r.alg_merge_rate << ',' << r.direct_merge_rate << ',' << r.mean_proxy_acc << ','
            << r.mean_suggestion_rate << ',' << r.trials << ',' << r.failed << '\n';
    }
}

inline void write_grid_text(std::ostream& out, const ExperimentGrid& g, const TunerConfig& c,
                            const std::vector<CellResult>& cells) {
    write_grid_header(out, g, c);
    out << std::left << std::setw(5) << "p" << std::setw(7) << "d" << std::setw(8) << "Merge?" << std::setw(12)
        << "Algorithm" << std::setw(10) << "Direct" << std::setw(11) << "proxy_acc" << "suggest\n";
    out << std::fixed;
    for (const auto& r : cells) {
        out << std::setw(5) << r.p << std::setw(7) << std::setprecision(2) << r.d << std::setw(8)
            << (r.truth.merge ? "Yes" : "No") << std::setw(12) << std::setprecision(1) << 100.0 * r.alg_accuracy
            << std::setw(10) << 100.0 * r.direct_accuracy << std::setw(11) << std::setprecision(3) << r.mean_proxy_acc
            << r.mean_suggestion_rate << '\n';
    }
    out.unsetf(std::ios::fixed);
}

}  // namespace collab
