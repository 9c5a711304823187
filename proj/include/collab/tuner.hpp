#pragma once

// Pairwise merge decision with a tuned confidence level: the alpha grid is
// scored by how often the sign of (phi - psi) agrees with a bootstrap estimate
// of the out-of-sample error difference.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "criterion.hpp"
#include "data_model.hpp"
#include "errors.hpp"
#include "expectation.hpp"
#include "ols.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace collab {

enum class MergeMode { PaperLiteral, MajorityDirection };

inline MergeMode parse_merge_mode(const std::string& s) {
    if (s == "paper-literal") return MergeMode::PaperLiteral;
    if (s == "majority-direction") return MergeMode::MajorityDirection;
    throw ParseError("unknown mode '" + s + "' (expected paper-literal or majority-direction)");
}

inline std::string to_string(MergeMode m) {
    return m == MergeMode::PaperLiteral ? "paper-literal" : "majority-direction";
}

struct TunerConfig {
    double alpha_min = 2.0;
    double alpha_max = 10.0;
    double eta = 0.01;
    int max_iterations = 1000;
    double lambda_threshold = 0.9;
    int subsample_n = 0;  // 0: 50 when p <= 10, otherwise 100
    int oos_count = 1000;
    int boot_reps_m = 100;
    double split_fraction = 0.5;
    int moment_reps = kDefaultBootReps;  // bootstrap replicates for the plug-in moments
    std::uint64_t seed = 0;
    MergeMode mode = MergeMode::MajorityDirection;

    void validate() const {
        if (!(alpha_min <= alpha_max) || !(alpha_min > 0.0)) throw InvalidArgument("tuner: need 0 < alpha_min <= alpha_max");
        if (!(eta > 0.0)) throw InvalidArgument("tuner: eta must be positive");
        if (max_iterations < 1 || oos_count < 1 || boot_reps_m < 1 || moment_reps < 1 || subsample_n < 0) {
            throw InvalidArgument("tuner: counts must be at least 1");
        }
        if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw InvalidArgument("tuner: split_fraction must lie in (0, 1)");
    }

    int resolved_subsample(Eigen::Index p) const {
        if (subsample_n > 0) return subsample_n;
        return p <= 10 ? 50 : 100;
    }

    std::vector<double> alpha_grid() const {
        const auto steps = static_cast<long long>(std::floor((alpha_max - alpha_min) / eta + 1e-9));
        std::vector<double> grid;
        grid.reserve(static_cast<std::size_t>(steps + 1));
        for (long long i = 0; i <= steps; ++i) grid.push_back(alpha_min + static_cast<double>(i) * eta);
        return grid;
    }

    // Reduced settings for quick runs on a single machine.
    static TunerConfig desk() {
        TunerConfig c;
        c.eta = 0.1;
        c.max_iterations = 100;
        c.oos_count = 200;
        c.boot_reps_m = 20;
        c.moment_reps = 200;
        return c;
    }

    void apply(const Config& cfg) {
        alpha_min = cfg.get_double("alpha_min", alpha_min);
        alpha_max = cfg.get_double("alpha_max", alpha_max);
        eta = cfg.get_double("eta", eta);
        max_iterations = static_cast<int>(cfg.get_int("max_iterations", max_iterations));
        lambda_threshold = cfg.get_double("lambda_threshold", lambda_threshold);
        subsample_n = static_cast<int>(cfg.get_int("subsample_n", subsample_n));
        oos_count = static_cast<int>(cfg.get_int("oos_count", oos_count));
        boot_reps_m = static_cast<int>(cfg.get_int("boot_reps_m", boot_reps_m));
        split_fraction = cfg.get_double("split_fraction", split_fraction);
        moment_reps = static_cast<int>(cfg.get_int("moment_reps", moment_reps));
        seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(seed)));
        if (auto m = cfg.get("mode")) mode = parse_merge_mode(*m);
    }
};

struct MergeDecision {
    bool merge = false;
    double proxy_acc = 0.0;
    double alpha_opt = 0.0;
    std::vector<std::pair<double, int>> per_alpha_acc;  // (alpha, correct count)
    double suggestion_rate = 0.0;
    MergeMode mode = MergeMode::MajorityDirection;
    int iterations = 0;
    int failed_trials = 0;
    int clamped_c0 = 0;  // trials at alpha_opt where c0 was clamped to zero
};

// Mean squared prediction error over M bootstrap resamples of the held-out rows.
inline double bootstrap_ose(const OlsFit& fit, const Dataset& held_out, int m, int oos_n, std::uint64_t seed,
                            bool identity_resample = false) {
    if (held_out.n() < 1) throw InvalidArgument("bootstrap_ose: empty held-out set");
    if (m < 1 || oos_n < 1) throw InvalidArgument("bootstrap_ose: M and oos_n must be positive");
    const Vector sq = (held_out.targets - held_out.features * fit.beta_hat).array().square();
    if (identity_resample) {
        if (m != 1 || oos_n != held_out.n()) throw InvalidArgument("bootstrap_ose: identity resample needs M = 1, oos_n = n");
        return sq.mean();
    }
    auto rng = make_stream(seed, "bootstrap_ose");
    const auto n = static_cast<std::uint64_t>(held_out.n());
    double total = 0.0;
    for (int b = 0; b < m; ++b) {
        double s = 0.0;
        for (int i = 0; i < oos_n; ++i) s += sq(static_cast<Eigen::Index>(rng.below(n)));
        total += s / oos_n;
    }
    return total / m;
}

inline double ose_dif_from_fits(const OlsFit& f1, const OlsFit& f2, const OlsFit& fc, const Dataset& out1,
                                const Dataset& out2, int m, int oos_n, std::uint64_t seed) {
    const double ind = bootstrap_ose(f1, out1, m, oos_n, derive_seed(seed, "ose_dif", 1)) +
                       bootstrap_ose(f2, out2, m, oos_n, derive_seed(seed, "ose_dif", 2));
    const double comb = bootstrap_ose(fc, out1, m, oos_n, derive_seed(seed, "ose_dif", 1)) +
                        bootstrap_ose(fc, out2, m, oos_n, derive_seed(seed, "ose_dif", 2));
    return ind - comb;
}

// Positive values favour merging.
inline double ose_dif_hat(const SplitDataset& a, const SplitDataset& b, const TunerConfig& cfg, std::uint64_t seed) {
    const auto f1 = fit_ols(a.train);
    const auto f2 = fit_ols(b.train);
    const auto fc = fit_combined(a.train, b.train);
    return ose_dif_from_fits(f1, f2, fc.fit, a.held_out, b.held_out, cfg.boot_reps_m, cfg.oos_count, seed);
}

namespace detail {

struct TrialResult {
    bool ok = false;
    CriterionState state;
    double ose_dif = 0.0;
};

inline TrialResult run_trial(const SplitDataset& a, const SplitDataset& b, const TunerConfig& cfg,
                             const MergeQuantities& q, std::uint64_t trial_seed) {
    TrialResult r;
    auto rng = Philox4x32(derive_seed(trial_seed, "subsample"));
    const auto ns = static_cast<Eigen::Index>(cfg.resolved_subsample(a.train.p()));
    const Dataset s1 = resample_rows(a.train, ns, rng);
    const Dataset s2 = resample_rows(b.train, ns, rng);
    try {
        CriterionInputs ci;
        ci.fit1 = fit_ols(s1);
        ci.fit2 = fit_ols(s2);
        ci.combined = fit_combined(s1, s2);
        ci.d_matrix = whitening_matrix_d(ci.fit1, ci.fit2);
        ci.b_factor = q.b0_factor;
        r.state = prepare_criterion(ci, q);
        r.ose_dif = ose_dif_from_fits(ci.fit1, ci.fit2, ci.combined.fit, a.held_out, b.held_out, cfg.boot_reps_m,
                                      cfg.oos_count, derive_seed(trial_seed, "oos"));
        r.ok = true;
    } catch (const SingularMatrixError&) {
        r.ok = false;
    }
    return r;
}

inline std::vector<TrialResult> run_trials(const SplitDataset& a, const SplitDataset& b, const TunerConfig& cfg,
                                           const MergeQuantities& q, std::string_view label) {
    return parallel_map<TrialResult>(static_cast<std::size_t>(cfg.max_iterations), [&](std::size_t t) {
        return run_trial(a, b, cfg, q, derive_seed(cfg.seed, label, t));
    });
}

inline bool trial_correct(const TrialResult& t, double alpha) {
    if (!t.ok) return false;
    return (phi_value(t.state, alpha) - psi_value(t.state, alpha)) * t.ose_dif > 0.0;
}

}  // namespace detail

// Criterion constants estimated from the training halves, at the subsample size
// the trials will use.
inline MergeQuantities plug_in_quantities(const SplitDataset& a, const SplitDataset& b, const TunerConfig& cfg) {
    const auto ns = static_cast<Eigen::Index>(cfg.resolved_subsample(a.train.p()));
    const auto m = moments_from_data(a.train, b.train, cfg.moment_reps, derive_seed(cfg.seed, "plug_in_moments"), ns, ns);
    return merge_quantities(m);
}

// Every alpha is scored on the same trials; ties go to the smallest alpha.
inline std::pair<double, std::vector<std::pair<double, int>>> tune_alpha(const SplitDataset& a, const SplitDataset& b,
                                                                         const TunerConfig& cfg,
                                                                         const MergeQuantities& q) {
    cfg.validate();
    if (a.train.p() != b.train.p()) throw DimensionError("tune_alpha: datasets differ in p");
    const auto grid = cfg.alpha_grid();
    const auto trials = detail::run_trials(a, b, cfg, q, "tune_alpha");
    std::size_t ok = 0;
    for (const auto& t : trials) ok += t.ok ? 1 : 0;
    if (ok == 0) {
        throw SingularMatrixError("tune_alpha: every trial failed (singular subsamples) at alpha = " +
                                  std::to_string(grid.front()));
    }
    std::vector<std::pair<double, int>> acc;
    acc.reserve(grid.size());
    double best_alpha = grid.front();
    int best = -1;
    for (const double alpha : grid) {
        int correct = 0;
        for (const auto& t : trials) correct += detail::trial_correct(t, alpha) ? 1 : 0;
        acc.emplace_back(alpha, correct);
        if (correct > best) {
            best = correct;
            best_alpha = alpha;
        }
    }
    return {best_alpha, std::move(acc)};
}

inline std::pair<double, std::vector<std::pair<double, int>>> tune_alpha(const SplitDataset& a, const SplitDataset& b,
                                                                         const TunerConfig& cfg) {
    return tune_alpha(a, b, cfg, plug_in_quantities(a, b, cfg));
}

inline MergeDecision decide_split_pair(const SplitDataset& a, const SplitDataset& b, const TunerConfig& cfg,
                                       const MergeQuantities& q) {
    MergeDecision out;
    out.mode = cfg.mode;
    auto [alpha_opt, acc] = tune_alpha(a, b, cfg, q);
    out.alpha_opt = alpha_opt;
    out.per_alpha_acc = std::move(acc);
    const auto trials = detail::run_trials(a, b, cfg, q, "decide_pair");
    int correct = 0, suggested = 0;
    for (const auto& t : trials) {
        if (!t.ok) {
            ++out.failed_trials;
            continue;
        }
        correct += detail::trial_correct(t, alpha_opt) ? 1 : 0;
        const auto pd = psi_detail(t.state, alpha_opt);
        suggested += phi_value(t.state, alpha_opt) > pd.psi ? 1 : 0;
        out.clamped_c0 += pd.c0_clamped ? 1 : 0;
    }
    out.iterations = cfg.max_iterations;
    out.proxy_acc = static_cast<double>(correct) / cfg.max_iterations;
    out.suggestion_rate = static_cast<double>(suggested) / cfg.max_iterations;
    out.merge = out.proxy_acc > cfg.lambda_threshold;
    if (cfg.mode == MergeMode::MajorityDirection) out.merge = out.merge && out.suggestion_rate > 0.5;
    return out;
}

inline MergeDecision decide_pair(const Dataset& d1, const Dataset& d2, const TunerConfig& cfg,
                                 const MergeQuantities* fixed_quantities = nullptr) {
    cfg.validate();
    if (d1.p() != d2.p()) throw DimensionError("decide_pair: '" + d1.id + "' and '" + d2.id + "' differ in p");
    const auto a = split(d1, cfg.split_fraction, derive_seed(cfg.seed, "split", 1));
    const auto b = split(d2, cfg.split_fraction, derive_seed(cfg.seed, "split", 2));
    const auto q = fixed_quantities ? *fixed_quantities : plug_in_quantities(a, b, cfg);
    return decide_split_pair(a, b, cfg, q);
}

}  // namespace collab
