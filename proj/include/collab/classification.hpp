#pragma once

// Multiclass linear classification: separable sampling, cross-entropy and the
// ramp-based surrogate, projected subgradient training, and the closed-form
// error bounds Phi (one dataset) and Psi (two datasets combined).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace collab {

// Row c holds beta_c.
using ClassParams = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ClassSpec {
    ClassParams betas;
    double margin = 0.1;        // gamma_0
    double feature_bound = 1.0; // B

    int num_classes() const { return static_cast<int>(betas.rows()); }
    Eigen::Index p() const { return betas.cols(); }

    void validate() const {
        if (betas.rows() < 2 || betas.cols() < 1) throw InvalidArgument("ClassSpec: need C >= 2 and p >= 1");
        if (!(margin > 0.0) || !(feature_bound > 0.0)) throw InvalidArgument("ClassSpec: margin and B must be positive");
    }
};

struct ClassModel {
    ClassParams beta_hats;
    double reg_lambda = 0.1;
    double gamma = 0.1;
};

struct ClassDataset {
    RowMatrix x;
    std::vector<int> y;  // 0-based class labels
    Eigen::Index n() const { return x.rows(); }
};

inline double triple_norm(const ClassParams& b) { return b.rowwise().norm().sum(); }

inline double norm_cap(int num_classes, double lambda) { return std::sqrt(2.0 * std::log(num_classes) / lambda); }

// Label of x under the margin rule, or -1 if x falls outside every acceptance region.
inline int separable_label(const ClassSpec& spec, const Vector& x) {
    const Vector s = spec.betas * x;
    int label = -1;
    for (Eigen::Index c = 0; c < s.size(); ++c) {
        if (s(c) < 0.0) {
            if (label >= 0) return -1;
            label = static_cast<int>(c);
        } else if (!(s(c) > spec.margin)) {
            return -1;
        }
    }
    return label;
}

// Uniform draw from the ball of radius B.
inline Vector sample_ball(Eigen::Index p, double radius, Philox4x32& rng) {
    Vector v(p);
    for (Eigen::Index i = 0; i < p; ++i) v(i) = rng.normal();
    const double r = radius * std::pow(rng.uniform_open(), 1.0 / static_cast<double>(p));
    return v * (r / v.norm());
}

inline ClassDataset sample_separable(const ClassSpec& spec, Eigen::Index n, std::uint64_t seed,
                                     long long max_attempts = 1'000'000) {
    spec.validate();
    auto rng = make_stream(seed, "sample_separable");
    ClassDataset d;
    d.x.resize(n, spec.p());
    d.y.reserve(static_cast<std::size_t>(n));
    long long attempts = 0;
    for (Eigen::Index i = 0; i < n;) {
        if (++attempts > max_attempts) {
            throw InvalidArgument("sample_separable: acceptance region too small (attempt cap reached)");
        }
        const Vector x = sample_ball(spec.p(), spec.feature_bound, rng);
        const int label = separable_label(spec, x);
        if (label < 0) continue;
        d.x.row(i) = x.transpose();
        d.y.push_back(label);
        ++i;
    }
    return d;
}

namespace detail {
inline double log_sum_exp(const Vector& s) {
    const double m = s.maxCoeff();
    return m + std::log((s.array() - m).exp().sum());
}
}  // namespace detail

inline double ramp(double t, double gamma) {
    if (t < 0.0) return 1.0;
    if (t <= gamma) return 1.0 - t / gamma;
    return 0.0;
}

inline double cross_entropy_loss(const ClassModel& m, const Vector& x, int y) {
    const Vector s = m.beta_hats * x;
    return detail::log_sum_exp(s) - s(y) + 0.5 * m.reg_lambda * m.beta_hats.squaredNorm();
}

inline double surrogate_loss(const ClassModel& m, const ClassSpec& spec, const Vector& x) {
    const double xn = x.norm();
    double total = (spec.betas - m.beta_hats).rowwise().norm().sum() * xn;
    const Vector t = spec.betas * x;
    for (Eigen::Index c = 0; c < t.size(); ++c) total += -t(c) * ramp(t(c), m.gamma);
    total += detail::log_sum_exp(m.beta_hats * x);
    return total + 0.5 * m.reg_lambda * m.beta_hats.squaredNorm();
}

inline double empirical_surrogate(const ClassModel& m, const ClassSpec& spec, const ClassDataset& d) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) s += surrogate_loss(m, spec, d.x.row(i).transpose());
    return s / static_cast<double>(d.n());
}

// Subgradient of the empirical surrogate with respect to beta_hat. At a kink of
// ||beta_c - beta_hat_c|| the zero vector is taken from the subdifferential.
inline ClassParams surrogate_subgradient(const ClassModel& m, const ClassSpec& spec, const ClassDataset& d) {
    const auto C = m.beta_hats.rows();
    ClassParams g = ClassParams::Zero(C, m.beta_hats.cols());
    double sum_xn = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const Vector x = d.x.row(i).transpose();
        sum_xn += x.norm();
        Vector s = m.beta_hats * x;
        s = (s.array() - s.maxCoeff()).exp();
        s /= s.sum();
        g.noalias() += s * x.transpose();
    }
    g /= static_cast<double>(d.n());
    const double avg_xn = sum_xn / static_cast<double>(d.n());
    for (Eigen::Index c = 0; c < C; ++c) {
        const Vector diff = (m.beta_hats.row(c) - spec.betas.row(c)).transpose();
        const double dn = diff.norm();
        if (dn > 0.0) g.row(c) += (avg_xn / dn) * diff.transpose();
    }
    g += m.reg_lambda * m.beta_hats;
    return g;
}

struct TrainResult {
    ClassModel best;
    double best_loss = 0.0;
    int best_step = 1;
    std::vector<double> loss_trace;  // loss of iterate k, k = 1..K
};

using StepRule = std::function<double(int)>;

inline StepRule harmonic_steps() {
    return [](int k) { return 1.0 / static_cast<double>(k); };
}

inline void project_to_cap(ClassParams& b, double cap) {
    for (Eigen::Index c = 0; c < b.rows(); ++c) {
        const double nrm = b.row(c).norm();
        if (nrm > cap) b.row(c) *= cap / nrm;
    }
}

inline TrainResult subgradient_train(const ClassDataset& d, const ClassSpec& spec, double lambda, double gamma,
                                     int steps, const StepRule& step_rule = harmonic_steps()) {
    if (steps < 1) throw InvalidArgument("subgradient_train: K must be at least 1");
    if (!(lambda > 0.0) || !(gamma > 0.0)) throw InvalidArgument("subgradient_train: lambda and gamma must be positive");
    const double cap = norm_cap(spec.num_classes(), lambda);
    ClassModel cur{ClassParams::Zero(spec.num_classes(), spec.p()), lambda, gamma};
    TrainResult r;
    r.loss_trace.reserve(static_cast<std::size_t>(steps));
    for (int k = 1; k <= steps; ++k) {
        const double loss = empirical_surrogate(cur, spec, d);
        r.loss_trace.push_back(loss);
        if (k == 1 || loss < r.best_loss) {
            r.best_loss = loss;
            r.best = cur;
            r.best_step = k;
        }
        if (k == steps) break;
        const double eta = step_rule(k);
        if (!(eta > 0.0)) throw InvalidArgument("subgradient_train: step sizes must be positive");
        cur.beta_hats -= eta * surrogate_subgradient(cur, spec, d);
        project_to_cap(cur.beta_hats, cap);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Bounds

struct StepSums {
    double sum = 0.0;     // sum of eta_k
    double sum_sq = 0.0;  // sum of eta_k^2
};

inline StepSums step_sums(int steps, const StepRule& rule = harmonic_steps()) {
    StepSums s;
    for (int k = 1; k <= steps; ++k) {
        const double e = rule(k);
        s.sum += e;
        s.sum_sq += e * e;
    }
    return s;
}

struct BoundSettings {
    int num_classes = 2;
    double feature_bound = 1.0;
    double lambda = 0.1;
    double delta = 0.05;
    StepSums steps;
};

struct BoundReport {
    double total = 0.0;
    double parts[3] = {0.0, 0.0, 0.0};  // sampling, complexity, optimization
    double omega1 = 0.0, omega2 = 0.0;
    double k1 = 0.0, k2 = 0.0, k3 = 0.0;  // (a1, a2, -) for Phi or (b1, b2, b3) for Psi
    double g_const = 0.0;
};

inline double gradient_bound_g(const BoundSettings& s) {
    const double C = s.num_classes;
    return 2.0 * C * s.feature_bound + C * std::sqrt(2.0 * s.lambda * std::log(C));
}

inline double omega(const ClassParams& betas, const BoundSettings& s) {
    const double C = s.num_classes;
    const double B = s.feature_bound;
    return 2.0 * C * B * std::sqrt(std::log(C) / s.lambda) + 2.0 * B * triple_norm(betas) + (C + 1.0) * std::log(C);
}

inline double subgradient_gap_bound(const BoundSettings& s) {
    const double C = s.num_classes;
    return (8.0 * std::log(C) + gradient_bound_g(s) * s.lambda * s.steps.sum_sq) / (2.0 * s.lambda * s.steps.sum);
}

inline void check_bound_settings(const BoundSettings& s) {
    if (s.num_classes < 2 || !(s.feature_bound > 0.0) || !(s.lambda > 0.0) || !(s.delta > 0.0 && s.delta < 1.0) ||
        !(s.steps.sum > 0.0)) {
        throw InvalidArgument("bound settings: need C >= 2, B > 0, lambda > 0, delta in (0,1), positive steps");
    }
}

inline BoundReport phi_bound(double n, const ClassParams& betas, const BoundSettings& s) {
    check_bound_settings(s);
    const double C = s.num_classes;
    const double B = s.feature_bound;
    const double L = std::log(1.0 / s.delta);
    const double pi = std::numbers::pi;
    BoundReport r;
    r.omega1 = omega(betas, s);
    r.k1 = (2.0 * std::sqrt(6.0 / pi) + 4.0 * std::sqrt(2.0)) * std::sqrt(std::log(C) / s.lambda) * B * C +
           2.0 * std::sqrt(3.0 / pi) * C * std::log(C);
    r.k2 = 2.0 * std::sqrt(3.0 / pi) * B;
    r.g_const = gradient_bound_g(s);
    r.parts[0] = std::sqrt(2.0 / n * L) * r.omega1;
    r.parts[1] = (r.k1 + r.k2 * triple_norm(betas)) / std::sqrt(n);
    r.parts[2] = subgradient_gap_bound(s);
    r.total = r.parts[0] + r.parts[1] + r.parts[2];
    return r;
}

inline BoundReport psi_bound(double n1, double n2, const ClassParams& betas1, const ClassParams& betas2,
                             const BoundSettings& s) {
    check_bound_settings(s);
    const double C = s.num_classes;
    const double B = s.feature_bound;
    const double L = std::log(1.0 / s.delta);
    const double pi = std::numbers::pi;
    BoundReport r;
    r.omega1 = omega(betas1, s);
    r.omega2 = omega(betas2, s);
    r.k1 = 0.5 * std::sqrt(3.0 / pi) * B;
    r.k2 = (4.0 + 2.0 * std::sqrt(3.0 / pi)) * B * C * std::sqrt(2.0 * std::log(C) / s.lambda) +
           2.0 * std::sqrt(3.0 / pi) * C * std::log(C);
    r.k3 = std::sqrt(3.0 / pi) * B;
    r.g_const = gradient_bound_g(s);
    const double inv = 1.0 / std::sqrt(n1) + 1.0 / std::sqrt(n2);
    r.parts[0] = std::sqrt(2.0 * (r.omega1 * r.omega1 / n1 + r.omega2 * r.omega2 / n2) * L);
    r.parts[1] = inv * (r.k1 * (triple_norm(betas1 - betas2) + triple_norm(betas1 + betas2)) + r.k2) +
                 r.k3 * (triple_norm(betas1) / std::sqrt(n1) + triple_norm(betas2) / std::sqrt(n2));
    r.parts[2] = (8.0 * std::log(C) + 2.0 * r.g_const * s.lambda * s.steps.sum_sq) / (s.lambda * s.steps.sum);
    r.total = r.parts[0] + r.parts[1] + r.parts[2];
    return r;
}

struct ClassMergeDecision {
    bool merge = false;
    double lhs = 0.0;
    double rhs = 0.0;
    bool plug_in = false;  // norms came from trained parameters rather than true ones
};

// The final merge inequality, evaluated term by term as stated.
inline ClassMergeDecision decide_merge_classification(double n1, double n2, const ClassParams& betas1,
                                                      const ClassParams& betas2, const BoundSettings& s,
                                                      bool plug_in = false) {
    check_bound_settings(s);
    if (betas1.rows() != betas2.rows() || betas1.cols() != betas2.cols()) {
        throw DimensionError("decide_merge_classification: parameter shapes differ");
    }
    const double C = s.num_classes;
    const double B = s.feature_bound;
    const double L = std::log(1.0 / s.delta);
    const double k = std::sqrt(3.0 / std::numbers::pi) * B;
    const double w1 = omega(betas1, s);
    const double w2 = omega(betas2, s);
    ClassMergeDecision d;
    d.plug_in = plug_in;
    d.lhs = std::sqrt(2.0 * L * (w1 * w1 / n1 + w2 * w2 / n2)) +
            k * (1.0 / std::sqrt(n1) + 1.0 / std::sqrt(n2)) *
                (triple_norm(betas1 - betas2) / 2.0 + triple_norm(betas1 + betas2) / 2.0);
    d.rhs = std::sqrt(2.0 * L) * (std::sqrt(w1 * w1 / n1) + std::sqrt(w2 * w2 / n2)) +
            k * (triple_norm(betas1) / std::sqrt(n1) + triple_norm(betas2) / std::sqrt(n2)) +
            4.0 * std::log(C) / (s.lambda * s.steps.sum);
    d.merge = d.lhs <= d.rhs;
    return d;
}

inline void write_bound_csv_header(std::ostream& out) {
    out << "kind,n1,n2,C,B,lambda,delta,eta_sum,eta_sq_sum,part_sampling,part_complexity,part_optimization,total,"
           "omega1,omega2,const1,const2,const3,G\n";
}

inline void write_bound_csv_row(std::ostream& out, const std::string& kind, double n1, double n2, const BoundSettings& s,
                                const BoundReport& r) {
    out << kind << ',' << n1 << ',' << n2 << ',' << s.num_classes << ',' << s.feature_bound << ',' << s.lambda << ','
        << s.delta << ',' << s.steps.sum << ',' << s.steps.sum_sq << ',' << r.parts[0] << ',' << r.parts[1] << ','
        << r.parts[2] << ',' << r.total << ',' << r.omega1 << ',' << r.omega2 << ',' << r.k1 << ',' << r.k2 << ','
        << r.k3 << ',' << r.g_const << '\n';
}

inline void write_decision_csv(std::ostream& out, double n1, double n2, const BoundSettings& s,
                               const ClassMergeDecision& d) {
    out << "n1,n2,C,B,lambda,delta,eta_sum,lhs,rhs,merge,plug_in\n";
    out << n1 << ',' << n2 << ',' << s.num_classes << ',' << s.feature_bound << ',' << s.lambda << ',' << s.delta
        << ',' << s.steps.sum << ',' << d.lhs << ',' << d.rhs << ',' << (d.merge ? 1 : 0) << ',' << (d.plug_in ? 1 : 0)
        << '\n';
}

}  // namespace collab
