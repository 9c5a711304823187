#pragma once

// Computable high-probability surrogates for h(sigma^2) and g(beta1, beta2):
//   phi = A1~ sigma_c^2 + A2~ ||D (b1 - b2)||^2     (lower bound on h, prob >= 1 - 2 delta)
//   psi = (sqrt(g(b1, b2)) + c0 * T)^2               (upper bound on g, prob >= 1 - 3 delta)
// with log(1/delta) replaced by alpha throughout and delta = exp(-alpha).

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <utility>

#include "data_model.hpp"
#include "errors.hpp"
#include "expectation.hpp"
#include "ols.hpp"
#include "oracle.hpp"

namespace collab {

struct CriterionInputs {
    OlsFit fit1, fit2;
    CombinedFit combined;
    Matrix d_matrix;
    Matrix b_factor;
    double alpha = 1.0;
};

struct SigmaTraces {
    double trace = 0.0;      // tr(Sigma)
    double trace_sq = 0.0;   // tr(Sigma^2)
    double spectral = 0.0;   // ||Sigma||
};

struct CriterionOutput {
    double phi = 0.0;
    double psi = 0.0;
    bool merge_suggested = false;
    double c0 = 0.0;
    SigmaTraces sigma_traces;
    double g_hat = 0.0;
    bool discriminant_clamped = false;
    bool c0_clamped = false;
};

// Everything the decision needs, reduced to scalars. Alpha enters only
// through evaluate(), so one state serves a whole grid of alphas.
struct CriterionState {
    double n0 = 0.0;
    double a0 = 0.0;
    double sigma2_hat = 0.0;
    double d_norm = 0.0;  // ||D (b1 - b2)||
    double g_hat = 0.0;   // ||B (b1 - b2)||^2
    SigmaTraces traces;
};

inline std::pair<double, double> a_tilde_coefficients(double n0, double a0, double alpha) {
    const double root = std::sqrt(alpha / n0);
    const double q = n0 + 2.0 * std::sqrt(n0 * alpha) + 2.0 * alpha;
    const double denom = q * (3.0 + 4.0 * root);
    return {n0 * a0 / denom, -2.0 * a0 * (1.0 + 2.0 * root) / denom};
}

// Sigma = K^T K with K = B C (X0^T X0)^{-1} X0^T; its nonzero spectrum equals
// that of K K^T = B (G1^{-1} + G2^{-1}) B^T, a p x p matrix.
inline SigmaTraces sigma_traces(const Matrix& b_factor, const OlsFit& f1, const OlsFit& f2) {
    const Matrix s = f1.gram_inverse + f2.gram_inverse;
    Matrix kk = b_factor * s * b_factor.transpose();
    kk = 0.5 * (kk + kk.transpose()).eval();
    const Vector e = Eigen::SelfAdjointEigenSolver<Matrix>(kk, Eigen::EigenvaluesOnly).eigenvalues().cwiseMax(0.0);
    return {e.sum(), e.squaredNorm(), e.maxCoeff()};
}

inline CriterionState prepare_criterion(const CriterionInputs& ci, const MergeQuantities& q) {
    if (ci.combined.n0 <= 0) throw InvalidArgument("criterion: n1 + n2 - p must be positive");
    CriterionState s;
    s.n0 = static_cast<double>(ci.combined.n0);
    s.a0 = q.a0;
    s.sigma2_hat = ci.combined.sigma2_hat;
    const Vector delta = ci.fit1.beta_hat - ci.fit2.beta_hat;
    s.d_norm = (ci.d_matrix * delta).norm();
    s.g_hat = (ci.b_factor * delta).squaredNorm();
    s.traces = sigma_traces(ci.b_factor, ci.fit1, ci.fit2);
    return s;
}

inline double phi_value(const CriterionState& s, double alpha) {
    const auto [a1, a2] = a_tilde_coefficients(s.n0, s.a0, alpha);
    return a1 * s.sigma2_hat + a2 * s.d_norm * s.d_norm;
}

struct PsiDetail {
    double psi = 0.0;
    double c0 = 0.0;
    double c[6] = {0, 0, 0, 0, 0, 0};
    bool discriminant_clamped = false;
    bool c0_clamped = false;
};

inline PsiDetail psi_detail(const CriterionState& s, double alpha) {
    PsiDetail out;
    const double n0 = s.n0;
    const double delta = std::exp(-alpha);
    const double l4 = std::log(4.0 / (1.0 + delta));
    const double kappa = std::sqrt(l4) + 1.0 / (2.0 * std::sqrt(l4));
    const double q = n0 + 2.0 * std::sqrt(n0 * alpha) + 2.0 * alpha;
    const double r = std::sqrt(n0 * s.sigma2_hat);
    const double dn = s.d_norm;

    const double c1 = r * std::sqrt(q);
    const double c2 = r * dn;
    const double c3 = -(n0 / 8.0) * (1.0 + delta) / std::sqrt(std::numbers::e * l4) -
                      std::sqrt(2.0 * n0) * kappa * std::sqrt(q) + q;
    const double c4 = dn * (std::sqrt(2.0 * n0) * kappa - 2.0 * std::sqrt(q));
    const double c5 = dn * dn;
    if (c3 == 0.0) throw InvalidArgument("criterion: c3 vanishes, sigma bound undefined");

    double disc = (c1 - c4) * (c1 - c4) - 4.0 * c3 * (c5 - c2);
    if (disc < 0.0) {
        disc = 0.0;
        out.discriminant_clamped = true;
    }
    double c0 = (c1 - c4 + std::sqrt(disc)) / (2.0 * c3);
    if (!(c0 >= 0.0)) {
        c0 = 0.0;
        out.c0_clamped = true;
    }
    const auto& t = s.traces;
    const double spread = std::sqrt(std::max(0.0, t.trace + 2.0 * std::sqrt(t.trace_sq * alpha) + 2.0 * t.spectral * alpha));
    const double root = std::sqrt(s.g_hat) + c0 * spread;
    out.psi = root * root;
    out.c0 = c0;
    out.c[1] = c1;
    out.c[2] = c2;
    out.c[3] = c3;
    out.c[4] = c4;
    out.c[5] = c5;
    return out;
}

inline double psi_value(const CriterionState& s, double alpha) { return psi_detail(s, alpha).psi; }

inline CriterionOutput evaluate_criterion(const CriterionState& s, double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("criterion: alpha must be positive");
    CriterionOutput out;
    const auto pd = psi_detail(s, alpha);
    out.phi = phi_value(s, alpha);
    out.psi = pd.psi;
    out.c0 = pd.c0;
    out.discriminant_clamped = pd.discriminant_clamped;
    out.c0_clamped = pd.c0_clamped;
    out.sigma_traces = s.traces;
    out.g_hat = s.g_hat;
    out.merge_suggested = out.phi > out.psi;
    return out;
}

inline double phi(const CriterionInputs& ci, const MergeQuantities& q) {
    return phi_value(prepare_criterion(ci, q), ci.alpha);
}

inline double psi(const CriterionInputs& ci, const MergeQuantities& q) {
    return psi_value(prepare_criterion(ci, q), ci.alpha);
}

inline CriterionInputs make_criterion_inputs(const Dataset& d1, const Dataset& d2, double alpha,
                                             const MergeQuantities& q) {
    CriterionInputs ci;
    ci.fit1 = fit_ols(d1);
    ci.fit2 = fit_ols(d2);
    ci.combined = fit_combined(d1, d2);
    ci.d_matrix = whitening_matrix_d(ci.fit1, ci.fit2);
    ci.b_factor = q.b0_factor;
    ci.alpha = alpha;
    return ci;
}

inline CriterionOutput decide_known_moments(const Dataset& d1, const Dataset& d2, double alpha,
                                  const MergeQuantities& q) {
    const auto ci = make_criterion_inputs(d1, d2, alpha, q);
    return evaluate_criterion(prepare_criterion(ci, q), alpha);
}

inline CriterionOutput decide_known_moments(const Dataset& d1, const Dataset& d2, double alpha, const MomentSet& m) {
    return decide_known_moments(d1, d2, alpha, merge_quantities(m));
}

}  // namespace collab
