#pragma once

// Exact out-of-sample errors of the individual and combined OLS estimators
// and the equivalent comparison h(sigma^2) > g(beta1, beta2).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

#include "data_model.hpp"
#include "errors.hpp"
#include "expectation.hpp"

namespace collab {

struct MergeQuantities {
    double a0 = 0.0;
    Matrix b0;         // PSD-projected
    Matrix b0_factor;  // B with B^T B = b0
    double min_eigenvalue = 0.0;  // of the raw estimate, before projection

    double h(double sigma2) const { return a0 * sigma2; }

    double g(const Vector& u, const Vector& v) const { return (b0_factor * (u - v)).squaredNorm(); }
};

inline MergeQuantities merge_quantities(const MomentSet& m) {
    MergeQuantities q;
    q.a0 = (m.w1 * (m.omega1 - m.omega_c)).trace() + (m.w2 * (m.omega2 - m.omega_c)).trace();
    const Matrix raw = 0.5 * (m.zwz_12 + m.zwz_21 + (m.zwz_12 + m.zwz_21).transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(raw);
    const Vector lambda = eig.eigenvalues();
    q.min_eigenvalue = lambda.minCoeff();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (q.min_eigenvalue < -1e-6 * scale) {
        throw ConsistencyError("B0 estimate is indefinite (smallest eigenvalue " +
                               std::to_string(q.min_eigenvalue) + "); Monte Carlo noise too large");
    }
    const Vector clipped = lambda.cwiseMax(0.0);
    q.b0 = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    q.b0 = 0.5 * (q.b0 + q.b0.transpose()).eval();
    const Eigen::LLT<Matrix> llt(q.b0);
    if (llt.info() == Eigen::Success && clipped.minCoeff() > 1e-14 * scale) {
        q.b0_factor = llt.matrixU();
    } else {
        q.b0_factor = clipped.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    }
    return q;
}

inline Matrix second_moment(const GaussianSpec& spec) { return spec.sigma_x + spec.mu * spec.mu.transpose(); }

inline double exact_ose_single(const GaussianSpec& spec, const MomentSet& m, int which) {
    if (which != 1 && which != 2) throw InvalidArgument("exact_ose_single: which must be 1 or 2");
    const Matrix& w = which == 1 ? m.w1 : m.w2;
    const Matrix& omega = which == 1 ? m.omega1 : m.omega2;
    return spec.noise_var * (1.0 + (w * omega).trace());
}

// Evaluated on P_which; the shared noise variance is taken from spec1.
inline double exact_ose_combined(const GaussianSpec& spec1, const GaussianSpec& spec2, const MomentSet& m,
                                 int which) {
    if (which != 1 && which != 2) throw InvalidArgument("exact_ose_combined: which must be 1 or 2");
    if (spec1.p() != spec2.p() || spec1.p() != m.p()) throw DimensionError("exact_ose_combined: p mismatch");
    const double s2 = spec1.noise_var;
    const Vector delta = spec1.beta - spec2.beta;
    const Matrix& w = which == 1 ? m.w1 : m.w2;
    const Matrix& zwz = which == 1 ? m.zwz_21 : m.zwz_12;
    return s2 + s2 * (w * m.omega_c).trace() + delta.dot(zwz * delta);
}

// Error of one specific fitted coefficient vector on P: sigma^2 + (b - beta)^T W (b - beta).
inline double conditional_ose(const GaussianSpec& spec, const Vector& beta_hat) {
    const Vector e = beta_hat - spec.beta;
    return spec.noise_var + e.dot(second_moment(spec) * e);
}

struct GroundTruth {
    bool merge = false;
    double margin = 0.0;          // sum of individual OSEs minus sum of combined OSEs
    double closed_form_margin = 0.0;  // h(sigma^2) - g(beta1, beta2)
    double std_err = 0.0;         // Monte Carlo standard error of margin
    bool determinate = true;      // |margin| > 3 standard errors
    double ose_individual[2] = {0.0, 0.0};
    double ose_combined[2] = {0.0, 0.0};
};

inline GroundTruth ground_truth_from_moments(const GaussianSpec& spec1, const GaussianSpec& spec2,
                                             const MomentSet& m) {
    GroundTruth t;
    // One noise level is shared by both sources; it is read from spec1.
    for (int k = 1; k <= 2; ++k) {
        t.ose_individual[k - 1] = exact_ose_single(spec1, m, k);
        t.ose_combined[k - 1] = exact_ose_combined(spec1, spec2, m, k);
    }
    const double s2 = spec1.noise_var;
    t.margin = t.ose_individual[0] + t.ose_individual[1] - t.ose_combined[0] - t.ose_combined[1];
    const auto q = merge_quantities(m);
    t.closed_form_margin = q.h(s2) - q.g(spec1.beta, spec2.beta);
    t.merge = t.margin > 0.0;

    const auto reps = m.rep_b0.size();
    if (reps >= 2) {
        const Vector delta = spec1.beta - spec2.beta;
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double v = s2 * (m.rep_trace_single[r] - m.rep_trace_combined[r]) - delta.dot(m.rep_b0[r] * delta);
            sum += v;
            sum_sq += v * v;
        }
        const double n = static_cast<double>(reps);
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
        t.std_err = std::sqrt(var / n);
    }
    t.determinate = std::abs(t.margin) > 3.0 * t.std_err;
    if (t.determinate && (t.margin > 0.0) != (t.closed_form_margin > 0.0)) {
        throw ConsistencyError("OSE difference and h - g disagree in sign beyond Monte Carlo noise");
    }
    return t;
}

inline GroundTruth ground_truth_merge(const GaussianSpec& spec1, const GaussianSpec& spec2, Eigen::Index n1,
                                      Eigen::Index n2, int mc_reps, std::uint64_t seed) {
    const MomentSet m = moments_from_spec(spec1, spec2, n1, n2, mc_reps, derive_seed(seed, "ground_truth"), true);
    return ground_truth_from_moments(spec1, spec2, m);
}

}  // namespace collab
