#pragma once

// Moments entering the exact out-of-sample error formulas:
//   W_k     = E[x x^T] under P_k
//   Omega_k = E[(X_k^T X_k)^{-1}],  Omega_c = E[(X_c^T X_c)^{-1}]
//   zwz_12  = E[Z_1^T W_2 Z_1],     zwz_21  = E[Z_2^T W_1 Z_2],  Z_k = (X_c^T X_c)^{-1} X_k^T X_k
//
// Omega_k has the inverse-Wishart closed form Sigma^{-1}/(n-p-1) for zero-mean
// Gaussian designs; every other term is a seeded Monte Carlo (or bootstrap) mean.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace collab {

inline constexpr int kDefaultMcReps = 2000;
inline constexpr int kDefaultBootReps = 500;

struct MomentSet {
    Matrix w1, w2;
    Matrix omega1, omega2, omega_c;
    Matrix zwz_12, zwz_21;
    int mc_reps = 0;
    double mc_std_err = 0.0;  // largest entrywise standard error over the estimated matrices
    Eigen::Index n1 = 0, n2 = 0;

    // Per-replicate draws, kept so callers can attach standard errors to
    // linear functionals of the moments. Empty when not requested.
    std::vector<double> rep_trace_single;    // tr(W1 O1_r) + tr(W2 O2_r)
    std::vector<double> rep_trace_combined;  // tr(W1 Oc_r) + tr(W2 Oc_r)
    std::vector<Matrix> rep_b0;              // Z1^T W2 Z1 + Z2^T W1 Z2 for replicate r

    Eigen::Index p() const { return w1.rows(); }

    MomentSet swapped() const {
        MomentSet s = *this;
        std::swap(s.w1, s.w2);
        std::swap(s.omega1, s.omega2);
        std::swap(s.zwz_12, s.zwz_21);
        std::swap(s.n1, s.n2);
        return s;
    }
};

namespace detail {

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

struct ReplicateDraw {
    Matrix omega1, omega2, omega_c, zwz_12, zwz_21;
    int attempts = 0;
};

// Returns nullopt when one of the Gram matrices is numerically singular.
inline std::optional<ReplicateDraw> moment_replicate(const RowMatrix& x1, const RowMatrix& x2,
                                                     const Matrix& w1, const Matrix& w2) {
    const auto p = x1.cols();
    const Matrix g1 = x1.transpose() * x1;
    const Matrix g2 = x2.transpose() * x2;
    const Matrix gc = g1 + g2;
    const Matrix id = Matrix::Identity(p, p);
    ReplicateDraw r;
    const Eigen::LLT<Matrix> lc(gc);
    if (lc.info() != Eigen::Success || lc.rcond() < 1e-12) return std::nullopt;
    r.omega_c = lc.solve(id);
    const Eigen::LLT<Matrix> l1(g1);
    const Eigen::LLT<Matrix> l2(g2);
    if (l1.info() != Eigen::Success || l1.rcond() < 1e-12) return std::nullopt;
    if (l2.info() != Eigen::Success || l2.rcond() < 1e-12) return std::nullopt;
    r.omega1 = l1.solve(id);
    r.omega2 = l2.solve(id);
    const Matrix z1 = r.omega_c * g1;
    const Matrix z2 = r.omega_c * g2;
    r.zwz_12 = z1.transpose() * w2 * z1;
    r.zwz_21 = z2.transpose() * w1 * z2;
    return r;
}

struct MeanAccumulator {
    Matrix sum, sum_sq;
    void add(const Matrix& m) {
        if (sum.size() == 0) {
            sum = Matrix::Zero(m.rows(), m.cols());
            sum_sq = Matrix::Zero(m.rows(), m.cols());
        }
        sum += m;
        sum_sq += m.cwiseProduct(m);
    }
    Matrix mean(int n) const { return sum / n; }
    double max_std_err(int n) const {
        if (n < 2) return 0.0;
        const Matrix mu = sum / n;
        const Matrix var = ((sum_sq / n) - mu.cwiseProduct(mu)).cwiseMax(0.0) * (double(n) / (n - 1));
        return std::sqrt(var.maxCoeff() / n);
    }
};

// Shared driver: draw(r, attempt, x1, x2) fills the two design matrices for
// replicate r. Replicates are reduced in index order so the result does not
// depend on the worker count.
template <class Draw>
MomentSet estimate_moments(const Matrix& w1, const Matrix& w2, int reps, int max_attempts_total,
                           const std::optional<Matrix>& fixed_omega1, const std::optional<Matrix>& fixed_omega2,
                           bool keep_replicates, Draw&& draw) {
    const bool mc_omega1 = !fixed_omega1.has_value();
    const bool mc_omega2 = !fixed_omega2.has_value();
    if (reps < 1) throw InvalidArgument("moment estimation needs at least one replicate");
    const int per_rep_cap = std::max(1, max_attempts_total);
    auto draws = parallel_map<ReplicateDraw>(static_cast<std::size_t>(reps), [&](std::size_t r) {
        RowMatrix x1, x2;
        for (int attempt = 0; attempt < per_rep_cap; ++attempt) {
            draw(r, attempt, x1, x2);
            if (auto d = moment_replicate(x1, x2, w1, w2)) {
                d->attempts = attempt + 1;
                return *d;
            }
        }
        throw SingularMatrixError("moment replicate " + std::to_string(r) +
                                  ": every redraw produced a singular Gram matrix");
    });
    long long attempts = 0;
    for (const auto& d : draws) attempts += d.attempts;
    if (attempts > max_attempts_total) {
        throw SingularMatrixError("moment estimation exceeded " + std::to_string(max_attempts_total) +
                                  " draws because of singular resamples");
    }

    MeanAccumulator a1, a2, ac, a12, a21;
    MomentSet m;
    m.w1 = w1;
    m.w2 = w2;
    m.mc_reps = reps;
    for (const auto& d : draws) {
        if (mc_omega1) a1.add(d.omega1);
        if (mc_omega2) a2.add(d.omega2);
        ac.add(d.omega_c);
        a12.add(d.zwz_12);
        a21.add(d.zwz_21);
    }
    m.omega1 = mc_omega1 ? symmetrize(a1.mean(reps)) : *fixed_omega1;
    m.omega2 = mc_omega2 ? symmetrize(a2.mean(reps)) : *fixed_omega2;
    const double fixed_t1 = mc_omega1 ? 0.0 : (w1 * m.omega1).trace();
    const double fixed_t2 = mc_omega2 ? 0.0 : (w2 * m.omega2).trace();
    m.omega_c = symmetrize(ac.mean(reps));
    m.zwz_12 = symmetrize(a12.mean(reps));
    m.zwz_21 = symmetrize(a21.mean(reps));
    m.mc_std_err = std::max({ac.max_std_err(reps), a12.max_std_err(reps), a21.max_std_err(reps),
                             mc_omega1 ? a1.max_std_err(reps) : 0.0, mc_omega2 ? a2.max_std_err(reps) : 0.0});
    if (keep_replicates) {
        m.rep_trace_single.reserve(draws.size());
        m.rep_trace_combined.reserve(draws.size());
        m.rep_b0.reserve(draws.size());
        for (const auto& d : draws) {
            m.rep_trace_single.push_back((mc_omega1 ? (w1 * d.omega1).trace() : fixed_t1) +
                                         (mc_omega2 ? (w2 * d.omega2).trace() : fixed_t2));
            m.rep_trace_combined.push_back((w1 * d.omega_c).trace() + (w2 * d.omega_c).trace());
            m.rep_b0.push_back(d.zwz_12 + d.zwz_21);
        }
    }
    return m;
}

}  // namespace detail

inline MomentSet moments_from_spec(const GaussianSpec& spec1, const GaussianSpec& spec2, Eigen::Index n1,
                                   Eigen::Index n2, int mc_reps, std::uint64_t seed,
                                   bool keep_replicates = true) {
    spec1.validate();
    spec2.validate();
    const auto p = spec1.p();
    if (spec2.p() != p) throw DimensionError("moments_from_spec: specs differ in p");
    if (n1 < p || n2 < p) throw InvalidArgument("moments_from_spec: n_k must be at least p");
    const Matrix w1 = spec1.sigma_x + spec1.mu * spec1.mu.transpose();
    const Matrix w2 = spec2.sigma_x + spec2.mu * spec2.mu.transpose();
    const bool closed1 = spec1.mu.isZero(0.0);
    const bool closed2 = spec2.mu.isZero(0.0);
    if ((closed1 && n1 <= p + 1) || (closed2 && n2 <= p + 1)) {
        throw InvalidArgument("moments_from_spec: E[(X^T X)^-1] is infinite for n <= p + 1");
    }
    const Matrix l1 = Eigen::LLT<Matrix>(spec1.sigma_x).matrixL();
    const Matrix l2 = Eigen::LLT<Matrix>(spec2.sigma_x).matrixL();
    const Matrix id = Matrix::Identity(p, p);
    std::optional<Matrix> fixed1, fixed2;
    if (closed1) fixed1 = detail::symmetrize(spec1.sigma_x.llt().solve(id) / double(n1 - p - 1));
    if (closed2) fixed2 = detail::symmetrize(spec2.sigma_x.llt().solve(id) / double(n2 - p - 1));

    MomentSet m = detail::estimate_moments(
        w1, w2, mc_reps, 10 * mc_reps, fixed1, fixed2, keep_replicates,
        [&](std::size_t r, int attempt, RowMatrix& x1, RowMatrix& x2) {
            auto rng = make_stream(seed, "moments_from_spec", r, static_cast<std::uint64_t>(attempt));
            x1 = sample_design(spec1.mu, l1, n1, rng);
            x2 = sample_design(spec2.mu, l2, n2, rng);
        });
    m.n1 = n1;
    m.n2 = n2;
    return m;
}

// Plug-in moments from observed data: W_k is the sample second moment and the
// expectations over designs are bootstrap means over row resamples of the
// given sizes (defaulting to the dataset sizes).
inline MomentSet moments_from_data(const Dataset& d1, const Dataset& d2, int boot_reps, std::uint64_t seed,
                                   Eigen::Index resample_n1 = 0, Eigen::Index resample_n2 = 0,
                                   bool keep_replicates = false) {
    d1.validate();
    d2.validate();
    if (d1.p() != d2.p()) throw DimensionError("moments_from_data: datasets differ in p");
    const Eigen::Index m1 = resample_n1 > 0 ? resample_n1 : d1.n();
    const Eigen::Index m2 = resample_n2 > 0 ? resample_n2 : d2.n();
    const Matrix w1 = detail::symmetrize(d1.features.transpose() * d1.features / double(d1.n()));
    const Matrix w2 = detail::symmetrize(d2.features.transpose() * d2.features / double(d2.n()));
    MomentSet m = detail::estimate_moments(
        w1, w2, boot_reps, 10 * boot_reps, std::nullopt, std::nullopt, keep_replicates,
        [&](std::size_t r, int attempt, RowMatrix& x1, RowMatrix& x2) {
            auto rng = make_stream(seed, "moments_from_data", r, static_cast<std::uint64_t>(attempt));
            x1.resize(m1, d1.p());
            x2.resize(m2, d2.p());
            for (Eigen::Index i = 0; i < m1; ++i) x1.row(i) = d1.features.row(rng.below(d1.n()));
            for (Eigen::Index i = 0; i < m2; ++i) x2.row(i) = d2.features.row(rng.below(d2.n()));
        });
    m.n1 = m1;
    m.n2 = m2;
    return m;
}

}  // namespace collab
