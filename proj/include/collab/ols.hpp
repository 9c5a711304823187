#pragma once

#include <Eigen/Dense>

#include <string>

#include "data_model.hpp"
#include "errors.hpp"

namespace collab {

struct OlsFit {
    Vector beta_hat;
    Matrix gram_inverse;  // (X^T X)^{-1}
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    double rss = 0.0;     // residual sum of squares on the training rows
    bool used_qr = false;
};

struct CombinedFit {
    OlsFit fit;
    double sigma2_hat = 0.0;
    Eigen::Index n0 = 0;  // n1 + n2 - p
};

inline constexpr double kQrFallbackCondition = 1e10;
inline constexpr double kSingularRcond = 1e-12;

inline OlsFit fit_ols(const Dataset& d) {
    const auto n = d.n();
    const auto p = d.p();
    if (d.targets.size() != n) throw DimensionError("dataset '" + d.id + "': row/target mismatch");
    if (n <= p) {
        throw SingularMatrixError("dataset '" + d.id + "': n = " + std::to_string(n) +
                                  " does not exceed p = " + std::to_string(p));
    }
    OlsFit f;
    f.n = n;
    f.p = p;
    const Matrix gram = d.features.transpose() * d.features;
    const Eigen::LLT<Matrix> llt(gram);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (!(rcond >= kSingularRcond)) {
        throw SingularMatrixError("dataset '" + d.id + "': Gram matrix is singular (rcond " +
                                  std::to_string(rcond) + ")");
    }
    const Matrix identity = Matrix::Identity(p, p);
    if (1.0 / rcond <= kQrFallbackCondition) {
        f.beta_hat = llt.solve(d.features.transpose() * d.targets);
        f.gram_inverse = llt.solve(identity);
    } else {
        const Eigen::HouseholderQR<Matrix> qr(Matrix(d.features));
        const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(identity);
        f.beta_hat = qr.solve(d.targets);
        f.gram_inverse = r_inv * r_inv.transpose();
        f.used_qr = true;
    }
    f.gram_inverse = 0.5 * (f.gram_inverse + f.gram_inverse.transpose()).eval();
    f.rss = (d.targets - d.features * f.beta_hat).squaredNorm();
    return f;
}

inline CombinedFit fit_combined(const Dataset& d1, const Dataset& d2) {
    if (d1.p() != d2.p()) {
        throw DimensionError("fit_combined: '" + d1.id + "' has p=" + std::to_string(d1.p()) + ", '" +
                             d2.id + "' has p=" + std::to_string(d2.p()));
    }
    CombinedFit c;
    c.fit = fit_ols(concat(d1, d2));
    c.n0 = d1.n() + d2.n() - d1.p();
    c.sigma2_hat = c.fit.rss / static_cast<double>(c.n0);
    return c;
}

// Upper-triangular D with D^T D = (G1^{-1} + G2^{-1})^{-1}.
inline Matrix whitening_matrix_d(const OlsFit& f1, const OlsFit& f2) {
    if (f1.p != f2.p) throw DimensionError("whitening_matrix_d: dimension mismatch");
    const Matrix s = f1.gram_inverse + f2.gram_inverse;
    const Eigen::LLT<Matrix> s_llt(s);
    if (s_llt.info() != Eigen::Success) {
        throw SingularMatrixError("whitening_matrix_d: sum of Gram inverses is not positive definite");
    }
    Matrix target = s_llt.solve(Matrix::Identity(f1.p, f1.p));
    target = 0.5 * (target + target.transpose()).eval();
    const Eigen::LLT<Matrix> llt(target);
    if (llt.info() != Eigen::Success) {
        throw SingularMatrixError("whitening_matrix_d: (G1^-1 + G2^-1)^-1 is not positive definite");
    }
    return llt.matrixU();
}

inline double predict(const OlsFit& f, const Vector& x) {
    if (x.size() != f.p) {
        throw DimensionError("predict: x has length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(f.p));
    }
    return x.dot(f.beta_hat);
}

inline Vector predict_batch(const OlsFit& f, const RowMatrix& x) {
    if (x.cols() != f.p) throw DimensionError("predict: column count mismatch");
    return x * f.beta_hat;
}

}  // namespace collab
