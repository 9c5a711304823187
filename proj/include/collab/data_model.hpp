#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace collab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dataset {
    RowMatrix features;
    Vector targets;
    std::string id;
    std::vector<std::string> feature_names;  // empty for synthetic data

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index p() const { return features.cols(); }

    void validate() const {
        if (features.rows() != targets.size()) {
            throw DimensionError("dataset '" + id + "': " + std::to_string(features.rows()) +
                                 " feature rows but " + std::to_string(targets.size()) + " targets");
        }
        if (n() < 1 || p() < 1) throw DimensionError("dataset '" + id + "' is empty");
        if (!features.allFinite() || !targets.allFinite()) {
            throw InvalidArgument("dataset '" + id + "' contains NaN or Inf");
        }
    }
};

struct SplitDataset {
    Dataset train;
    Dataset held_out;
    double split_fraction = 0.5;
};

struct GaussianSpec {
    Vector mu;
    Matrix sigma_x;
    Vector beta;
    double noise_var = 1.0;

    Eigen::Index p() const { return mu.size(); }

    void validate() const {
        const auto p = mu.size();
        if (p < 1 || sigma_x.rows() != p || sigma_x.cols() != p || beta.size() != p) {
            throw DimensionError("GaussianSpec: inconsistent dimensions");
        }
        if ((sigma_x - sigma_x.transpose()).norm() > 1e-12 * (1.0 + sigma_x.norm())) {
            throw InvalidArgument("GaussianSpec: sigma_x is not symmetric");
        }
        Eigen::LLT<Matrix> llt(sigma_x);
        if (llt.info() != Eigen::Success) {
            throw InvalidArgument("GaussianSpec: sigma_x is not positive definite");
        }
        if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
            throw InvalidArgument("GaussianSpec: noise_var must be nonnegative");
        }
    }

    // Standard isotropic spec: N(mu, I_p) covariates.
    static GaussianSpec isotropic(const Vector& mu, const Vector& beta, double noise_var) {
        GaussianSpec s{mu, Matrix::Identity(mu.size(), mu.size()), beta, noise_var};
        s.validate();
        return s;
    }
};

inline GaussianSpec load_gaussian_spec(const Config& cfg) {
    GaussianSpec s{cfg.get_vector("mu"), cfg.get_matrix("sigma_x"), cfg.get_vector("beta"),
                   cfg.get_double("noise_var", 1.0)};
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace detail

inline Dataset ingest_csv(const std::string& path, const std::string& target_column,
                          std::string id = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_csv_line(line);
    std::ptrdiff_t target_idx = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == target_column) target_idx = static_cast<std::ptrdiff_t>(c);
    }
    if (target_idx < 0) throw ParseError(path + ": target column '" + target_column + "' not found");

    Dataset d;
    d.id = id.empty() ? path : std::move(id);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (static_cast<std::ptrdiff_t>(c) != target_idx) d.feature_names.push_back(header[c]);
    }
    std::vector<double> xs;
    std::vector<double> ys;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError(path + ": row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            try {
                v = detail::parse_double(cells[c], "csv");
            } catch (const ParseError&) {
                throw ParseError(path + ": non-numeric cell '" + cells[c] + "' at row " +
                                 std::to_string(row) + ", column '" + header[c] + "'");
            }
            if (!std::isfinite(v)) {
                throw ParseError(path + ": non-finite value at row " + std::to_string(row) +
                                 ", column '" + header[c] + "'");
            }
            (static_cast<std::ptrdiff_t>(c) == target_idx ? ys : xs).push_back(v);
        }
    }
    if (row == 0) throw ParseError(path + ": no data rows");
    const auto p = static_cast<Eigen::Index>(header.size() - 1);
    if (p < 1) throw ParseError(path + ": no feature columns");
    d.features = Eigen::Map<RowMatrix>(xs.data(), static_cast<Eigen::Index>(row), p);
    d.targets = Eigen::Map<Vector>(ys.data(), static_cast<Eigen::Index>(row));
    d.validate();
    return d;
}

inline void write_csv(const Dataset& d, const std::string& path, const std::string& target_name = "y") {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write CSV file: " + path);
    for (Eigen::Index c = 0; c < d.p(); ++c) {
        out << (static_cast<std::size_t>(c) < d.feature_names.size() ? d.feature_names[c]
                                                                     : "x" + std::to_string(c + 1))
            << ',';
    }
    out << target_name << '\n';
    for (Eigen::Index r = 0; r < d.n(); ++r) {
        for (Eigen::Index c = 0; c < d.p(); ++c) out << detail::format_double(d.features(r, c)) << ',';
        out << detail::format_double(d.targets(r)) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Row selection

inline Dataset select_rows(const Dataset& d, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.id = d.id;
    out.feature_names = d.feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), d.p());
    out.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]);
        out.targets(static_cast<Eigen::Index>(i)) = d.targets(rows[i]);
    }
    return out;
}

// Draws `size` rows uniformly with replacement.
inline Dataset resample_rows(const Dataset& d, Eigen::Index size, Philox4x32& rng) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(size));
    for (auto& r : rows) r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d.n())));
    return select_rows(d, rows);
}

inline Dataset concat(const Dataset& a, const Dataset& b, std::string id = {}) {
    if (a.p() != b.p()) {
        throw DimensionError("cannot stack '" + a.id + "' (p=" + std::to_string(a.p()) + ") with '" +
                             b.id + "' (p=" + std::to_string(b.p()) + ")");
    }
    Dataset out;
    out.id = id.empty() ? a.id + "+" + b.id : std::move(id);
    out.feature_names = a.feature_names;
    out.features.resize(a.n() + b.n(), a.p());
    out.features << a.features, b.features;
    out.targets.resize(a.n() + b.n());
    out.targets << a.targets, b.targets;
    return out;
}

inline SplitDataset split(const Dataset& d, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
    const auto n_train = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(d.n())));
    if (n_train < d.p() + 2) {
        throw InvalidArgument("split of '" + d.id + "' leaves " + std::to_string(n_train) +
                              " training rows; need at least p + 2 = " + std::to_string(d.p() + 2));
    }
    if (n_train >= d.n()) throw InvalidArgument("split of '" + d.id + "' leaves no held-out rows");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d.n()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = make_stream(seed, "split");
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(i + 1)]);
    }
    const std::vector<Eigen::Index> train(order.begin(), order.begin() + n_train);
    const std::vector<Eigen::Index> rest(order.begin() + n_train, order.end());
    return SplitDataset{select_rows(d, train), select_rows(d, rest), fraction};
}

// ---------------------------------------------------------------------------
// Synthetic data

// Rows of X drawn iid from N(mu, sigma_x) using a precomputed Cholesky factor.
inline RowMatrix sample_design(const Vector& mu, const Matrix& chol_lower, Eigen::Index n, Philox4x32& rng) {
    const auto p = mu.size();
    RowMatrix z(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < p; ++c) z(r, c) = rng.normal();
    }
    RowMatrix x = z * chol_lower.transpose();
    x.rowwise() += mu.transpose();
    return x;
}

inline Dataset sample_synthetic(const GaussianSpec& spec, Eigen::Index n, std::uint64_t seed,
                                std::string id = "synthetic") {
    if (n < 1) throw InvalidArgument("sample_synthetic: n must be at least 1");
    spec.validate();
    auto rng = make_stream(seed, "sample_synthetic");
    const Matrix lower = Eigen::LLT<Matrix>(spec.sigma_x).matrixL();
    Dataset d;
    d.id = std::move(id);
    d.features = sample_design(spec.mu, lower, n, rng);
    const double sd = std::sqrt(spec.noise_var);
    d.targets = d.features * spec.beta;
    for (Eigen::Index i = 0; i < n; ++i) d.targets(i) += sd * rng.normal();
    return d;
}

}  // namespace collab
