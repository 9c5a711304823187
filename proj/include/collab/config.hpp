#pragma once

// Flat "key = value" configuration text.
//
//   # comment
//   noise_var = 1.0
//   mu = 0 0 0
//   sigma_x = 1 0 0; 0 1 0; 0 0 1
//
// Vectors are whitespace or comma separated; matrix rows are separated by ';'.

#include <Eigen/Dense>

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace collab {

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(std::string_view token, std::string_view context) {
    const std::string t = trim(token);
    double value = 0.0;
    const auto* begin = t.data();
    const auto* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (t.empty() || ec != std::errc() || ptr != end) {
        throw ParseError("cannot parse '" + t + "' as a number (" + std::string(context) + ")");
    }
    return value;
}

inline std::vector<double> parse_numbers(std::string_view text, std::string_view context) {
    std::string buf(text);
    for (char& c : buf) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(buf);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(tok, context));
    return out;
}

}  // namespace detail

class Config {
public:
    Config() = default;

    static Config parse(std::string_view text) {
        Config cfg;
        std::istringstream in{std::string(text)};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string body = detail::trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = detail::trim(std::string_view(body).substr(0, eq));
            if (key.empty()) {
                throw ParseError("config line " + std::to_string(lineno) + ": empty key");
            }
            cfg.values_[key] = detail::trim(std::string_view(body).substr(eq + 1));
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v) throw ParseError("missing config key: " + key);
        return *v;
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? detail::parse_double(*v, key) : fallback;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        const double d = detail::parse_double(*v, key);
        if (d != static_cast<double>(static_cast<long long>(d))) {
            throw ParseError("config key " + key + " must be an integer");
        }
        return static_cast<long long>(d);
    }

    std::vector<double> get_list(const std::string& key) const {
        return detail::parse_numbers(require(key), key);
    }

    Eigen::VectorXd get_vector(const std::string& key) const {
        const auto xs = get_list(key);
        return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    }

    Eigen::MatrixXd get_matrix(const std::string& key) const {
        const std::string text = require(key);
        std::vector<std::vector<double>> rows;
        std::size_t start = 0;
        while (start <= text.size()) {
            auto stop = text.find(';', start);
            if (stop == std::string::npos) stop = text.size();
            auto row = detail::parse_numbers(std::string_view(text).substr(start, stop - start), key);
            if (!row.empty()) rows.push_back(std::move(row));
            start = stop + 1;
        }
        if (rows.empty()) throw ParseError("config key " + key + ": empty matrix");
        Eigen::MatrixXd m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.front().size()) {
                throw ParseError("config key " + key + ": ragged matrix rows");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
        }
        return m;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace collab
