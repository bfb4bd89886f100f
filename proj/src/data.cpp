#include "walkback/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace walkback {

namespace {
constexpr double kStdFloor = 1e-8;
}

Vec Scaler::apply(std::span<const double> x) const {
    if (mean.empty()) return Vec(x.begin(), x.end());
    check_dim(x.size(), mean.size(), "scaler apply");
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / std[i];
    return out;
}

Vec Scaler::invert(std::span<const double> x) const {
    if (mean.empty()) return Vec(x.begin(), x.end());
    check_dim(x.size(), mean.size(), "scaler invert");
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * std[i] + mean[i];
    return out;
}

bool Scaler::is_identity() const { return mean.empty(); }

std::vector<Vec> Dataset::split_points(const std::vector<std::size_t>& idx) const {
    std::vector<Vec> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(points[i]);
    return out;
}

void assign_splits(Dataset& d, Rng& rng, double train_frac, double val_frac) {
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
        throw ConfigError("splits: fractions must be non-negative and sum to at most 1");
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // Fisher-Yates with the project Rng keeps splits reproducible.
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    const auto n_train = static_cast<std::size_t>(std::round(train_frac * d.size()));
    const auto n_val = static_cast<std::size_t>(std::round(val_frac * d.size()));
    d.train_idx.assign(idx.begin(), idx.begin() + std::min(n_train, idx.size()));
    d.val_idx.assign(idx.begin() + d.train_idx.size(),
                     idx.begin() + std::min(d.train_idx.size() + n_val, idx.size()));
    d.test_idx.assign(idx.begin() + d.train_idx.size() + d.val_idx.size(), idx.end());
}

void standardize(Dataset& d) {
    if (d.points.empty()) throw DomainError("standardize: empty dataset");
    const std::size_t dim = d.dim;
    Vec mean(dim, 0.0), var(dim, 0.0);
    for (const Vec& p : d.points)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += p[i];
    const double n = static_cast<double>(d.size());
    for (double& m : mean) m /= n;
    for (const Vec& p : d.points)
        for (std::size_t i = 0; i < dim; ++i) var[i] += (p[i] - mean[i]) * (p[i] - mean[i]);
    Vec std_(dim);
    for (std::size_t i = 0; i < dim; ++i) std_[i] = std::max(std::sqrt(var[i] / n), kStdFloor);
    for (Vec& p : d.points)
        for (std::size_t i = 0; i < dim; ++i) p[i] = (p[i] - mean[i]) / std_[i];
    d.scaler = Scaler{std::move(mean), std::move(std_)};
}

double total_variance(const std::vector<Vec>& points) {
    if (points.empty()) throw DomainError("total_variance: empty point set");
    const std::size_t dim = points.front().size();
    Vec mean(dim, 0.0), var(dim, 0.0);
    for (const Vec& p : points)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += p[i];
    const double n = static_cast<double>(points.size());
    for (double& m : mean) m /= n;
    for (const Vec& p : points)
        for (std::size_t i = 0; i < dim; ++i) var[i] += (p[i] - mean[i]) * (p[i] - mean[i]);
    double total = 0.0;
    for (double v : var) total += v / n;
    return total;
}

Dataset gen_swiss_roll(std::size_t n, double noise_std, Rng& rng) {
    if (n == 0) throw ConfigError("gen_swiss_roll: n must be >= 1");
    Dataset d;
    d.dim = 2;
    d.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 1.5 * std::numbers::pi + 3.0 * std::numbers::pi * rng.uniform();
        Vec p{t * std::cos(t), t * std::sin(t)};
        p[0] += noise_std * rng.normal();
        p[1] += noise_std * rng.normal();
        d.points.push_back(std::move(p));
    }
    standardize(d);
    assign_splits(d, rng);
    return d;
}

Dataset gen_circle(std::size_t n, double radius, double noise_std, Rng& rng) {
    if (n == 0) throw ConfigError("gen_circle: n must be >= 1");
    if (!(radius > 0.0)) throw ConfigError("gen_circle: radius must be positive");
    Dataset d;
    d.dim = 2;
    d.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * rng.uniform();
        Vec p{radius * std::cos(a), radius * std::sin(a)};
        p[0] += noise_std * rng.normal();
        p[1] += noise_std * rng.normal();
        d.points.push_back(std::move(p));
    }
    standardize(d);
    assign_splits(d, rng);
    return d;
}

Dataset gen_gmm(std::size_t n, const std::vector<Vec>& means, const std::vector<Vec>& stds,
                const Vec& weights, Rng& rng) {
    if (n == 0) throw ConfigError("gen_gmm: n must be >= 1");
    if (means.empty() || means.size() != stds.size() || means.size() != weights.size())
        throw ConfigError("gen_gmm: means/stds/weights must have equal component counts");
    const std::size_t dim = means.front().size();
    for (std::size_t c = 0; c < means.size(); ++c)
        if (means[c].size() != dim || stds[c].size() != dim)
            throw ConfigError("gen_gmm: component " + std::to_string(c) + " dimension mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw DomainError("gen_gmm: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw DomainError("gen_gmm: weights are not normalized");

    Dataset d;
    d.dim = dim;
    d.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.categorical(weights);
        Vec p(dim);
        for (std::size_t j = 0; j < dim; ++j) p[j] = means[c][j] + stds[c][j] * rng.normal();
        d.points.push_back(std::move(p));
    }
    assign_splits(d, rng);
    return d;
}

void save_csv(const Dataset& d, const std::string& path, bool header) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    if (header) {
        for (std::size_t i = 0; i < d.dim; ++i) out << (i ? ",x" : "x") << i;
        out << '\n';
    }
    char buf[64];
    for (const Vec& p : d.points) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", p[i]);
            if (i) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw ParseError("write failed for '" + path + "'");
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    Dataset d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.find_first_not_of("x0123456789,") == std::string::npos &&
            line.find('x') != std::string::npos)
            continue;  // header row
        Vec row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            // strtod handles subnormals where stod would throw out_of_range
            const char* begin = cell.c_str();
            char* end = nullptr;
            const double value = std::strtod(begin, &end);
            while (end != begin + cell.size() &&
                   std::isspace(static_cast<unsigned char>(*end)))
                ++end;
            if (end == begin || end != begin + cell.size())
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" +
                                 cell + "'");
            row.push_back(value);
        }
        if (row.empty()) throw ParseError(path + ":" + std::to_string(lineno) + ": empty row");
        if (d.dim == 0) d.dim = row.size();
        if (row.size() != d.dim)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(d.dim) + " columns, got " +
                             std::to_string(row.size()));
        d.points.push_back(std::move(row));
    }
    if (d.points.empty()) throw ParseError(path + ": empty dataset");
    return d;
}

}  // namespace walkback
