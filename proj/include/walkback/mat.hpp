#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "walkback/error.hpp"

namespace walkback {

using Vec = std::vector<double>;

// Dense row-major matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }

    std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw ConfigError(std::string(what) + ": dimension mismatch, got " +
                          std::to_string(got) + ", want " + std::to_string(want));
}

}  // namespace walkback
