#pragma once

#include <string>
#include <vector>

#include "walkback/mat.hpp"
#include "walkback/rng.hpp"

namespace walkback {

// Per-dimension standardization parameters; identity when freshly built.
struct Scaler {
    Vec mean;
    Vec std;

    Vec apply(std::span<const double> x) const;
    Vec invert(std::span<const double> x) const;
    bool is_identity() const;
};

struct Dataset {
    std::vector<Vec> points;
    std::size_t dim = 0;
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    Scaler scaler;

    std::size_t size() const { return points.size(); }
    std::vector<Vec> split_points(const std::vector<std::size_t>& idx) const;
};

// Deterministic disjoint-and-covering split (shuffled by rng).
void assign_splits(Dataset& d, Rng& rng, double train_frac = 0.8, double val_frac = 0.1);

// In-place standardization to zero mean / unit variance per dimension,
// recording the scaler. Degenerate dimensions get their std floored.
void standardize(Dataset& d);

// Sum of per-dimension variances of the given points (sigma^2_max seed).
double total_variance(const std::vector<Vec>& points);

// 2D spiral (t cos t, t sin t), t uniform on [1.5 pi, 4.5 pi], with Gaussian
// jitter; returned standardized.
Dataset gen_swiss_roll(std::size_t n, double noise_std, Rng& rng);

// Uniform-angle circle with radial jitter; returned standardized.
Dataset gen_circle(std::size_t n, double radius, double noise_std, Rng& rng);

// Mixture of diagonal Gaussians, categorical-then-normal; returned raw.
Dataset gen_gmm(std::size_t n, const std::vector<Vec>& means, const std::vector<Vec>& stds,
                const Vec& weights, Rng& rng);

// One point per row, comma separated, 17 significant digits (value-faithful
// round trips). Header is a single "x0,x1,.." line when requested.
void save_csv(const Dataset& d, const std::string& path, bool header = false);
Dataset load_csv(const std::string& path);

}  // namespace walkback
