#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "walkback/rng.hpp"

namespace walkback {

enum class ScheduleRule { doubling, sqrt2 };
enum class ScheduleMode { heating, cooling };

const char* rule_name(ScheduleRule r);
ScheduleRule rule_from_name(const std::string& name);

// Temperature sequence for one trajectory. Heating holds n_flat steps at
// T = 1 and then rises to at least tmax; cooling is the exact element-wise
// reversal. Immutable after construction.
struct TemperatureSchedule {
    std::vector<double> temps;
    ScheduleMode mode = ScheduleMode::heating;
    ScheduleRule rule = ScheduleRule::doubling;
    double tmax = 1.0;
    std::size_t n_flat = 0;

    std::size_t steps() const { return temps.size(); }
};

// Number of heated (T > 1) steps a heating schedule uses to reach tmax.
// doubling: ceil(log2 tmax); sqrt2: ceil(2 log2 tmax).
std::size_t heated_steps(double tmax, ScheduleRule rule);

// doubling: temps = 1^n_flat, 2, 4, ..., 2^ceil(log2 tmax)
// sqrt2:    temps = 1^n_flat, sqrt(2^1), sqrt(2^2), ... until >= tmax
TemperatureSchedule make_heating(double tmax, std::size_t n_flat,
                                 ScheduleRule rule = ScheduleRule::doubling);

// Exact reversal of a heating schedule, optionally extended by extra T = 1
// steps at the end of sampling.
TemperatureSchedule make_cooling(const TemperatureSchedule& heating,
                                 std::size_t extra_flat_steps = 0);

struct DrawK {
    std::size_t n = 0;  // flat-step count, uniform on {0..n1}
    std::size_t k = 0;  // total steps: heated_steps(tmax, rule) + n
};

// Randomized trajectory length. n1 = 0 forces n = 0.
DrawK draw_k(std::size_t n1, double tmax, Rng& rng,
             ScheduleRule rule = ScheduleRule::doubling);

// tmax = sigma2_max / sigma2: data variance over the operator's nominal
// unit-temperature noise variance, floored at 1.
double tmax_from_variance(double sigma2_max, double sigma2);

}  // namespace walkback
