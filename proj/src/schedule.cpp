#include "walkback/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace walkback {

const char* rule_name(ScheduleRule r) {
    return r == ScheduleRule::doubling ? "doubling" : "sqrt2";
}

ScheduleRule rule_from_name(const std::string& name) {
    if (name == "doubling") return ScheduleRule::doubling;
    if (name == "sqrt2") return ScheduleRule::sqrt2;
    throw ConfigError("unknown schedule rule '" + name + "'");
}

namespace {

std::size_t ceil_log2(double x) {
    // smallest integer m with 2^m >= x, for x >= 1
    std::size_t m = 0;
    double p = 1.0;
    while (p < x) {
        p *= 2.0;
        ++m;
    }
    return m;
}

}  // namespace

std::size_t heated_steps(double tmax, ScheduleRule rule) {
    if (tmax < 1.0) throw ConfigError("schedule: tmax must be >= 1");
    if (rule == ScheduleRule::doubling) return ceil_log2(tmax);
    // sqrt2: T_t = sqrt(2^t); first t with T_t >= tmax
    std::size_t m = 0;
    double t = 1.0;
    while (t < tmax) {
        ++m;
        t = std::sqrt(std::pow(2.0, static_cast<double>(m)));
    }
    return m;
}

TemperatureSchedule make_heating(double tmax, std::size_t n_flat, ScheduleRule rule) {
    if (tmax < 1.0) throw ConfigError("schedule: tmax must be >= 1");
    TemperatureSchedule s;
    s.mode = ScheduleMode::heating;
    s.rule = rule;
    s.tmax = tmax;
    s.n_flat = n_flat;
    s.temps.assign(n_flat, 1.0);
    const std::size_t heated = heated_steps(tmax, rule);
    for (std::size_t t = 1; t <= heated; ++t) {
        const double temp = rule == ScheduleRule::doubling
                                ? std::pow(2.0, static_cast<double>(t))
                                : std::sqrt(std::pow(2.0, static_cast<double>(t)));
        s.temps.push_back(temp);
    }
    return s;
}

TemperatureSchedule make_cooling(const TemperatureSchedule& heating,
                                 std::size_t extra_flat_steps) {
    TemperatureSchedule s = heating;
    s.mode = ScheduleMode::cooling;
    std::reverse(s.temps.begin(), s.temps.end());
    s.temps.insert(s.temps.end(), extra_flat_steps, 1.0);
    return s;
}

DrawK draw_k(std::size_t n1, double tmax, Rng& rng, ScheduleRule rule) {
    DrawK d;
    d.n = n1 == 0 ? 0 : static_cast<std::size_t>(rng.uniform_int(n1 + 1));
    d.k = heated_steps(tmax, rule) + d.n;
    return d;
}

double tmax_from_variance(double sigma2_max, double sigma2) {
    if (!(sigma2 > 0.0)) throw ConfigError("tmax: unit-temperature variance must be positive");
    if (!(sigma2_max >= 0.0)) throw ConfigError("tmax: data variance must be non-negative");
    return std::max(1.0, sigma2_max / sigma2);
}

}  // namespace walkback
