#pragma once

#include <span>
#include <vector>

#include "walkback/operators.hpp"
#include "walkback/schedule.hpp"

namespace walkback {

// Fully recorded heated trajectory: K+1 states, and for each step t the
// temperature, the forward (heating, q) log-density and the backward
// (cooling, p) log-density. q and p share the operator; only the direction
// of evaluation differs.
struct Trajectory {
    std::vector<Vec> states;  // s_0 .. s_K
    Vec temps;                // T_1 .. T_K
    Vec fwd_logp;             // log q_{T_t}(s_t | s_{t-1})
    Vec bwd_logp;             // log p_{T_t}(s_{t-1} | s_t)
    double terminal_prior_logp = 0.0;

    std::size_t steps() const { return temps.size(); }
};

// Per-step conditioning rows are indexed from the hot end of the schedule:
// heating step t (1-based, K steps total) uses row K - t, so a row always
// sees the same temperature rung no matter how many flat steps a particular
// draw carries. Cooling position j therefore uses row j, and extra flat
// sampling steps clamp onto the last (flat) row.
int step_row(std::size_t total_steps, std::size_t step_1based);

// Conventional index for "a temperature-1 row" outside any schedule, e.g.
// stationary-chain diagnostics; clamps to the last table row.
inline constexpr int kFlatStepRow = 1 << 20;

// Runs the destructive process from x0 under the heating schedule, recording
// both directional log-densities per step and log p*(s_K).
Trajectory heat_trajectory(const TransitionOperator& op, const TemperatureSchedule& heating,
                           std::span<const double> x0, Rng& rng);

}  // namespace walkback
