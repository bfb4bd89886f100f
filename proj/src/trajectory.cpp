#include "walkback/trajectory.hpp"

#include <cmath>

namespace walkback {

int step_row(std::size_t total_steps, std::size_t step_1based) {
    return static_cast<int>(total_steps - step_1based);
}

Trajectory heat_trajectory(const TransitionOperator& op, const TemperatureSchedule& heating,
                           std::span<const double> x0, Rng& rng) {
    check_dim(x0.size(), op.dim(), "heat_trajectory x0");
    Trajectory traj;
    const std::size_t k = heating.steps();
    traj.states.reserve(k + 1);
    traj.states.emplace_back(x0.begin(), x0.end());
    traj.temps.reserve(k);
    traj.fwd_logp.reserve(k);
    traj.bwd_logp.reserve(k);

    for (std::size_t t = 1; t <= k; ++t) {
        const double temp = heating.temps[t - 1];
        const int step = static_cast<int>(t) - 1;
        const Vec& prev = traj.states.back();
        Vec next = op.sample_step(prev, temp, step, rng);
        for (double x : next)
            if (!std::isfinite(x))
                throw OperatorError("heat_trajectory: non-finite state at step " +
                                    std::to_string(t));
        const double fwd = op.log_density(prev, next, temp, step);
        const double bwd = op.log_density(next, prev, temp, step);
        if (!std::isfinite(fwd) || !std::isfinite(bwd))
            throw OperatorError("heat_trajectory: non-finite log-density at step " +
                                std::to_string(t));
        traj.temps.push_back(temp);
        traj.fwd_logp.push_back(fwd);
        traj.bwd_logp.push_back(bwd);
        traj.states.push_back(std::move(next));
    }
    traj.terminal_prior_logp = op.prior_logp(traj.states.back());
    if (!std::isfinite(traj.terminal_prior_logp))
        throw OperatorError("heat_trajectory: non-finite terminal prior log-density");
    return traj;
}

}  // namespace walkback
