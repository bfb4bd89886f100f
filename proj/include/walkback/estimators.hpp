#pragma once

#include <span>
#include <vector>

#include "walkback/operators.hpp"
#include "walkback/schedule.hpp"
#include "walkback/trajectory.hpp"

namespace walkback {

struct BoundEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_trajectories = 0;
};

// Single-trajectory bound sample: sum_t (log p - log q) + log p*(s_K).
double elbo_from_trajectory(const Trajectory& traj);

// Monte-Carlo variational bound at x over n_traj independent heated
// trajectories. Thread fan-out is order-stable: trajectory i always uses the
// same derived RNG stream.
BoundEstimate elbo_estimate(const TransitionOperator& op, const TemperatureSchedule& heating,
                            std::span<const double> x, int n_traj, Rng& rng, int threads = 1);

struct IsEstimate {
    double value = 0.0;      // log-mean-exp of the importance weights
    double std_error = 0.0;  // delta-method standard error
    int n_trajectories = 0;
};

// Importance-sampling log-likelihood estimate with max-subtraction.
IsEstimate is_loglik(const TransitionOperator& op, const TemperatureSchedule& heating,
                     std::span<const double> x, int n_traj, Rng& rng, int threads = 1);

struct ReversibilityReport {
    double kl_per_step = 0.0;       // (1/N) sum log(p(s_{t+1}|s_t) / p(s_t|s_{t+1}))
    double entropy_per_step = 0.0;  // -(1/N) sum log p(s_{t+1}|s_t)
    double ratio = 0.0;             // kl / entropy
    int chain_length = 0;
    int burn_in = 0;
};

// Runs the operator at fixed temperature from a prior draw, discards the
// burn-in and reports the per-step irreversibility KL estimate normalized by
// the per-step entropy estimate.
ReversibilityReport reversibility_report(const TransitionOperator& op, double temperature,
                                         int chain_length, int burn_in, Rng& rng,
                                         int step_index = 0);

// KL over discrete distributions; q clamped at 1e-12 under the log.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Skew Jensen-Shannon divergence via the mixture form
// (1-pi) KL(p || m) + pi KL(q || m), m = (1-pi) p + pi q; standard JS at 1/2.
double js_divergence(std::span<const double> p, std::span<const double> q, double pi);

struct MutualInfoCheck {
    double js = 0.0;   // mixture-form skew JS
    double mi = 0.0;   // I[s;x] from the explicit joint table
    double diff = 0.0;
};

// Both sides of the JS-as-mutual-information identity, computed
// independently.
MutualInfoCheck mutual_info_identity_check(std::span<const double> p,
                                           std::span<const double> q, double pi);

struct JeffreysCheck {
    double js = 0.0;
    double kl_pq = 0.0;
    double kl_qp = 0.0;
    double jeffreys = 0.0;  // kl_pq + kl_qp
    double bound1 = 0.0;    // half-sum of per-direction bounds
    double bound2 = 0.0;    // log(2 / (1 + exp(-jeffreys/2)))
    bool ordered = false;   // js <= bound1 <= bound2
    bool saturated = false; // a KL large enough that the bounds hit log 2
};

JeffreysCheck jeffreys_bound_check(std::span<const double> p, std::span<const double> q);

// Half the sum of mean forward and mean reverse per-trajectory dissipation:
// the Jeffreys/2 estimator between conjugate path ensembles.
double hysteresis_estimate(std::span<const double> forward_logratios,
                           std::span<const double> reverse_logratios);

}  // namespace walkback
