#include "walkback/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "walkback/util.hpp"

namespace walkback {

namespace {

constexpr double kProbClamp = 1e-12;

void check_pair(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw DomainError("distributions have mismatched support sizes");
    if (p.empty()) throw DomainError("empty distribution");
    auto check_one = [](std::span<const double> d, const char* name) {
        double s = 0.0;
        for (double x : d) {
            if (x < 0.0) throw DomainError(std::string(name) + ": negative probability");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw DomainError(std::string(name) + ": not normalized");
    };
    check_one(p, "p");
    check_one(q, "q");
}

}  // namespace

double elbo_from_trajectory(const Trajectory& traj) {
    double b = traj.terminal_prior_logp;
    for (std::size_t t = 0; t < traj.steps(); ++t) b += traj.bwd_logp[t] - traj.fwd_logp[t];
    return b;
}

namespace {

// Per-trajectory bound samples with order-stable parallel fan-out.
Vec bound_samples(const TransitionOperator& op, const TemperatureSchedule& heating,
                  std::span<const double> x, int n_traj, Rng& rng, int threads) {
    if (n_traj < 1) throw DomainError("estimator: n_traj must be >= 1");
    const std::uint64_t base = rng.raw();
    Vec samples(static_cast<std::size_t>(n_traj));
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        Rng child = Rng::child(base, i);
        samples[i] = elbo_from_trajectory(heat_trajectory(op, heating, x, child));
    });
    return samples;
}

}  // namespace

BoundEstimate elbo_estimate(const TransitionOperator& op, const TemperatureSchedule& heating,
                            std::span<const double> x, int n_traj, Rng& rng, int threads) {
    const Vec samples = bound_samples(op, heating, x, n_traj, rng, threads);
    BoundEstimate est;
    est.mean = mean_of(samples);
    est.std_error = samples.size() > 1
                        ? sd_of(samples) / std::sqrt(static_cast<double>(samples.size()))
                        : 0.0;
    est.n_trajectories = n_traj;
    return est;
}

IsEstimate is_loglik(const TransitionOperator& op, const TemperatureSchedule& heating,
                     std::span<const double> x, int n_traj, Rng& rng, int threads) {
    const Vec w = bound_samples(op, heating, x, n_traj, rng, threads);
    const double m = *std::max_element(w.begin(), w.end());
    if (!std::isfinite(m)) throw DomainError("is_loglik: all importance weights vanish");
    Vec a(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) a[i] = std::exp(w[i] - m);
    const double amean = mean_of(a);
    IsEstimate est;
    est.value = m + std::log(amean);
    // Var(log mean a) ~ Var(a) / (n a_mean^2)
    est.std_error = w.size() > 1
                        ? sd_of(a) / (amean * std::sqrt(static_cast<double>(w.size())))
                        : 0.0;
    est.n_trajectories = n_traj;
    return est;
}

ReversibilityReport reversibility_report(const TransitionOperator& op, double temperature,
                                         int chain_length, int burn_in, Rng& rng,
                                         int step_index) {
    if (burn_in < 0) throw DomainError("reversibility: burn_in must be >= 0");
    if (chain_length <= burn_in)
        throw DomainError("reversibility: chain_length must exceed burn_in");
    Vec state = op.draw_prior(rng);
    for (int t = 0; t < burn_in; ++t)
        state = op.sample_step(state, temperature, step_index, rng);

    const int n = chain_length - burn_in;
    double kl_sum = 0.0;
    double logp_sum = 0.0;
    for (int t = 0; t < n; ++t) {
        Vec next = op.sample_step(state, temperature, step_index, rng);
        const double fwd = op.log_density(state, next, temperature, step_index);
        const double rev = op.log_density(next, state, temperature, step_index);
        kl_sum += fwd - rev;
        logp_sum += fwd;
        state = std::move(next);
    }
    ReversibilityReport rep;
    rep.kl_per_step = kl_sum / n;
    rep.entropy_per_step = -logp_sum / n;
    if (rep.entropy_per_step == 0.0)
        throw DomainError("reversibility: zero entropy denominator");
    rep.ratio = rep.kl_per_step / rep.entropy_per_step;
    if (!std::isfinite(rep.ratio)) throw DomainError("reversibility: non-finite ratio");
    rep.chain_length = chain_length;
    rep.burn_in = burn_in;
    return rep;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    check_pair(p, q);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        kl += p[i] * std::log(p[i] / std::max(q[i], kProbClamp));
    }
    return kl;
}

double js_divergence(std::span<const double> p, std::span<const double> q, double pi) {
    check_pair(p, q);
    if (pi < 0.0 || pi > 1.0) throw DomainError("js_divergence: pi must be in [0,1]");
    Vec m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = (1.0 - pi) * p[i] + pi * q[i];
    double js = 0.0;
    if (pi < 1.0) js += (1.0 - pi) * kl_divergence(p, m);
    if (pi > 0.0) js += pi * kl_divergence(q, m);
    return js;
}

MutualInfoCheck mutual_info_identity_check(std::span<const double> p,
                                           std::span<const double> q, double pi) {
    MutualInfoCheck out;
    out.js = js_divergence(p, q, pi);
    // I[s;x] from the joint table p~(s,x): row s=0 carries (1-pi) p, row s=1
    // carries pi q; marginals are (1-pi, pi) and the mixture.
    check_pair(p, q);
    double mi = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double px = (1.0 - pi) * p[i] + pi * q[i];
        const double j0 = (1.0 - pi) * p[i];
        const double j1 = pi * q[i];
        if (j0 > 0.0) mi += j0 * std::log(j0 / ((1.0 - pi) * px));
        if (j1 > 0.0) mi += j1 * std::log(j1 / (pi * px));
    }
    out.mi = mi;
    out.diff = out.js - out.mi;
    return out;
}

JeffreysCheck jeffreys_bound_check(std::span<const double> p, std::span<const double> q) {
    JeffreysCheck out;
    out.js = js_divergence(p, q, 0.5);
    out.kl_pq = kl_divergence(p, q);
    out.kl_qp = kl_divergence(q, p);
    out.jeffreys = out.kl_pq + out.kl_qp;
    out.bound1 = 0.5 * std::log(2.0 / (1.0 + std::exp(-out.kl_pq))) +
                 0.5 * std::log(2.0 / (1.0 + std::exp(-out.kl_qp)));
    out.bound2 = std::log(2.0 / (1.0 + std::exp(-0.5 * out.jeffreys)));
    out.ordered = out.js <= out.bound1 + 1e-12 && out.bound1 <= out.bound2 + 1e-12;
    // Once a clamped KL exceeds ~ -log(1e-12) the chain collapses to log 2.
    out.saturated = out.kl_pq > 25.0 || out.kl_qp > 25.0;
    return out;
}

double hysteresis_estimate(std::span<const double> forward_logratios,
                           std::span<const double> reverse_logratios) {
    if (forward_logratios.empty() || reverse_logratios.empty())
        throw DomainError("hysteresis: empty sample set");
    return 0.5 * (mean_of(forward_logratios) + mean_of(reverse_logratios));
}

}  // namespace walkback
