#include "walkback/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "walkback/util.hpp"

namespace walkback {

const char* update_mode_name(UpdateMode m) {
    return m == UpdateMode::online ? "online" : "accumulated";
}

UpdateMode update_mode_from_name(const std::string& name) {
    if (name == "online") return UpdateMode::online;
    if (name == "accumulated") return UpdateMode::accumulated;
    throw ConfigError("unknown update mode '" + name + "'");
}

double walkback_update(TransitionOperator& op, const Trajectory& traj,
                       const OptimizerConfig& optimizer, UpdateMode mode) {
    const std::size_t k = traj.steps();
    if (traj.states.size() != k + 1 || traj.fwd_logp.size() != k || traj.bwd_logp.size() != k)
        throw UsageError("walkback_update: inconsistent trajectory record");

    for (std::size_t t = 1; t <= k; ++t) {
        // Reverse the step: gradient of log p_{T_t}(s_{t-1} | s_t). scale -1
        // turns the buffers into loss gradients for the descending optimizer.
        op.accumulate_log_density_grad(traj.states[t], traj.states[t - 1], traj.temps[t - 1],
                                       static_cast<int>(t) - 1, -1.0);
        if (mode == UpdateMode::online) op.apply_gradient_step(optimizer);
    }
    if (mode == UpdateMode::accumulated && k > 0) op.apply_gradient_step(optimizer);

    double bound = traj.terminal_prior_logp;
    for (std::size_t t = 0; t < k; ++t) bound += traj.bwd_logp[t] - traj.fwd_logp[t];
    return bound;
}

namespace {

double validation_bound(const TransitionOperator& op, const Dataset& data,
                        const TemperatureSchedule& schedule, std::uint64_t seed,
                        std::size_t n_traj) {
    if (data.val_idx.empty()) throw ConfigError("train: empty validation split");
    Rng rng(seed);
    double sum = 0.0;
    for (std::size_t i : data.val_idx)
        for (std::size_t t = 0; t < n_traj; ++t)
            sum += elbo_from_trajectory(heat_trajectory(op, schedule, data.points[i], rng));
    return sum / static_cast<double>(data.val_idx.size() * n_traj);
}

}  // namespace

TrainResult train(TransitionOperator& op, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    if (data.train_idx.empty()) throw ConfigError("train: empty training split");
    if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.patience == 0) throw ConfigError("train: patience must be >= 1");
    if (!(cfg.optimizer.learning_rate >= 0.0))
        throw ConfigError("train: learning rate must be non-negative");

    TrainResult res;
    const double sigma2_max = total_variance(data.split_points(data.train_idx));
    res.tmax = cfg.tmax_override > 0.0
                   ? cfg.tmax_override
                   : tmax_from_variance(sigma2_max, op.nominal_unit_variance());
    res.max_steps = heated_steps(res.tmax, cfg.rule) + cfg.n1;

    const TemperatureSchedule val_schedule = make_heating(res.tmax, cfg.n1, cfg.rule);
    // Fixed validation draws: the bound varies across epochs only through
    // the parameters.
    const std::uint64_t val_seed = cfg.seed ^ 0x5DEECE66Dull;

    Rng rng = cfg.rng_state.empty() ? Rng(cfg.seed) : Rng::deserialize(cfg.rng_state);
    res.best_val = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> order(data.train_idx);
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double bound_sum = 0.0;
        std::size_t bound_n = 0;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
                const DrawK dk = draw_k(cfg.n1, res.tmax, rng, cfg.rule);
                const TemperatureSchedule heating = make_heating(res.tmax, dk.n, cfg.rule);
                std::vector<Vec> terminals;
                terminals.reserve(stop - start);
                for (std::size_t b = start; b < stop; ++b) {
                    const Trajectory traj =
                        heat_trajectory(op, heating, data.points[order[b]], rng);
                    bound_sum += walkback_update(op, traj, cfg.optimizer, cfg.update_mode);
                    ++bound_n;
                    terminals.push_back(traj.states.back());
                }
                op.update_prior_moments(terminals);
            }
        } catch (const OperatorError& e) {
            throw TrainingError("diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }

        EpochRow row;
        row.epoch = epoch;
        row.train_bound = bound_sum / static_cast<double>(bound_n);
        row.val_bound = validation_bound(op, data, val_schedule, val_seed,
                                         std::max<std::size_t>(1, cfg.val_trajectories));
        if (!std::isfinite(row.val_bound) || !std::isfinite(row.train_bound))
            throw TrainingError("diverged: non-finite bound at epoch " + std::to_string(epoch));
        if (cfg.diagnostics_chain > 50) {
            Rng diag_rng(cfg.seed ^ 0xD1A6ull ^ epoch);
            row.reversibility =
                reversibility_report(op, 1.0, cfg.diagnostics_chain, 50, diag_rng).kl_per_step;
        }

        const bool improved = row.val_bound > res.best_val;
        if (improved) {
            res.best_val = row.val_bound;
            res.best_epoch = epoch;
            res.best_state = op.to_json();
            since_best = 0;
        } else {
            ++since_best;
        }
        res.log.push_back(row);
        if (on_epoch) on_epoch(row, improved, rng.serialize());
        if (since_best >= cfg.patience) break;
    }
    res.rng_state = rng.serialize();

    if (cfg.restore_best && !res.best_state.is_null()) {
        auto best = operator_from_json(res.best_state);
        // Swap the trained operator back to its best-validation parameters.
        if (auto* g = dynamic_cast<GaussianOperator*>(&op)) {
            *g = dynamic_cast<GaussianOperator&>(*best);
        } else if (auto* b = dynamic_cast<BernoulliOperator*>(&op)) {
            *b = dynamic_cast<BernoulliOperator&>(*best);
        }
    }
    return res;
}

void write_train_log(const std::string& path, const std::vector<EpochRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out << "epoch,train_bound,val_bound,reversibility\n";
    char buf[128];
    for (const EpochRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_bound,
                      r.val_bound, r.reversibility);
        out << buf;
    }
}

std::vector<Vec> sample_chains(const TransitionOperator& op,
                               const TemperatureSchedule& cooling, std::size_t n_chains,
                               Rng& rng, int threads,
                               std::vector<std::vector<Vec>>* chain_dumps,
                               std::size_t keep_every) {
    if (cooling.mode != ScheduleMode::cooling)
        throw UsageError("sample_chains: expected a cooling schedule");
    // Positions past the reversed heating run are extra flat steps; they
    // reuse the first (T = 1) per-step affine row.
    const std::size_t base_k = heated_steps(cooling.tmax, cooling.rule) + cooling.n_flat;
    const std::uint64_t base = rng.raw();
    std::vector<Vec> finals(n_chains);
    if (chain_dumps) chain_dumps->assign(n_chains, {});
    parallel_for(n_chains, threads, [&](std::size_t c) {
        Rng child = Rng::child(base, c);
        Vec state = op.draw_prior(child);
        if (chain_dumps && keep_every > 0) (*chain_dumps)[c].push_back(state);
        for (std::size_t j = 0; j < cooling.steps(); ++j) {
            const int row = j + 1 < base_k ? static_cast<int>(base_k - 1 - j) : 0;
            state = op.sample_step(state, cooling.temps[j], row, child);
            if (chain_dumps && keep_every > 0 && (j + 1) % keep_every == 0)
                (*chain_dumps)[c].push_back(state);
        }
        finals[c] = std::move(state);
    });
    return finals;
}

}  // namespace walkback
