#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkback/data.hpp"
#include "walkback/estimators.hpp"
#include "walkback/operators.hpp"
#include "walkback/schedule.hpp"
#include "walkback/trajectory.hpp"

namespace walkback {

enum class UpdateMode { online, accumulated };

const char* update_mode_name(UpdateMode m);
UpdateMode update_mode_from_name(const std::string& name);

struct TrainConfig {
    std::size_t n1 = 4;           // flat-step cap for draw_k
    double tmax_override = 0.0;   // 0: compute sigma2_max / sigma2 from data
    ScheduleRule rule = ScheduleRule::doubling;
    OptimizerConfig optimizer;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    UpdateMode update_mode = UpdateMode::online;
    bool restore_best = true;
    int diagnostics_chain = 300;     // reversibility probe length per epoch
    std::size_t val_trajectories = 4;  // bound samples per validation point
    std::string rng_state;           // resume point; overrides seed when set
};

// Accumulates gradients of log p_{T_t}(s_{t-1}|s_t) for every step of a
// recorded trajectory; online mode applies the optimizer per step,
// accumulated mode once per trajectory. Returns the trajectory's bound
// contribution. A gradient at step t sees only (s_{t-1}, s_t, T_t) - there
// is no backpropagation through time.
double walkback_update(TransitionOperator& op, const Trajectory& traj,
                       const OptimizerConfig& optimizer, UpdateMode mode);

struct EpochRow {
    std::size_t epoch = 0;
    double train_bound = 0.0;
    double val_bound = 0.0;
    double reversibility = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> log;
    double best_val = 0.0;
    std::size_t best_epoch = 0;
    double tmax = 1.0;
    std::size_t max_steps = 0;  // heated steps + n1
    nlohmann::json best_state;  // operator checkpoint at the best epoch
    std::string rng_state;      // training RNG after the last epoch
};

// Fires after each epoch; improved = "this epoch is the new best", rng_state
// is the training RNG at that point (checkpoints embed it for resumption).
using EpochCallback =
    std::function<void(const EpochRow&, bool improved, const std::string& rng_state)>;

// Walkback training (heat, reverse, update, track the prior), with early
// stopping on the validation bound. Expects model-space data.
TrainResult train(TransitionOperator& op, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Training-log CSV helpers (epoch, train_bound, val_bound, reversibility).
void write_train_log(const std::string& path, const std::vector<EpochRow>& rows);

// Generative sampling: draw s_K from the prior, run the cooling schedule
// (heating indices K..1), then extra flat steps at T = 1. When keep_every >
// 0, all_states receives every keep_every-th state of each chain.
std::vector<Vec> sample_chains(const TransitionOperator& op,
                               const TemperatureSchedule& cooling, std::size_t n_chains,
                               Rng& rng, int threads = 1,
                               std::vector<std::vector<Vec>>* chain_dumps = nullptr,
                               std::size_t keep_every = 0);

}  // namespace walkback
