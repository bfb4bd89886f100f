#pragma once

#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "walkback/net.hpp"
#include "walkback/rng.hpp"

namespace walkback {

// Diagonal-Gaussian starting distribution p* for the generative process,
// tracked as exponential moving averages of terminal-state moments.
struct PriorMoments {
    Vec mean;
    Vec var;
    double update_rate = 0.1;
};

PriorMoments make_prior(std::size_t dim, double update_rate = 0.1);
Vec prior_sample(const PriorMoments& p, Rng& rng);
double prior_log_density(const PriorMoments& p, std::span<const double> state);
// EMA toward the batch's first and second central moments; variance floored
// at 1e-8. Rate 0 leaves the prior untouched, rate 1 adopts the batch.
void update_prior(PriorMoments& p, const std::vector<Vec>& terminal_states);

struct OptimizerConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// A parameterized conditional next-state distribution p_T(s'|s). One
// parameter set serves every timestep. Sampling and densities are const and
// safe from concurrent readers; gradient accumulation and optimizer steps
// are single-writer.
class TransitionOperator {
public:
    virtual ~TransitionOperator() = default;

    virtual std::size_t dim() const = 0;

    virtual Vec sample_step(std::span<const double> state, double temperature,
                            int step_index, Rng& rng) const = 0;

    virtual double log_density(std::span<const double> from, std::span<const double> to,
                               double temperature, int step_index) const = 0;

    // Accumulates scale * d log p_T(to|from) / dtheta into the parameter
    // gradient buffers. scale = -1 turns the accumulators into loss
    // gradients for the (descending) optimizers.
    virtual void accumulate_log_density_grad(std::span<const double> from,
                                             std::span<const double> to, double temperature,
                                             int step_index, double scale) = 0;

    virtual void zero_grad() = 0;
    virtual void apply_gradient_step(const OptimizerConfig& opt) = 0;

    virtual double prior_logp(std::span<const double> state) const = 0;
    virtual Vec draw_prior(Rng& rng) const = 0;
    virtual void update_prior_moments(const std::vector<Vec>& terminal_states) = 0;

    // Nominal noise variance at T = 1 (the sigma^2 in tmax = sigma2_max/sigma2).
    virtual double nominal_unit_variance() const = 0;

    virtual std::unique_ptr<TransitionOperator> clone() const = 0;

    virtual nlohmann::json to_json() const = 0;
};

// Real-valued operator: next ~ Normal(mu, diag(std^2)) with
//   mu  = (1 - alpha) s + alpha F_mu(s)
//   std = sqrt(T) * max(softplus(F_sigma(s)), sigma_floor)
// so the injected noise variance is linear in T and std(T) = sqrt(T) std(1)
// exactly per state.
class GaussianOperator : public TransitionOperator {
public:
    GaussianOperator(double alpha, ParamNet mu_net, ParamNet sigma_net,
                     double sigma_floor = 1e-4, double base_variance = 0.01,
                     double prior_update_rate = 0.1);

    std::size_t dim() const override;
    Vec sample_step(std::span<const double> state, double temperature, int step_index,
                    Rng& rng) const override;
    double log_density(std::span<const double> from, std::span<const double> to,
                       double temperature, int step_index) const override;
    void accumulate_log_density_grad(std::span<const double> from, std::span<const double> to,
                                     double temperature, int step_index, double scale) override;
    void zero_grad() override;
    void apply_gradient_step(const OptimizerConfig& opt) override;
    double prior_logp(std::span<const double> state) const override;
    Vec draw_prior(Rng& rng) const override;
    void update_prior_moments(const std::vector<Vec>& terminal_states) override;
    double nominal_unit_variance() const override { return base_variance_; }
    std::unique_ptr<TransitionOperator> clone() const override;
    nlohmann::json to_json() const override;
    static std::unique_ptr<GaussianOperator> from_json(const nlohmann::json& j);

    // Conditional moments at a state, before noise injection.
    struct Moments {
        Vec mean;
        Vec stddev;
    };
    Moments conditional_moments(std::span<const double> state, double temperature,
                                int step_index) const;

    double alpha() const { return alpha_; }
    double sigma_floor() const { return sigma_floor_; }
    ParamNet& mu_net() { return mu_net_; }
    ParamNet& sigma_net() { return sigma_net_; }
    const ParamNet& mu_net() const { return mu_net_; }
    const ParamNet& sigma_net() const { return sigma_net_; }
    PriorMoments& prior() { return prior_; }
    const PriorMoments& prior() const { return prior_; }

private:
    double alpha_;
    ParamNet mu_net_;
    ParamNet sigma_net_;
    double sigma_floor_;
    double base_variance_;
    PriorMoments prior_;
};

// Binary operator: next_i ~ Bernoulli(rho_i) with
//   rho = sigmoid(((1 - alpha) s + alpha F_rho(s)) / T)
// Logits divided by T: every probability tends to 1/2 as T grows.
class BernoulliOperator : public TransitionOperator {
public:
    BernoulliOperator(double alpha, ParamNet rho_net, double prior_update_rate = 0.1);

    std::size_t dim() const override;
    Vec sample_step(std::span<const double> state, double temperature, int step_index,
                    Rng& rng) const override;
    double log_density(std::span<const double> from, std::span<const double> to,
                       double temperature, int step_index) const override;
    void accumulate_log_density_grad(std::span<const double> from, std::span<const double> to,
                                     double temperature, int step_index, double scale) override;
    void zero_grad() override;
    void apply_gradient_step(const OptimizerConfig& opt) override;
    double prior_logp(std::span<const double> state) const override;
    Vec draw_prior(Rng& rng) const override;
    void update_prior_moments(const std::vector<Vec>& terminal_states) override;
    double nominal_unit_variance() const override { return 0.25; }
    std::unique_ptr<TransitionOperator> clone() const override;
    nlohmann::json to_json() const override;
    static std::unique_ptr<BernoulliOperator> from_json(const nlohmann::json& j);

    // Element-wise success probabilities at a state.
    Vec probabilities(std::span<const double> state, double temperature, int step_index) const;

    double alpha() const { return alpha_; }
    ParamNet& rho_net() { return rho_net_; }
    const ParamNet& rho_net() const { return rho_net_; }
    PriorMoments& prior() { return prior_; }
    const PriorMoments& prior() const { return prior_; }

private:
    double alpha_;
    ParamNet rho_net_;
    PriorMoments prior_;
};

// Checkpoint container: operator kind + parameters + prior + RNG state, plus
// optional dataset scaler and schedule settings stored by the trainer.
std::unique_ptr<TransitionOperator> operator_from_json(const nlohmann::json& j);

}  // namespace walkback
