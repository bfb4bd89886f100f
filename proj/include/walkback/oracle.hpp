#pragma once

#include <functional>
#include <string>
#include <vector>

#include "walkback/mat.hpp"
#include "walkback/operators.hpp"
#include "walkback/schedule.hpp"

namespace walkback::oracle {

// Explicit finite-state chain: a row-stochastic matrix per temperature, a
// starting (data) distribution for heated trajectories and a terminal prior
// for cooled ones. Everything downstream of this type is exact arithmetic,
// used as ground truth for the Monte-Carlo estimators.
struct DiscreteChain {
    std::size_t n_states = 0;
    std::function<Mat(double)> transition;  // temperature -> row-stochastic P_T
    Vec data_dist;
    Vec prior;

    Mat at(double temperature) const;
};

// State-space cap: exhaustive path enumeration must stay cheap and loud
// failures beat silent quadratic blowups.
constexpr std::size_t kMaxStates = 64;
constexpr std::size_t kMaxPaths = 1u << 22;

// Same matrix at every temperature.
DiscreteChain chain_from_matrix(Mat p, Vec data_dist = {}, Vec prior = {});

// Exact-match lookup over labelled temperature blocks; a single block is
// used at every temperature.
DiscreteChain chain_from_blocks(std::vector<std::pair<double, Mat>> blocks,
                                Vec data_dist = {}, Vec prior = {});

// Metropolis family on an energy vector with uniform proposals: obeys
// detailed balance w.r.t. pi_T ∝ exp(-E/T) at every temperature. The
// reversible family used by the annealing diagnostics.
DiscreteChain chain_from_energy(Vec energy, Vec data_dist = {}, Vec prior = {});
Mat metropolis_matrix(const Vec& energy, double temperature);
Vec boltzmann(const Vec& energy, double temperature);

void validate_stochastic(const Mat& p, double tol = 1e-12);

// Marginal of s_0 under the cooling process: start from the prior and apply
// the transition at T_K, .., T_1 (schedule given in heating order).
Vec exact_marginal(const DiscreteChain& chain, const TemperatureSchedule& heating);

struct Decomposition {
    double log_marginal = 0.0;
    double elbo = 0.0;
    double kl_posterior = 0.0;
};

// log p(s0), the variational bound and the posterior KL gap, each by
// exhaustive path enumeration; log_marginal = elbo + kl_posterior is
// asserted to 1e-10 before returning.
Decomposition exact_decomposition(const DiscreteChain& chain,
                                  const TemperatureSchedule& heating, std::size_t s0);

struct TimeReversal {
    Vec pi;       // stationary distribution
    Mat reversed; // P_R(j|i) = P(i|j) pi(j) / pi(i)
};

// Requires an irreducible matrix; the stationary vector comes from damped
// power iteration to 1e-13.
TimeReversal time_reversal(const Mat& p);
Vec stationary_distribution(const Mat& p);
bool is_irreducible(const Mat& p);
bool detailed_balance(const Mat& p, const Vec& pi, double tol = 1e-10);

struct KlSplit {
    double irreversibility = 0.0;  // E_q sum_t log(p / p_R), zero iff detailed balance
    double annealing = 0.0;        // stationary-ratio product term
};

// Both terms of the posterior-KL split, by enumeration; their sum equals
// exact_decomposition's kl_posterior.
KlSplit kl_split(const DiscreteChain& chain, const TemperatureSchedule& heating,
                 std::size_t s0);

// Total-variation residual TV(dist P, dist).
double stationarity_check(const Mat& p, std::span<const double> dist);
double tv_distance(std::span<const double> a, std::span<const double> b);

// Wraps a chain in the TransitionOperator interface; states are 1-vectors
// holding the state index, so the estimator code paths run unmodified on
// enumerable spaces. Not trainable.
class DiscreteMatrixOperator : public TransitionOperator {
public:
    explicit DiscreteMatrixOperator(DiscreteChain chain);

    std::size_t dim() const override { return 1; }
    Vec sample_step(std::span<const double> state, double temperature, int step_index,
                    Rng& rng) const override;
    double log_density(std::span<const double> from, std::span<const double> to,
                       double temperature, int step_index) const override;
    void accumulate_log_density_grad(std::span<const double>, std::span<const double>, double,
                                     int, double) override;
    void zero_grad() override {}
    void apply_gradient_step(const OptimizerConfig&) override;
    double prior_logp(std::span<const double> state) const override;
    Vec draw_prior(Rng& rng) const override;
    void update_prior_moments(const std::vector<Vec>&) override {}
    double nominal_unit_variance() const override { return 1.0; }
    std::unique_ptr<TransitionOperator> clone() const override;
    nlohmann::json to_json() const override;

    const DiscreteChain& chain() const { return chain_; }
    static std::size_t state_index(std::span<const double> state, std::size_t n_states);

private:
    DiscreteChain chain_;
};

// Plain-text chain format: optional "states", "data", "prior" lines, then
// one "T <temp>" block per temperature followed by matrix rows.
DiscreteChain load_chain(const std::string& path);

}  // namespace walkback::oracle
