#include "walkback/operators.hpp"

#include <algorithm>
#include <cmath>

#include "walkback/kernels.hpp"

namespace walkback {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
constexpr double kVarFloor = 1e-8;
constexpr double kProbClamp = 1e-12;

void check_state_finite(std::span<const double> s, const char* what) {
    for (double x : s)
        if (!std::isfinite(x)) throw OperatorError(std::string(what) + ": non-finite value");
}

void check_temperature(double t) {
    if (!(t > 0.0)) throw DomainError("temperature must be positive");
}

}  // namespace

PriorMoments make_prior(std::size_t dim, double update_rate) {
    if (!(update_rate >= 0.0) || update_rate > 1.0)
        throw ConfigError("prior update_rate must be in [0, 1]");
    return PriorMoments{Vec(dim, 0.0), Vec(dim, 1.0), update_rate};
}

Vec prior_sample(const PriorMoments& p, Rng& rng) {
    Vec out(p.mean.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = p.mean[i] + std::sqrt(p.var[i]) * rng.normal();
    return out;
}

double prior_log_density(const PriorMoments& p, std::span<const double> state) {
    check_dim(state.size(), p.mean.size(), "prior_log_density state");
    double lp = 0.0;
    for (std::size_t i = 0; i < state.size(); ++i) {
        const double z = state[i] - p.mean[i];
        lp += -0.5 * (kLog2Pi + std::log(p.var[i]) + z * z / p.var[i]);
    }
    return lp;
}

void update_prior(PriorMoments& p, const std::vector<Vec>& terminal_states) {
    if (terminal_states.empty()) throw DomainError("update_prior: empty batch");
    const std::size_t d = p.mean.size();
    const double n = static_cast<double>(terminal_states.size());
    Vec bmean(d, 0.0), bvar(d, 0.0);
    for (const Vec& s : terminal_states) {
        check_dim(s.size(), d, "update_prior state");
        for (std::size_t i = 0; i < d; ++i) bmean[i] += s[i];
    }
    for (std::size_t i = 0; i < d; ++i) bmean[i] /= n;
    for (const Vec& s : terminal_states)
        for (std::size_t i = 0; i < d; ++i) bvar[i] += (s[i] - bmean[i]) * (s[i] - bmean[i]);
    const double r = p.update_rate;
    for (std::size_t i = 0; i < d; ++i) {
        bvar[i] /= n;
        p.mean[i] = (1.0 - r) * p.mean[i] + r * bmean[i];
        p.var[i] = std::max((1.0 - r) * p.var[i] + r * bvar[i], kVarFloor);
    }
}

namespace {

nlohmann::json prior_to_json(const PriorMoments& p) {
    return {{"mean", p.mean}, {"var", p.var}, {"update_rate", p.update_rate}};
}

PriorMoments prior_from_json(const nlohmann::json& j) {
    PriorMoments p{j.at("mean").get<Vec>(), j.at("var").get<Vec>(),
                   j.at("update_rate").get<double>()};
    for (double v : p.var)
        if (!(v > 0.0)) throw ParseError("prior checkpoint: non-positive variance");
    return p;
}

void step_net(ParamNet& net, const OptimizerConfig& opt) {
    if (opt.kind == OptimizerConfig::Kind::sgd)
        net.sgd_step(opt.learning_rate);
    else
        net.adam_step(opt.learning_rate, opt.beta1, opt.beta2, opt.eps);
}

}  // namespace

// ---------------------------------------------------------------------------
// GaussianOperator

GaussianOperator::GaussianOperator(double alpha, ParamNet mu_net, ParamNet sigma_net,
                                   double sigma_floor, double base_variance,
                                   double prior_update_rate)
    : alpha_(alpha),
      mu_net_(std::move(mu_net)),
      sigma_net_(std::move(sigma_net)),
      sigma_floor_(sigma_floor),
      base_variance_(base_variance),
      prior_(make_prior(mu_net_.output_dim(), prior_update_rate)) {
    if (alpha_ < 0.0 || alpha_ > 1.0) throw ConfigError("gaussian: alpha must be in [0,1]");
    if (!(sigma_floor_ > 0.0)) throw ConfigError("gaussian: sigma_floor must be positive");
    if (!(base_variance_ > 0.0)) throw ConfigError("gaussian: base_variance must be positive");
    const std::size_t d = mu_net_.output_dim();
    if (mu_net_.input_dim() != d || sigma_net_.input_dim() != d || sigma_net_.output_dim() != d)
        throw ConfigError("gaussian: mu/sigma nets must map dim -> dim");
}

std::size_t GaussianOperator::dim() const { return mu_net_.output_dim(); }

GaussianOperator::Moments GaussianOperator::conditional_moments(std::span<const double> state,
                                                                double temperature,
                                                                int step_index) const {
    check_temperature(temperature);
    check_dim(state.size(), dim(), "gaussian state");
    const Vec fmu = mu_net_.forward(state, step_index);
    const Vec fsigma = sigma_net_.forward(state, step_index);
    const double sqrt_t = std::sqrt(temperature);
    Moments m;
    m.mean.resize(dim());
    m.stddev.resize(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        m.mean[i] = (1.0 - alpha_) * state[i] + alpha_ * fmu[i];
        m.stddev[i] = sqrt_t * std::max(softplus(fsigma[i]), sigma_floor_);
    }
    check_state_finite(m.mean, "gaussian mean");
    check_state_finite(m.stddev, "gaussian stddev");
    return m;
}

Vec GaussianOperator::sample_step(std::span<const double> state, double temperature,
                                  int step_index, Rng& rng) const {
    const Moments m = conditional_moments(state, temperature, step_index);
    Vec next(dim());
    for (std::size_t i = 0; i < next.size(); ++i)
        next[i] = m.mean[i] + m.stddev[i] * rng.normal();
    return next;
}

double GaussianOperator::log_density(std::span<const double> from, std::span<const double> to,
                                     double temperature, int step_index) const {
    check_dim(to.size(), dim(), "gaussian to-state");
    const Moments m = conditional_moments(from, temperature, step_index);
    double lp = -0.5 * (kLog2Pi * static_cast<double>(dim()) +
                        kernels::sq_scaled_diff_sum(to.data(), m.mean.data(), m.stddev.data(),
                                                    dim()));
    for (double s : m.stddev) lp -= std::log(s);
    return lp;
}

void GaussianOperator::accumulate_log_density_grad(std::span<const double> from,
                                                   std::span<const double> to,
                                                   double temperature, int step_index,
                                                   double scale) {
    check_temperature(temperature);
    check_dim(from.size(), dim(), "gaussian from-state");
    check_dim(to.size(), dim(), "gaussian to-state");
    GradTape mu_tape, sigma_tape;
    const Vec fmu = mu_net_.forward(from, step_index, &mu_tape);
    const Vec fsigma = sigma_net_.forward(from, step_index, &sigma_tape);
    const double sqrt_t = std::sqrt(temperature);

    Vec mu_grad(dim()), sigma_grad(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const double mean = (1.0 - alpha_) * from[i] + alpha_ * fmu[i];
        const double base = softplus(fsigma[i]);
        const double clamped = std::max(base, sigma_floor_);
        const double sd = sqrt_t * clamped;
        const double z = (to[i] - mean) / sd;
        // d logp / d mean, then through the convex combination.
        mu_grad[i] = alpha_ * z / sd;
        // d logp / d sd = (z^2 - 1) / sd; zero where the floor clamps.
        const double dsd = (z * z - 1.0) / sd;
        sigma_grad[i] = base > sigma_floor_ ? dsd * sqrt_t * logistic(fsigma[i]) : 0.0;
    }
    mu_net_.backward(mu_tape, mu_grad, scale);
    sigma_net_.backward(sigma_tape, sigma_grad, scale);
}

void GaussianOperator::zero_grad() {
    mu_net_.zero_grad();
    sigma_net_.zero_grad();
}

void GaussianOperator::apply_gradient_step(const OptimizerConfig& opt) {
    step_net(mu_net_, opt);
    step_net(sigma_net_, opt);
}

double GaussianOperator::prior_logp(std::span<const double> state) const {
    return prior_log_density(prior_, state);
}

Vec GaussianOperator::draw_prior(Rng& rng) const { return prior_sample(prior_, rng); }

void GaussianOperator::update_prior_moments(const std::vector<Vec>& terminal_states) {
    update_prior(prior_, terminal_states);
}

std::unique_ptr<TransitionOperator> GaussianOperator::clone() const {
    return std::make_unique<GaussianOperator>(*this);
}

nlohmann::json GaussianOperator::to_json() const {
    return {{"kind", "gaussian"},
            {"alpha", alpha_},
            {"sigma_floor", sigma_floor_},
            {"base_variance", base_variance_},
            {"mu_net", mu_net_.to_json()},
            {"sigma_net", sigma_net_.to_json()},
            {"prior", prior_to_json(prior_)}};
}

std::unique_ptr<GaussianOperator> GaussianOperator::from_json(const nlohmann::json& j) {
    auto op = std::make_unique<GaussianOperator>(
        j.at("alpha").get<double>(), ParamNet::from_json(j.at("mu_net")),
        ParamNet::from_json(j.at("sigma_net")), j.at("sigma_floor").get<double>(),
        j.at("base_variance").get<double>());
    op->prior_ = prior_from_json(j.at("prior"));
    check_dim(op->prior_.mean.size(), op->dim(), "gaussian checkpoint prior");
    return op;
}

// ---------------------------------------------------------------------------
// BernoulliOperator

BernoulliOperator::BernoulliOperator(double alpha, ParamNet rho_net, double prior_update_rate)
    : alpha_(alpha),
      rho_net_(std::move(rho_net)),
      prior_(make_prior(rho_net_.output_dim(), prior_update_rate)) {
    if (alpha_ < 0.0 || alpha_ > 1.0) throw ConfigError("bernoulli: alpha must be in [0,1]");
    if (rho_net_.input_dim() != rho_net_.output_dim())
        throw ConfigError("bernoulli: rho net must map dim -> dim");
}

std::size_t BernoulliOperator::dim() const { return rho_net_.output_dim(); }

Vec BernoulliOperator::probabilities(std::span<const double> state, double temperature,
                                     int step_index) const {
    check_temperature(temperature);
    check_dim(state.size(), dim(), "bernoulli state");
    const Vec frho = rho_net_.forward(state, step_index);
    Vec rho(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const double logit = ((1.0 - alpha_) * state[i] + alpha_ * frho[i]) / temperature;
        if (!std::isfinite(logit)) throw OperatorError("bernoulli: non-finite logit");
        rho[i] = logistic(logit);
    }
    return rho;
}

Vec BernoulliOperator::sample_step(std::span<const double> state, double temperature,
                                   int step_index, Rng& rng) const {
    const Vec rho = probabilities(state, temperature, step_index);
    Vec next(dim());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = rng.uniform() < rho[i] ? 1.0 : 0.0;
    return next;
}

double BernoulliOperator::log_density(std::span<const double> from, std::span<const double> to,
                                      double temperature, int step_index) const {
    check_dim(to.size(), dim(), "bernoulli to-state");
    const Vec rho = probabilities(from, temperature, step_index);
    double lp = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (to[i] != 0.0 && to[i] != 1.0)
            throw DomainError("bernoulli log_density: to-state must be binary");
        const double p = std::clamp(rho[i], kProbClamp, 1.0 - kProbClamp);
        lp += to[i] == 1.0 ? std::log(p) : std::log1p(-p);
    }
    return lp;
}

void BernoulliOperator::accumulate_log_density_grad(std::span<const double> from,
                                                    std::span<const double> to,
                                                    double temperature, int step_index,
                                                    double scale) {
    check_temperature(temperature);
    check_dim(from.size(), dim(), "bernoulli from-state");
    check_dim(to.size(), dim(), "bernoulli to-state");
    GradTape tape;
    const Vec frho = rho_net_.forward(from, step_index, &tape);
    Vec grad(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        if (to[i] != 0.0 && to[i] != 1.0)
            throw DomainError("bernoulli gradient: to-state must be binary");
        const double logit = ((1.0 - alpha_) * from[i] + alpha_ * frho[i]) / temperature;
        const double rho = logistic(logit);
        // d logp / d logit = to - rho; logit picks up alpha / T from F_rho.
        grad[i] = (to[i] - rho) * alpha_ / temperature;
    }
    rho_net_.backward(tape, grad, scale);
}

void BernoulliOperator::zero_grad() { rho_net_.zero_grad(); }

void BernoulliOperator::apply_gradient_step(const OptimizerConfig& opt) {
    step_net(rho_net_, opt);
}

double BernoulliOperator::prior_logp(std::span<const double> state) const {
    return prior_log_density(prior_, state);
}

Vec BernoulliOperator::draw_prior(Rng& rng) const { return prior_sample(prior_, rng); }

void BernoulliOperator::update_prior_moments(const std::vector<Vec>& terminal_states) {
    update_prior(prior_, terminal_states);
}

std::unique_ptr<TransitionOperator> BernoulliOperator::clone() const {
    return std::make_unique<BernoulliOperator>(*this);
}

nlohmann::json BernoulliOperator::to_json() const {
    return {{"kind", "bernoulli"},
            {"alpha", alpha_},
            {"rho_net", rho_net_.to_json()},
            {"prior", prior_to_json(prior_)}};
}

std::unique_ptr<BernoulliOperator> BernoulliOperator::from_json(const nlohmann::json& j) {
    auto op = std::make_unique<BernoulliOperator>(j.at("alpha").get<double>(),
                                                  ParamNet::from_json(j.at("rho_net")));
    op->prior_ = prior_from_json(j.at("prior"));
    check_dim(op->prior_.mean.size(), op->dim(), "bernoulli checkpoint prior");
    return op;
}

std::unique_ptr<TransitionOperator> operator_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") return GaussianOperator::from_json(j);
    if (kind == "bernoulli") return BernoulliOperator::from_json(j);
    throw ParseError("unknown operator kind '" + kind + "'");
}

}  // namespace walkback
