#include <doctest.h>

#include <cmath>
#include <numbers>

#include "walkback/operators.hpp"

using namespace walkback;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 log(2 pi)

// Single identity-activation layer with zero weights: output = bias.
ParamNet constant_net(std::size_t dim, const Vec& bias) {
    Layer l;
    l.w = Mat(dim, dim, 0.0);
    l.b = bias;
    l.act = Activation::identity;
    return ParamNet::from_layers({l});
}

ParamNet random_net(std::size_t dim, Rng& rng, std::size_t per_step = 0) {
    return ParamNet::mlp({dim, 6, dim}, Activation::tanh, Activation::identity, per_step, rng);
}

GaussianOperator unit_gaussian_1d() {
    // mu = 0, std = 1 at T = 1: softplus(bias) = 1 at bias ln(e - 1).
    const double bias = std::log(std::numbers::e - 1.0);
    return GaussianOperator(1.0, constant_net(1, Vec{0.0}), constant_net(1, Vec{bias}),
                            1e-4, 1.0);
}

// Central finite differences of log_density over every parameter of a net.
Vec fd_logdensity_grad(TransitionOperator& op, ParamNet& net, const Vec& from, const Vec& to,
                       double temp, int step, double h = 1e-5) {
    const Vec theta = net.flat_params();
    Vec grad(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        Vec p = theta;
        p[k] = theta[k] + h;
        net.set_flat_params(p);
        const double jp = op.log_density(from, to, temp, step);
        p[k] = theta[k] - h;
        net.set_flat_params(p);
        const double jm = op.log_density(from, to, temp, step);
        grad[k] = (jp - jm) / (2.0 * h);
    }
    net.set_flat_params(theta);
    return grad;
}

bool grads_match(const Vec& analytic, const Vec& fd, double tol = 1e-5) {
    REQUIRE(analytic.size() == fd.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(fd[i])});
        if (std::abs(analytic[i] - fd[i]) > tol * denom) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("gaussian: alpha 0 keeps the conditional mean at the state") {
    Rng rng(2);
    GaussianOperator op(0.0, random_net(2, rng), random_net(2, rng));
    const Vec s{0.7, -1.1};
    const auto m = op.conditional_moments(s, 1.0, -1);
    CHECK(m.mean[0] == s[0]);
    CHECK(m.mean[1] == s[1]);
}

TEST_CASE("bernoulli: zero logits give probability 1/2 at any temperature") {
    BernoulliOperator op(1.0, constant_net(3, Vec(3, 0.0)));
    for (double t : {1.0, 2.0, 64.0, 1e6}) {
        const Vec rho = op.probabilities(Vec{0.0, 1.0, 1.0}, t, -1);
        for (double r : rho) CHECK(r == 0.5);
    }
}

TEST_CASE("gaussian: empirical variance scales linearly with temperature") {
    Rng rng(17);
    GaussianOperator op(0.5, random_net(1, rng), random_net(1, rng));
    const Vec s{0.3};
    const int n = 100000;
    auto empirical_var = [&](double temp, Rng& r) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const Vec x = op.sample_step(s, temp, -1, r);
            sum += x[0];
            sq += x[0] * x[0];
        }
        const double mean = sum / n;
        return sq / n - mean * mean;
    };
    Rng r1(100), r2(200);
    const double ratio = empirical_var(4.0, r1) / empirical_var(1.0, r2);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("gaussian: stddev scales exactly as sqrt(T) per state") {
    Rng rng(23);
    GaussianOperator op(0.5, random_net(2, rng), random_net(2, rng));
    for (double t : {2.0, 9.0, 100.0}) {
        for (const Vec& s : {Vec{0.0, 0.0}, Vec{1.5, -2.5}}) {
            const auto m1 = op.conditional_moments(s, 1.0, -1);
            const auto mt = op.conditional_moments(s, t, -1);
            for (std::size_t i = 0; i < 2; ++i)
                CHECK(mt.stddev[i] == std::sqrt(t) * m1.stddev[i]);
        }
    }
}

TEST_CASE("gaussian: log density closed form at the standard normal") {
    GaussianOperator op = unit_gaussian_1d();
    CHECK(op.log_density(Vec{0.5}, Vec{0.0}, 1.0, -1) ==
          doctest::Approx(-kHalfLog2Pi).epsilon(1e-14));
}

TEST_CASE("bernoulli: log density of the fair coin pair is log(1/4)") {
    BernoulliOperator op(1.0, constant_net(2, Vec(2, 0.0)));
    for (const Vec& to : {Vec{0.0, 0.0}, Vec{0.0, 1.0}, Vec{1.0, 0.0}, Vec{1.0, 1.0}})
        CHECK(op.log_density(Vec{0.0, 1.0}, to, 1.0, -1) ==
              doctest::Approx(std::log(0.25)).epsilon(1e-14));
}

TEST_CASE("bernoulli: non-binary target is a domain error") {
    BernoulliOperator op(1.0, constant_net(2, Vec(2, 0.0)));
    CHECK_THROWS_AS(op.log_density(Vec{0.0, 1.0}, Vec{0.5, 1.0}, 1.0, -1), DomainError);
}

TEST_CASE("gaussian: density matches a hand-coded normal pdf and integrates to one") {
    Rng rng(31);
    GaussianOperator op(0.5, random_net(2, rng), random_net(2, rng));
    const Vec from{0.4, -0.9};
    const auto m = op.conditional_moments(from, 1.0, -1);

    // pointwise against an independent normal pdf evaluation
    for (const Vec& to : {Vec{0.0, 0.0}, Vec{0.5, -1.0}, Vec{2.0, 3.0}}) {
        double hand = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double z = (to[i] - m.mean[i]) / m.stddev[i];
            hand += -std::log(m.stddev[i] * std::sqrt(2.0 * std::numbers::pi)) - 0.5 * z * z;
        }
        CHECK(std::abs(std::exp(op.log_density(from, to, 1.0, -1)) - std::exp(hand)) < 1e-12);
    }

    // d=1 trapezoid mass over +-10 std
    GaussianOperator op1(0.5, random_net(1, rng), random_net(1, rng));
    const Vec f1{0.2};
    const auto m1 = op1.conditional_moments(f1, 1.0, -1);
    const double lo = m1.mean[0] - 10.0 * m1.stddev[0], hi = m1.mean[0] + 10.0 * m1.stddev[0];
    const int steps = 20000;
    double mass = 0.0;
    double prev = std::exp(op1.log_density(f1, Vec{lo}, 1.0, -1));
    for (int i = 1; i <= steps; ++i) {
        const double x = lo + (hi - lo) * i / steps;
        const double cur = std::exp(op1.log_density(f1, Vec{x}, 1.0, -1));
        mass += 0.5 * (prev + cur) * (hi - lo) / steps;
        prev = cur;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bernoulli: exhaustive normalization up to d = 10") {
    Rng rng(37);
    for (std::size_t d : {2u, 3u, 10u}) {
        BernoulliOperator op(0.7, random_net(d, rng));
        Vec from(d);
        for (double& x : from) x = rng.uniform() < 0.5 ? 0.0 : 1.0;
        double total = 0.0;
        for (std::size_t mask = 0; mask < (1u << d); ++mask) {
            Vec to(d);
            for (std::size_t i = 0; i < d; ++i) to[i] = (mask >> i) & 1 ? 1.0 : 0.0;
            total += std::exp(op.log_density(from, to, 1.7, -1));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("bernoulli: |rho - 1/2| is non-increasing in temperature") {
    Rng rng(41);
    BernoulliOperator op(0.6, random_net(4, rng));
    const Vec s{1.0, 0.0, 1.0, 0.0};
    Vec prev = op.probabilities(s, 1.0, -1);
    for (double t : {1.5, 2.0, 4.0, 16.0, 256.0}) {
        const Vec rho = op.probabilities(s, t, -1);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            CHECK(std::abs(rho[i] - 0.5) <= std::abs(prev[i] - 0.5) + 1e-15);
        }
        prev = rho;
    }
}

TEST_CASE("operators: log-density gradients match finite differences") {
    Rng rng(43);
    for (int rep = 0; rep < 5; ++rep) {
        GaussianOperator g(0.5, random_net(2, rng, 3), random_net(2, rng, 3));
        Vec from{rng.normal(), rng.normal()};
        Vec to{rng.normal(), rng.normal()};
        const double temp = 1.0 + 3.0 * rng.uniform();
        const int step = rep % 3;
        g.zero_grad();
        g.accumulate_log_density_grad(from, to, temp, step, 1.0);
        CHECK(grads_match(g.mu_net().flat_grads(),
                          fd_logdensity_grad(g, g.mu_net(), from, to, temp, step)));
        CHECK(grads_match(g.sigma_net().flat_grads(),
                          fd_logdensity_grad(g, g.sigma_net(), from, to, temp, step)));

        BernoulliOperator b(0.5, random_net(3, rng, 3));
        Vec bfrom{1.0, 0.0, 1.0};
        Vec bto{0.0, 0.0, 1.0};
        b.zero_grad();
        b.accumulate_log_density_grad(bfrom, bto, temp, step, 1.0);
        CHECK(grads_match(b.rho_net().flat_grads(),
                          fd_logdensity_grad(b, b.rho_net(), bfrom, bto, temp, step)));
    }
}

TEST_CASE("gaussian: alpha 1 score function lands in the mu-net bias gradient") {
    const double sbias = std::log(std::numbers::e - 1.0);  // std = 1
    GaussianOperator op(1.0, constant_net(2, Vec{0.1, -0.2}), constant_net(2, Vec(2, sbias)));
    const Vec from{0.0, 0.0};
    const Vec to{0.5, 0.3};
    op.zero_grad();
    op.accumulate_log_density_grad(from, to, 1.0, -1, 1.0);
    // bias gradient of a linear net equals the output gradient: (to - mu)/std^2
    const Vec grads = op.mu_net().flat_grads();
    CHECK(grads[4] == doctest::Approx(0.5 - 0.1).epsilon(1e-12));
    CHECK(grads[5] == doctest::Approx(0.3 + 0.2).epsilon(1e-12));
}

TEST_CASE("gaussian: zero mu gradient at the conditional mode") {
    Rng rng(47);
    GaussianOperator op(0.5, random_net(2, rng), random_net(2, rng));
    const Vec from{0.6, -0.4};
    const Vec to = op.conditional_moments(from, 2.0, -1).mean;
    op.zero_grad();
    op.accumulate_log_density_grad(from, to, 2.0, -1, 1.0);
    for (double g : op.mu_net().flat_grads()) CHECK(g == 0.0);
}

TEST_CASE("prior: standard normal log density and moment updates") {
    PriorMoments p = make_prior(1);
    CHECK(prior_log_density(p, Vec{0.0}) == doctest::Approx(-kHalfLog2Pi).epsilon(1e-14));

    // CLT bound on the sample mean of 1e5 draws
    Rng rng(53);
    PriorMoments p2{Vec{1.5, -2.0}, Vec{4.0, 0.25}, 0.5};
    const int n = 100000;
    Vec mean(2, 0.0);
    for (int i = 0; i < n; ++i) {
        const Vec s = prior_sample(p2, rng);
        mean[0] += s[0];
        mean[1] += s[1];
    }
    for (std::size_t i = 0; i < 2; ++i) {
        mean[i] /= n;
        CHECK(std::abs(mean[i] - p2.mean[i]) < 3.0 * std::sqrt(p2.var[i] / n));
    }
}

TEST_CASE("prior: update rates 0, 1 and the half-rate recursion") {
    const std::vector<Vec> batch{Vec{1.0}, Vec{3.0}};  // mean 2, pop var 1

    PriorMoments rate0{Vec{0.0}, Vec{1.0}, 0.0};
    update_prior(rate0, batch);
    CHECK(rate0.mean[0] == 0.0);
    CHECK(rate0.var[0] == 1.0);

    PriorMoments rate1{Vec{0.0}, Vec{9.0}, 1.0};
    update_prior(rate1, batch);
    CHECK(rate1.mean[0] == 2.0);
    CHECK(rate1.var[0] == 1.0);

    // rate 0.5 applied twice: independent scalar EMA recursion
    PriorMoments half{Vec{0.0}, Vec{5.0}, 0.5};
    double m_ref = 0.0, v_ref = 5.0;
    for (int i = 0; i < 2; ++i) {
        update_prior(half, batch);
        m_ref = 0.5 * m_ref + 0.5 * 2.0;
        v_ref = 0.5 * v_ref + 0.5 * 1.0;
        CHECK(half.mean[0] == doctest::Approx(m_ref).epsilon(1e-15));
        CHECK(half.var[0] == doctest::Approx(v_ref).epsilon(1e-15));
    }
    // three quarters of the way to the batch moments
    CHECK(half.mean[0] == doctest::Approx(1.5).epsilon(1e-15));

    PriorMoments floored{Vec{0.0}, Vec{1.0}, 1.0};
    update_prior(floored, {Vec{2.0}});  // single point: batch variance 0
    CHECK(floored.var[0] == 1e-8);

    CHECK_THROWS_AS(update_prior(floored, {}), DomainError);
}

TEST_CASE("operators: non-finite network output raises an operator error") {
    Rng rng(61);
    GaussianOperator op(1.0, constant_net(1, Vec{0.0}), constant_net(1, Vec{0.0}));
    op.mu_net().layers_mut()[0].b[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(op.sample_step(Vec{0.0}, 1.0, -1, rng), OperatorError);

    BernoulliOperator bop(1.0, constant_net(1, Vec{0.0}));
    bop.rho_net().layers_mut()[0].b[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bop.probabilities(Vec{0.0}, 1.0, -1), OperatorError);
}

TEST_CASE("operators: checkpoint round-trip preserves behaviour") {
    Rng rng(59);
    GaussianOperator op(0.3, random_net(2, rng, 4), random_net(2, rng, 4), 1e-4, 0.02, 0.2);
    op.prior().mean = Vec{0.5, -0.5};
    op.prior().var = Vec{2.0, 0.5};
    auto back = operator_from_json(nlohmann::json::parse(op.to_json().dump()));
    const Vec from{0.1, 0.9};
    const Vec to{-0.3, 0.4};
    CHECK(back->log_density(from, to, 2.0, 1) == op.log_density(from, to, 2.0, 1));
    CHECK(back->prior_logp(from) == op.prior_logp(from));
    CHECK(back->nominal_unit_variance() == 0.02);
}
