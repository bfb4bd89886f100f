#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "walkback/oracle.hpp"

using namespace walkback;
using namespace walkback::oracle;

namespace {

Mat random_stochastic(std::size_t n, Rng& rng) {
    Mat p(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            p(r, c) = 0.05 + rng.uniform();
            s += p(r, c);
        }
        for (std::size_t c = 0; c < n; ++c) p(r, c) /= s;
    }
    return p;
}

Vec random_dist(std::size_t n, Rng& rng) {
    Vec d(n);
    double s = 0.0;
    for (double& x : d) {
        x = 0.05 + rng.uniform();
        s += x;
    }
    for (double& x : d) x /= s;
    return d;
}

TemperatureSchedule plain_schedule(std::vector<double> temps) {
    TemperatureSchedule s;
    s.temps = std::move(temps);
    s.mode = ScheduleMode::heating;
    return s;
}

}  // namespace

TEST_CASE("oracle: marginal with no steps is the prior") {
    Rng rng(1);
    DiscreteChain c = chain_from_matrix(random_stochastic(3, rng), {}, Vec{0.2, 0.5, 0.3});
    const Vec m = exact_marginal(c, plain_schedule({}));
    CHECK(m == Vec{0.2, 0.5, 0.3});
}

TEST_CASE("oracle: identity transitions leave the prior untouched") {
    Mat eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
    DiscreteChain c = chain_from_matrix(eye, {}, Vec{0.6, 0.3, 0.1});
    const Vec m = exact_marginal(c, plain_schedule({1.0, 1.0, 1.0, 1.0}));
    for (std::size_t i = 0; i < 3; ++i) CHECK(m[i] == doctest::Approx(c.prior[i]).epsilon(1e-15));
}

TEST_CASE("oracle: matrix-product marginal matches exhaustive 3^5 path enumeration") {
    Rng rng(7);
    Mat p = random_stochastic(3, rng);
    DiscreteChain c = chain_from_matrix(p, {}, random_dist(3, rng));
    const TemperatureSchedule sched = plain_schedule({1.0, 1.0, 1.0, 1.0});
    const Vec fast = exact_marginal(c, sched);

    // independent oracle: loop over every (s0, s1, s2, s3, s4)
    Vec slow(3, 0.0);
    for (std::size_t s0 = 0; s0 < 3; ++s0)
        for (std::size_t s1 = 0; s1 < 3; ++s1)
            for (std::size_t s2 = 0; s2 < 3; ++s2)
                for (std::size_t s3 = 0; s3 < 3; ++s3)
                    for (std::size_t s4 = 0; s4 < 3; ++s4)
                        slow[s0] += c.prior[s4] * p(s4, s3) * p(s3, s2) * p(s2, s1) * p(s1, s0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-12);
}

TEST_CASE("oracle: matched chain has zero posterior KL") {
    // Uniform rows and a uniform prior: heated paths are exactly the
    // posterior of the cooled process.
    const std::size_t n = 4;
    Mat p(n, n, 1.0 / n);
    DiscreteChain c = chain_from_matrix(p);
    const Decomposition d = exact_decomposition(c, plain_schedule({1.0, 2.0, 4.0}), 1);
    CHECK(std::abs(d.kl_posterior) < 1e-14);
    CHECK(d.elbo == doctest::Approx(d.log_marginal).epsilon(1e-14));
    CHECK(d.log_marginal == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("oracle: decomposition identity and non-negative KL on random chains") {
    Rng rng(11);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 2 + rng.uniform_int(2);     // 2..3 states
        const std::size_t k = 1 + rng.uniform_int(4);     // 1..4 steps
        DiscreteChain c = chain_from_matrix(random_stochastic(n, rng), random_dist(n, rng),
                                            random_dist(n, rng));
        std::vector<double> temps(k, 1.0);
        const std::size_t s0 = rng.uniform_int(n);
        const Decomposition d = exact_decomposition(c, plain_schedule(temps), s0);
        CHECK(std::abs(d.log_marginal - (d.elbo + d.kl_posterior)) < 1e-10);
        CHECK(d.kl_posterior >= -1e-12);
    }
}

TEST_CASE("oracle: time reversal of a symmetric matrix is itself") {
    Mat p(3, 3);
    p(0, 0) = 0.6; p(0, 1) = 0.3; p(0, 2) = 0.1;
    p(1, 0) = 0.3; p(1, 1) = 0.5; p(1, 2) = 0.2;
    p(2, 0) = 0.1; p(2, 1) = 0.2; p(2, 2) = 0.7;
    const TimeReversal tr = time_reversal(p);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(tr.reversed(i, j) == doctest::Approx(p(i, j)).epsilon(1e-12));
    CHECK(detailed_balance(p, tr.pi));
}

TEST_CASE("oracle: hand-solved two-state reversal") {
    // balance: pi0 * 0.1 = pi1 * 0.5 -> pi = (5/6, 1/6)
    Mat p(2, 2);
    p(0, 0) = 0.9; p(0, 1) = 0.1;
    p(1, 0) = 0.5; p(1, 1) = 0.5;
    const TimeReversal tr = time_reversal(p);
    CHECK(tr.pi[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(tr.pi[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0.0;
        for (std::size_t c2 = 0; c2 < 2; ++c2) s += tr.reversed(r, c2);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(stationarity_check(tr.reversed, tr.pi) < 1e-14);
}

TEST_CASE("oracle: time reversal is an involution on irreducible chains") {
    Rng rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        const Mat p = random_stochastic(4, rng);
        const Mat back = time_reversal(time_reversal(p).reversed).reversed;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(back(i, j) == doctest::Approx(p(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("oracle: reducible chains are rejected") {
    Mat p(2, 2);
    p(0, 0) = 1.0;
    p(1, 1) = 1.0;
    CHECK_THROWS_AS(time_reversal(p), DomainError);
}

TEST_CASE("oracle: kl split vanishing first term on detailed-balance chains") {
    DiscreteChain c = chain_from_energy(Vec{0.0, 1.0, 0.5, 2.0});
    const TemperatureSchedule sched = plain_schedule({1.0, 1.0, 2.0, 4.0});
    for (std::size_t s0 = 0; s0 < 4; ++s0) {
        const KlSplit ks = kl_split(c, sched, s0);
        CHECK(std::abs(ks.irreversibility) < 1e-12);
    }
}

TEST_CASE("oracle: kl split terms add up to the posterior KL") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rng.uniform_int(3);
        DiscreteChain c = chain_from_matrix(random_stochastic(n, rng), random_dist(n, rng),
                                            random_dist(n, rng));
        const TemperatureSchedule sched = plain_schedule(Vec(1 + rng.uniform_int(4), 1.0));
        const std::size_t s0 = rng.uniform_int(n);
        const Decomposition d = exact_decomposition(c, sched, s0);
        const KlSplit ks = kl_split(c, sched, s0);
        CHECK(std::abs(ks.irreversibility + ks.annealing - d.kl_posterior) < 1e-10);
    }
}

TEST_CASE("oracle: annealing term falls monotonically with schedule resolution") {
    // Fixed reversible family, matched prior pi_{T_K}; doubling the number
    // of geometric annealing steps approaches the quasistatic limit.
    const Vec energy{0.0, 1.2, 0.4, 2.1};
    const double tmax = 16.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k : {2u, 4u, 8u, 16u, 32u}) {
        // geometric ladder with a fixed envelope: T_1 = 1, T_K = tmax
        std::vector<double> temps(k);
        for (std::size_t t = 0; t < k; ++t)
            temps[t] = std::pow(tmax, static_cast<double>(t) / static_cast<double>(k - 1));
        DiscreteChain c = chain_from_energy(energy, {}, boltzmann(energy, temps.back()));
        const KlSplit ks = kl_split(c, plain_schedule(temps), 0);
        CHECK(std::abs(ks.irreversibility) < 1e-12);
        CHECK(ks.annealing < prev);
        prev = ks.annealing;
    }
    CHECK(prev >= 0.0);
}

TEST_CASE("oracle: stationarity residuals") {
    Rng rng(19);
    const Mat p = random_stochastic(5, rng);
    const Vec pi = stationary_distribution(p);
    CHECK(stationarity_check(p, pi) < 1e-12);

    // uniform distribution under a doubly stochastic matrix
    Mat ds(3, 3);
    ds(0, 0) = 0.5; ds(0, 1) = 0.2; ds(0, 2) = 0.3;
    ds(1, 0) = 0.3; ds(1, 1) = 0.5; ds(1, 2) = 0.2;
    ds(2, 0) = 0.2; ds(2, 1) = 0.3; ds(2, 2) = 0.5;
    CHECK(stationarity_check(ds, Vec(3, 1.0 / 3.0)) < 1e-15);
}

TEST_CASE("oracle: state cap is enforced loudly") {
    Rng rng(23);
    CHECK_THROWS_AS(chain_from_matrix(random_stochastic(65, rng)), ConfigError);
}

TEST_CASE("oracle: discrete adapter exposes the chain through the operator interface") {
    Rng rng(29);
    Mat p(2, 2);
    p(0, 0) = 0.9; p(0, 1) = 0.1;
    p(1, 0) = 0.5; p(1, 1) = 0.5;
    DiscreteMatrixOperator op(chain_from_matrix(p, {}, Vec{0.75, 0.25}));

    CHECK(op.log_density(Vec{0.0}, Vec{1.0}, 1.0, -1) == doctest::Approx(std::log(0.1)));
    CHECK(op.prior_logp(Vec{1.0}) == doctest::Approx(std::log(0.25)));
    CHECK_THROWS_AS(op.log_density(Vec{3.0}, Vec{0.0}, 1.0, -1), DomainError);
    CHECK_THROWS_AS(
        op.accumulate_log_density_grad(Vec{0.0}, Vec{1.0}, 1.0, -1, 1.0), UsageError);

    int ones = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) ones += op.sample_step(Vec{0.0}, 1.0, -1, rng)[0] == 1.0;
    // binomial 3 sigma around 0.1
    CHECK(std::abs(ones / static_cast<double>(n) - 0.1) < 3.0 * std::sqrt(0.1 * 0.9 / n));
}

TEST_CASE("oracle: chain file round trip and parse errors") {
    const std::string good = "/tmp/wb_chain_good.txt";
    {
        std::ofstream f(good);
        f << "# two-state example\n";
        f << "data 0.6 0.4\n";
        f << "prior 0.5 0.5\n";
        f << "T 1\n0.9 0.1\n0.5 0.5\n";
        f << "T 2\n0.8 0.2\n0.6 0.4\n";
    }
    const DiscreteChain c = load_chain(good);
    CHECK(c.n_states == 2);
    CHECK(c.data_dist == Vec{0.6, 0.4});
    CHECK(c.at(2.0)(1, 0) == 0.6);
    CHECK_THROWS_AS(c.at(3.0), ConfigError);  // no block for T=3

    const std::string bad1 = "/tmp/wb_chain_bad1.txt";
    {
        std::ofstream f(bad1);
        f << "0.5 0.5\n";  // row outside a block
    }
    CHECK_THROWS_AS(load_chain(bad1), ParseError);

    const std::string bad2 = "/tmp/wb_chain_bad2.txt";
    {
        std::ofstream f(bad2);
        f << "T 1\n0.9 0.1 0.3\n0.5 0.5\n";  // not square
    }
    CHECK_THROWS_AS(load_chain(bad2), ParseError);

    CHECK_THROWS_AS(load_chain("/tmp/wb_chain_missing.txt"), ParseError);
}
