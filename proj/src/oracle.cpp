#include "walkback/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace walkback::oracle {

namespace {

constexpr double kTinyProb = 1e-300;

Vec uniform_dist(std::size_t n) { return Vec(n, 1.0 / static_cast<double>(n)); }

void validate_dist(const Vec& d, const char* what) {
    double s = 0.0;
    for (double x : d) {
        if (x < 0.0) throw ConfigError(std::string(what) + ": negative probability");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw ConfigError(std::string(what) + ": not normalized (sum " + std::to_string(s) + ")");
}

void check_states(std::size_t n) {
    if (n == 0) throw ConfigError("chain: no states");
    if (n > kMaxStates)
        throw ConfigError("chain: " + std::to_string(n) + " states exceeds the cap of " +
                          std::to_string(kMaxStates));
}

// Visits every path (s_1..s_K); prefix-zero q-probabilities are pruned.
// fn(path, q_prob) where q_prob = prod_t P_{T_t}[s_{t-1}][s_t] from s0.
void for_each_heated_path(const std::vector<Mat>& mats, std::size_t s0,
                          const std::function<void(const std::vector<std::size_t>&, double)>& fn) {
    const std::size_t k = mats.size();
    const std::size_t n = k == 0 ? 1 : mats.front().rows;
    double total = 1.0;
    for (std::size_t t = 0; t < k; ++t) total *= static_cast<double>(n);
    if (total > static_cast<double>(kMaxPaths))
        throw ConfigError("path enumeration: state^steps exceeds the enumeration cap");

    std::vector<std::size_t> path(k);
    std::function<void(std::size_t, std::size_t, double)> rec =
        [&](std::size_t t, std::size_t prev, double q) {
            if (t == k) {
                fn(path, q);
                return;
            }
            for (std::size_t s = 0; s < n; ++s) {
                const double step = mats[t](prev, s);
                if (step == 0.0) continue;
                path[t] = s;
                rec(t + 1, s, q * step);
            }
        };
    rec(0, s0, 1.0);
}

std::vector<Mat> schedule_matrices(const DiscreteChain& chain,
                                   const TemperatureSchedule& heating) {
    std::vector<Mat> mats;
    mats.reserve(heating.steps());
    for (double t : heating.temps) mats.push_back(chain.at(t));
    return mats;
}

}  // namespace

Mat DiscreteChain::at(double temperature) const {
    Mat p = transition(temperature);
    if (p.rows != n_states || p.cols != n_states)
        throw ConfigError("chain: transition matrix shape mismatch");
    validate_stochastic(p);
    return p;
}

void validate_stochastic(const Mat& p, double tol) {
    if (p.rows != p.cols) throw ConfigError("stochastic matrix must be square");
    for (std::size_t r = 0; r < p.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < p.cols; ++c) {
            if (p(r, c) < 0.0) throw ConfigError("stochastic matrix: negative entry");
            s += p(r, c);
        }
        if (std::abs(s - 1.0) > tol)
            throw ConfigError("stochastic matrix: row " + std::to_string(r) +
                              " sums to " + std::to_string(s));
    }
}

DiscreteChain chain_from_matrix(Mat p, Vec data_dist, Vec prior) {
    check_states(p.rows);
    validate_stochastic(p);
    DiscreteChain c;
    c.n_states = p.rows;
    c.data_dist = data_dist.empty() ? uniform_dist(c.n_states) : std::move(data_dist);
    c.prior = prior.empty() ? uniform_dist(c.n_states) : std::move(prior);
    validate_dist(c.data_dist, "data_dist");
    validate_dist(c.prior, "prior");
    check_dim(c.data_dist.size(), c.n_states, "data_dist");
    check_dim(c.prior.size(), c.n_states, "prior");
    c.transition = [m = std::move(p)](double) { return m; };
    return c;
}

DiscreteChain chain_from_blocks(std::vector<std::pair<double, Mat>> blocks, Vec data_dist,
                                Vec prior) {
    if (blocks.empty()) throw ConfigError("chain: needs at least one temperature block");
    const std::size_t n = blocks.front().second.rows;
    check_states(n);
    for (auto& [t, m] : blocks) {
        if (!(t > 0.0)) throw ConfigError("chain: non-positive block temperature");
        if (m.rows != n || m.cols != n) throw ConfigError("chain: block shape mismatch");
        validate_stochastic(m);
    }
    DiscreteChain c;
    c.n_states = n;
    c.data_dist = data_dist.empty() ? uniform_dist(n) : std::move(data_dist);
    c.prior = prior.empty() ? uniform_dist(n) : std::move(prior);
    validate_dist(c.data_dist, "data_dist");
    validate_dist(c.prior, "prior");
    check_dim(c.data_dist.size(), n, "data_dist");
    check_dim(c.prior.size(), n, "prior");
    c.transition = [bs = std::move(blocks)](double t) -> Mat {
        if (bs.size() == 1) return bs.front().second;
        for (const auto& [bt, m] : bs)
            if (std::abs(bt - t) <= 1e-9 * std::max(1.0, std::abs(bt))) return m;
        throw ConfigError("chain: no block for temperature " + std::to_string(t));
    };
    return c;
}

Vec boltzmann(const Vec& energy, double temperature) {
    if (!(temperature > 0.0)) throw DomainError("boltzmann: temperature must be positive");
    Vec pi(energy.size());
    const double emin = *std::min_element(energy.begin(), energy.end());
    double z = 0.0;
    for (std::size_t i = 0; i < energy.size(); ++i) {
        pi[i] = std::exp(-(energy[i] - emin) / temperature);
        z += pi[i];
    }
    for (double& x : pi) x /= z;
    return pi;
}

Mat metropolis_matrix(const Vec& energy, double temperature) {
    if (!(temperature > 0.0)) throw DomainError("metropolis: temperature must be positive");
    const std::size_t n = energy.size();
    check_states(n);
    Mat p(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double stay = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double acc = std::min(1.0, std::exp(-(energy[j] - energy[i]) / temperature));
            p(i, j) = acc / static_cast<double>(n);
            stay += p(i, j);
        }
        p(i, i) = 1.0 - stay;
    }
    return p;
}

DiscreteChain chain_from_energy(Vec energy, Vec data_dist, Vec prior) {
    check_states(energy.size());
    const std::size_t n = energy.size();
    DiscreteChain c;
    c.n_states = n;
    c.data_dist = data_dist.empty() ? boltzmann(energy, 1.0) : std::move(data_dist);
    c.prior = prior.empty() ? uniform_dist(n) : std::move(prior);
    validate_dist(c.data_dist, "data_dist");
    validate_dist(c.prior, "prior");
    c.transition = [e = std::move(energy)](double t) { return metropolis_matrix(e, t); };
    return c;
}

Vec exact_marginal(const DiscreteChain& chain, const TemperatureSchedule& heating) {
    Vec marginal = chain.prior;
    // Cooling applies the operator at T_K first, then T_{K-1}, .., T_1.
    for (std::size_t t = heating.steps(); t-- > 0;) {
        const Mat p = chain.at(heating.temps[t]);
        Vec next(chain.n_states, 0.0);
        for (std::size_t i = 0; i < chain.n_states; ++i)
            for (std::size_t j = 0; j < chain.n_states; ++j) next[j] += marginal[i] * p(i, j);
        marginal = std::move(next);
    }
    return marginal;
}

Decomposition exact_decomposition(const DiscreteChain& chain,
                                  const TemperatureSchedule& heating, std::size_t s0) {
    if (s0 >= chain.n_states) throw DomainError("exact_decomposition: s0 out of range");
    const std::vector<Mat> mats = schedule_matrices(chain, heating);
    const Vec marginal = exact_marginal(chain, heating);
    if (!(marginal[s0] > 0.0))
        throw DomainError("exact_decomposition: s0 has zero marginal probability");

    Decomposition d;
    d.log_marginal = std::log(marginal[s0]);
    double elbo = 0.0;
    double kl = 0.0;
    const std::size_t k = mats.size();
    for_each_heated_path(mats, s0, [&](const std::vector<std::size_t>& path, double q) {
        // p(s0, path) = prior(s_K) * prod_t P_{T_t}(s_{t-1} | s_t)
        double p_joint = chain.prior[k == 0 ? s0 : path.back()];
        std::size_t prev = s0;
        for (std::size_t t = 0; t < k; ++t) {
            p_joint *= mats[t](path[t], prev);
            prev = path[t];
        }
        const double p_post = p_joint / marginal[s0];
        elbo += q * std::log(std::max(p_joint, kTinyProb) / q);
        kl += q * std::log(q / std::max(p_post, kTinyProb));
    });
    d.elbo = elbo;
    d.kl_posterior = kl;
    if (std::abs(d.log_marginal - (d.elbo + d.kl_posterior)) > 1e-10)
        throw DomainError("exact_decomposition: identity violated (zero-mass reverse path?)");
    return d;
}

bool is_irreducible(const Mat& p) {
    const std::size_t n = p.rows;
    // strong connectivity: forward and backward reachability from state 0
    auto reach = [&](bool transpose) {
        std::vector<bool> seen(n, false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < n; ++j) {
                const double w = transpose ? p(j, i) : p(i, j);
                if (w > kTinyProb && !seen[j]) {
                    seen[j] = true;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };
    return reach(false) && reach(true);
}

Vec stationary_distribution(const Mat& p) {
    validate_stochastic(p);
    if (!is_irreducible(p)) throw DomainError("stationary_distribution: reducible chain");
    const std::size_t n = p.rows;
    Vec pi(n, 1.0 / static_cast<double>(n));
    // Damped iteration pi <- (pi P + pi) / 2 removes periodicity while
    // keeping the fixed point.
    Vec next(n);
    for (int iter = 0; iter < 500000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * p(i, j);
        double resid = 0.0, norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            next[j] = 0.5 * (next[j] + pi[j]);
            norm += next[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
            next[j] /= norm;
            resid += std::abs(next[j] - pi[j]);
        }
        pi.swap(next);
        if (resid < 1e-15) break;
    }
    // Polish and verify pi P = pi.
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * p(i, j);
    double resid = 0.0;
    for (std::size_t j = 0; j < n; ++j) resid += std::abs(next[j] - pi[j]);
    if (resid > 1e-13)
        throw DomainError("stationary_distribution: power iteration did not converge");
    return pi;
}

TimeReversal time_reversal(const Mat& p) {
    TimeReversal tr;
    tr.pi = stationary_distribution(p);
    const std::size_t n = p.rows;
    tr.reversed = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) tr.reversed(i, j) = p(j, i) * tr.pi[j] / tr.pi[i];
    return tr;
}

bool detailed_balance(const Mat& p, const Vec& pi, double tol) {
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t j = 0; j < p.cols; ++j)
            if (std::abs(pi[i] * p(i, j) - pi[j] * p(j, i)) > tol) return false;
    return true;
}

KlSplit kl_split(const DiscreteChain& chain, const TemperatureSchedule& heating,
                 std::size_t s0) {
    if (s0 >= chain.n_states) throw DomainError("kl_split: s0 out of range");
    const std::vector<Mat> mats = schedule_matrices(chain, heating);
    const std::size_t k = mats.size();
    const std::size_t n = chain.n_states;
    const Vec marginal = exact_marginal(chain, heating);
    if (!(marginal[s0] > 0.0)) throw DomainError("kl_split: s0 has zero marginal probability");

    // Every term is an expectation of a function of (s_{t-1}, s_t) under the
    // heated process, so the exact values follow from the forward marginal
    // recursion; no path enumeration is needed and long schedules stay
    // tractable. The sum is cross-checked against the enumerated
    // kl_posterior elsewhere.
    KlSplit out;
    out.annealing = std::log(marginal[s0]);
    Vec q(n, 0.0);
    q[s0] = 1.0;
    for (std::size_t t = 0; t < k; ++t) {
        const TimeReversal tr = time_reversal(mats[t]);
        Vec q_next(n, 0.0);
        for (std::size_t a = 0; a < n; ++a) {
            if (q[a] == 0.0) continue;
            out.annealing -= q[a] * std::log(tr.pi[a]);
            for (std::size_t b = 0; b < n; ++b) {
                const double w = q[a] * mats[t](a, b);
                if (w == 0.0) continue;
                q_next[b] += w;
                out.irreversibility +=
                    w * (std::log(mats[t](a, b)) -
                         std::log(std::max(tr.reversed(a, b), kTinyProb)));
            }
        }
        for (std::size_t b = 0; b < n; ++b)
            if (q_next[b] > 0.0) out.annealing += q_next[b] * std::log(tr.pi[b]);
        q = std::move(q_next);
    }
    for (std::size_t s = 0; s < n; ++s)
        if (q[s] > 0.0)
            out.annealing -= q[s] * std::log(std::max(chain.prior[s], kTinyProb));
    return out;
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
    check_dim(b.size(), a.size(), "tv_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

double stationarity_check(const Mat& p, std::span<const double> dist) {
    check_dim(dist.size(), p.rows, "stationarity_check");
    Vec next(p.cols, 0.0);
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t j = 0; j < p.cols; ++j) next[j] += dist[i] * p(i, j);
    return tv_distance(next, dist);
}

// ---------------------------------------------------------------------------
// DiscreteMatrixOperator

DiscreteMatrixOperator::DiscreteMatrixOperator(DiscreteChain chain) : chain_(std::move(chain)) {
    if (chain_.n_states == 0) throw ConfigError("discrete operator: empty chain");
}

std::size_t DiscreteMatrixOperator::state_index(std::span<const double> state,
                                                std::size_t n_states) {
    check_dim(state.size(), 1, "discrete state");
    const double v = state[0];
    const auto idx = static_cast<std::size_t>(std::llround(v));
    if (!(std::abs(v - static_cast<double>(idx)) < 1e-9) || idx >= n_states)
        throw DomainError("discrete state out of range");
    return idx;
}

Vec DiscreteMatrixOperator::sample_step(std::span<const double> state, double temperature,
                                        int, Rng& rng) const {
    const std::size_t i = state_index(state, chain_.n_states);
    const Mat p = chain_.at(temperature);
    const std::size_t j = rng.categorical(p.row_span(i));
    return Vec{static_cast<double>(j)};
}

double DiscreteMatrixOperator::log_density(std::span<const double> from,
                                           std::span<const double> to, double temperature,
                                           int) const {
    const std::size_t i = state_index(from, chain_.n_states);
    const std::size_t j = state_index(to, chain_.n_states);
    const Mat p = chain_.at(temperature);
    return std::log(std::max(p(i, j), 1e-12));
}

void DiscreteMatrixOperator::accumulate_log_density_grad(std::span<const double>,
                                                         std::span<const double>, double, int,
                                                         double) {
    throw UsageError("discrete matrix operator has no trainable parameters");
}

void DiscreteMatrixOperator::apply_gradient_step(const OptimizerConfig&) {
    throw UsageError("discrete matrix operator has no trainable parameters");
}

double DiscreteMatrixOperator::prior_logp(std::span<const double> state) const {
    const std::size_t i = state_index(state, chain_.n_states);
    return std::log(std::max(chain_.prior[i], 1e-12));
}

Vec DiscreteMatrixOperator::draw_prior(Rng& rng) const {
    return Vec{static_cast<double>(rng.categorical(chain_.prior))};
}

std::unique_ptr<TransitionOperator> DiscreteMatrixOperator::clone() const {
    return std::make_unique<DiscreteMatrixOperator>(*this);
}

nlohmann::json DiscreteMatrixOperator::to_json() const {
    throw UsageError("discrete matrix operator is not checkpointable");
}

// ---------------------------------------------------------------------------
// Chain file format

DiscreteChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open chain file '" + path + "'");

    std::vector<std::pair<double, Mat>> blocks;
    Vec data_dist, prior;
    std::vector<Vec> rows;
    double block_temp = 0.0;
    bool in_block = false;
    std::size_t lineno = 0;

    auto flush_block = [&]() {
        if (!in_block) return;
        if (rows.empty())
            throw ParseError(path + ": temperature block without matrix rows");
        const std::size_t n = rows.size();
        Mat m(n, n);
        for (std::size_t r = 0; r < n; ++r) {
            if (rows[r].size() != n)
                throw ParseError(path + ": matrix is not square in block T=" +
                                 std::to_string(block_temp));
            double sum = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                if (rows[r][c] < 0.0)
                    throw ParseError(path + ": negative probability in block T=" +
                                     std::to_string(block_temp));
                sum += rows[r][c];
            }
            // text files carry limited precision; snap near-stochastic rows
            if (std::abs(sum - 1.0) > 1e-9)
                throw ParseError(path + ": row " + std::to_string(r) + " in block T=" +
                                 std::to_string(block_temp) + " sums to " +
                                 std::to_string(sum));
            for (std::size_t c = 0; c < n; ++c) m(r, c) = rows[r][c] / sum;
        }
        blocks.emplace_back(block_temp, std::move(m));
        rows.clear();
        in_block = false;
    };

    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        auto read_vec = [&](Vec& out) {
            out.clear();
            double x;
            while (ls >> x) out.push_back(x);
            if (out.empty())
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected numbers");
        };
        if (head == "data") {
            read_vec(data_dist);
        } else if (head == "prior") {
            read_vec(prior);
        } else if (head == "T") {
            flush_block();
            if (!(ls >> block_temp) || !(block_temp > 0.0))
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": expected positive temperature after 'T'");
            in_block = true;
        } else {
            if (!in_block)
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": matrix row outside a temperature block");
            Vec row;
            std::istringstream rs(line);
            double x;
            while (rs >> x) row.push_back(x);
            if (row.empty() || !rs.eof())
                throw ParseError(path + ":" + std::to_string(lineno) + ": malformed matrix row");
            rows.push_back(std::move(row));
        }
    }
    flush_block();
    if (blocks.empty()) throw ParseError(path + ": no temperature blocks found");
    try {
        return chain_from_blocks(std::move(blocks), std::move(data_dist), std::move(prior));
    } catch (const ConfigError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace walkback::oracle
