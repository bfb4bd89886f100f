#include "walkback/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "walkback/data.hpp"
#include "walkback/estimators.hpp"
#include "walkback/oracle.hpp"
#include "walkback/training.hpp"
#include "walkback/util.hpp"

namespace walkback {

namespace {

using nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ParseError("cannot open '" + tmp + "' for writing");
        out << content;
        if (!out) throw ParseError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::string& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t resolve_seed(std::uint64_t flag_seed) {
    if (const char* env = std::getenv("WALKBACK_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("WALKBACK_SEED is not an integer");
        }
    }
    return flag_seed;
}

json scaler_to_json(const Scaler& s) { return {{"mean", s.mean}, {"std", s.std}}; }

Scaler scaler_from_json(const json& j) {
    return Scaler{j.at("mean").get<Vec>(), j.at("std").get<Vec>()};
}

// ---------------------------------------------------------------------------
// Checkpoint container

struct Checkpoint {
    std::unique_ptr<TransitionOperator> op;
    Scaler scaler;
    double tmax = 1.0;
    std::size_t n1 = 0;
    ScheduleRule rule = ScheduleRule::doubling;
    bool binary_data = false;
    std::string rng_state;
};

json checkpoint_to_json(const TransitionOperator& op, const Scaler& scaler, double tmax,
                        std::size_t n1, ScheduleRule rule, bool binary_data,
                        const std::string& rng_state) {
    return {{"format_version", 1},
            {"operator", op.to_json()},
            {"scaler", scaler_to_json(scaler)},
            {"schedule", {{"tmax", tmax}, {"n1", n1}, {"rule", rule_name(rule)}}},
            {"binary_data", binary_data},
            {"rng", rng_state}};
}

Checkpoint load_checkpoint(const std::string& path) {
    const json j = load_json(path);
    if (j.value("format_version", 0) != 1)
        throw ParseError(path + ": unsupported checkpoint format version");
    Checkpoint c;
    c.op = operator_from_json(j.at("operator"));
    c.scaler = scaler_from_json(j.at("scaler"));
    c.tmax = j.at("schedule").at("tmax").get<double>();
    c.n1 = j.at("schedule").at("n1").get<std::size_t>();
    c.rule = rule_from_name(j.at("schedule").at("rule").get<std::string>());
    c.binary_data = j.value("binary_data", false);
    c.rng_state = j.value("rng", std::string{});
    return c;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
    std::string dataset = "swiss-roll";
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    double noise = 0.05;
    double radius = 1.0;
    std::string means = "-2;2";
    std::string stds = "0.3;0.3";
    std::string weights = "0.5,0.5";
    std::string out;
    bool header = false;
};

std::vector<Vec> parse_vec_list(const std::string& s) {
    std::vector<Vec> out;
    std::istringstream groups(s);
    std::string group;
    while (std::getline(groups, group, ';')) {
        Vec v;
        std::istringstream cells(group);
        std::string cell;
        while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
        if (v.empty()) throw ConfigError("empty vector in '" + s + "'");
        out.push_back(std::move(v));
    }
    return out;
}

Vec parse_vec(const std::string& s) {
    Vec v;
    std::istringstream cells(s);
    std::string cell;
    while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
    return v;
}

int cmd_gen_data(const GenDataArgs& a) {
    Rng rng(resolve_seed(a.seed));
    Dataset d;
    if (a.dataset == "swiss-roll") {
        d = gen_swiss_roll(a.n, a.noise, rng);
    } else if (a.dataset == "circle") {
        d = gen_circle(a.n, a.radius, a.noise, rng);
    } else if (a.dataset == "gmm") {
        d = gen_gmm(a.n, parse_vec_list(a.means), parse_vec_list(a.stds),
                    parse_vec(a.weights), rng);
    } else {
        throw ConfigError("unknown dataset '" + a.dataset + "'");
    }
    save_csv(d, a.out, a.header);
    std::cout << "wrote " << d.size() << " points to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string out_dir = ".";
    std::string op_kind = "gaussian";
    std::string resume;
    std::uint64_t seed = 0;
    std::size_t steps = 0;  // target max trajectory length; 0 = use n1
    long long n1 = -1;
    double tmax = 0.0;
    std::string rule = "doubling";
    double alpha = 0.5;
    double lr = 1e-3;
    std::string optimizer = "adam";
    std::string update_mode = "online";
    std::size_t epochs = 50;
    std::size_t patience = 10;
    std::size_t batch_size = 32;
    std::size_t hidden = 64;
    std::size_t layers = 2;
    double base_variance = 0.01;
    double sigma_floor = 1e-4;
    double prior_rate = 0.1;
    bool no_step_affine = false;
};

json train_config_json(const TrainArgs& a, std::uint64_t seed, double tmax, std::size_t n1,
                       std::size_t max_steps) {
    return {{"command", "train"},
            {"data", a.data},
            {"operator", a.op_kind},
            {"seed", seed},
            {"n1", n1},
            {"tmax", tmax},
            {"max_steps", max_steps},
            {"rule", a.rule},
            {"alpha", a.alpha},
            {"lr", a.lr},
            {"optimizer", a.optimizer},
            {"update_mode", a.update_mode},
            {"epochs", a.epochs},
            {"patience", a.patience},
            {"batch_size", a.batch_size},
            {"hidden", a.hidden},
            {"layers", a.layers},
            {"base_variance", a.base_variance},
            {"sigma_floor", a.sigma_floor},
            {"prior_rate", a.prior_rate},
            {"per_step_affine", !a.no_step_affine}};
}

int cmd_train(const TrainArgs& a) {
    const std::uint64_t seed = resolve_seed(a.seed);
    Rng rng(seed);

    Dataset d = load_csv(a.data);
    assign_splits(d, rng);
    const bool binary = a.op_kind == "bernoulli";
    if (binary) {
        // Bernoulli data lives on {0,1}; real values are thresholded at 0.5.
        std::size_t adjusted = 0;
        for (Vec& p : d.points)
            for (double& x : p) {
                const double b = x >= 0.5 ? 1.0 : 0.0;
                if (b != x) ++adjusted;
                x = b;
            }
        if (adjusted > 0)
            std::cerr << "note: thresholded " << adjusted
                      << " non-binary values at 0.5 for the bernoulli operator\n";
    } else {
        standardize(d);
    }

    TrainConfig cfg;
    cfg.rule = rule_from_name(a.rule);
    cfg.optimizer.kind = a.optimizer == "sgd" ? OptimizerConfig::Kind::sgd
                                              : OptimizerConfig::Kind::adam;
    if (a.optimizer != "sgd" && a.optimizer != "adam")
        throw ConfigError("unknown optimizer '" + a.optimizer + "'");
    cfg.optimizer.learning_rate = a.lr;
    cfg.batch_size = a.batch_size;
    cfg.max_epochs = a.epochs;
    cfg.patience = a.patience;
    cfg.seed = seed;
    cfg.update_mode = update_mode_from_name(a.update_mode);
    cfg.tmax_override = a.tmax;

    // Resolve tmax before sizing the per-step affine table.
    double sigma2 = binary ? 0.25 : a.base_variance;
    const double sigma2_max = total_variance(d.split_points(d.train_idx));
    const double tmax =
        a.tmax > 0.0 ? a.tmax : tmax_from_variance(sigma2_max, sigma2);
    cfg.tmax_override = tmax;
    const std::size_t heated = heated_steps(tmax, cfg.rule);
    if (a.n1 >= 0) {
        cfg.n1 = static_cast<std::size_t>(a.n1);
    } else if (a.steps > 0) {
        if (a.steps < heated)
            throw ConfigError("--steps " + std::to_string(a.steps) + " is below the " +
                              std::to_string(heated) + " heated steps needed to reach tmax");
        cfg.n1 = a.steps - heated;
    }
    const std::size_t max_steps = heated + cfg.n1;

    std::unique_ptr<TransitionOperator> op;
    if (!a.resume.empty()) {
        Checkpoint ck = load_checkpoint(a.resume);
        op = std::move(ck.op);
        cfg.rng_state = ck.rng_state;
        if (op->dim() != d.dim) throw ConfigError("resume checkpoint dimension mismatch");
    } else {
        const std::size_t affine_rows = a.no_step_affine ? 0 : max_steps;
        std::vector<std::size_t> sizes{d.dim};
        for (std::size_t l = 0; l < a.layers; ++l) sizes.push_back(a.hidden);
        sizes.push_back(d.dim);
        if (a.op_kind == "gaussian") {
            ParamNet mu = ParamNet::mlp(sizes, Activation::tanh, Activation::identity,
                                        affine_rows, rng);
            ParamNet sg = ParamNet::mlp(sizes, Activation::tanh, Activation::identity,
                                        affine_rows, rng);
            op = std::make_unique<GaussianOperator>(a.alpha, std::move(mu), std::move(sg),
                                                    a.sigma_floor, a.base_variance,
                                                    a.prior_rate);
        } else if (binary) {
            ParamNet rho = ParamNet::mlp(sizes, Activation::tanh, Activation::identity,
                                         affine_rows, rng);
            op = std::make_unique<BernoulliOperator>(a.alpha, std::move(rho), a.prior_rate);
        } else {
            throw ConfigError("unknown operator '" + a.op_kind + "'");
        }
    }

    std::filesystem::create_directories(a.out_dir);
    const std::string ckpt_path = a.out_dir + "/checkpoint.json";
    const std::string log_path = a.out_dir + "/train_log.csv";
    const std::string config_path = a.out_dir + "/config.json";
    write_json_atomic(config_path, train_config_json(a, seed, tmax, cfg.n1, max_steps));

    std::vector<EpochRow> rows;
    const TrainResult res =
        train(*op, d, cfg, [&](const EpochRow& row, bool improved, const std::string& state) {
            rows.push_back(row);
            write_train_log(log_path, rows);
            if (improved)
                write_json_atomic(ckpt_path,
                                  checkpoint_to_json(*op, d.scaler, tmax, cfg.n1, cfg.rule,
                                                     binary, state));
            std::cout << "epoch " << row.epoch << " train " << fmt17(row.train_bound)
                      << " val " << fmt17(row.val_bound) << (improved ? " *" : "") << "\n";
        });

    std::cout << "best val bound " << fmt17(res.best_val) << " at epoch " << res.best_epoch
              << "; checkpoint " << ckpt_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
    std::string checkpoint;
    std::size_t n_chains = 1000;
    std::size_t extra_flat_steps = 0;
    std::size_t every_k = 0;
    std::size_t total_steps = 0;  // 0: cooling schedule length
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
    std::string chains_out;
    bool raw_space = false;
};

int cmd_sample(const SampleArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    Rng rng(resolve_seed(a.seed));

    const TemperatureSchedule heating = make_heating(ck.tmax, ck.n1, ck.rule);
    std::size_t extra = a.extra_flat_steps;
    if (a.total_steps > 0) {
        if (a.total_steps < heating.steps())
            throw ConfigError("--total-steps is shorter than the cooling schedule");
        extra = a.total_steps - heating.steps();
    }
    const TemperatureSchedule cooling = make_cooling(heating, extra);

    std::vector<std::vector<Vec>> dumps;
    const std::vector<Vec> finals =
        sample_chains(*ck.op, cooling, a.n_chains, rng, a.threads,
                      a.every_k > 0 ? &dumps : nullptr, a.every_k);

    auto to_output = [&](const Vec& s) {
        return a.raw_space || ck.scaler.is_identity() ? s : ck.scaler.invert(s);
    };

    std::ostringstream out;
    for (const Vec& s : finals) {
        const Vec o = to_output(s);
        for (std::size_t i = 0; i < o.size(); ++i) out << (i ? "," : "") << fmt17(o[i]);
        out << '\n';
    }
    write_text_atomic(a.out, out.str());

    if (a.every_k > 0 && !a.chains_out.empty()) {
        std::ostringstream cs;
        cs << "chain,step";
        for (std::size_t i = 0; i < ck.op->dim(); ++i) cs << ",x" << i;
        cs << '\n';
        for (std::size_t c = 0; c < dumps.size(); ++c)
            for (std::size_t t = 0; t < dumps[c].size(); ++t) {
                const Vec o = to_output(dumps[c][t]);
                cs << c << ',' << t * a.every_k;
                for (double x : o) cs << ',' << fmt17(x);
                cs << '\n';
            }
        write_text_atomic(a.chains_out, cs.str());
    }
    std::cout << "wrote " << finals.size() << " samples to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string checkpoint;
    std::string data;
    std::size_t n_traj = 64;
    std::size_t n_points = 0;  // 0 = all
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    Dataset d = load_csv(a.data);
    Rng rng(resolve_seed(a.seed));
    const TemperatureSchedule heating = make_heating(ck.tmax, ck.n1, ck.rule);

    std::size_t n = d.size();
    if (a.n_points > 0) n = std::min(n, a.n_points);

    double elbo_sum = 0.0, elbo_var = 0.0, is_sum = 0.0, is_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec x = d.points[i];
        if (ck.binary_data) {
            for (double& v : x) v = v >= 0.5 ? 1.0 : 0.0;
        } else {
            x = ck.scaler.apply(x);
        }
        const BoundEstimate e =
            elbo_estimate(*ck.op, heating, x, static_cast<int>(a.n_traj), rng, a.threads);
        const IsEstimate s =
            is_loglik(*ck.op, heating, x, static_cast<int>(a.n_traj), rng, a.threads);
        elbo_sum += e.mean;
        elbo_var += e.std_error * e.std_error;
        is_sum += s.value;
        is_var += s.std_error * s.std_error;
    }
    const double dn = static_cast<double>(n);
    const json out = {{"n_points", n},
                      {"n_traj", a.n_traj},
                      {"elbo", {{"mean", elbo_sum / dn}, {"se", std::sqrt(elbo_var) / dn}}},
                      {"is_loglik", {{"mean", is_sum / dn}, {"se", std::sqrt(is_var) / dn}}}};
    if (!a.out.empty()) write_json_atomic(a.out, out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
    std::string checkpoint;
    int chain_length = 1000;
    int burn_in = 50;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_diagnose(const DiagnoseArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    Rng rng(resolve_seed(a.seed));
    const ReversibilityReport r =
        reversibility_report(*ck.op, a.temperature, a.chain_length, a.burn_in, rng);
    const json out = {{"kl_per_step", r.kl_per_step},
                      {"entropy_per_step", r.entropy_per_step},
                      {"ratio", r.ratio},
                      {"chain_length", r.chain_length},
                      {"burn_in", r.burn_in},
                      {"temperature", a.temperature}};
    if (!a.out.empty()) write_json_atomic(a.out, out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleArgs {
    std::string chain;
    double tmax = 1.0;
    std::size_t n1 = 2;
    std::string rule = "doubling";
    std::string out;
};

int cmd_oracle(const OracleArgs& a) {
    const oracle::DiscreteChain chain = oracle::load_chain(a.chain);
    const TemperatureSchedule heating = make_heating(a.tmax, a.n1, rule_from_name(a.rule));

    json reversal = json::array();
    Vec distinct;
    for (double t : heating.temps)
        if (std::find(distinct.begin(), distinct.end(), t) == distinct.end())
            distinct.push_back(t);
    if (distinct.empty()) distinct.push_back(1.0);
    for (double t : distinct) {
        const Mat p = chain.at(t);
        const oracle::TimeReversal tr = oracle::time_reversal(p);
        double row_resid = 0.0;
        for (std::size_t r = 0; r < p.rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < p.cols; ++c) s += tr.reversed(r, c);
            row_resid = std::max(row_resid, std::abs(s - 1.0));
        }
        double pi_resid = oracle::stationarity_check(tr.reversed, tr.pi);
        double max_dev = 0.0;
        for (std::size_t r = 0; r < p.rows; ++r)
            for (std::size_t c = 0; c < p.cols; ++c)
                max_dev = std::max(max_dev, std::abs(tr.reversed(r, c) - p(r, c)));
        reversal.push_back({{"temperature", t},
                            {"row_stochastic_residual", row_resid},
                            {"pi_invariance_residual", pi_resid},
                            {"detailed_balance", oracle::detailed_balance(p, tr.pi)},
                            {"reversal_max_deviation", max_dev}});
    }

    json decomp = json::array();
    json split = json::array();
    for (std::size_t s0 = 0; s0 < chain.n_states; ++s0) {
        const oracle::Decomposition dec = oracle::exact_decomposition(chain, heating, s0);
        decomp.push_back({{"s0", s0},
                          {"log_marginal", dec.log_marginal},
                          {"elbo", dec.elbo},
                          {"kl_posterior", dec.kl_posterior},
                          {"identity_residual",
                           std::abs(dec.log_marginal - dec.elbo - dec.kl_posterior)}});
        const oracle::KlSplit ks = oracle::kl_split(chain, heating, s0);
        split.push_back({{"s0", s0},
                         {"irreversibility", ks.irreversibility},
                         {"annealing", ks.annealing},
                         {"sum_residual",
                          std::abs(ks.irreversibility + ks.annealing - dec.kl_posterior)}});
    }

    const json out = {{"n_states", chain.n_states},
                      {"schedule",
                       {{"tmax", a.tmax}, {"n1", a.n1}, {"rule", a.rule},
                        {"temps", heating.temps}}},
                      {"time_reversal", reversal},
                      {"decomposition", decomp},
                      {"kl_split", split},
                      {"data_stationarity_tv",
                       oracle::stationarity_check(chain.at(1.0), chain.data_dist)}};
    if (!a.out.empty()) write_json_atomic(a.out, out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// divergence

struct DivergenceArgs {
    std::string p_file;
    std::string q_file;
    double pi = 0.5;
    std::string out;
};

Vec load_distribution(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    Vec v;
    double x;
    while (in >> x) v.push_back(x);
    if (!in.eof()) throw ParseError(path + ": non-numeric content");
    if (v.empty()) throw ParseError(path + ": empty distribution");
    return v;
}

int cmd_divergence(const DivergenceArgs& a) {
    const Vec p = load_distribution(a.p_file);
    const Vec q = load_distribution(a.q_file);
    const MutualInfoCheck mi = mutual_info_identity_check(p, q, a.pi);
    const JeffreysCheck jf = jeffreys_bound_check(p, q);
    const json out = {{"pi", a.pi},
                      {"js", mi.js},
                      {"mi", mi.mi},
                      {"identity_diff", mi.diff},
                      {"js_half", jf.js},
                      {"kl_pq", jf.kl_pq},
                      {"kl_qp", jf.kl_qp},
                      {"jeffreys", jf.jeffreys},
                      {"bound1", jf.bound1},
                      {"bound2", jf.bound2},
                      {"ordered", jf.ordered},
                      {"saturated", jf.saturated}};
    if (!a.out.empty()) write_json_atomic(a.out, out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"variational walkback: train, sample and diagnose stochastic "
                 "transition operators"};
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "generate a toy dataset CSV");
    gen->add_option("--dataset", gd.dataset, "swiss-roll | circle | gmm");
    gen->add_option("--n", gd.n, "number of points");
    gen->add_option("--seed", gd.seed, "rng seed");
    gen->add_option("--noise", gd.noise, "jitter stddev");
    gen->add_option("--radius", gd.radius, "circle radius");
    gen->add_option("--means", gd.means, "gmm means, ';' between components");
    gen->add_option("--stds", gd.stds, "gmm stddevs, ';' between components");
    gen->add_option("--weights", gd.weights, "gmm weights, comma separated");
    gen->add_option("--out", gd.out, "output CSV path")->required();
    gen->add_flag("--header", gd.header, "write a header row");

    TrainArgs tr;
    auto* trn = app.add_subcommand("train", "walkback-train a transition operator");
    trn->add_option("--data", tr.data, "dataset CSV")->required();
    trn->add_option("--out", tr.out_dir, "output directory");
    trn->add_option("--operator", tr.op_kind, "gaussian | bernoulli");
    trn->add_option("--resume", tr.resume, "checkpoint to resume from");
    trn->add_option("--seed", tr.seed, "rng seed");
    trn->add_option("--steps", tr.steps, "target max trajectory length K");
    trn->add_option("--n1", tr.n1, "flat-step cap (overrides --steps)");
    trn->add_option("--tmax", tr.tmax, "override tmax (default: data variance rule)");
    trn->add_option("--rule", tr.rule, "doubling | sqrt2");
    trn->add_option("--alpha", tr.alpha, "operator mixing weight");
    trn->add_option("--lr", tr.lr, "learning rate");
    trn->add_option("--optimizer", tr.optimizer, "sgd | adam");
    trn->add_option("--update-mode", tr.update_mode, "online | accumulated");
    trn->add_option("--epochs", tr.epochs, "max epochs");
    trn->add_option("--patience", tr.patience, "early-stop patience");
    trn->add_option("--batch-size", tr.batch_size, "minibatch size");
    trn->add_option("--hidden", tr.hidden, "hidden width");
    trn->add_option("--layers", tr.layers, "hidden layer count");
    trn->add_option("--base-variance", tr.base_variance, "nominal noise variance at T=1");
    trn->add_option("--sigma-floor", tr.sigma_floor, "stddev floor");
    trn->add_option("--prior-rate", tr.prior_rate, "prior moment EMA rate");
    trn->add_flag("--no-per-step-affine", tr.no_step_affine, "disable per-step conditioning");

    SampleArgs sa;
    auto* smp = app.add_subcommand("sample", "generate samples from a checkpoint");
    smp->add_option("--checkpoint", sa.checkpoint, "checkpoint JSON")->required();
    smp->add_option("--n-chains", sa.n_chains, "number of chains");
    smp->add_option("--extra-flat-steps", sa.extra_flat_steps, "extra T=1 steps after cooling");
    smp->add_option("--every-k", sa.every_k, "dump every k-th state per chain");
    smp->add_option("--total-steps", sa.total_steps, "run each chain for this many steps");
    smp->add_option("--seed", sa.seed, "rng seed");
    smp->add_option("--threads", sa.threads, "worker threads");
    smp->add_option("--out", sa.out, "samples CSV")->required();
    smp->add_option("--chains-out", sa.chains_out, "per-step chain dump CSV");
    smp->add_flag("--raw-space", sa.raw_space, "skip un-standardization");

    EvaluateArgs ev;
    auto* evl = app.add_subcommand("evaluate", "bound and IS log-likelihood on a dataset");
    evl->add_option("--checkpoint", ev.checkpoint, "checkpoint JSON")->required();
    evl->add_option("--data", ev.data, "dataset CSV")->required();
    evl->add_option("--n-traj", ev.n_traj, "trajectories per point");
    evl->add_option("--n", ev.n_points, "evaluate only the first N points");
    evl->add_option("--seed", ev.seed, "rng seed");
    evl->add_option("--threads", ev.threads, "worker threads");
    evl->add_option("--out", ev.out, "output JSON path");

    DiagnoseArgs dg;
    auto* dgn = app.add_subcommand("diagnose", "reversibility report at fixed temperature");
    dgn->add_option("--checkpoint", dg.checkpoint, "checkpoint JSON")->required();
    dgn->add_option("--chain-length", dg.chain_length, "total chain steps");
    dgn->add_option("--burn-in", dg.burn_in, "discarded prefix");
    dgn->add_option("--temperature", dg.temperature, "chain temperature");
    dgn->add_option("--seed", dg.seed, "rng seed");
    dgn->add_option("--out", dg.out, "output JSON path");

    OracleArgs oa;
    auto* orc = app.add_subcommand("oracle", "exact identities on a finite-state chain");
    orc->add_option("--chain", oa.chain, "chain file")->required();
    orc->add_option("--tmax", oa.tmax, "schedule tmax");
    orc->add_option("--n1", oa.n1, "flat steps");
    orc->add_option("--rule", oa.rule, "doubling | sqrt2");
    orc->add_option("--out", oa.out, "output JSON path");

    DivergenceArgs da;
    auto* dvg = app.add_subcommand("divergence", "JS/Jeffreys toolkit on two distributions");
    dvg->add_option("--p", da.p_file, "distribution file")->required();
    dvg->add_option("--q", da.q_file, "distribution file")->required();
    dvg->add_option("--pi", da.pi, "mixture weight");
    dvg->add_option("--out", da.out, "output JSON path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: cli: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gd);
        if (trn->parsed()) return cmd_train(tr);
        if (smp->parsed()) return cmd_sample(sa);
        if (evl->parsed()) return cmd_evaluate(ev);
        if (dgn->parsed()) return cmd_diagnose(dg);
        if (orc->parsed()) return cmd_oracle(oa);
        if (dvg->parsed()) return cmd_divergence(da);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace walkback
