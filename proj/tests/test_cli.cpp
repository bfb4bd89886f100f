#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "walkback/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json slurp_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int cli(std::initializer_list<std::string> args) {
    return walkback::run_cli(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("cli: gen-data is deterministic and honors the header flag") {
    const fs::path dir = fresh_dir("wb_cli_gen");
    const std::string a = (dir / "a.csv").string();
    const std::string b = (dir / "b.csv").string();
    REQUIRE(cli({"gen-data", "--dataset", "swiss-roll", "--n", "200", "--seed", "11",
                 "--out", a}) == 0);
    REQUIRE(cli({"gen-data", "--dataset", "swiss-roll", "--n", "200", "--seed", "11",
                 "--out", b}) == 0);
    CHECK(slurp(a) == slurp(b));

    const std::string h = (dir / "h.csv").string();
    REQUIRE(cli({"gen-data", "--dataset", "circle", "--n", "50", "--seed", "3", "--header",
                 "--out", h}) == 0);
    CHECK(slurp(h).substr(0, 5) == "x0,x1");
}

TEST_CASE("cli: unknown dataset or missing file fails with a nonzero exit") {
    const fs::path dir = fresh_dir("wb_cli_err");
    CHECK(cli({"gen-data", "--dataset", "lattice", "--out", (dir / "x.csv").string()}) != 0);
    CHECK(cli({"train", "--data", (dir / "absent.csv").string()}) != 0);
    CHECK(cli({"no-such-command"}) != 0);
}

TEST_CASE("cli: full pipeline smoke stays within the time budget") {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    const fs::path dir = fresh_dir("wb_cli_pipe");
    const std::string data = (dir / "roll.csv").string();
    const std::string run = (dir / "run").string();
    REQUIRE(cli({"gen-data", "--dataset", "swiss-roll", "--n", "600", "--seed", "5", "--out",
                 data}) == 0);
    REQUIRE(cli({"train", "--data", data, "--out", run, "--seed", "7", "--epochs", "2",
                 "--hidden", "16", "--n1", "2", "--lr", "1e-3"}) == 0);

    const fs::path ckpt = fs::path(run) / "checkpoint.json";
    REQUIRE(fs::exists(ckpt));
    REQUIRE(fs::exists(fs::path(run) / "train_log.csv"));
    const json config = slurp_json(fs::path(run) / "config.json");
    CHECK(config.at("command") == "train");
    CHECK(config.at("seed") == 7);

    const std::string samples = (dir / "samples.csv").string();
    REQUIRE(cli({"sample", "--checkpoint", ckpt.string(), "--n-chains", "64", "--seed", "9",
                 "--extra-flat-steps", "2", "--out", samples}) == 0);
    std::size_t rows = 0;
    std::istringstream ss(slurp(samples));
    for (std::string line; std::getline(ss, line);) rows += !line.empty();
    CHECK(rows == 64);

    const std::string evalj = (dir / "eval.json").string();
    REQUIRE(cli({"evaluate", "--checkpoint", ckpt.string(), "--data", data, "--n", "10",
                 "--n-traj", "16", "--seed", "13", "--out", evalj}) == 0);
    const json ev = slurp_json(evalj);
    CHECK(ev.at("n_points") == 10);
    CHECK(ev.at("elbo").contains("mean"));
    // Jensen: the importance-sampling estimate dominates the bound
    CHECK(ev.at("is_loglik").at("mean").get<double>() + 1e-9 >=
          ev.at("elbo").at("mean").get<double>());

    const std::string diagj = (dir / "diag.json").string();
    REQUIRE(cli({"diagnose", "--checkpoint", ckpt.string(), "--chain-length", "300",
                 "--burn-in", "50", "--seed", "17", "--out", diagj}) == 0);
    const json dg = slurp_json(diagj);
    CHECK(dg.contains("kl_per_step"));
    CHECK(dg.contains("ratio"));

    const auto elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    MESSAGE("pipeline smoke took " << elapsed << "s");
    CHECK(elapsed < 300.0);
}

TEST_CASE("cli: sampling is reproducible and supports n_chains = 0") {
    const fs::path dir = fresh_dir("wb_cli_sample");
    const std::string data = (dir / "gmm.csv").string();
    const std::string run = (dir / "run").string();
    REQUIRE(cli({"gen-data", "--dataset", "gmm", "--n", "300", "--seed", "23", "--out",
                 data}) == 0);
    REQUIRE(cli({"train", "--data", data, "--out", run, "--seed", "29", "--epochs", "1",
                 "--hidden", "8", "--n1", "1"}) == 0);
    const std::string ckpt = (fs::path(run) / "checkpoint.json").string();

    const std::string s1 = (dir / "s1.csv").string();
    const std::string s2 = (dir / "s2.csv").string();
    REQUIRE(cli({"sample", "--checkpoint", ckpt, "--n-chains", "32", "--seed", "31", "--out",
                 s1}) == 0);
    REQUIRE(cli({"sample", "--checkpoint", ckpt, "--n-chains", "32", "--seed", "31",
                 "--threads", "2", "--out", s2}) == 0);
    CHECK(slurp(s1) == slurp(s2));  // thread fan-out is order-stable

    const std::string s0 = (dir / "s0.csv").string();
    REQUIRE(cli({"sample", "--checkpoint", ckpt, "--n-chains", "0", "--out", s0}) == 0);
    CHECK(slurp(s0).empty());

    const std::string chains = (dir / "chains.csv").string();
    REQUIRE(cli({"sample", "--checkpoint", ckpt, "--n-chains", "4", "--seed", "37",
                 "--every-k", "2", "--chains-out", chains, "--out",
                 (dir / "s3.csv").string()}) == 0);
    CHECK(slurp(chains).substr(0, 10) == "chain,step");
}

TEST_CASE("cli: oracle command reports identities for a detailed-balance chain") {
    const fs::path dir = fresh_dir("wb_cli_oracle");
    const std::string chain = (dir / "chain.txt").string();
    {
        // Metropolis chain on 3 states at T in {1, 2}: detailed balance at
        // both temperatures.
        std::ofstream f(chain);
        f.precision(17);
        f << "data 0.5 0.3 0.2\nprior 0.4 0.4 0.2\n";
        auto block = [&](double T) {
            const double e0 = 0.0, e1 = 1.0, e2 = 0.5;
            auto acc = [&](double from, double to) {
                return std::min(1.0, std::exp(-(to - from) / T)) / 3.0;
            };
            const double p01 = acc(e0, e1), p02 = acc(e0, e2);
            const double p10 = acc(e1, e0), p12 = acc(e1, e2);
            const double p20 = acc(e2, e0), p21 = acc(e2, e1);
            f << "T " << T << "\n";
            f << 1.0 - p01 - p02 << ' ' << p01 << ' ' << p02 << "\n";
            f << p10 << ' ' << 1.0 - p10 - p12 << ' ' << p12 << "\n";
            f << p20 << ' ' << p21 << ' ' << 1.0 - p20 - p21 << "\n";
        };
        block(1.0);
        block(2.0);
    }
    const std::string out = (dir / "oracle.json").string();
    REQUIRE(cli({"oracle", "--chain", chain, "--tmax", "2", "--n1", "1", "--out", out}) == 0);
    const json j = slurp_json(out);
    CHECK(j.at("n_states") == 3);
    for (const auto& tr : j.at("time_reversal")) {
        CHECK(tr.at("detailed_balance").get<bool>());
        CHECK(tr.at("reversal_max_deviation").get<double>() < 1e-12);
        CHECK(tr.at("row_stochastic_residual").get<double>() < 1e-12);
        CHECK(tr.at("pi_invariance_residual").get<double>() < 1e-12);
    }
    for (const auto& dec : j.at("decomposition"))
        CHECK(dec.at("identity_residual").get<double>() < 1e-10);
    for (const auto& ks : j.at("kl_split")) {
        CHECK(std::abs(ks.at("irreversibility").get<double>()) < 1e-10);
        CHECK(ks.at("sum_residual").get<double>() < 1e-10);
    }
}

TEST_CASE("cli: divergence command emits the full toolkit") {
    const fs::path dir = fresh_dir("wb_cli_div");
    const std::string pf = (dir / "p.txt").string();
    const std::string qf = (dir / "q.txt").string();
    std::ofstream(pf) << "0.5 0.5\n";
    std::ofstream(qf) << "0.1 0.9\n";
    const std::string out = (dir / "div.json").string();
    REQUIRE(cli({"divergence", "--p", pf, "--q", qf, "--pi", "0.5", "--out", out}) == 0);
    const json j = slurp_json(out);
    CHECK(std::abs(j.at("identity_diff").get<double>()) < 1e-12);
    CHECK(j.at("js").get<double>() <= j.at("bound1").get<double>());
    CHECK(j.at("bound1").get<double>() <= j.at("bound2").get<double>());
    CHECK(j.at("ordered").get<bool>());

    // unnormalized input is rejected
    std::ofstream(qf) << "0.5 0.9\n";
    CHECK(cli({"divergence", "--p", pf, "--q", qf}) != 0);
}

TEST_CASE("cli: WALKBACK_SEED overrides the seed flag") {
    const fs::path dir = fresh_dir("wb_cli_env");
    const std::string a = (dir / "a.csv").string();
    const std::string b = (dir / "b.csv").string();
    const std::string c = (dir / "c.csv").string();
    REQUIRE(cli({"gen-data", "--dataset", "circle", "--n", "40", "--seed", "1", "--out", a}) ==
            0);
    setenv("WALKBACK_SEED", "99", 1);
    REQUIRE(cli({"gen-data", "--dataset", "circle", "--n", "40", "--seed", "1", "--out", b}) ==
            0);
    unsetenv("WALKBACK_SEED");
    REQUIRE(cli({"gen-data", "--dataset", "circle", "--n", "40", "--seed", "99", "--out", c}) ==
            0);
    CHECK(slurp(a) != slurp(b));
    CHECK(slurp(b) == slurp(c));
}

TEST_CASE("cli: training resumes from a checkpoint") {
    const fs::path dir = fresh_dir("wb_cli_resume");
    const std::string data = (dir / "gmm.csv").string();
    REQUIRE(cli({"gen-data", "--dataset", "gmm", "--n", "200", "--seed", "41", "--out",
                 data}) == 0);
    const std::string run1 = (dir / "run1").string();
    REQUIRE(cli({"train", "--data", data, "--out", run1, "--seed", "43", "--epochs", "1",
                 "--hidden", "8", "--n1", "1"}) == 0);
    const std::string run2 = (dir / "run2").string();
    REQUIRE(cli({"train", "--data", data, "--out", run2, "--seed", "43", "--epochs", "1",
                 "--hidden", "8", "--n1", "1", "--resume",
                 (fs::path(run1) / "checkpoint.json").string()}) == 0);
    CHECK(fs::exists(fs::path(run2) / "checkpoint.json"));
}
