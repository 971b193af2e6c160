// rcbar: simulate RCBAR trees, fit the WLS estimators, evaluate the
// asymptotic limit matrices, and run replicated verification experiments.
//
// Exit codes: 0 success, 1 hypothesis or statistical failure, 2 usage or
// input error.  Every run is fully determined by (config file, flags);
// nothing is seeded from the clock.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rcbar/asymptotics.hpp"
#include "rcbar/config.hpp"
#include "rcbar/csv.hpp"
#include "rcbar/estimate.hpp"
#include "rcbar/experiment.hpp"
#include "rcbar/model.hpp"
#include "rcbar/simulate.hpp"
#include "rcbar/stats.hpp"

namespace {

using namespace rcbar;

constexpr int kExitOk = 0;
constexpr int kExitStatistical = 1;
constexpr int kExitUsage = 2;

void print_hypothesis_report(const HypothesisReport& rep) {
    for (const auto& c : rep.checks)
        std::printf("%-4s %s  %s\n", c.id.c_str(), c.pass ? "PASS" : "FAIL", c.detail.c_str());
}

int cmd_validate(const std::string& config_path) {
    const ConfigFile cfg = load_config(config_path);
    const HypothesisReport rep = validate_hypotheses(derive_moments(cfg.model));
    print_hypothesis_report(rep);
    return rep.all_pass() ? kExitOk : kExitStatistical;
}

struct SimulateArgs {
    std::string config;
    std::optional<unsigned> gens;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool record_draws = false;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    const ConfigFile cfg = load_config(a.config);
    const unsigned gens = a.gens ? *a.gens : cfg.run.gens.value_or(10);
    const TreeData t = simulate_tree(cfg.model, gens, a.seed, a.stream, a.record_draws);
    write_text_file(a.out, tree_to_csv(t));
    std::printf("wrote %zu nodes (generations 0..%u) to %s\n", t.x.size(), gens, a.out.c_str());
    return kExitOk;
}

struct EstimateArgs {
    std::string config;
    std::string tree;
    std::optional<unsigned> gens;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::optional<unsigned> n;
    std::optional<unsigned> n_min;
    std::string out;
};

int cmd_estimate(const EstimateArgs& a) {
    TreeData t = [&] {
        if (!a.tree.empty()) return tree_from_csv(read_text_file(a.tree));
        const ConfigFile cfg = load_config(a.config);
        const unsigned gens = a.gens ? *a.gens : cfg.run.gens.value_or(10);
        return simulate_tree(cfg.model, gens, a.seed, a.stream);
    }();
    const unsigned n_hi = a.n ? *a.n : t.shape.max_generation;
    const unsigned n_lo = a.n_min ? *a.n_min : n_hi;
    if (n_lo < 1 || n_lo > n_hi || n_hi > t.shape.max_generation)
        throw std::invalid_argument("estimate: requested generations outside 1..tree depth");
    const std::vector<EstimateSet> path = estimate_path(t, n_hi);
    const std::vector<EstimateSet> rows(path.begin() + (n_lo - 1), path.end());
    write_text_file(a.out, estimates_to_csv(rows));
    std::printf("wrote estimates for n=%u..%u to %s\n", n_lo, n_hi, a.out.c_str());
    return kExitOk;
}

struct LimitsArgs {
    std::string config;
    std::optional<std::uint64_t> samples;
    std::uint64_t seed = 0;
    double target_bias = 1e-8;
    std::string out;
};

int cmd_limits(const LimitsArgs& a) {
    const ConfigFile cfg = load_config(a.config);
    const DerivedMoments m = derive_moments(cfg.model);
    const std::uint64_t samples = a.samples ? *a.samples : cfg.run.limit_samples.value_or(1000000);
    if (samples < 2) throw std::invalid_argument("limits: need at least 2 samples");
    if (samples < 1000)
        std::printf("warning: %" PRIu64 " samples give large standard errors; results are indicative only\n",
                    samples);

    const TailMoments tm = tail_moments(m);
    const TSampleConfig tc = t_sample_config(cfg.model, a.target_bias);
    const std::vector<double> ts =
        sample_tail(cfg.model, tc, a.seed, samples, cfg.run.workers.value_or(1));
    const MomentStats ms = moment_stats(ts);
    std::vector<double> sq(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) sq[i] = ts[i] * ts[i];
    const MomentStats ms2 = moment_stats(sq);

    const double n = static_cast<double>(ts.size());
    const double se_mean = ms.sd / std::sqrt(n);
    const double se_second = ms2.sd / std::sqrt(n);
    std::printf("E[T]    closed form % .10g   monte carlo % .10g   se %.3g\n", tm.mean, ms.mean,
                se_mean);
    std::printf("E[T^2]  closed form % .10g   monte carlo % .10g   se %.3g\n", tm.second_moment,
                ms2.mean, se_second);
    std::printf("Var(T)  closed form % .10g\n", tm.variance);
    std::printf("truncation depth %zu (bias target %.3g)\n", tc.depth, tc.target_bias);

    const LimitMatrices lm = limit_matrices(m, ts);
    write_text_file(a.out, limits_to_csv(lm));
    std::printf("wrote limit matrices to %s\n", a.out.c_str());
    if (lm.cov_theta)
        std::printf("qsl trace target tr(Lambda^-1 L) = %.10g\n", lm.qsl_trace());

    const bool mean_ok = std::abs(tm.mean - ms.mean) <= 4.0 * se_mean;
    const bool second_ok = std::abs(tm.second_moment - ms2.mean) <= 4.0 * se_second;
    if (!mean_ok || !second_ok) {
        std::printf("MISMATCH: closed forms and monte carlo disagree beyond 4 standard errors\n");
        return kExitStatistical;
    }
    return kExitOk;
}

struct ExperimentArgs {
    std::string config;
    std::optional<unsigned> gens;
    std::optional<std::uint64_t> reps;
    std::uint64_t seed = 0;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> limit_samples;
    double target_bias = 1e-8;
    std::string outdir;
};

int cmd_experiment(const ExperimentArgs& a) {
    const ConfigFile file = load_config(a.config);
    ExperimentConfig cfg;
    cfg.spec = file.model;
    cfg.gens = a.gens ? *a.gens : file.run.gens.value_or(10);
    cfg.replications = a.reps ? *a.reps : file.run.reps.value_or(100);
    cfg.base_seed = a.seed;
    cfg.workers = a.workers ? *a.workers : file.run.workers.value_or(1);

    const DerivedMoments m = derive_moments(cfg.spec);
    const HypothesisReport hyp = validate_hypotheses(m);
    if (!hyp.all_pass()) {
        print_hypothesis_report(hyp);
        std::printf("experiment refused: hypotheses fail\n");
        return kExitStatistical;
    }

    const std::uint64_t lim_samples =
        a.limit_samples ? *a.limit_samples : file.run.limit_samples.value_or(200000);
    const TSampleConfig tc = t_sample_config(cfg.spec, a.target_bias);
    const std::vector<double> ts = sample_tail(cfg.spec, tc, a.seed, lim_samples, cfg.workers);
    const LimitMatrices lm = limit_matrices(m, ts);
    cfg.qsl = QslTarget{lm.lambda, lm.qsl_trace()};
    if (lm.cov_theta) cfg.clt = clt_targets(lm);

    const ExperimentReport rep = run_experiment(cfg);
    std::filesystem::create_directories(a.outdir);
    write_report_bundle(rep, a.outdir);

    std::printf("experiment: n=%u, %zu replications, seed %" PRIu64 ", %u worker(s)\n", cfg.gens,
                cfg.replications, cfg.base_seed, cfg.workers);
    std::printf("scaled theta error mean (%g, %g, %g, %g)\n", rep.theta_mean[0], rep.theta_mean[1],
                rep.theta_mean[2], rep.theta_mean[3]);
    if (!rep.normality.empty()) {
        std::printf("coord   skew      exkurt    ks        (1%% critical %.4f)\n",
                    kKsCritical1Percent / std::sqrt(static_cast<double>(rep.replications)));
        for (std::size_t c = 0; c < rep.normality.size(); ++c)
            std::printf("%-5s % .4f   % .4f   %.4f\n", kCoordNames[c], rep.normality[c].skewness,
                        rep.normality[c].excess_kurtosis, rep.normality[c].ks);
    }
    std::printf("wrote report bundle to %s\n", a.outdir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RCBAR simulation and weighted least-squares estimation toolkit"};
    app.require_subcommand(1);

    std::string validate_config;
    CLI::App* validate = app.add_subcommand("validate", "check the moment hypotheses of a model");
    validate->add_option("config", validate_config, "model configuration file")->required();

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "simulate one tree and write it as CSV");
    simulate->add_option("config", sim.config, "model configuration file")->required();
    simulate->add_option("--gens", sim.gens, "generation count n (tree has 2^(n+1)-1 nodes)");
    simulate->add_option("--seed", sim.seed, "experiment seed")->required();
    simulate->add_option("--stream", sim.stream, "replication stream id (default 0)");
    simulate->add_flag("--record-draws", sim.record_draws, "record per-node coefficient/noise draws");
    simulate->add_option("--out", sim.out, "output CSV path")->required();

    EstimateArgs est;
    CLI::App* estimate = app.add_subcommand("estimate", "fit the WLS estimators on a tree");
    estimate->add_option("config", est.config, "model configuration file (to simulate a tree)");
    estimate->add_option("--tree", est.tree, "existing tree CSV (instead of simulating)");
    estimate->add_option("--gens", est.gens, "generation count when simulating");
    estimate->add_option("--seed", est.seed, "experiment seed when simulating");
    estimate->add_option("--stream", est.stream, "replication stream id (default 0)");
    estimate->add_option("--n", est.n, "estimate at generation n (default: tree depth)");
    estimate->add_option("--n-min", est.n_min, "with --n, emit one row per n in n-min..n");
    estimate->add_option("--out", est.out, "output CSV path")->required();

    LimitsArgs lim;
    CLI::App* limits = app.add_subcommand("limits", "tail-variable moments and limit matrices");
    limits->add_option("config", lim.config, "model configuration file")->required();
    limits->add_option("--samples", lim.samples, "Monte Carlo sample count (default 10^6)");
    limits->add_option("--seed", lim.seed, "experiment seed")->required();
    limits->add_option("--target-bias", lim.target_bias, "series truncation bias bound");
    limits->add_option("--out", lim.out, "output CSV path")->required();

    ExperimentArgs exp;
    CLI::App* experiment = app.add_subcommand("experiment", "replicated estimator experiment");
    experiment->add_option("config", exp.config, "model configuration file")->required();
    experiment->add_option("--gens", exp.gens, "generation count n");
    experiment->add_option("--reps", exp.reps, "number of replications");
    experiment->add_option("--seed", exp.seed, "experiment seed")->required();
    experiment->add_option("--workers", exp.workers, "worker thread count");
    experiment->add_option("--limit-samples", exp.limit_samples,
                           "T samples for the limit-matrix targets (default 200000)");
    experiment->add_option("--target-bias", exp.target_bias, "series truncation bias bound");
    experiment->add_option("--outdir", exp.outdir, "output directory for the CSV bundle")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(validate_config);
        if (simulate->parsed()) return cmd_simulate(sim);
        if (estimate->parsed()) {
            if (est.tree.empty() && est.config.empty())
                throw std::invalid_argument("estimate: give either a config file or --tree");
            return cmd_estimate(est);
        }
        if (limits->parsed()) return cmd_limits(lim);
        if (experiment->parsed()) return cmd_experiment(exp);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const HypothesisFailure& e) {
        print_hypothesis_report(e.report);
        return kExitStatistical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
