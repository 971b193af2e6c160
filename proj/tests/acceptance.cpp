// Acceptance suite: runs every verification criterion end to end and
// prints one PASS/FAIL line per criterion.  Exits nonzero if any fail.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rcbar/asymptotics.hpp"
#include "rcbar/csv.hpp"
#include "rcbar/estimate.hpp"
#include "rcbar/experiment.hpp"
#include "rcbar/simulate.hpp"
#include "rcbar/stats.hpp"
#include "specs.hpp"

using namespace rcbar;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool pass, const std::string& detail) {
    std::printf("%s  %2d  %-28s %s\n", pass ? "PASS" : "FAIL", number, name, detail.c_str());
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// 1. Noiseless exact recovery on the deterministic model.
void criterion_1() {
    const TreeData t = simulate_tree(testspec::all_constant(), 2, 1);
    const EstimateSet e = estimate_at(t, 2);
    double worst = std::abs(e.theta[0] - 0.5);
    worst = std::max(worst, std::abs(e.theta[1] - 1.0));
    worst = std::max(worst, std::abs(e.theta[2] - 0.3));
    worst = std::max(worst, std::abs(e.theta[3] - 2.0));
    for (int i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(e.eta[i]));
        worst = std::max(worst, std::abs(e.zeta[i]));
        worst = std::max(worst, std::abs(e.nu[i]));
    }
    report(1, "noiseless-exact-recovery", worst <= 1e-12, fmt("max abs error %.3g", worst));
}

// 2. 50 random trees, n <= 4: brute-force oracle equivalence and WLS
//    orthogonality, both at 1e-10.
void criterion_2() {
    double worst_rel = 0.0, worst_orth = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const unsigned n = 2 + static_cast<unsigned>(seed % 3);
        const TreeData t = simulate_tree(testspec::reference(), n, 10'000 + seed);
        const auto triples = regression_triples(t, n);
        const ThetaFit fit = wls_theta(triples);
        if (fit.regularized) {
            worst_rel = 1.0;
            continue;
        }
        const auto want = oracle::wls_theta_brute_force(triples);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 4; ++i) {
            num += (fit.theta[i] - want[i]) * (fit.theta[i] - want[i]);
            den += want[i] * want[i];
        }
        worst_rel = std::max(worst_rel, std::sqrt(num / den));

        const NoisePairs r = residuals(triples, fit.theta);
        KahanSum ex, e1, ox, o1, scale;
        for (std::size_t i = 0; i < triples.size(); ++i) {
            const double x = triples[i].parent;
            const double w = 1.0 / (1.0 + x * x);
            ex.add(w * r.even[i] * x);
            e1.add(w * r.even[i]);
            ox.add(w * r.odd[i] * x);
            o1.add(w * r.odd[i]);
            scale.add(w * std::abs(triples[i].even) * (std::abs(x) + 1.0));
        }
        const double s = std::max(1.0, scale.value());
        for (double v : {ex.value(), e1.value(), ox.value(), o1.value()})
            worst_orth = std::max(worst_orth, std::abs(v) / s);
    }
    report(2, "wls-oracle-equivalence", worst_rel <= 1e-10 && worst_orth <= 1e-10,
           fmt("worst rel %.3g, worst orthogonality %.3g", worst_rel, worst_orth));
}

// 3. theta_hat - theta == (I2 (x) S)^-1 M on 20 recorded-draw trees, n=8.
void criterion_3() {
    const DerivedMoments m = derive_moments(testspec::reference());
    const Vec4 theta_true{{m.a, m.c, m.b, m.d}};
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TreeData t = simulate_tree(testspec::reference(), 8, 20'000 + seed, 0, true);
        const ThetaFit fit = wls_theta(t, 8);
        const NoisePairs v = true_noise(t, m);
        KahanSum m0, m1, m2, m3;
        for (NodeIndex k = 1; k <= subtree_size(7); ++k) {
            const double x = t.x[k - 1];
            const double w = 1.0 / (1.0 + x * x);
            m0.add(w * x * v.even[k - 1]);
            m1.add(w * v.even[k - 1]);
            m2.add(w * x * v.odd[k - 1]);
            m3.add(w * v.odd[k - 1]);
        }
        const Mat2 s_inv = inverse(fit.s);
        const Vec2 ac = s_inv * Vec2{{m0.value(), m1.value()}};
        const Vec2 bd = s_inv * Vec2{{m2.value(), m3.value()}};
        const Vec4 predicted{{ac[0], ac[1], bd[0], bd[1]}};
        const Vec4 err = fit.theta - theta_true;
        worst = std::max(worst, (err - predicted).norm() / err.norm());
    }
    report(3, "martingale-identity", worst <= 1e-8, fmt("worst relative gap %.3g", worst));
}

// 4. Closed-form E[T], E[T^2] vs the tail sampler at 10^6 draws.
void criterion_4(const TailMoments& tm, const std::vector<double>& ts) {
    const MomentStats ms = moment_stats(ts);
    const double se_mean = ms.sd / std::sqrt(static_cast<double>(ts.size()));
    std::vector<double> sq(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) sq[i] = ts[i] * ts[i];
    const MomentStats ms2 = moment_stats(sq);
    const double se_second = ms2.sd / std::sqrt(static_cast<double>(sq.size()));
    const double dev_mean = std::abs(ms.mean - tm.mean) / se_mean;
    const double dev_second = std::abs(ms2.mean - tm.second_moment) / se_second;
    report(4, "tail-moment-consistency", dev_mean <= 4.0 && dev_second <= 4.0,
           fmt("E[T] dev %.2f se, E[T^2] dev %.2f se", dev_mean, dev_second));
}

struct PathBattery {
    std::vector<TreeData> trees;
    std::vector<std::vector<EstimateSet>> paths;
};

PathBattery make_battery(unsigned gens, std::size_t seeds, std::uint64_t base_seed) {
    PathBattery b;
    for (std::size_t s = 0; s < seeds; ++s) {
        b.trees.push_back(simulate_tree(testspec::reference(), gens, base_seed, s));
        b.paths.push_back(estimate_path(b.trees.back(), gens));
    }
    return b;
}

// 5. Relative Frobenius distance of <M>_n/|T_{n-1}| to L shrinks from
//    n=6 to n=12 in median over 20 seeds.
void criterion_5(const PathBattery& b, const DerivedMoments& m, const LimitMatrices& lm) {
    const double l_norm = lm.l.frobenius();
    std::vector<double> d6, d12;
    for (const TreeData& t : b.trees) {
        d6.push_back((martingale_bracket(t, m, 6) - lm.l).frobenius() / l_norm);
        d12.push_back((martingale_bracket(t, m, 12) - lm.l).frobenius() / l_norm);
    }
    const double m6 = median(d6), m12 = median(d12);
    report(5, "bracket-convergence-trend", m12 < m6,
           fmt("median rel distance %.4f (n=6) -> %.4f (n=12)", m6, m12));
}

// 6. Rate statistic |T_{n-1}| ||err||^2 / n grows by at most 3x from n=6
//    to n=12 in median, for all four estimators.
void criterion_6(const PathBattery& b, const DerivedMoments& m) {
    const Vec4 theta_true{{m.a, m.c, m.b, m.d}};
    const Vec2 eta_true{{m.var_a, m.var_c}};
    const Vec2 zeta_true{{m.var_b, m.var_d}};
    const Vec2 nu_true{{m.rho_ab, m.rho_cd}};
    bool pass = true;
    std::string detail;
    const char* names[4] = {"theta", "eta", "zeta", "nu"};
    for (int w = 0; w < 4; ++w) {
        std::vector<double> at6, at12;
        for (const auto& path : b.paths) {
            auto rate = [&](const EstimateSet& e) {
                const double tn = static_cast<double>(subtree_size(e.n - 1));
                switch (w) {
                    case 0: return tn * (e.theta - theta_true).norm2() / e.n;
                    case 1: return tn * (e.eta - eta_true).norm2() / e.n;
                    case 2: return tn * (e.zeta - zeta_true).norm2() / e.n;
                    default: return tn * (e.nu - nu_true).norm2() / e.n;
                }
            };
            at6.push_back(rate(path[5]));
            at12.push_back(rate(path[11]));
        }
        const double ratio = median(at12) / median(at6);
        if (!(ratio <= 3.0)) pass = false;
        detail += std::string(names[w]) + " " + fmt("%.2fx ", ratio);
    }
    report(6, "rate-boundedness", pass, detail);
}

// 7. QSL running average at n=12 within [0.5, 2.0] x tr(Lambda^-1 L).
void criterion_7(const PathBattery& b, const DerivedMoments& m, const LimitMatrices& lm) {
    const Vec4 theta_true{{m.a, m.c, m.b, m.d}};
    std::vector<double> finals;
    for (const auto& path : b.paths) {
        std::vector<Vec4> thetas;
        for (const auto& e : path) thetas.push_back(e.theta);
        finals.push_back(qsl_statistic(thetas, lm.lambda, theta_true).back());
    }
    const double med = median(finals);
    const double target = lm.qsl_trace();
    const double ratio = med / target;
    report(7, "qsl-band", ratio >= 0.5 && ratio <= 2.0,
           fmt("median %.4f vs trace %.4f (ratio %.2f)", med, target, ratio));
}

struct BatteryTolerance {
    double skew, exkurt;
};

bool check_battery(const std::vector<CoordNormality>& stats, std::size_t first, std::size_t count,
                   const BatteryTolerance& tol, double ks_crit, std::string& detail) {
    bool pass = true;
    double worst_skew = 0.0, worst_kurt = 0.0, worst_ks = 0.0;
    for (std::size_t c = first; c < first + count; ++c) {
        worst_skew = std::max(worst_skew, std::abs(stats[c].skewness));
        worst_kurt = std::max(worst_kurt, std::abs(stats[c].excess_kurtosis));
        worst_ks = std::max(worst_ks, stats[c].ks);
        if (std::abs(stats[c].skewness) >= tol.skew) pass = false;
        if (std::abs(stats[c].excess_kurtosis) >= tol.exkurt) pass = false;
        if (stats[c].ks >= ks_crit) pass = false;
    }
    detail += fmt("|skew|<=%.3f ", worst_skew) + fmt("|exk|<=%.3f ", worst_kurt) +
              fmt("ks<=%.4f ", worst_ks);
    return pass;
}

// 8 + 9. Asymptotic-normality batteries and the CLT covariance check.
void criteria_8_and_9(const ModelSpec& spec, const LimitMatrices& lm) {
    const CltTargets targets = clt_targets(lm);

    ExperimentConfig small;
    small.spec = spec;
    small.gens = 10;
    small.replications = 500;
    small.base_seed = 81;
    small.clt = targets;
    small.qsl = QslTarget{lm.lambda, lm.qsl_trace()};
    const ExperimentReport small_rep = run_experiment(small);

    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig full = small;
    full.gens = 13;
    full.replications = 4000;
    full.base_seed = 82;
    const ExperimentReport full_rep = run_experiment(full);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::string detail;
    bool pass = true;

    // scaled-down battery: n=10, 500 reps, 0.3 / 0.6 / 1.63/sqrt(500)
    detail += "[n=10] ";
    pass &= check_battery(small_rep.normality, 0, 4, {0.3, 0.6},
                          kKsCritical1Percent / std::sqrt(500.0), detail);

    // full battery: n=13, 4000 reps, 0.15 / 0.3 / 1.63/sqrt(4000)
    detail += "[n=13] ";
    pass &= check_battery(full_rep.normality, 0, 4, {0.15, 0.3},
                          kKsCritical1Percent / std::sqrt(4000.0), detail);

    if (secs >= 600.0) pass = false;
    detail += fmt("full run %.1fs ", secs);

    // CLT covariance: empirical covariance of the scaled theta errors
    // within 20% entrywise on the significant entries of Lambda^-1 L Lambda^-1
    const Mat4& target = *lm.cov_theta;
    const double floor20 = 0.05 * target.frobenius();
    double worst_cov = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (std::abs(target(i, j)) <= floor20) continue;
            worst_cov = std::max(worst_cov,
                                 std::abs(full_rep.theta_cov(i, j) - target(i, j)) /
                                     std::abs(target(i, j)));
        }
    if (!(worst_cov <= 0.20)) pass = false;
    detail += fmt("cov rel err %.3f", worst_cov);
    report(8, "clt-theta-figure2", pass, detail);

    // criterion 9: same full-scale battery for eta, zeta, nu
    std::string detail9;
    bool pass9 = true;
    const double ks_crit = kKsCritical1Percent / std::sqrt(4000.0);
    detail9 += "[eta] ";
    pass9 &= check_battery(full_rep.normality, 4, 2, {0.15, 0.3}, ks_crit, detail9);
    detail9 += "[zeta] ";
    pass9 &= check_battery(full_rep.normality, 6, 2, {0.15, 0.3}, ks_crit, detail9);
    detail9 += "[nu] ";
    pass9 &= check_battery(full_rep.normality, 8, 2, {0.15, 0.3}, ks_crit, detail9);
    report(9, "clt-variance-covariance", pass9, detail9);
}

// 10. Byte-identical bundles across re-runs and worker counts.
void criterion_10(const ModelSpec& spec, const LimitMatrices& lm) {
    namespace fs = std::filesystem;
    ExperimentConfig cfg;
    cfg.spec = spec;
    cfg.gens = 6;
    cfg.replications = 50;
    cfg.base_seed = 303;
    cfg.qsl = QslTarget{lm.lambda, lm.qsl_trace()};
    cfg.workers = 1;
    const ExperimentReport r1 = run_experiment(cfg);
    const ExperimentReport r2 = run_experiment(cfg);
    cfg.workers = 3;
    const ExperimentReport r3 = run_experiment(cfg);

    const fs::path base = fs::temp_directory_path() / "rcbar_acceptance";
    fs::remove_all(base);
    fs::create_directories(base / "a");
    fs::create_directories(base / "b");
    fs::create_directories(base / "c");
    write_report_bundle(r1, (base / "a").string());
    write_report_bundle(r2, (base / "b").string());
    write_report_bundle(r3, (base / "c").string());
    bool pass = true;
    for (const char* name : {"scaled_errors.csv", "summary.csv", "rates.csv", "qsl.csv", "hist.csv"}) {
        const std::string a = read_text_file((base / "a" / name).string());
        if (a != read_text_file((base / "b" / name).string())) pass = false;
        if (a != read_text_file((base / "c" / name).string())) pass = false;
    }
    fs::remove_all(base);
    report(10, "bundle-determinism", pass, pass ? "re-run and worker variants identical" : "mismatch");
}

}  // namespace

int main() {
    const ModelSpec spec = testspec::reference();
    const DerivedMoments m = derive_moments(spec);
    const TailMoments tm = tail_moments(m);

    criterion_1();
    criterion_2();
    criterion_3();

    const TSampleConfig tc = t_sample_config(spec, 1e-8);
    const std::vector<double> ts = sample_tail(spec, tc, 424'242, 1'000'000);
    criterion_4(tm, ts);

    const LimitMatrices lm = limit_matrices(m, ts);
    const PathBattery battery = make_battery(12, 20, 55'000);
    criterion_5(battery, m, lm);
    criterion_6(battery, m);
    criterion_7(battery, m, lm);

    criteria_8_and_9(spec, lm);
    criterion_10(spec, lm);

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
