#pragma once

// Replicated Monte Carlo experiments: scaled estimator errors, empirical
// covariances, normality diagnostics, convergence-rate series, and the
// quadratic-strong-law running average.
//
// Replication r draws from stream (base_seed, r), so reports are
// bit-identical across re-runs and worker counts; aggregation always
// happens in replication order.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcbar/asymptotics.hpp"
#include "rcbar/estimate.hpp"
#include "rcbar/mat.hpp"
#include "rcbar/model.hpp"
#include "rcbar/parallel.hpp"
#include "rcbar/simulate.hpp"
#include "rcbar/stats.hpp"

namespace rcbar {

struct QslTarget {
    Mat4 lambda;   // I2 (x) C
    double trace;  // tr(Lambda^{-1/2} L Lambda^{-1/2})
};

struct CltTargets {
    Mat4 cov_theta;
    Mat2 cov_eta, cov_zeta, cov_nu;
};

inline CltTargets clt_targets(const LimitMatrices& lm) {
    if (!lm.cov_theta || !lm.cov_eta || !lm.cov_zeta || !lm.cov_nu)
        throw std::domain_error("clt_targets: limit matrices carry no CLT covariances");
    return {*lm.cov_theta, *lm.cov_eta, *lm.cov_zeta, *lm.cov_nu};
}

struct ExperimentConfig {
    ModelSpec spec;
    unsigned gens = 10;
    std::size_t replications = 100;
    std::uint64_t base_seed = 0;
    unsigned workers = 1;
    // Oracle inputs for the QSL series and the normality standardization;
    // both come from limit_matrices when available.
    std::optional<QslTarget> qsl;
    std::optional<CltTargets> clt;
};

class HypothesisFailure : public std::runtime_error {
public:
    explicit HypothesisFailure(HypothesisReport rep)
        : std::runtime_error("model violates the estimation hypotheses"), report(std::move(rep)) {}

    HypothesisReport report;
};

// Per-coordinate normality diagnostics of scaled errors against the
// matched centered normal.
struct CoordNormality {
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double ks = 0.0;
    double target_sd = 0.0;
    bool degenerate = false;  // zero-variance sample; ks holds its maximal value
};

// Skewness/kurtosis/KS of each coordinate standardized by the target
// standard deviation sqrt(diag(target_cov)); target_cov is row-major
// dim x dim.  Requires a positive-definite target and >= 100 samples.
inline std::vector<CoordNormality> normality_stats(std::span<const double> samples, std::size_t dim,
                                                   std::span<const double> target_cov) {
    if (dim == 0 || samples.size() % dim != 0)
        throw std::invalid_argument("normality_stats: sample buffer is not a multiple of dim");
    const std::size_t n = samples.size() / dim;
    if (n < 100) throw std::invalid_argument("normality_stats: need at least 100 samples");
    if (target_cov.size() != dim * dim)
        throw std::invalid_argument("normality_stats: target covariance has wrong size");
    if (dim == 2) {
        const Mat2 m = Mat2::of(target_cov[0], target_cov[1], target_cov[2], target_cov[3]);
        if (!is_positive_definite(m))
            throw std::domain_error("normality_stats: target covariance is not positive definite");
    } else if (dim == 4) {
        Mat4 m;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) m(i, j) = target_cov[4 * i + j];
        if (!is_positive_definite(m))
            throw std::domain_error("normality_stats: target covariance is not positive definite");
    } else {
        for (std::size_t i = 0; i < dim; ++i)
            if (!(target_cov[i * dim + i] > 0.0))
                throw std::domain_error("normality_stats: target covariance is not positive definite");
    }

    std::vector<CoordNormality> out(dim);
    std::vector<double> coord(n);
    for (std::size_t j = 0; j < dim; ++j) {
        const double sd = std::sqrt(target_cov[j * dim + j]);
        for (std::size_t i = 0; i < n; ++i) coord[i] = samples[i * dim + j] / sd;
        const MomentStats ms = moment_stats(coord);
        CoordNormality& c = out[j];
        c.target_sd = sd;
        c.skewness = ms.skewness;
        c.excess_kurtosis = ms.excess_kurtosis;
        c.degenerate = !(ms.sd > 0.0);
        c.ks = ks_statistic_normal(coord);
    }
    return out;
}

// Running Cesaro average (1/n) sum_{k<=n} |T_{k-1}| (theta_k - theta)^t
// Lambda (theta_k - theta) for every prefix of an estimate path.
inline std::vector<double> qsl_statistic(std::span<const Vec4> theta_by_n, const Mat4& lambda,
                                         const Vec4& theta_true) {
    std::vector<double> out(theta_by_n.size());
    KahanSum run;
    for (std::size_t i = 0; i < theta_by_n.size(); ++i) {
        const unsigned n = static_cast<unsigned>(i + 1);
        const Vec4 err = theta_by_n[i] - theta_true;
        run.add(static_cast<double>(subtree_size(n - 1)) * quad_form(lambda, err));
        out[i] = run.value() / static_cast<double>(n);
    }
    return out;
}

struct RateQuartiles {
    double median = 0.0, q25 = 0.0, q75 = 0.0;
};

struct ExperimentReport {
    unsigned gens = 0;
    std::size_t replications = 0;

    // scaled errors sqrt(|T_{n-1}|) (estimate - truth), one row per replication
    std::vector<std::array<double, 4>> theta_scaled;
    std::vector<std::array<double, 2>> eta_scaled, zeta_scaled, nu_scaled;

    // empirical mean / covariance of the scaled errors
    Vec4 theta_mean{};
    Mat4 theta_cov{};
    Vec2 eta_mean{}, zeta_mean{}, nu_mean{};
    Mat2 eta_cov{}, zeta_cov{}, nu_cov{};

    // normality per coordinate, ordered (a,c,b,d, sa2,sc2, sb2,sd2, rab,rcd);
    // present only when CLT targets were supplied
    std::vector<CoordNormality> normality;

    // rate statistic |T_{n-1}| ||err_n||^2 / n per n = 1..gens, quartiles
    // over replications, per estimator {theta, eta, zeta, nu}
    std::array<std::vector<RateQuartiles>, 4> rate_series;

    // median over replications of the QSL running average, plus target
    std::vector<double> qsl_series;
    double qsl_target_trace = 0.0;
    bool has_qsl = false;

    std::size_t regularized_count = 0;  // replications with any flagged design
};

namespace detail {

struct ReplicationResult {
    std::array<double, 4> theta_scaled;
    std::array<double, 2> eta_scaled, zeta_scaled, nu_scaled;
    std::array<std::vector<double>, 4> rates;  // per estimator, per n
    std::vector<double> qsl;
    bool regularized = false;
};

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.replications < 1) throw std::invalid_argument("run_experiment: need replications >= 1");
    if (cfg.gens < 1) throw std::invalid_argument("run_experiment: need gens >= 1");
    const DerivedMoments m = derive_moments(cfg.spec);
    const HypothesisReport hyp = validate_hypotheses(m);
    if (!hyp.all_pass()) throw HypothesisFailure(hyp);

    const Vec4 theta_true{{m.a, m.c, m.b, m.d}};
    const Vec2 eta_true{{m.var_a, m.var_c}};
    const Vec2 zeta_true{{m.var_b, m.var_d}};
    const Vec2 nu_true{{m.rho_ab, m.rho_cd}};
    const double scale = std::sqrt(static_cast<double>(subtree_size(cfg.gens - 1)));

    std::vector<detail::ReplicationResult> results(cfg.replications);
    parallel_for_chunks(cfg.replications, cfg.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const TreeData tree = simulate_tree(cfg.spec, cfg.gens, cfg.base_seed, r);
            const std::vector<EstimateSet> path = estimate_path(tree, cfg.gens);
            detail::ReplicationResult& res = results[r];
            const EstimateSet& last = path.back();
            for (int i = 0; i < 4; ++i) res.theta_scaled[i] = scale * (last.theta[i] - theta_true[i]);
            for (int i = 0; i < 2; ++i) {
                res.eta_scaled[i] = scale * (last.eta[i] - eta_true[i]);
                res.zeta_scaled[i] = scale * (last.zeta[i] - zeta_true[i]);
                res.nu_scaled[i] = scale * (last.nu[i] - nu_true[i]);
            }
            for (auto& v : res.rates) v.resize(cfg.gens);
            std::vector<Vec4> thetas(cfg.gens);
            for (unsigned n = 1; n <= cfg.gens; ++n) {
                const EstimateSet& e = path[n - 1];
                const double tn = static_cast<double>(subtree_size(n - 1));
                res.rates[0][n - 1] = tn * (e.theta - theta_true).norm2() / n;
                res.rates[1][n - 1] = tn * (e.eta - eta_true).norm2() / n;
                res.rates[2][n - 1] = tn * (e.zeta - zeta_true).norm2() / n;
                res.rates[3][n - 1] = tn * (e.nu - nu_true).norm2() / n;
                thetas[n - 1] = e.theta;
                if (e.design.regularized) res.regularized = true;
            }
            if (cfg.qsl) res.qsl = qsl_statistic(thetas, cfg.qsl->lambda, theta_true);
        }
    });

    ExperimentReport rep;
    rep.gens = cfg.gens;
    rep.replications = cfg.replications;
    rep.theta_scaled.reserve(cfg.replications);
    for (const auto& r : results) {
        rep.theta_scaled.push_back(r.theta_scaled);
        rep.eta_scaled.push_back(r.eta_scaled);
        rep.zeta_scaled.push_back(r.zeta_scaled);
        rep.nu_scaled.push_back(r.nu_scaled);
        if (r.regularized) ++rep.regularized_count;
    }

    // empirical means and covariances of the scaled errors
    auto mean4 = [&](auto getter) {
        Vec4 out{};
        for (std::size_t i = 0; i < 4; ++i) {
            KahanSum s;
            for (const auto& r : results) s.add(getter(r)[i]);
            out[i] = s.value() / static_cast<double>(cfg.replications);
        }
        return out;
    };
    auto cov4 = [&](auto getter, const Vec4& mu) {
        Mat4 out{};
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i; j < 4; ++j) {
                KahanSum s;
                for (const auto& r : results) s.add((getter(r)[i] - mu[i]) * (getter(r)[j] - mu[j]));
                const double v = s.value() / static_cast<double>(cfg.replications - 1);
                out(i, j) = v;
                out(j, i) = v;
            }
        return out;
    };
    auto mean2 = [&](auto getter) {
        Vec2 out{};
        for (std::size_t i = 0; i < 2; ++i) {
            KahanSum s;
            for (const auto& r : results) s.add(getter(r)[i]);
            out[i] = s.value() / static_cast<double>(cfg.replications);
        }
        return out;
    };
    auto cov2 = [&](auto getter, const Vec2& mu) {
        Mat2 out{};
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = i; j < 2; ++j) {
                KahanSum s;
                for (const auto& r : results) s.add((getter(r)[i] - mu[i]) * (getter(r)[j] - mu[j]));
                const double v = s.value() / static_cast<double>(cfg.replications - 1);
                out(i, j) = v;
                out(j, i) = v;
            }
        return out;
    };
    if (cfg.replications >= 2) {
        rep.theta_mean = mean4([](const auto& r) { return r.theta_scaled; });
        rep.theta_cov = cov4([](const auto& r) { return r.theta_scaled; }, rep.theta_mean);
        rep.eta_mean = mean2([](const auto& r) { return r.eta_scaled; });
        rep.eta_cov = cov2([](const auto& r) { return r.eta_scaled; }, rep.eta_mean);
        rep.zeta_mean = mean2([](const auto& r) { return r.zeta_scaled; });
        rep.zeta_cov = cov2([](const auto& r) { return r.zeta_scaled; }, rep.zeta_mean);
        rep.nu_mean = mean2([](const auto& r) { return r.nu_scaled; });
        rep.nu_cov = cov2([](const auto& r) { return r.nu_scaled; }, rep.nu_mean);
    }

    // rate quartiles per n
    std::vector<double> buf(cfg.replications);
    for (int est = 0; est < 4; ++est) {
        rep.rate_series[est].resize(cfg.gens);
        for (unsigned n = 1; n <= cfg.gens; ++n) {
            for (std::size_t r = 0; r < cfg.replications; ++r) buf[r] = results[r].rates[est][n - 1];
            rep.rate_series[est][n - 1] = {quantile(buf, 0.5), quantile(buf, 0.25), quantile(buf, 0.75)};
        }
    }

    if (cfg.qsl) {
        rep.has_qsl = true;
        rep.qsl_target_trace = cfg.qsl->trace;
        rep.qsl_series.resize(cfg.gens);
        for (unsigned n = 1; n <= cfg.gens; ++n) {
            for (std::size_t r = 0; r < cfg.replications; ++r) buf[r] = results[r].qsl[n - 1];
            rep.qsl_series[n - 1] = quantile(buf, 0.5);
        }
    }

    if (cfg.clt && cfg.replications >= 100) {
        std::vector<double> flat;
        flat.reserve(cfg.replications * 4);
        auto run_battery = [&](std::size_t dim, const auto& rows, std::span<const double> cov) {
            flat.clear();
            for (const auto& row : rows)
                for (std::size_t j = 0; j < dim; ++j) flat.push_back(row[j]);
            const auto stats = normality_stats(flat, dim, cov);
            rep.normality.insert(rep.normality.end(), stats.begin(), stats.end());
        };
        std::array<double, 16> ct{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) ct[4 * i + j] = cfg.clt->cov_theta(i, j);
        run_battery(4, rep.theta_scaled, ct);
        std::array<double, 4> c2{};
        auto fill2 = [&](const Mat2& mt) {
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) c2[2 * i + j] = mt(i, j);
        };
        fill2(cfg.clt->cov_eta);
        run_battery(2, rep.eta_scaled, c2);
        fill2(cfg.clt->cov_zeta);
        run_battery(2, rep.zeta_scaled, c2);
        fill2(cfg.clt->cov_nu);
        run_battery(2, rep.nu_scaled, c2);
    }
    return rep;
}

}  // namespace rcbar
