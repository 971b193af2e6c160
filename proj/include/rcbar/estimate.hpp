#pragma once

// Weighted least-squares estimators for the RCBAR parameters.
//
// The mean parameters theta = (a, c, b, d) solve two weighted 2x2 normal
// systems with node weights 1/c_k, c_k = 1 + X_k^2; the variance and
// covariance parameters (sigma_a^2, sigma_c^2), (sigma_b^2, sigma_d^2),
// (rho_ab, rho_cd) regress squared and crossed residuals with weights
// 1/d_k, d_k = c_k^2.  Estimation at generation n always sums over the
// parents in the sub-tree up to generation n-1.
//
// The estimators only ever read (parent, even child, odd child) triples,
// which is also the entry point the symmetry tests use.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rcbar/mat.hpp"
#include "rcbar/simulate.hpp"
#include "rcbar/tree.hpp"

namespace rcbar {

struct ChildTriple {
    double parent;
    double even;
    double odd;
};

inline std::vector<ChildTriple> regression_triples(const TreeData& t, unsigned n) {
    if (n < 1) throw std::invalid_argument("estimate: generation count must be >= 1");
    if (t.shape.max_generation < n)
        throw std::invalid_argument("estimate: tree does not cover the requested generations");
    const std::uint64_t parents = subtree_size(n - 1);
    std::vector<ChildTriple> out(parents);
    for (NodeIndex k = 1; k <= parents; ++k)
        out[k - 1] = {t.x[k - 1], t.x[2 * k - 1], t.x[2 * k]};
    return out;
}

struct DesignMatrices {
    Mat2 s{};  // sum (1/c_k) Phi_k Phi_k^t,  Phi_k = (X_k, 1)
    Mat2 q{};  // sum (1/d_k) psi_k psi_k^t,  psi_k = (X_k^2, 1)
    bool regularized = false;
};

namespace detail {

// Singularity rule: past this condition number the 2x2 identity is added
// once and the fit is flagged.
inline constexpr double kMaxDesignCondition = 1e12;

inline Mat2 regularize_if_needed(Mat2 m, bool& flag) {
    if (!is_well_conditioned(m, kMaxDesignCondition)) {
        m = m + Mat2::identity();
        flag = true;
    }
    return m;
}

}  // namespace detail

struct ThetaFit {
    Vec4 theta;  // (a_hat, c_hat, b_hat, d_hat)
    Mat2 s;      // design matrix actually used (post-regularization)
    bool regularized = false;
};

inline ThetaFit wls_theta(std::span<const ChildTriple> triples) {
    if (triples.empty()) throw std::invalid_argument("wls_theta: no regression triples");
    KahanSum s00, s01, s11, re0, re1, ro0, ro1;
    for (const ChildTriple& tr : triples) {
        const double w = 1.0 / (1.0 + tr.parent * tr.parent);
        s00.add(w * tr.parent * tr.parent);
        s01.add(w * tr.parent);
        s11.add(w);
        re0.add(w * tr.even * tr.parent);
        re1.add(w * tr.even);
        ro0.add(w * tr.odd * tr.parent);
        ro1.add(w * tr.odd);
    }
    ThetaFit fit;
    Mat2 s = Mat2::of(s00.value(), s01.value(), s01.value(), s11.value());
    fit.s = detail::regularize_if_needed(s, fit.regularized);
    const Vec2 ac = solve(fit.s, {{re0.value(), re1.value()}});
    const Vec2 bd = solve(fit.s, {{ro0.value(), ro1.value()}});
    fit.theta = {{ac[0], ac[1], bd[0], bd[1]}};
    return fit;
}

inline ThetaFit wls_theta(const TreeData& t, unsigned n) {
    const auto triples = regression_triples(t, n);
    return wls_theta(triples);
}

// Residual pairs (V_hat_{2k}, V_hat_{2k+1}) for the parents covered by a
// fit, in label order.
inline NoisePairs residuals(std::span<const ChildTriple> triples, const Vec4& theta) {
    NoisePairs r;
    r.even.resize(triples.size());
    r.odd.resize(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
        r.even[i] = triples[i].even - theta[0] * triples[i].parent - theta[1];
        r.odd[i] = triples[i].odd - theta[2] * triples[i].parent - theta[3];
    }
    return r;
}

inline NoisePairs residuals(const TreeData& t, unsigned n, const Vec4& theta) {
    const auto triples = regression_triples(t, n);
    return residuals(triples, theta);
}

struct SecondMomentFit {
    Vec2 eta;   // (sigma_a^2, sigma_c^2)
    Vec2 zeta;  // (sigma_b^2, sigma_d^2)
    Vec2 nu;    // (rho_ab, rho_cd)
    Mat2 q;
    bool regularized = false;
};

inline SecondMomentFit wls_second_moments(std::span<const ChildTriple> triples,
                                          const NoisePairs& resid) {
    if (triples.size() != resid.even.size() || triples.size() != resid.odd.size())
        throw std::invalid_argument("wls_second_moments: residual/triple size mismatch");
    if (triples.empty()) throw std::invalid_argument("wls_second_moments: no regression triples");
    KahanSum q00, q01, q11, e0, e1, z0, z1, n0, n1;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const double x2 = triples[i].parent * triples[i].parent;
        const double c = 1.0 + x2;
        const double u = 1.0 / (c * c);
        const double ve2 = resid.even[i] * resid.even[i];
        const double vo2 = resid.odd[i] * resid.odd[i];
        const double veo = resid.even[i] * resid.odd[i];
        q00.add(u * x2 * x2);
        q01.add(u * x2);
        q11.add(u);
        e0.add(u * ve2 * x2);
        e1.add(u * ve2);
        z0.add(u * vo2 * x2);
        z1.add(u * vo2);
        n0.add(u * veo * x2);
        n1.add(u * veo);
    }
    SecondMomentFit fit;
    Mat2 q = Mat2::of(q00.value(), q01.value(), q01.value(), q11.value());
    fit.q = detail::regularize_if_needed(q, fit.regularized);
    fit.eta = solve(fit.q, {{e0.value(), e1.value()}});
    fit.zeta = solve(fit.q, {{z0.value(), z1.value()}});
    fit.nu = solve(fit.q, {{n0.value(), n1.value()}});
    return fit;
}

inline SecondMomentFit wls_variances(const TreeData& t, const NoisePairs& resid, unsigned n) {
    const auto triples = regression_triples(t, n);
    return wls_second_moments(triples, resid);
}

inline Vec2 wls_covariance(const TreeData& t, const NoisePairs& resid, unsigned n) {
    return wls_variances(t, resid, n).nu;
}

struct EstimateSet {
    Vec4 theta;
    Vec2 eta, zeta, nu;
    DesignMatrices design;
    unsigned n = 0;
};

inline EstimateSet estimate_at(const TreeData& t, unsigned n) {
    const auto triples = regression_triples(t, n);
    const ThetaFit tf = wls_theta(triples);
    const NoisePairs resid = residuals(triples, tf.theta);
    const SecondMomentFit sf = wls_second_moments(triples, resid);
    EstimateSet e;
    e.theta = tf.theta;
    e.eta = sf.eta;
    e.zeta = sf.zeta;
    e.nu = sf.nu;
    e.design = {tf.s, sf.q, tf.regularized || sf.regularized};
    e.n = n;
    return e;
}

// Estimates for every n in 1..n_max on one tree.  The design sums grow
// generation by generation; only the residual regressions need a fresh
// pass per n because the residuals depend on theta_hat_n.
inline std::vector<EstimateSet> estimate_path(const TreeData& t, unsigned n_max) {
    if (n_max < 1) throw std::invalid_argument("estimate_path: need n_max >= 1");
    if (t.shape.max_generation < n_max)
        throw std::invalid_argument("estimate_path: tree does not cover the requested generations");
    std::vector<EstimateSet> out;
    out.reserve(n_max);
    KahanSum s00, s01, s11, re0, re1, ro0, ro1, q00, q01, q11;
    for (unsigned n = 1; n <= n_max; ++n) {
        const auto [g_first, g_last] = generation_range(n - 1);
        for (NodeIndex k = g_first; k <= g_last; ++k) {
            const double x = t.x[k - 1];
            const double x2 = x * x;
            const double c = 1.0 + x2;
            const double w = 1.0 / c;
            const double u = w * w;
            s00.add(w * x2);
            s01.add(w * x);
            s11.add(w);
            re0.add(w * t.x[2 * k - 1] * x);
            re1.add(w * t.x[2 * k - 1]);
            ro0.add(w * t.x[2 * k] * x);
            ro1.add(w * t.x[2 * k]);
            q00.add(u * x2 * x2);
            q01.add(u * x2);
            q11.add(u);
        }

        EstimateSet e;
        e.n = n;
        bool reg_s = false, reg_q = false;
        Mat2 s = Mat2::of(s00.value(), s01.value(), s01.value(), s11.value());
        s = detail::regularize_if_needed(s, reg_s);
        const Vec2 ac = solve(s, {{re0.value(), re1.value()}});
        const Vec2 bd = solve(s, {{ro0.value(), ro1.value()}});
        e.theta = {{ac[0], ac[1], bd[0], bd[1]}};

        KahanSum e0, e1, z0, z1, n0, n1;
        const std::uint64_t parents = subtree_size(n - 1);
        for (NodeIndex k = 1; k <= parents; ++k) {
            const double x = t.x[k - 1];
            const double x2 = x * x;
            const double c = 1.0 + x2;
            const double u = 1.0 / (c * c);
            const double ve = t.x[2 * k - 1] - e.theta[0] * x - e.theta[1];
            const double vo = t.x[2 * k] - e.theta[2] * x - e.theta[3];
            e0.add(u * ve * ve * x2);
            e1.add(u * ve * ve);
            z0.add(u * vo * vo * x2);
            z1.add(u * vo * vo);
            n0.add(u * ve * vo * x2);
            n1.add(u * ve * vo);
        }
        Mat2 q = Mat2::of(q00.value(), q01.value(), q01.value(), q11.value());
        q = detail::regularize_if_needed(q, reg_q);
        e.eta = solve(q, {{e0.value(), e1.value()}});
        e.zeta = solve(q, {{z0.value(), z1.value()}});
        e.nu = solve(q, {{n0.value(), n1.value()}});
        e.design = {s, q, reg_s || reg_q};
        out.push_back(e);
    }
    return out;
}

}  // namespace rcbar
