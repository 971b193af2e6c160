#pragma once

// Asymptotic objects of the RCBAR estimation theory:
//
//  * closed-form mean/variance of the tail variable T (the weak limit of
//    the process along a uniformly random branch),
//  * the limit matrices C, Lambda = I2 (x) C, L, D, M_ac, M_bd, H and the
//    CLT covariances built from them, evaluated by Monte Carlo over T
//    samples (no closed form exists for E[f(T)]),
//  * the normalized martingale bracket <M>_n / |T_{n-1}| as an empirical
//    convergence diagnostic against L.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rcbar/mat.hpp"
#include "rcbar/model.hpp"
#include "rcbar/simulate.hpp"
#include "rcbar/tree.hpp"

namespace rcbar {

struct TailMoments {
    double mean = 0.0;
    double second_moment = 0.0;
    double variance = 0.0;
};

// Exact evaluation of
//   E[T]   = (c+d) / (2-(a+b))
//   E[T^2] = (s_c+s_d+c^2+d^2)/(2-s) + 2(ac+bd)(c+d)/((2-s)(2-(a+b)))
// with s = s_a+s_b+a^2+b^2.  Requires E[a^2],E[b^2] < 1 and 2-s > 0.
inline TailMoments tail_moments(const DerivedMoments& m) {
    const double mean_denom = 2.0 - (m.a + m.b);
    if (!(m.raw2_a() < 1.0) || !(m.raw2_b() < 1.0) || !(mean_denom > 0.0))
        throw std::domain_error("tail_moments: contraction hypothesis fails (E[a^2] or E[b^2] >= 1)");
    const double s = m.var_a + m.var_b + m.a * m.a + m.b * m.b;
    const double sq_denom = 2.0 - s;
    if (!(sq_denom > 0.0))
        throw std::domain_error("tail_moments: second moment of T is infinite (2 - E[a^2] - E[b^2] <= 0)");
    TailMoments t;
    t.mean = (m.c + m.d) / mean_denom;
    t.second_moment = (m.var_c + m.var_d + m.c * m.c + m.d * m.d) / sq_denom +
                      2.0 * (m.a * m.c + m.b * m.d) * (m.c + m.d) / (sq_denom * mean_denom);
    t.variance = t.second_moment - t.mean * t.mean;
    return t;
}

struct LimitMatrices {
    Mat2 c{};     // E[(1/(1+T^2)) [[T^2,T],[T,1]]]
    Mat4 lambda{};  // I2 (x) C
    Mat4 l{};     // lim <M>_n / |T_{n-1}|
    Mat2 d{};     // E[(1/(1+T^2)^2) [[T^4,T^2],[T^2,1]]]
    Mat2 m_ac{}, m_bd{}, h{};

    // CLT covariances; absent when T is degenerate.
    std::optional<Mat4> cov_theta;
    std::optional<Mat2> cov_eta, cov_zeta, cov_nu;

    // per-entry Monte Carlo standard errors (batch means)
    Mat2 c_se{}, d_se{}, m_ac_se{}, m_bd_se{}, h_se{};
    Mat4 l_se{};
    Mat4 cov_theta_se{};
    Mat2 cov_eta_se{}, cov_zeta_se{}, cov_nu_se{};

    std::size_t sample_count = 0;

    // tr(Lambda^{-1/2} L Lambda^{-1/2}) = tr(Lambda^{-1} L), the quadratic
    // strong law limit.
    double qsl_trace() const { return (lambda_inverse() * l).trace(); }

    Mat4 lambda_inverse() const { return kron2(Mat2::identity(), inverse(c)); }
};

namespace detail {

struct MatrixSums {
    // unique entries of the symmetric accumulands
    KahanSum c00, c01, c11;
    KahanSum d00, d01, d11;
    KahanSum mac00, mac01, mac11;
    KahanSum mbd00, mbd01, mbd11;
    KahanSum h00, h01, h11;
    KahanSum l[4][4];
    std::size_t count = 0;

    void add(const DerivedMoments& m, double t) {
        const double t2 = t * t;
        const double w1 = 1.0 / (1.0 + t2);
        const double w2 = w1 * w1;
        const double w4 = w2 * w2;
        c00.add(w1 * t2);
        c01.add(w1 * t);
        c11.add(w1);
        d00.add(w2 * t2 * t2);
        d01.add(w2 * t2);
        d11.add(w2);
        const double pa = m.var_v_even_sq(t) * w4;
        const double pb = m.var_v_odd_sq(t) * w4;
        const double ph = m.var_v_cross(t) * w4;
        mac00.add(pa * t2 * t2);
        mac01.add(pa * t2);
        mac11.add(pa);
        mbd00.add(pb * t2 * t2);
        mbd01.add(pb * t2);
        mbd11.add(pb);
        h00.add(ph * t2 * t2);
        h01.add(ph * t2);
        h11.add(ph);
        const double gamma[2][2] = {{m.poly_p(t), m.poly_q(t)}, {m.poly_q(t), m.poly_r(t)}};
        const double outer[2][2] = {{t2, t}, {t, 1.0}};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int q = 0; q < 2; ++q)
                        l[2 * i + k][2 * j + q].add(w2 * gamma[i][j] * outer[k][q]);
        ++count;
    }

    struct Averages {
        Mat2 c, d, mac, mbd, h;
        Mat4 l;
    };

    Averages average() const {
        const double inv = 1.0 / static_cast<double>(count);
        Averages a;
        a.c = Mat2::of(c00.value() * inv, c01.value() * inv, c01.value() * inv, c11.value() * inv);
        a.d = Mat2::of(d00.value() * inv, d01.value() * inv, d01.value() * inv, d11.value() * inv);
        a.mac = Mat2::of(mac00.value() * inv, mac01.value() * inv, mac01.value() * inv,
                         mac11.value() * inv);
        a.mbd = Mat2::of(mbd00.value() * inv, mbd01.value() * inv, mbd01.value() * inv,
                         mbd11.value() * inv);
        a.h = Mat2::of(h00.value() * inv, h01.value() * inv, h01.value() * inv, h11.value() * inv);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) a.l(i, j) = l[i][j].value() * inv;
        return a;
    }
};

struct DerivedFromAverages {
    Mat4 cov_theta;
    Mat2 cov_eta, cov_zeta, cov_nu;
};

inline DerivedFromAverages derived_covariances(const MatrixSums::Averages& a) {
    const Mat4 lam_inv = kron2(Mat2::identity(), inverse(a.c));
    const Mat2 d_inv = inverse(a.d);
    DerivedFromAverages out;
    out.cov_theta = lam_inv * a.l * lam_inv;
    out.cov_eta = d_inv * a.mac * d_inv;
    out.cov_zeta = d_inv * a.mbd * d_inv;
    out.cov_nu = d_inv * a.h * d_inv;
    return out;
}

}  // namespace detail

// Monte Carlo limit matrices from i.i.d. T samples.  Standard errors come
// from 32 batch means; the CLT covariances are computed when C and D are
// invertible and skipped when the samples are degenerate.  Non-finite
// samples or an indefinite sample matrix signal broken sampling and throw.
inline LimitMatrices limit_matrices(const DerivedMoments& m, std::span<const double> t_samples,
                                    std::size_t batches = 32) {
    if (t_samples.size() < 2) throw std::invalid_argument("limit_matrices: need at least 2 samples");
    batches = std::max<std::size_t>(2, std::min(batches, t_samples.size()));

    detail::MatrixSums full;
    std::vector<detail::MatrixSums> per_batch(batches);
    double t_min = t_samples[0], t_max = t_samples[0];
    for (std::size_t i = 0; i < t_samples.size(); ++i) {
        const double t = t_samples[i];
        if (!std::isfinite(t)) throw std::domain_error("limit_matrices: non-finite T sample");
        t_min = std::min(t_min, t);
        t_max = std::max(t_max, t);
        full.add(m, t);
        per_batch[i * batches / t_samples.size()].add(m, t);
    }

    const auto avg = full.average();
    LimitMatrices out;
    out.c = avg.c;
    out.d = avg.d;
    out.m_ac = avg.mac;
    out.m_bd = avg.mbd;
    out.h = avg.h;
    out.l = avg.l;
    out.lambda = kron2(Mat2::identity(), avg.c);
    out.sample_count = t_samples.size();

    std::vector<detail::MatrixSums::Averages> batch_avgs;
    batch_avgs.reserve(batches);
    for (const auto& b : per_batch)
        if (b.count > 0) batch_avgs.push_back(b.average());
    const double nb = static_cast<double>(batch_avgs.size());

    auto se2 = [&](auto getter) {
        Mat2 mean{}, se{};
        for (const auto& b : batch_avgs) mean = mean + getter(b);
        mean = mean * (1.0 / nb);
        for (const auto& b : batch_avgs) {
            const Mat2 d = getter(b) - mean;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) se(i, j) += d(i, j) * d(i, j);
        }
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) se(i, j) = std::sqrt(se(i, j) / (nb - 1.0) / nb);
        return se;
    };
    auto se4 = [&](auto getter) {
        Mat4 mean{}, se{};
        for (const auto& b : batch_avgs) mean = mean + getter(b);
        mean = mean * (1.0 / nb);
        for (const auto& b : batch_avgs) {
            const Mat4 d = getter(b) - mean;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) se(i, j) += d(i, j) * d(i, j);
        }
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) se(i, j) = std::sqrt(se(i, j) / (nb - 1.0) / nb);
        return se;
    };

    using Avg = detail::MatrixSums::Averages;
    out.c_se = se2([](const Avg& a) { return a.c; });
    out.d_se = se2([](const Avg& a) { return a.d; });
    out.m_ac_se = se2([](const Avg& a) { return a.mac; });
    out.m_bd_se = se2([](const Avg& a) { return a.mbd; });
    out.h_se = se2([](const Avg& a) { return a.h; });
    out.l_se = se4([](const Avg& a) { return a.l; });

    const bool degenerate = !(t_max > t_min);
    if (!degenerate) {
        if (!is_positive_definite(out.c) || !is_positive_definite(out.d))
            throw std::domain_error(
                "limit_matrices: sample C or D is not positive definite despite non-degenerate "
                "samples; T sampling looks broken");
        const auto cov = detail::derived_covariances(avg);
        out.cov_theta = cov.cov_theta;
        out.cov_eta = cov.cov_eta;
        out.cov_zeta = cov.cov_zeta;
        out.cov_nu = cov.cov_nu;

        bool batches_ok = true;
        for (const auto& b : batch_avgs)
            if (!is_positive_definite(b.c) || !is_positive_definite(b.d)) batches_ok = false;
        if (batches_ok) {
            std::vector<detail::DerivedFromAverages> dcov;
            dcov.reserve(batch_avgs.size());
            for (const auto& b : batch_avgs) dcov.push_back(detail::derived_covariances(b));
            Mat4 mean4{};
            Mat2 me{}, mz{}, mn{};
            for (const auto& d : dcov) {
                mean4 = mean4 + d.cov_theta;
                me = me + d.cov_eta;
                mz = mz + d.cov_zeta;
                mn = mn + d.cov_nu;
            }
            mean4 = mean4 * (1.0 / nb);
            me = me * (1.0 / nb);
            mz = mz * (1.0 / nb);
            mn = mn * (1.0 / nb);
            Mat4 s4{};
            Mat2 se{}, sz{}, sn{};
            for (const auto& d : dcov) {
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) {
                        const double dd = d.cov_theta(i, j) - mean4(i, j);
                        s4(i, j) += dd * dd;
                    }
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        double dd = d.cov_eta(i, j) - me(i, j);
                        se(i, j) += dd * dd;
                        dd = d.cov_zeta(i, j) - mz(i, j);
                        sz(i, j) += dd * dd;
                        dd = d.cov_nu(i, j) - mn(i, j);
                        sn(i, j) += dd * dd;
                    }
            }
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) out.cov_theta_se(i, j) = std::sqrt(s4(i, j) / (nb - 1.0) / nb);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    out.cov_eta_se(i, j) = std::sqrt(se(i, j) / (nb - 1.0) / nb);
                    out.cov_zeta_se(i, j) = std::sqrt(sz(i, j) / (nb - 1.0) / nb);
                    out.cov_nu_se(i, j) = std::sqrt(sn(i, j) / (nb - 1.0) / nb);
                }
        }
    }
    return out;
}

// <M>_n / |T_{n-1}| from observed values and true moment parameters:
//   <M>_n = sum_{g<n} sum_{i in G_g} (1/c_i^2)
//             [[P(X_i),Q(X_i)],[Q(X_i),R(X_i)]] (x) [[X_i^2,X_i],[X_i,1]].
inline Mat4 martingale_bracket(const TreeData& t, const DerivedMoments& m, unsigned n) {
    if (n < 1) throw std::invalid_argument("martingale_bracket: need n >= 1");
    if (t.shape.max_generation < n - 1)
        throw std::invalid_argument("martingale_bracket: tree does not cover the requested generations");
    KahanSum acc[4][4];
    const std::uint64_t parents = subtree_size(n - 1);
    for (NodeIndex k = 1; k <= parents; ++k) {
        const double x = t.x[k - 1];
        const double x2 = x * x;
        const double c = 1.0 + x2;
        const double w = 1.0 / (c * c);
        const double gamma[2][2] = {{m.poly_p(x), m.poly_q(x)}, {m.poly_q(x), m.poly_r(x)}};
        const double outer[2][2] = {{x2, x}, {x, 1.0}};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        acc[2 * i + a][2 * j + b].add(w * gamma[i][j] * outer[a][b]);
    }
    Mat4 out;
    const double inv = 1.0 / static_cast<double>(parents);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out(i, j) = acc[i][j].value() * inv;
    return out;
}

}  // namespace rcbar
