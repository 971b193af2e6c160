#pragma once

// Generative model description and exact moment algebra.
//
// A coefficient pair (a_n, b_n) or noise pair (eps_2n, eps_2n+1) is built
// as (shared + left_extra, shared + right_extra) from three mutually
// independent components, each Normal, Exponential, or Constant.  That
// construction covers correlated sister pairs while keeping every moment
// the estimation theory needs in closed form.

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rcbar {

struct Normal {
    double mean = 0.0;
    double variance = 1.0;  // variance, not standard deviation
};

struct Exponential {
    double rate = 1.0;
};

struct Constant {
    double value = 0.0;
};

using ComponentDist = std::variant<Normal, Exponential, Constant>;

inline void validate_component(const ComponentDist& d) {
    if (const auto* n = std::get_if<Normal>(&d)) {
        if (!(n->variance > 0.0)) throw std::invalid_argument("normal: variance must be > 0");
    } else if (const auto* e = std::get_if<Exponential>(&d)) {
        if (!(e->rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
    }
}

struct ComponentMoments {
    double mean = 0.0;
    double var = 0.0;
    double mu3 = 0.0;  // third central
    double mu4 = 0.0;  // fourth central
};

inline ComponentMoments component_moments(const ComponentDist& d) {
    ComponentMoments m;
    if (const auto* n = std::get_if<Normal>(&d)) {
        m.mean = n->mean;
        m.var = n->variance;
        m.mu3 = 0.0;
        m.mu4 = 3.0 * n->variance * n->variance;
    } else if (const auto* e = std::get_if<Exponential>(&d)) {
        const double inv = 1.0 / e->rate;
        m.mean = inv;
        m.var = inv * inv;
        m.mu3 = 2.0 * inv * inv * inv;
        m.mu4 = 9.0 * inv * inv * inv * inv;
    } else {
        m.mean = std::get<Constant>(d).value;
    }
    return m;
}

struct PairSpec {
    ComponentDist shared;
    ComponentDist left_extra;
    ComponentDist right_extra;
};

struct ModelSpec {
    PairSpec coeff;  // distribution of (a_n, b_n)
    PairSpec noise;  // distribution of (eps_2n, eps_2n+1)
    ComponentDist root;

    void validate() const {
        validate_component(coeff.shared);
        validate_component(coeff.left_extra);
        validate_component(coeff.right_extra);
        validate_component(noise.shared);
        validate_component(noise.left_extra);
        validate_component(noise.right_extra);
        validate_component(root);
    }
};

// Every moment used by the estimators, limit matrices, and hypothesis
// checks, derived exactly from a ModelSpec (no sampling involved).
struct DerivedMoments {
    // means; theta in vec order is (a, c, b, d)
    double a = 0, b = 0, c = 0, d = 0;
    // conditional variances
    double var_a = 0, var_b = 0, var_c = 0, var_d = 0;
    // sister-pair cross moments
    double rho_ab = 0, rho_cd = 0;
    // third central moments of the four marginals
    double mu3_a = 0, mu3_b = 0, mu3_c = 0, mu3_d = 0;
    // fourth central moments
    double mu4_a = 0, mu4_b = 0, mu4_c = 0, mu4_d = 0;
    // mixed fourth moments E[(a-a)^2 (b-b)^2], E[(eps_e-c)^2 (eps_o-d)^2]
    double nu2_ab = 0, nu2_cd = 0;

    double raw2_a() const { return a * a + var_a; }
    double raw2_b() const { return b * b + var_b; }
    double raw2_c() const { return c * c + var_c; }
    double raw2_d() const { return d * d + var_d; }

    static double raw4(double mean, double var, double mu3, double mu4) {
        return mu4 + 4.0 * mu3 * mean + 6.0 * var * mean * mean +
               mean * mean * mean * mean;
    }
    double raw4_c() const { return raw4(c, var_c, mu3_c, mu4_c); }
    double raw4_d() const { return raw4(d, var_d, mu3_d, mu4_d); }

    // conditional second-moment polynomials in the parent value
    double poly_p(double x) const { return var_a * x * x + var_c; }
    double poly_q(double x) const { return rho_ab * x * x + rho_cd; }
    double poly_r(double x) const { return var_b * x * x + var_d; }

    // Var[V_{2k}^2 | X_k] and Var[V_{2k+1}^2 | X_k]
    double var_v_even_sq(double x) const {
        const double x2 = x * x;
        return (mu4_a - var_a * var_a) * x2 * x2 + 4.0 * var_a * var_c * x2 +
               (mu4_c - var_c * var_c);
    }
    double var_v_odd_sq(double x) const {
        const double x2 = x * x;
        return (mu4_b - var_b * var_b) * x2 * x2 + 4.0 * var_b * var_d * x2 +
               (mu4_d - var_d * var_d);
    }
    // Var[V_{2k} V_{2k+1} | X_k]
    double var_v_cross(double x) const {
        const double x2 = x * x;
        return (nu2_ab - rho_ab * rho_ab) * x2 * x2 +
               (var_a * var_d + var_b * var_c + 2.0 * rho_ab * rho_cd) * x2 +
               (nu2_cd - rho_cd * rho_cd);
    }
};

namespace detail {

struct PairMoments {
    double mean_l, mean_r, var_l, var_r, rho, mu3_l, mu3_r, mu4_l, mu4_r, nu2;
};

// Closed forms for (shared + left, shared + right) with independent parts:
//   mu4(U+V)  = mu4(U) + 6 var(U) var(V) + mu4(V)
//   nu2       = mu4(shared) + var(shared)(var(l)+var(r)) + var(l) var(r)
inline PairMoments pair_moments(const PairSpec& p) {
    const ComponentMoments s = component_moments(p.shared);
    const ComponentMoments l = component_moments(p.left_extra);
    const ComponentMoments r = component_moments(p.right_extra);
    PairMoments out;
    out.mean_l = s.mean + l.mean;
    out.mean_r = s.mean + r.mean;
    out.var_l = s.var + l.var;
    out.var_r = s.var + r.var;
    out.rho = s.var;
    out.mu3_l = s.mu3 + l.mu3;
    out.mu3_r = s.mu3 + r.mu3;
    out.mu4_l = s.mu4 + 6.0 * s.var * l.var + l.mu4;
    out.mu4_r = s.mu4 + 6.0 * s.var * r.var + r.mu4;
    out.nu2 = s.mu4 + s.var * (l.var + r.var) + l.var * r.var;
    return out;
}

}  // namespace detail

inline DerivedMoments derive_moments(const ModelSpec& spec) {
    spec.validate();
    const detail::PairMoments cf = detail::pair_moments(spec.coeff);
    const detail::PairMoments nz = detail::pair_moments(spec.noise);
    DerivedMoments m;
    m.a = cf.mean_l;
    m.b = cf.mean_r;
    m.var_a = cf.var_l;
    m.var_b = cf.var_r;
    m.rho_ab = cf.rho;
    m.mu3_a = cf.mu3_l;
    m.mu3_b = cf.mu3_r;
    m.mu4_a = cf.mu4_l;
    m.mu4_b = cf.mu4_r;
    m.nu2_ab = cf.nu2;
    m.c = nz.mean_l;
    m.d = nz.mean_r;
    m.var_c = nz.var_l;
    m.var_d = nz.var_r;
    m.rho_cd = nz.rho;
    m.mu3_c = nz.mu3_l;
    m.mu3_d = nz.mu3_r;
    m.mu4_c = nz.mu4_l;
    m.mu4_d = nz.mu4_r;
    m.nu2_cd = nz.nu2;
    return m;
}

struct HypothesisCheck {
    std::string id;
    bool pass = false;
    std::string detail;
};

struct HypothesisReport {
    std::array<HypothesisCheck, 5> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace detail

// Moment hypotheses for the asymptotic theory.  Failures are report
// entries, not exceptions.
inline HypothesisReport validate_hypotheses(const DerivedMoments& m) {
    HypothesisReport rep;

    {
        auto& h = rep.checks[0];
        h.id = "H1";
        const double ea2 = m.raw2_a();
        const double eb2 = m.raw2_b();
        h.pass = ea2 < 1.0 && eb2 < 1.0;
        h.detail = "E[a^2]=" + detail::num(ea2) + " E[b^2]=" + detail::num(eb2) + " (need both < 1)";
    }
    {
        auto& h = rep.checks[1];
        h.id = "H2";
        h.pass = m.var_c > 0.0 && m.var_d > 0.0;
        h.detail = "sigma_c^2=" + detail::num(m.var_c) + " sigma_d^2=" + detail::num(m.var_d) +
                   " (need both > 0)";
    }
    {
        auto& h = rep.checks[2];
        h.id = "H3";
        const bool cd = m.rho_cd * m.rho_cd < m.var_c * m.var_d;
        const bool ab = m.rho_ab * m.rho_ab <= m.var_a * m.var_b;
        h.pass = cd && ab;
        h.detail = "rho_cd^2=" + detail::num(m.rho_cd * m.rho_cd) + " vs " +
                   detail::num(m.var_c * m.var_d) + " (strict); rho_ab^2=" +
                   detail::num(m.rho_ab * m.rho_ab) + " vs " + detail::num(m.var_a * m.var_b);
    }
    {
        auto& h = rep.checks[3];
        h.id = "H4";
        const bool fourth = m.mu4_a >= m.var_a * m.var_a && m.mu4_b >= m.var_b * m.var_b &&
                            m.mu4_c > m.var_c * m.var_c && m.mu4_d > m.var_d * m.var_d;
        const bool mixed = m.nu2_ab >= m.rho_ab * m.rho_ab && m.nu2_cd > m.rho_cd * m.rho_cd;
        const bool raw = m.raw4_c() > m.raw2_c() * m.raw2_c() &&
                         m.raw4_d() > m.raw2_d() * m.raw2_d();
        h.pass = fourth && mixed && raw;
        h.detail = "mu4 vs sigma^4 " + std::string(fourth ? "ok" : "violated") +
                   "; nu^2 vs rho^2 " + std::string(mixed ? "ok" : "violated") +
                   "; E[eps^4] > E[eps^2]^2 " + std::string(raw ? "ok" : "violated");
    }
    {
        auto& h = rep.checks[4];
        h.id = "H5";
        // Normal / Exponential / Constant components have every moment
        // finite, so a moment of order > 4 always exists.
        h.pass = true;
        h.detail = "all supported families have finite moments of every order";
    }
    return rep;
}

// --- absolute-moment helpers for the tail-series truncation bound ---

namespace detail {

enum class MarginalClass { normal_sum, nonnegative, general };

inline MarginalClass classify_pairwise(const ComponentDist& x, const ComponentDist& y) {
    const bool all_normalish = (std::holds_alternative<Normal>(x) || std::holds_alternative<Constant>(x)) &&
                               (std::holds_alternative<Normal>(y) || std::holds_alternative<Constant>(y));
    if (all_normalish) return MarginalClass::normal_sum;
    auto nonneg = [](const ComponentDist& d) {
        if (std::holds_alternative<Exponential>(d)) return true;
        if (const auto* c = std::get_if<Constant>(&d)) return c->value >= 0.0;
        return false;
    };
    if (nonneg(x) && nonneg(y)) return MarginalClass::nonnegative;
    return MarginalClass::general;
}

inline double folded_normal_mean(double mean, double var) {
    if (var <= 0.0) return std::abs(mean);
    const double sd = std::sqrt(var);
    return sd * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mean * mean / (2.0 * var)) +
           mean * std::erf(mean / (sd * std::numbers::sqrt2));
}

}  // namespace detail

// E|shared + extra|, exact when the marginal is a (possibly shifted)
// normal or almost surely nonnegative, otherwise the Cauchy-Schwarz
// bound sqrt(E[(shared+extra)^2]).
inline double marginal_abs_mean_bound(const ComponentDist& shared, const ComponentDist& extra) {
    const ComponentMoments s = component_moments(shared);
    const ComponentMoments e = component_moments(extra);
    const double mean = s.mean + e.mean;
    const double var = s.var + e.var;
    switch (detail::classify_pairwise(shared, extra)) {
        case detail::MarginalClass::normal_sum:
            return detail::folded_normal_mean(mean, var);
        case detail::MarginalClass::nonnegative:
            return mean;
        case detail::MarginalClass::general:
            break;
    }
    if (var == 0.0) return std::abs(mean);
    return std::sqrt(mean * mean + var);
}

inline double marginal_raw2(const ComponentDist& shared, const ComponentDist& extra) {
    const ComponentMoments s = component_moments(shared);
    const ComponentMoments e = component_moments(extra);
    const double mean = s.mean + e.mean;
    return mean * mean + s.var + e.var;
}

}  // namespace rcbar
