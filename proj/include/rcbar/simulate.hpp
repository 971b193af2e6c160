#pragma once

// Simulation of RCBAR trees, randomized single-branch paths, and i.i.d.
// samples of the tail variable T.
//
// Tree draws are addressed per node: node k owns the counter positions
// 8k..8k+7 of its (seed, stream) pair, with one position slot per model
// component.  Any node's coefficients and noises can therefore be
// recomputed without replaying the rest of the tree, and replications
// simulate concurrently without sharing RNG state.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rcbar/model.hpp"
#include "rcbar/parallel.hpp"
#include "rcbar/rng.hpp"
#include "rcbar/tree.hpp"

namespace rcbar {

namespace detail {

// Per-node position slots.
enum NodeSlot : unsigned {
    slot_coeff_shared = 0,
    slot_coeff_left = 1,
    slot_coeff_right = 2,
    slot_noise_shared = 3,
    slot_noise_left = 4,
    slot_noise_right = 5,
    slot_kappa = 6,
    slot_root = 7,
};

inline double normal_from_block(const RandomBlock& blk, double mean, double variance) {
    const double u1 = unit_double(blk.a);
    const double u2 = unit_double(blk.b);
    return mean + std::sqrt(variance) * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
}

// One component draw from one block; constants consume their slot
// without touching the generator.
inline double sample_component(const ComponentDist& d, std::uint64_t seed, std::uint64_t stream,
                               NodeIndex node, unsigned slot) {
    if (const auto* c = std::get_if<Constant>(&d)) return c->value;
    const RandomBlock blk = philox_block(seed, stream, node * 8 + slot);
    if (const auto* n = std::get_if<Normal>(&d)) return normal_from_block(blk, n->mean, n->variance);
    return -std::log(unit_double(blk.a)) / std::get<Exponential>(d).rate;
}

inline double sample_component(const ComponentDist& d, RngStream& rng) {
    if (const auto* c = std::get_if<Constant>(&d)) return c->value;
    if (const auto* n = std::get_if<Normal>(&d)) return n->mean + std::sqrt(n->variance) * rng.normal();
    return rng.exponential(std::get<Exponential>(d).rate);
}

struct NodeDraws {
    double a, b, eps_even, eps_odd;
};

inline NodeDraws draw_node(const ModelSpec& spec, std::uint64_t seed, std::uint64_t stream,
                           NodeIndex k) {
    const double cs = sample_component(spec.coeff.shared, seed, stream, k, slot_coeff_shared);
    const double cl = sample_component(spec.coeff.left_extra, seed, stream, k, slot_coeff_left);
    const double cr = sample_component(spec.coeff.right_extra, seed, stream, k, slot_coeff_right);
    const double ns = sample_component(spec.noise.shared, seed, stream, k, slot_noise_shared);
    const double nl = sample_component(spec.noise.left_extra, seed, stream, k, slot_noise_left);
    const double nr = sample_component(spec.noise.right_extra, seed, stream, k, slot_noise_right);
    return {cs + cl, cs + cr, ns + nl, ns + nr};
}

}  // namespace detail

// Recorded generative draws for the non-leaf nodes, in label order.
struct TreeDraws {
    std::vector<double> a, b, eps_even, eps_odd;
};

struct TreeData {
    TreeShape shape;
    std::vector<double> x;  // node k at x[k-1], k = 1..|T_n|
    std::optional<TreeDraws> draws;

    double value(NodeIndex k) const { return x[k - 1]; }
};

// The child recursion, written once so that simulation and the recorded-
// draw identity checks round identically.
inline double child_value(double coeff, double parent, double noise) {
    return coeff * parent + noise;
}

inline TreeData simulate_tree(const ModelSpec& spec, unsigned gens, std::uint64_t seed,
                              std::uint64_t replication = 0, bool record_draws = false) {
    spec.validate();
    TreeData t{TreeShape{gens}, {}, std::nullopt};
    const std::uint64_t stream = stream_id(StreamKind::tree, replication);
    const std::uint64_t total = t.shape.node_count();
    t.x.resize(total);
    t.x[0] = detail::sample_component(spec.root, seed, stream, 1, detail::slot_root);

    const std::uint64_t parents = gens == 0 ? 0 : subtree_size(gens - 1);
    if (record_draws) {
        t.draws.emplace();
        t.draws->a.resize(parents);
        t.draws->b.resize(parents);
        t.draws->eps_even.resize(parents);
        t.draws->eps_odd.resize(parents);
    }
    for (NodeIndex k = 1; k <= parents; ++k) {
        const detail::NodeDraws d = detail::draw_node(spec, seed, stream, k);
        t.x[2 * k - 1] = child_value(d.a, t.x[k - 1], d.eps_even);
        t.x[2 * k] = child_value(d.b, t.x[k - 1], d.eps_odd);
        if (record_draws) {
            t.draws->a[k - 1] = d.a;
            t.draws->b[k - 1] = d.b;
            t.draws->eps_even[k - 1] = d.eps_even;
            t.draws->eps_odd[k - 1] = d.eps_odd;
        }
    }
    return t;
}

// Values of the process along one uniformly random branch.  Node labels
// double every step, so node_trace only covers the prefix that fits the
// label space; the walk itself has no length limit.
struct BranchPath {
    std::vector<double> y;             // y[0] = Y_1
    std::vector<std::uint8_t> kappa;   // branch choices, size length-1
    std::vector<NodeIndex> node_trace;
};

inline BranchPath simulate_branch(const ModelSpec& spec, std::size_t length, std::uint64_t seed,
                                  std::uint64_t branch_index = 0,
                                  std::span<const std::uint8_t> forced_kappa = {}) {
    if (length < 1) throw std::invalid_argument("simulate_branch: length must be >= 1");
    spec.validate();
    const std::uint64_t stream = stream_id(StreamKind::branch, branch_index);

    BranchPath p;
    p.y.reserve(length);
    p.kappa.reserve(length == 0 ? 0 : length - 1);
    p.y.push_back(detail::sample_component(spec.root, seed, stream, 1, detail::slot_root));
    p.node_trace.push_back(1);

    NodeIndex node = 1;
    bool node_fits = true;
    for (std::size_t step = 1; step < length; ++step) {
        // steps are keyed like nodes so a walk is replayable on its own
        const detail::NodeDraws d = detail::draw_node(spec, seed, stream, step);
        std::uint8_t kappa;
        if (step - 1 < forced_kappa.size()) {
            kappa = forced_kappa[step - 1] ? 1 : 0;
        } else {
            const RandomBlock blk = philox_block(seed, stream, step * 8 + detail::slot_kappa);
            kappa = static_cast<std::uint8_t>(blk.a & 1u);
        }
        const double coeff = kappa ? d.b : d.a;
        const double noise = kappa ? d.eps_odd : d.eps_even;
        p.y.push_back(child_value(coeff, p.y.back(), noise));
        p.kappa.push_back(kappa);
        if (node_fits && node <= (kMaxLabel - 1) / 2) {
            node = 2 * node + kappa;
            p.node_trace.push_back(node);
        } else {
            node_fits = false;
        }
    }
    return p;
}

// Truncation length for the tail series and the bias it guarantees:
//   E|T - T_depth| <= r^{depth-1} * E|e| / (1 - r),   r = E|a~| < 1.
struct TSampleConfig {
    std::size_t depth = 2;
    double target_bias = 1e-8;
};

namespace detail {

struct TailBounds {
    double contraction;  // E|a~|
    double noise_abs;    // E|e|
};

inline TailBounds tail_bounds(const ModelSpec& spec) {
    const double ra = marginal_abs_mean_bound(spec.coeff.shared, spec.coeff.left_extra);
    const double rb = marginal_abs_mean_bound(spec.coeff.shared, spec.coeff.right_extra);
    const double ec = marginal_abs_mean_bound(spec.noise.shared, spec.noise.left_extra);
    const double ed = marginal_abs_mean_bound(spec.noise.shared, spec.noise.right_extra);
    return {(ra + rb) / 2.0, (ec + ed) / 2.0};
}

}  // namespace detail

inline TSampleConfig t_sample_config(const ModelSpec& spec, double target_bias = 1e-8) {
    if (!(target_bias > 0.0)) throw std::invalid_argument("t_sample_config: target_bias must be > 0");
    const auto [r, e_abs] = detail::tail_bounds(spec);
    if (!(r < 1.0))
        throw std::domain_error("t_sample_config: E|a~| >= 1, truncation bound unusable");
    TSampleConfig cfg;
    cfg.target_bias = target_bias;
    if (r == 0.0 || e_abs == 0.0) {
        cfg.depth = 2;
        return cfg;
    }
    // smallest depth with r^{depth-1} * e_abs / (1-r) <= target_bias
    const double need = std::log(target_bias * (1.0 - r) / e_abs) / std::log(r);
    cfg.depth = 2;
    if (need > 1.0) cfg.depth = static_cast<std::size_t>(std::ceil(need)) + 1;
    return cfg;
}

// i.i.d. draws of the truncated tail series
//   T_depth = sum_{k=2}^{depth} a~_2 ... a~_{k-1} e_k
// where each (a~, e) pair picks the even or odd marginals with a fair
// coin and fresh component draws.
inline std::vector<double> sample_tail(const ModelSpec& spec, const TSampleConfig& cfg,
                                       std::uint64_t seed, std::size_t count,
                                       unsigned workers = 1) {
    spec.validate();
    const auto [r, e_abs] = detail::tail_bounds(spec);
    if (!(r < 1.0))
        throw std::domain_error("sample_tail: E|a~| >= 1, truncation bound unusable");
    if (cfg.depth < 2) throw std::invalid_argument("sample_tail: depth must be >= 2");

    std::vector<double> out(count);
    parallel_for_chunks(count, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RngStream rng(seed, stream_id(StreamKind::tail, i));
            double product = 1.0;
            double total = 0.0;
            for (std::size_t k = 2; k <= cfg.depth; ++k) {
                const bool odd = rng.bernoulli_half();
                double coeff, noise;
                if (odd) {
                    coeff = detail::sample_component(spec.coeff.shared, rng) +
                            detail::sample_component(spec.coeff.right_extra, rng);
                    noise = detail::sample_component(spec.noise.shared, rng) +
                            detail::sample_component(spec.noise.right_extra, rng);
                } else {
                    coeff = detail::sample_component(spec.coeff.shared, rng) +
                            detail::sample_component(spec.coeff.left_extra, rng);
                    noise = detail::sample_component(spec.noise.shared, rng) +
                            detail::sample_component(spec.noise.left_extra, rng);
                }
                total += product * noise;
                product *= coeff;
            }
            out[i] = total;
        }
    });
    return out;
}

// Centered one-step noises V_{2k} = X_{2k} - a X_k - c and
// V_{2k+1} = X_{2k+1} - b X_k - d for every non-leaf k, in label order.
struct NoisePairs {
    std::vector<double> even;
    std::vector<double> odd;
};

inline NoisePairs true_noise(const TreeData& t, const DerivedMoments& m) {
    const unsigned n = t.shape.max_generation;
    const std::uint64_t parents = n == 0 ? 0 : subtree_size(n - 1);
    NoisePairs v;
    v.even.resize(parents);
    v.odd.resize(parents);
    for (NodeIndex k = 1; k <= parents; ++k) {
        v.even[k - 1] = t.x[2 * k - 1] - m.a * t.x[k - 1] - m.c;
        v.odd[k - 1] = t.x[2 * k] - m.b * t.x[k - 1] - m.d;
    }
    return v;
}

}  // namespace rcbar
