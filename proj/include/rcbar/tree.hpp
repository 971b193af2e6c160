#pragma once

// Integer arithmetic for the binary-tree labeling scheme: the root is 1,
// the children of n are 2n and 2n+1, generation g is {2^g, ..., 2^{g+1}-1}.
// Trees are stored flat in label order, so these functions are the whole
// indexing story.

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <utility>

namespace rcbar {

using NodeIndex = std::uint64_t;

// Labels stay within the positive signed-64 range; anything that would
// land past it is an overflow, never a wraparound.
inline constexpr NodeIndex kMaxLabel = (std::uint64_t{1} << 63) - 1;

// Simulation-side cap; 2^41 values is already far beyond any feasible
// memory footprint.
inline constexpr unsigned kMaxGeneration = 40;

inline std::pair<NodeIndex, NodeIndex> children(NodeIndex n) {
    if (n < 1) throw std::invalid_argument("tree: node labels start at 1");
    if (n > (kMaxLabel - 1) / 2) throw std::overflow_error("tree: child label overflow");
    return {2 * n, 2 * n + 1};
}

inline NodeIndex parent(NodeIndex n) {
    if (n < 1) throw std::invalid_argument("tree: node labels start at 1");
    if (n == 1) throw std::invalid_argument("tree: root has no parent");
    return n / 2;
}

inline unsigned generation_of(NodeIndex n) {
    if (n < 1) throw std::invalid_argument("tree: node labels start at 1");
    return static_cast<unsigned>(std::bit_width(n) - 1);
}

inline std::pair<NodeIndex, NodeIndex> generation_range(unsigned g) {
    if (g >= 63) throw std::overflow_error("tree: generation label overflow");
    const NodeIndex first = NodeIndex{1} << g;
    return {first, 2 * first - 1};
}

// |T_g| = 2^{g+1} - 1
inline std::uint64_t subtree_size(unsigned g) {
    if (g >= 63) throw std::overflow_error("tree: subtree size overflow");
    return (std::uint64_t{2} << g) - 1;
}

inline std::uint64_t generation_size(unsigned g) {
    if (g >= 63) throw std::overflow_error("tree: generation size overflow");
    return std::uint64_t{1} << g;
}

struct TreeShape {
    unsigned max_generation = 0;

    explicit TreeShape(unsigned n) : max_generation(n) {
        if (n > kMaxGeneration)
            throw std::invalid_argument("tree: generation count exceeds the supported cap of 40");
    }

    std::uint64_t node_count() const { return subtree_size(max_generation); }
};

}  // namespace rcbar
