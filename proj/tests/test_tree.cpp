#include <catch2/catch_amalgamated.hpp>

#include "rcbar/tree.hpp"

using namespace rcbar;

TEST_CASE("children and parent follow the labeling scheme") {
    CHECK(children(1) == std::pair<NodeIndex, NodeIndex>{2, 3});
    CHECK(children(5) == std::pair<NodeIndex, NodeIndex>{10, 11});
    CHECK(parent(7) == 3);
    CHECK(parent(10) == 5);
    CHECK(parent(2) == 1);
}

TEST_CASE("label-space boundaries fail loudly") {
    CHECK_THROWS_AS(children(NodeIndex{1} << 62), std::overflow_error);
    CHECK_NOTHROW(children((NodeIndex{1} << 62) - 1));
    CHECK_THROWS_AS(parent(1), std::invalid_argument);
    CHECK_THROWS_AS(children(0), std::invalid_argument);
    CHECK_THROWS_AS(generation_of(0), std::invalid_argument);
    CHECK_THROWS_AS(generation_range(63), std::overflow_error);
    CHECK_THROWS_AS(subtree_size(63), std::overflow_error);
}

TEST_CASE("generation_of") {
    CHECK(generation_of(1) == 0);
    CHECK(generation_of(4) == 2);
    CHECK(generation_of(15) == 3);
    CHECK(generation_of(16) == 4);
}

TEST_CASE("generation ranges and sizes") {
    CHECK(generation_range(0) == std::pair<NodeIndex, NodeIndex>{1, 1});
    CHECK(subtree_size(0) == 1);
    CHECK(generation_range(3) == std::pair<NodeIndex, NodeIndex>{8, 15});
    CHECK(subtree_size(3) == 15);
    CHECK(subtree_size(13) == 16383);
}

TEST_CASE("parent inverts children for every label") {
    for (NodeIndex n = 2; n <= 4096; ++n) {
        const auto [lo, hi] = children(n);
        CHECK(parent(lo) == n);
        CHECK(parent(hi) == n);
    }
}

TEST_CASE("generation ranges tile the sub-tree without gaps") {
    NodeIndex expect = 1;
    for (unsigned g = 0; g <= 12; ++g) {
        const auto [first, last] = generation_range(g);
        CHECK(first == expect);
        CHECK(generation_of(first) == g);
        CHECK(generation_of(last) == g);
        CHECK(last - first + 1 == generation_size(g));
        CHECK(last == subtree_size(g));
        expect = last + 1;
    }
}

TEST_CASE("tree shape enforces the generation cap") {
    CHECK(TreeShape{13}.node_count() == 16383);
    CHECK(TreeShape{0}.node_count() == 1);
    CHECK_THROWS_AS(TreeShape{41}, std::invalid_argument);
    CHECK_NOTHROW(TreeShape{40});
}
