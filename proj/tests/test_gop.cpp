#include <doctest.h>

#include <set>

#include "avth/error.hpp"
#include "avth/gop.hpp"
#include "avth/util.hpp"

using namespace avth;

TEST_CASE("partition(180, 60) gives 3 full groups") {
    GopPlan plan = partition(180, 60);
    REQUIRE(plan.groups.size() == 3);
    CHECK(plan.groups[0].keyframe_index == 0);
    CHECK(plan.groups[1].keyframe_index == 60);
    CHECK(plan.groups[2].keyframe_index == 120);
    for (const GopGroup& g : plan.groups) CHECK(g.target_indices.size() == 59);
    plan.validate();
}

TEST_CASE("partition(180, 15) gives 12 groups") {
    CHECK(partition(180, 15).groups.size() == 12);
}

TEST_CASE("a short input forms a single short group") {
    GopPlan plan = partition(10, 15);
    REQUIRE(plan.groups.size() == 1);
    CHECK(plan.groups[0].keyframe_index == 0);
    REQUIRE(plan.groups[0].target_indices.size() == 9);
    CHECK(plan.groups[0].target_indices.front() == 1);
    CHECK(plan.groups[0].target_indices.back() == 9);
}

TEST_CASE("gop_size below 2 is rejected") {
    CHECK_THROWS_AS(partition(10, 1), ConfigError);
    CHECK_THROWS_AS(partition(10, 0), ConfigError);
    CHECK_THROWS_AS(partition(0, 15), ConfigError);
}

TEST_CASE("partition covers every frame exactly once") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        uint32_t total = 1 + static_cast<uint32_t>(rng.below(500));
        uint32_t gop = 2 + static_cast<uint32_t>(rng.below(70));
        GopPlan plan = partition(total, gop);
        plan.validate();
        std::set<uint32_t> seen;
        for (const GopGroup& g : plan.groups) {
            CHECK(seen.insert(g.keyframe_index).second);
            CHECK(g.keyframe_index % gop == 0);
            for (uint32_t t : g.target_indices) CHECK(seen.insert(t).second);
        }
        CHECK(seen.size() == total);
        CHECK(*seen.rbegin() == total - 1);
        CHECK(plan.groups.size() == (total + gop - 1) / gop);
        CHECK(plan.total_frames() == total);
    }
}

TEST_CASE("partition is deterministic") {
    GopPlan a = partition(97, 13), b = partition(97, 13);
    REQUIRE(a.groups.size() == b.groups.size());
    for (size_t i = 0; i < a.groups.size(); ++i) {
        CHECK(a.groups[i].keyframe_index == b.groups[i].keyframe_index);
        CHECK(a.groups[i].target_indices == b.groups[i].target_indices);
    }
}
