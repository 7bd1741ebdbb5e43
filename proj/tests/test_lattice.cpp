#include <doctest.h>

#include <algorithm>
#include <set>

#include "qpgl/lattice.hpp"
#include "qpgl/rng.hpp"

using namespace qpgl;

namespace {

// brute-force cube filter used as the enumeration oracle
std::set<MultiIndex> brute_region(const BlockStructure& bs, const RegionDescriptor& d) {
    std::set<MultiIndex> out;
    std::vector<int> rel(static_cast<std::size_t>(bs.b), -d.size);
    for (;;) {
        bool keep = true;
        for (int j = 0; j < bs.b; ++j) {
            if (d.restrictions[static_cast<std::size_t>(j)] == Restriction::RemoveNegative &&
                rel[static_cast<std::size_t>(j)] < 0)
                keep = false;
            if (d.restrictions[static_cast<std::size_t>(j)] == Restriction::RemovePositive &&
                rel[static_cast<std::size_t>(j)] > 0)
                keep = false;
        }
        if (keep) {
            MultiIndex p(static_cast<std::size_t>(bs.b));
            for (int j = 0; j < bs.b; ++j)
                p[static_cast<std::size_t>(j)] =
                    d.center[static_cast<std::size_t>(j)] + rel[static_cast<std::size_t>(j)];
            out.insert(p);
        }
        int j = bs.b - 1;
        while (j >= 0 && rel[static_cast<std::size_t>(j)] == d.size) rel[static_cast<std::size_t>(j--)] = -d.size;
        if (j < 0) break;
        ++rel[static_cast<std::size_t>(j)];
    }
    return out;
}

}  // namespace

TEST_CASE("sup_norm") {
    CHECK(sup_norm({0, 0}) == 0);
    CHECK(sup_norm({2, -1}) == 2);
    CHECK(sup_norm({3, -5}) == 5);
}

TEST_CASE("block_dot") {
    const BlockStructure b21(std::vector<int>{2});
    Eigen::VectorXd w(2);
    w << 0.7, 0.5;
    const Eigen::VectorXd r = block_dot(b21, {2, -1}, w);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == doctest::Approx(0.9).epsilon(1e-14));

    const BlockStructure b11(std::vector<int>{1, 1});
    Eigen::VectorXd w2(2);
    w2 << 0.5, 0.25;
    const Eigen::VectorXd r2 = block_dot(b11, {1, 1}, w2);
    CHECK(r2[0] == doctest::Approx(0.5));
    CHECK(r2[1] == doctest::Approx(0.25));

    CHECK(block_dot(b21, {4, -7}, Eigen::VectorXd::Zero(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(block_dot(b21, {1}, w), std::invalid_argument);
}

TEST_CASE("block structure invariants") {
    const BlockStructure bs(std::vector<int>{2, 1});
    CHECK(bs.d == 2);
    CHECK(bs.b == 3);
    CHECK(bs.b_exceeds_d());
    CHECK_THROWS_AS(BlockStructure(std::vector<int>{0, 1}), std::invalid_argument);
    CHECK_FALSE(BlockStructure(std::vector<int>{1}).b_exceeds_d());
}

TEST_CASE("enumerate_region basic counts") {
    const BlockStructure bs(std::vector<int>{2});
    const std::vector<Restriction> none(2, Restriction::None);

    const Region cube = enumerate_region(bs, RegionDescriptor({0, 0}, 1, none));
    CHECK(cube.size() == 9);

    const Region quarter = enumerate_region(
        bs, RegionDescriptor({0, 0}, 1, {Restriction::RemoveNegative, Restriction::RemoveNegative}));
    CHECK(quarter.size() == 4);
    for (const auto& p : quarter.points()) {
        CHECK(p[0] >= 0);
        CHECK(p[1] >= 0);
    }

    const Region degenerate = enumerate_region(
        bs, RegionDescriptor({3, -2}, 0, {Restriction::RemovePositive, Restriction::RemoveNegative}));
    CHECK(degenerate.size() == 1);
    CHECK(degenerate.contains({3, -2}));
}

TEST_CASE("enumerate_region matches the brute-force filter") {
    const BlockStructure bs(std::vector<int>{1, 2});
    CounterRng rng(7, 1);
    const Restriction choices[3] = {Restriction::None, Restriction::RemoveNegative,
                                    Restriction::RemovePositive};
    for (int t = 0; t < 40; ++t) {
        std::vector<Restriction> tags(3, Restriction::None);
        int active = 0;
        for (auto& tag : tags) {
            tag = choices[rng.uniform_int(0, 2)];
            if (tag != Restriction::None) ++active;
        }
        if (active == 1) tags[0] = tags[1] = tags[2] = Restriction::None;
        MultiIndex center{static_cast<int>(rng.uniform_int(-3, 3)), static_cast<int>(rng.uniform_int(-3, 3)),
                          static_cast<int>(rng.uniform_int(-3, 3))};
        const RegionDescriptor d(center, static_cast<int>(rng.uniform_int(0, 3)), tags);
        const Region r = enumerate_region(bs, d);
        const auto oracle = brute_region(bs, d);
        REQUIRE(r.size() == static_cast<int>(oracle.size()));
        for (const auto& p : oracle) CHECK(r.contains(p));
    }
}

TEST_CASE("elementary_regions_at_scale counts 3^b - 2b") {
    CHECK(elementary_regions_at_scale(2, BlockStructure(std::vector<int>{2})).size() == 5);
    CHECK(elementary_regions_at_scale(1, BlockStructure(std::vector<int>{1, 2})).size() == 21);
    CHECK(elementary_regions_at_scale(3, BlockStructure(std::vector<int>{1})).size() == 1);
}

TEST_CASE("elementary regions have diameter at most 2N") {
    const BlockStructure bs(std::vector<int>{2});
    for (int n : {0, 1, 2, 3}) {
        for (const auto& d : elementary_regions_at_scale(n, bs)) {
            const Region r = enumerate_region(bs, d);
            CHECK(r.diameter() <= 2 * n);
        }
    }
}

TEST_CASE("descriptor restriction arity") {
    CHECK_THROWS_AS(RegionDescriptor({0, 0}, 1, {Restriction::RemoveNegative, Restriction::None}),
                    std::invalid_argument);
}

TEST_CASE("translation equivariance") {
    const BlockStructure bs(std::vector<int>{2});
    for (const auto& d : elementary_regions_at_scale(2, bs)) {
        const Region at_origin = enumerate_region(bs, d);
        const MultiIndex c{5, -3};
        const Region shifted = enumerate_region(bs, d.translated(c));
        REQUIRE(shifted.size() == at_origin.size());
        for (const auto& p : at_origin.points()) CHECK(shifted.contains({p[0] + c[0], p[1] + c[1]}));
    }
}

TEST_CASE("diameter and distance agree with pairwise brute force") {
    const BlockStructure bs(std::vector<int>{2});
    CounterRng rng(11, 2);
    for (int t = 0; t < 10; ++t) {
        std::vector<MultiIndex> pts;
        const int count = static_cast<int>(rng.uniform_int(1, 60));
        for (int i = 0; i < count; ++i)
            pts.push_back({static_cast<int>(rng.uniform_int(-8, 8)), static_cast<int>(rng.uniform_int(-8, 8))});
        const Region r(pts);
        int diam = 0;
        for (const auto& a : r.points())
            for (const auto& b : r.points()) diam = std::max(diam, sup_dist(a, b));
        CHECK(r.diameter() == diam);

        const MultiIndex probe{static_cast<int>(rng.uniform_int(-10, 10)),
                               static_cast<int>(rng.uniform_int(-10, 10))};
        int best = kInfiniteDistance;
        for (const auto& a : r.points()) best = std::min(best, sup_dist(probe, a));
        CHECK(dist(probe, r) == best);
    }
    CHECK(dist({0, 0}, Region()) == kInfiniteDistance);
}

TEST_CASE("region index is lexicographic") {
    const BlockStructure bs(std::vector<int>{2});
    const Region r = enumerate_region(bs, RegionDescriptor({0, 0}, 1, std::vector<Restriction>(2, Restriction::None)));
    CHECK(r.index_of({-1, -1}) == 0);
    CHECK(r.index_of({1, 1}) == r.size() - 1);
    CHECK(r.index_of({2, 0}) == -1);
    CHECK(std::is_sorted(r.points().begin(), r.points().end()));
}

TEST_CASE("frequency range validation") {
    const BlockStructure bs(std::vector<int>{2});
    Eigen::VectorXd w(2);
    w << 0.5, 7.0;
    CHECK_THROWS_AS(Frequency(bs, w), std::invalid_argument);
    w << 0.5, 6.0;
    CHECK_NOTHROW(Frequency(bs, w));
}
