#include "mhist/histogram.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mhist/error.hpp"
#include "support/geometry.hpp"

namespace mhist {
namespace {

MinutiaTemplate make(std::initializer_list<Minutia> ms) {
    MinutiaTemplate t;
    t.minutiae = ms;
    return t;
}

MinutiaTemplate random_template(std::mt19937_64& rng, int n, double spread = 150.0) {
    std::uniform_real_distribution<double> pos(400.0 - spread, 400.0 + spread), dir(0.0, 360.0), u(0.0, 1.0);
    MinutiaTemplate t;
    for (int k = 0; k < n; ++k) {
        t.minutiae.push_back(make_minutia(pos(rng), pos(rng), dir(rng), u(rng) < 0.4 ? MinutiaType::Bifurcation : MinutiaType::Ending));
    }
    return t;
}

TEST(FoldDirection, WorkedExamples) {
    EXPECT_EQ(fold_direction_difference(10.0, 350.0), 20.0);
    EXPECT_EQ(fold_direction_difference(170.0, 190.0), 20.0);
    EXPECT_EQ(fold_direction_difference(90.0, 270.0), 180.0);
    const BinSpec spec;
    EXPECT_EQ(direction_bin(fold_direction_difference(10.0, 350.0), spec), direction_bin(fold_direction_difference(0.0, 20.0), spec));
    EXPECT_EQ(direction_bin(180.0, spec), 9);
}

TEST(FoldDirection, RangeAndSymmetry) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> dir(0.0, 360.0);
    for (int k = 0; k < 1000; ++k) {
        const double a = dir(rng), b = dir(rng);
        const double f = fold_direction_difference(a, b);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 180.0);
        EXPECT_EQ(f, fold_direction_difference(b, a));
    }
}

TEST(Bins, EdgesAndClamping) {
    const BinSpec spec;
    EXPECT_EQ(distance_bin(0.0, spec), 0);
    EXPECT_EQ(distance_bin(19.999, spec), 0);
    EXPECT_EQ(distance_bin(20.0, spec), 1);
    EXPECT_EQ(distance_bin(200.0, spec), 9);
    EXPECT_EQ(direction_bin(17.999, spec), 0);
    EXPECT_EQ(direction_bin(18.0, spec), 1);
    EXPECT_EQ(relangle_bin(359.999, spec), 19);
    EXPECT_DOUBLE_EQ(spec.dist_width(), 20.0);
    EXPECT_DOUBLE_EQ(spec.dir_width(), 18.0);
}

TEST(BinSpec, Validation) {
    EXPECT_NO_THROW(BinSpec{}.validate());
    EXPECT_THROW((BinSpec{0.0, 10, 10, 20, 4}).validate(), std::invalid_argument);
    EXPECT_THROW((BinSpec{200.0, 0, 10, 20, 4}).validate(), std::invalid_argument);
    EXPECT_THROW((BinSpec{200.0, 10, 10, 20, 3}).validate(), std::invalid_argument);
}

TEST(Build2d, SinglePair) {
    const auto t = make({{0, 0, 0, MinutiaType::Ending}, {30, 0, 10, MinutiaType::Ending}});
    const auto h = build_2dmh(t, BinSpec{}, false);
    EXPECT_EQ(h.pair_count, 1);
    EXPECT_EQ(h.mass[index_2d(h.spec, 1, 0)], 1.0);
    EXPECT_EQ(h.total(), 1.0);
}

TEST(Build2d, ThreeCollinearByHand) {
    // Pairs: (0,1) d=20, (1,2) d=20, (0,2) d=40; all direction differences 0.
    const auto t = make({{0, 0, 45, MinutiaType::Ending}, {20, 0, 45, MinutiaType::Ending}, {40, 0, 45, MinutiaType::Ending}});
    const BinSpec spec;
    std::vector<double> expected(100, 0.0);
    expected[1 * 10 + 0] = 2.0;
    expected[2 * 10 + 0] = 1.0;
    const auto raw = build_2dmh(t, spec, false);
    EXPECT_EQ(raw.mass, expected);
    EXPECT_EQ(raw.pair_count, 3);
    const auto norm = build_2dmh(t, spec, true);
    EXPECT_DOUBLE_EQ(norm.mass[10], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(norm.mass[20], 1.0 / 3.0);
}

TEST(Build2d, FarPairsDiscarded) {
    const auto t = make({{0, 0, 0, MinutiaType::Ending}, {300, 0, 0, MinutiaType::Ending}, {0, 250, 0, MinutiaType::Ending}});
    const auto h = build_2dmh(t);
    EXPECT_EQ(h.pair_count, 0);
    EXPECT_EQ(h.total(), 0.0);
    EXPECT_TRUE(h.normalized);
}

TEST(Build2d, BoundaryDistanceKept) {
    const auto t = make({{0, 0, 0, MinutiaType::Ending}, {200, 0, 180, MinutiaType::Ending}});
    const auto h = build_2dmh(t, BinSpec{}, false);
    EXPECT_EQ(h.mass[index_2d(h.spec, 9, 9)], 1.0);
}

TEST(Build2d, Errors) {
    EXPECT_THROW(build_2dmh(make({{0, 0, 0, MinutiaType::Ending}})), PairFeaturesUndefined);
    EXPECT_THROW(build_2dmh(MinutiaTemplate{}), PairFeaturesUndefined);
    auto t = make({{0, 0, 0, MinutiaType::Ending}, {1, 1, 0, MinutiaType::Ending}});
    t.dpi = 600;
    EXPECT_THROW(build_2dmh(t), std::invalid_argument);
}

TEST(Build4d, OrderedPairGeometry) {
    const auto t = make({{0, 0, 0, MinutiaType::Ending}, {10, 0, 0, MinutiaType::Ending}});
    const auto spec = BinSpec::default_4d();
    const auto h = build_4dmh(t, spec);
    ASSERT_EQ(h.mass.size(), 32000u);
    const auto at = [&](int d, int a, int r, int ty) { return h.mass[((index_2d(spec, d, a) * 20) + r) * 4 + ty]; };
    EXPECT_EQ(at(1, 0, 0, 0), 1.0);
    EXPECT_EQ(at(1, 0, 10, 0), 1.0);
    EXPECT_EQ(h.total(), 2.0);
    EXPECT_EQ(h.pair_count, 1);
}

TEST(Build4d, TypeCombinations) {
    const auto t = make({{0, 0, 0, MinutiaType::Ending}, {10, 0, 0, MinutiaType::Bifurcation}});
    const auto spec = BinSpec::default_4d();
    const auto h = build_4dmh(t, spec);
    EXPECT_EQ(h.mass[((index_2d(spec, 1, 0) * 20) + 0) * 4 + 1], 1.0);   // EB
    EXPECT_EQ(h.mass[((index_2d(spec, 1, 0) * 20) + 10) * 4 + 2], 1.0);  // BE
}

TEST(Build4d, UntypedRejectedUnlessTypesIgnored) {
    const auto t = make({{0, 0, 0, MinutiaType::Unknown}, {10, 0, 0, MinutiaType::Ending}});
    EXPECT_THROW(build_4dmh(t), std::invalid_argument);
    auto spec = BinSpec::default_4d();
    spec.type_bins = 1;
    EXPECT_EQ(build_4dmh(t, spec).mass.size(), 8000u);
}

TEST(Build4d, CoincidentMinutiaeGetZeroRelangle) {
    const auto t = make({{5, 5, 90, MinutiaType::Ending}, {5, 5, 0, MinutiaType::Ending}});
    const auto spec = BinSpec::default_4d();
    const auto h = build_4dmh(t, spec);
    EXPECT_EQ(h.mass[((index_2d(spec, 0, 10) * 20) + 0) * 4 + 0], 2.0);
}

TEST(Invariance, RotationTranslation) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> angle(0.0, 360.0), shift(-100.0, 100.0);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_template(rng, 25);
        const auto moved = testing::rotate_translate(t, angle(rng), 400.0, 400.0, shift(rng), shift(rng));
        if (testing::has_feature_near_edge(t, BinSpec::default_4d(), 1e-9) ||
            testing::has_feature_near_edge(t, BinSpec::default_2d(), 1e-9)) {
            continue;
        }
        ++checked;
        EXPECT_EQ(build_2dmh(t), build_2dmh(moved));
        EXPECT_EQ(build_4dmh(t), build_4dmh(moved));
    }
    EXPECT_GE(checked, 95);
}

TEST(Invariance, ExactRightAngleRotation) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        auto t = random_template(rng, 20);
        for (auto& m : t.minutiae) {
            m.x = std::round(m.x);
            m.y = std::round(m.y);
            m.direction = std::round(m.direction);
        }
        MinutiaTemplate r = t;
        for (auto& m : r.minutiae) m = make_minutia(1000.0 - m.y, m.x, m.direction + 90.0, m.type);
        EXPECT_EQ(build_2dmh(t).mass, build_2dmh(r).mass);
    }
}

TEST(Invariance, Permutation) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const auto t = random_template(rng, 30);
        auto p = t;
        std::shuffle(p.minutiae.begin(), p.minutiae.end(), rng);
        EXPECT_EQ(build_2dmh(t), build_2dmh(p));
        EXPECT_EQ(build_4dmh(t), build_4dmh(p));
    }
}

TEST(Properties, MassAndCounts) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = random_template(rng, 2 + trial, 200.0);
        long within = 0;
        for (std::size_t i = 0; i < t.minutiae.size(); ++i) {
            for (std::size_t j = i + 1; j < t.minutiae.size(); ++j) {
                within += std::hypot(t.minutiae[i].x - t.minutiae[j].x, t.minutiae[i].y - t.minutiae[j].y) <= 200.0;
            }
        }
        const auto raw = build_2dmh(t, BinSpec{}, false);
        EXPECT_EQ(raw.pair_count, within);
        EXPECT_EQ(raw.total(), static_cast<double>(within));
        EXPECT_EQ(build_4dmh(t).total(), 2.0 * within);
        if (within > 0) EXPECT_NEAR(build_2dmh(t).total(), 1.0, 1e-9);
    }
}

}  // namespace
}  // namespace mhist
