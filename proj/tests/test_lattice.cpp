#include <random>

#include <gtest/gtest.h>

#include "ncwave/lattice.hpp"
#include "test_support.hpp"

using namespace ncwave;

namespace {

// Brute-force J+-: double loop over all seed/target pairs.
RegionMask brute_force_cone(const RegionMask& seed, Causal dir) {
    const auto& g = seed.grid();
    RegionMask out(g);
    const double eps = 1e-9 * std::min(g.dt, g.dx);
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k)
            for (int i = 0; i < g.n_time && !out(j, k); ++i)
                for (int l = 0; l < g.n_space; ++l) {
                    if (!seed(i, l)) continue;
                    const double dt = dir == Causal::future ? g.t(j) - g.t(i) : g.t(i) - g.t(j);
                    if (std::abs(g.x(k) - g.x(l)) <= dt + eps) {
                        out.set(j, k);
                        break;
                    }
                }
    return out;
}

}  // namespace

TEST(MakeGrid, AcceptsValidParameters) {
    const auto g = make_grid(201, 401, 0.005, 0.01, -0.5, -2.0, 1);
    EXPECT_DOUBLE_EQ(g.courant(), 0.5);
    EXPECT_EQ(g.points(), 201u * 401u);
    EXPECT_DOUBLE_EQ(g.t_end(), 0.5);
}

TEST(MakeGrid, RejectsCflViolation) {
    EXPECT_THROW(make_grid(21, 21, 0.0125, 0.01, 0, 0, 1), GridError);
}

TEST(MakeGrid, RejectsBadSizes) {
    EXPECT_THROW(make_grid(2, 21, 0.01, 0.01, 0, 0, 1), GridError);
    EXPECT_THROW(make_grid(21, 2, 0.01, 0.01, 0, 0, 1), GridError);
    EXPECT_THROW(make_grid(21, 21, -0.01, 0.01, 0, 0, 1), GridError);
    EXPECT_THROW(make_grid(21, 21, 0.01, 0.0, 0, 0, 1), GridError);
    EXPECT_THROW(make_grid(21, 21, 0.01, 0.01, 0, 0, 0), GridError);
}

TEST(InnerProduct, SingleCell) {
    const auto g = make_grid(201, 401, 0.005, 0.01, -0.5, -2.0, 1);
    GridFunction f(g);
    f.at(10, 20) = 1.0;
    EXPECT_DOUBLE_EQ(inner_product(f, f).real(), 5e-5);
    EXPECT_DOUBLE_EQ(inner_product(f, f).imag(), 0.0);
}

TEST(InnerProduct, DisjointSupports) {
    const auto g = make_grid(11, 11, 0.1, 0.1, 0, 0, 2);
    GridFunction f(g), h(g);
    f.at(2, 3, 0) = {1.0, 2.0};
    h.at(2, 4, 0) = {3.0, -1.0};
    h.at(2, 3, 1) = 5.0;
    EXPECT_EQ(inner_product(f, h), cplx(0.0, 0.0));
}

TEST(InnerProduct, ConjugateSymmetricAndSesquilinear) {
    const auto g = make_grid(17, 23, 0.05, 0.1, 0, 0, 2);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = test::random_function(g, rng);
        const auto h = test::random_function(g, rng);
        const cplx fh = inner_product(f, h);
        const cplx hf = inner_product(h, f);
        EXPECT_NEAR(std::abs(std::conj(fh) - hf), 0.0, 1e-14 * std::max(1.0, std::abs(fh)));
        const cplx s{0.3, -1.7};
        EXPECT_NEAR(std::abs(inner_product(s * f, h) - std::conj(s) * fh), 0.0, 1e-13);
        EXPECT_NEAR(std::abs(inner_product(f, s * h) - s * fh), 0.0, 1e-13);
        EXPECT_GT(inner_product(f, f).real(), 0.0);
    }
}

TEST(CausalCone, SinglePointMatchesClosedForm) {
    for (double dt : {0.1, 0.05, 0.07}) {
        const auto g = make_grid(21, 31, dt, 0.1, 0, 0, 1);
        RegionMask seed(g);
        const int jp = 4, kp = 15;
        seed.set(jp, kp);
        const auto cone = causal_cone(seed, Causal::future);
        for (int j = 0; j < g.n_time; ++j)
            for (int k = 0; k < g.n_space; ++k) {
                const bool inside =
                    j >= jp && std::abs(g.x(k) - g.x(kp)) <= g.t(j) - g.t(jp) + 1e-12;
                EXPECT_EQ(cone(j, k), inside) << "dt=" << dt << " j=" << j << " k=" << k;
            }
    }
}

TEST(CausalCone, MatchesBruteForceOnRandomSeeds) {
    std::mt19937_64 rng(42);
    for (double dt : {0.1, 0.06}) {
        const auto g = make_grid(40, 50, dt, 0.1, -1, 2, 1);
        for (int trial = 0; trial < 5; ++trial) {
            RegionMask seed(g);
            std::uniform_int_distribution<int> jj(0, g.n_time - 1), kk(0, g.n_space - 1);
            for (int s = 0; s < 4; ++s) seed.set(jj(rng), kk(rng));
            for (auto dir : {Causal::future, Causal::past}) {
                EXPECT_EQ(causal_cone(seed, dir), brute_force_cone(seed, dir));
            }
        }
    }
}

TEST(CausalCone, EmptyAndFull) {
    const auto g = make_grid(9, 9, 0.1, 0.1, 0, 0, 1);
    EXPECT_TRUE(causal_cone(RegionMask(g), Causal::future).empty());
    const RegionMask full(g, true);
    EXPECT_EQ(causal_cone(full, Causal::past), full);
}

TEST(CausalCone, MonotoneAndWidthGrowth) {
    const auto g = make_grid(30, 61, 0.1, 0.1, 0, 0, 1);
    RegionMask seed(g);
    seed.set(3, 30);
    const auto cone = causal_cone(seed, Causal::future);
    // Monotone: flagged point => its three lattice successors are flagged.
    for (int j = 0; j + 1 < g.n_time; ++j)
        for (int k = 1; k + 1 < g.n_space; ++k)
            if (cone(j, k)) {
                EXPECT_TRUE(cone(j + 1, k - 1) && cone(j + 1, k) && cone(j + 1, k + 1));
            }
    // dt = dx: width grows by exactly 2 cells per level.
    for (int j = 3; j < 20; ++j) {
        int width = 0;
        for (int k = 0; k < g.n_space; ++k) width += cone(j, k) ? 1 : 0;
        EXPECT_EQ(width, 1 + 2 * (j - 3));
    }
}

TEST(MaskSupNorm, Basics) {
    const auto g = make_grid(9, 9, 0.1, 0.1, 0, 0, 2);
    GridFunction f(g);
    f.at(4, 4, 1) = {3.0, 4.0};
    EXPECT_EQ(mask_sup_norm(f, RegionMask(g)), 0.0);
    EXPECT_EQ(mask_sup_norm(GridFunction(g), RegionMask(g, true)), 0.0);
    RegionMask r(g);
    r.set(4, 4);
    EXPECT_DOUBLE_EQ(mask_sup_norm(f, r), 5.0);
    const auto other = make_grid(9, 9, 0.1, 0.1, 0, 0, 1);
    EXPECT_THROW(mask_sup_norm(f, RegionMask(other)), GridError);
}

TEST(Inflate, OneCellHalo) {
    const auto g = make_grid(9, 9, 0.1, 0.1, 0, 0, 1);
    RegionMask m(g);
    m.set(4, 4);
    const auto big = inflate(m, 1);
    EXPECT_EQ(big.count(), 9u);
    EXPECT_TRUE(big(3, 3) && big(5, 5));
}
