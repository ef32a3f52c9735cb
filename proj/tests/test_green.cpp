#include <random>

#include <gtest/gtest.h>

#include "ncwave/green.hpp"
#include "test_support.hpp"

using namespace ncwave;

namespace {

// Closed-form lattice Green function of the Courant-1 leapfrog for box:
// a unit source at (i, l) contributes dt^2 at (j, k) iff |k - l| < j - i and
// j - i - |k - l| is odd.
GridFunction dalembert_sum(const GridFunction& f) {
    const auto& g = f.grid();
    GridFunction u(g);
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k) {
            cplx acc{0.0, 0.0};
            for (int i = 0; i < j; ++i)
                for (int l = 0; l < g.n_space; ++l) {
                    const int d = std::abs(k - l);
                    if (d < j - i && (j - i - d) % 2 == 1) acc += f.at(i, l);
                }
            u.at(j, k) = acc * g.dt * g.dt;
        }
    return u;
}

double rel_err(const GridFunction& a, const GridFunction& b) { return sup_norm(a - b) / sup_norm(b); }

}  // namespace

TEST(Green, LeapfrogMatchesDiscreteDalembert) {
    std::mt19937_64 rng(1);
    const auto g = make_grid(31, 81, 0.05, 0.05, 0, -2, 1);
    const GreenOperator G(wave_operator(g));
    const auto f = test::random_in_box(g, IndexBox{3, 12, 35, 45}, rng);
    const auto u = G.retarded(f);
    EXPECT_LE(rel_err(u, dalembert_sum(f)), 1e-12);
}

TEST(Green, PointSourceAveragesToHalf) {
    const auto g = make_grid(41, 101, 0.02, 0.02, 0, -1, 1);
    const GreenOperator G(wave_operator(g));
    GridFunction f(g);
    f.at(5, 50) = 1.0 / (g.dt * g.dx);
    const auto u = G.retarded(f);
    // 2x2 block averages inside the cone equal the continuum value 1/2.
    for (int j = 8; j < 38; j += 3) {
        const int half = j - 5 - 2;
        for (int k = 50 - half + 1; k + 1 <= 50 + half - 1; k += 4) {
            const cplx avg = 0.25 * (u.at(j, k) + u.at(j + 1, k) + u.at(j, k + 1) + u.at(j + 1, k + 1));
            EXPECT_NEAR(avg.real(), 0.5, 1e-12);
        }
    }
}

TEST(Green, SmoothSourceConvergesSecondOrder) {
    // u = Gaussian, f = box u; R+ f must reproduce u to O(h^2).
    const double tc = 0.6, xc = 0.0, sigma = 0.08;
    auto gauss = [&](double t, double x) {
        const double r2 = (t - tc) * (t - tc) + (x - xc) * (x - xc);
        return r2 > 36 * sigma * sigma ? 0.0 : std::exp(-r2 / (sigma * sigma));
    };
    std::vector<double> errs;
    for (int level = 0; level < 3; ++level) {
        const int m = 40 << level;
        const double h = 1.2 / m;
        const auto g = make_grid(m + 1, 2 * m + 1, h, h, 0, -1.2, 1);
        const GreenOperator G(wave_operator(g), BoundaryCheck::trace);
        const auto u = GridFunction::sample(g, [&](double t, double x, int) { return cplx(gauss(t, x)); });
        const auto f = GridFunction::sample(g, [&](double t, double x, int) {
            const double a = (t - tc) * (t - tc), b = (x - xc) * (x - xc);
            return cplx(4.0 * (a - b) / std::pow(sigma, 4) * gauss(t, x));
        });
        errs.push_back(sup_norm(G.retarded(f) - u));
    }
    EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.8);
    EXPECT_NEAR(errs[1] / errs[2], 4.0, 0.5);
}

TEST(Green, InvertsOperatorOnCompactSupport) {
    std::mt19937_64 rng(2);
    const auto g = make_grid(31, 91, 0.05, 0.05, 0, 0, 1);
    const auto spec = wave_operator(g, 1.7);
    const GreenOperator G(spec);
    // R+ D g = g and R- D g = g for g supported away from the rim
    const auto h = test::random_in_box(g, IndexBox{5, 20, 40, 50}, rng);
    const auto dh = apply_D(spec, h);
    EXPECT_LE(rel_err(G.retarded(dh), h), 1e-12);
    EXPECT_LE(rel_err(G.advanced(dh), h), 1e-12);
    // D R+- f = f at interior points
    const auto f = test::random_in_box(g, IndexBox{8, 22, 40, 50}, rng);
    for (auto dir : {Direction::retarded, Direction::advanced}) {
        const auto back = apply_D(spec, G.apply(dir, f));
        EXPECT_LE(test::interior_sup(back - f, 1), 1e-12 * sup_norm(f));
    }
}

TEST(Green, FirstOrderTermsInverted) {
    std::mt19937_64 rng(3);
    const auto g = make_grid(41, 101, 0.03, 0.03, 0, -1.5, 2);
    BumpProfile b{0.6, 0.0, 0.4, 0.5, {1.0}};
    Eigen::MatrixXcd u0(2, 2), u1(2, 2), v(2, 2);
    u0 << 0.5, cplx(0, 0.2), 0.1, -0.3;
    u1 << cplx(0.2, 0.1), 0.0, 0.4, 0.1;
    v << 2.0, cplx(1.0, -1.0), 0.5, cplx(0.0, 3.0);
    NormallyHyperbolicSpec nh;
    nh.components = 2;
    nh.U0 = CoefficientField::from_bumps(g, 2, {{b, u0}}, {});
    nh.U1 = CoefficientField::from_bumps(g, 2, {{b, u1}}, {});
    nh.V = CoefficientField::from_bumps(g, 2, {{b, v}}, {});
    const auto spec = make_operator(g, std::move(nh));
    const GreenOperator G(spec);
    const auto f = test::random_in_box(g, IndexBox{10, 25, 45, 55}, rng);
    for (auto dir : {Direction::retarded, Direction::advanced}) {
        const auto back = apply_D(spec, G.apply(dir, f));
        EXPECT_LE(test::interior_sup(back - f, 1), 1e-11 * sup_norm(f));
    }
    EXPECT_THROW(G.apply_adjoint(Direction::retarded, f), PreconditionError);
}

TEST(Green, TimeReflectionConjugacy) {
    std::mt19937_64 rng(4);
    const auto g = make_grid(31, 81, 0.05, 0.05, 0, 0, 1);
    const GreenOperator G(wave_operator(g, 0.8));
    const auto f = test::random_in_box(g, IndexBox{10, 20, 35, 45}, rng);
    const auto lhs = G.advanced(f);
    const auto rhs = time_reverse(G.retarded(time_reverse(f)));
    EXPECT_LE(sup_norm(lhs - rhs), 1e-14 * sup_norm(lhs));
}

TEST(Green, SupportInsideCausalCone) {
    std::mt19937_64 rng(5);
    const auto g = make_grid(41, 121, 0.05, 0.05, 0, 0, 1);
    const GreenOperator G(wave_operator(g, 2.0));
    std::uniform_int_distribution<int> jj(3, 37), kk(45, 75), ww(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const int j = jj(rng), k = kk(rng);
        const IndexBox box{j, std::min(j + ww(rng), 37), k, k + ww(rng)};
        const auto f = test::random_in_box(g, box, rng);
        for (auto dir : {Direction::retarded, Direction::advanced}) {
            const auto u = G.apply(dir, f);
            const auto outside = ~causal_cone(support(f), cone_of(dir));
            EXPECT_EQ(mask_sup_norm(u, outside), 0.0);
        }
    }
}

TEST(Green, AdjointPairing) {
    std::mt19937_64 rng(6);
    const auto g = make_grid(41, 121, 0.05, 0.05, 0, 0, 2);
    Eigen::MatrixXcd v(2, 2);
    v << 1.0, cplx(0.5, 2.0), cplx(-1.0, 0.3), 0.2;
    NormallyHyperbolicSpec nh;
    nh.components = 2;
    nh.U0 = CoefficientField::zero(g, 2);
    nh.U1 = CoefficientField::zero(g, 2);
    nh.V = CoefficientField::from_bumps(g, 2, {{BumpProfile{1.0, 3.0, 0.5, 0.5, {1.0}}, v}}, {});
    const GreenOperator nonsym(make_operator(g, std::move(nh)));
    const GreenOperator sym(wave_operator(g, 1.0));
    for (const auto* G : {&nonsym, &sym}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto f = test::random_in_box(g, IndexBox{5, 35, 50, 70}, rng);
            const auto h = test::random_in_box(g, IndexBox{5, 35, 50, 70}, rng);
            for (auto dir : {Direction::retarded, Direction::advanced}) {
                const cplx lhs = inner_product(G->apply(dir, f), h);
                const cplx rhs = inner_product(f, G->apply_adjoint(dir, h));
                EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
            }
        }
    }
    // symmetric D: R is antisymmetric
    const auto f = test::random_in_box(g, IndexBox{5, 35, 50, 70}, rng);
    const auto h = test::random_in_box(g, IndexBox{5, 35, 50, 70}, rng);
    const cplx a = inner_product(f, sym.causal(h));
    const cplx b = inner_product(sym.causal(f), h);
    EXPECT_LE(std::abs(a + b), 1e-12 * std::abs(a));
}

TEST(Green, DiracInverseAndSupport) {
    std::mt19937_64 rng(7);
    const auto g = make_grid(41, 121, 0.05, 0.05, 0, 0, 2);
    const auto spec = make_operator(g, DiracPairSpec::standard(1.3));
    const GreenOperator G(spec);
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = test::random_in_box(g, IndexBox{10 + trial, 25, 50 + trial, 60}, rng);
        for (auto dir : {Direction::retarded, Direction::advanced}) {
            const auto u = G.apply(dir, f);
            EXPECT_LE(test::interior_sup(apply_D(spec, u) - f, 3), 1e-12 * sup_norm(f));
            EXPECT_EQ(mask_sup_norm(u, ~causal_cone(support(f), cone_of(dir))), 0.0);
        }
    }
}

TEST(Green, DiracAdjointIsGammaConjugate) {
    std::mt19937_64 rng(8);
    const auto g = make_grid(41, 121, 0.05, 0.05, 0, 0, 2);
    const GreenOperator G(make_operator(g, DiracPairSpec::standard(0.6)));
    const auto f = test::random_in_box(g, IndexBox{8, 32, 50, 70}, rng);
    const auto h = test::random_in_box(g, IndexBox{8, 32, 50, 70}, rng);
    for (auto dir : {Direction::retarded, Direction::advanced}) {
        const cplx lhs = inner_product(G.apply(dir, f), h);
        const cplx rhs = inner_product(f, G.apply_adjoint(dir, h));
        EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
    }
}

TEST(Green, BoundaryErrors) {
    const auto g = make_grid(41, 41, 0.05, 0.05, 0, 0, 1);
    const GreenOperator G(wave_operator(g));
    GridFunction rim(g);
    rim.at(10, 0) = 1.0;
    EXPECT_THROW(G.retarded(rim), PreconditionError);
    GridFunction wide(g);
    wide.at(5, 20) = 1.0;
    EXPECT_THROW(G.retarded(wide), BoundaryContaminationError);
    EXPECT_THROW(G.with_check(BoundaryCheck::trace).retarded(wide), BoundaryContaminationError);
    // late source: the advanced cone is the one that escapes
    GridFunction late(g);
    late.at(35, 20) = 1.0;
    EXPECT_NO_THROW(G.retarded(late));
    EXPECT_THROW(G.advanced(late), BoundaryContaminationError);
}
