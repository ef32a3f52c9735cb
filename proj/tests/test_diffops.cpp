#include <random>

#include <gtest/gtest.h>

#include "ncwave/diffops.hpp"
#include "test_support.hpp"

using namespace ncwave;

namespace {

// U0 = u0 * bump, U1 = u1 * bump, V = v * bump (+ constant), N x N.
OperatorSpec general_spec(const SpacetimeGrid& g, bool symmetric) {
    const int n = g.components;
    BumpProfile b{0.5, 0.5, 0.4, 0.4, {1.0}};
    Eigen::MatrixXcd u0 = Eigen::MatrixXcd::Zero(n, n), u1 = u0, v = u0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            u0(r, c) = cplx(0.3 + r, 0.2 * c);
            u1(r, c) = cplx(-0.4 * c, 0.1 + r);
            v(r, c) = cplx(1.0 + r + 2 * c, 0.5 * (r - c) + 0.3);
        }
    NormallyHyperbolicSpec nh;
    nh.components = n;
    if (symmetric) {
        nh.U0 = CoefficientField::zero(g, n);
        nh.U1 = CoefficientField::zero(g, n);
        Eigen::MatrixXcd vh = v + v.adjoint();
        nh.V = CoefficientField::from_bumps(g, n, {{b, vh}}, Eigen::MatrixXcd());
    } else {
        nh.U0 = CoefficientField::from_bumps(g, n, {{b, u0}}, Eigen::MatrixXcd());
        nh.U1 = CoefficientField::from_bumps(g, n, {{b, u1}}, Eigen::MatrixXcd());
        nh.V = CoefficientField::from_bumps(g, n, {{b, v}}, Eigen::MatrixXcd());
    }
    return make_operator(g, std::move(nh));
}

}  // namespace

TEST(ApplyD, WaveAnnihilatesAffine) {
    const auto g = make_grid(31, 41, 0.01, 0.02, -0.1, -0.4, 1);
    const auto spec = wave_operator(g);
    const auto f = GridFunction::sample(g, [](double t, double x, int) { return cplx(0.7 + 1.3 * t - 2.1 * x, 0.4 * x); });
    const auto out = apply_D(spec, f);
    EXPECT_LE(test::interior_sup(out, 1), 1e-9);
}

TEST(ApplyD, DiscretePlaneWaveIsExactSolution) {
    const auto g = make_grid(41, 61, 0.04, 0.05, 0, 0, 1);
    const double k = 7.0;
    const double s = std::sin(k * g.dx / 2.0) / g.dx;
    const double omega = 2.0 / g.dt * std::asin(g.dt * s);
    const auto f = GridFunction::sample(g, [&](double t, double x, int) {
        return std::exp(cplx(0.0, k * x - omega * t));
    });
    const auto out = apply_D(wave_operator(g), f);
    // Each stencil term is ~k^2 ~ 50; cancellation to 1e-12 relative.
    EXPECT_LE(test::interior_sup(out, 1), 1e-12 * k * k);
}

TEST(ApplyD, ConstantPotential) {
    const auto g = make_grid(11, 11, 0.1, 0.1, 0, 0, 1);
    const auto spec = wave_operator(g, 2.5);
    const auto f = GridFunction::sample(g, [](double, double, int) { return cplx(1.0); });
    const auto out = apply_D(spec, f);
    for (int j = 1; j < 10; ++j)
        for (int k = 1; k < 10; ++k) EXPECT_NEAR(std::abs(out.at(j, k) - 2.5), 0.0, 1e-12);
}

TEST(ApplyD, SecondOrderConsistency) {
    // f = sin(t + 2x) e^{-x^2}, coefficients U0 = 0.3 b, U1 = -0.2 b, V = 0.5 b with
    // b = bump centered at (0.5, 0.5); compare against the continuum image.
    auto continuum = [](double t, double x) {
        const double e = std::exp(-x * x);
        const double f = std::sin(t + 2 * x) * e;
        const double ft = std::cos(t + 2 * x) * e;
        const double ftt = -f;
        const double fx = 2 * std::cos(t + 2 * x) * e - 2 * x * f;
        const double fxx = -4 * std::sin(t + 2 * x) * e - 4 * x * std::cos(t + 2 * x) * e - 2 * f - 2 * x * fx;
        const double b = bump1d((t - 0.5) / 0.4) * bump1d((x - 0.5) / 0.4);
        return ftt - fxx + 0.3 * b * ft - 0.2 * b * fx + 0.5 * b * f;
    };
    std::vector<double> errors;
    for (int level = 0; level < 3; ++level) {
        const int m = 20 << level;
        const double h = 1.0 / m;
        const auto g = make_grid(m + 1, m + 1, h, h, 0, 0, 1);
        BumpProfile b{0.5, 0.5, 0.4, 0.4, {1.0}};
        NormallyHyperbolicSpec nh;
        nh.U0 = CoefficientField::from_bumps(g, 1, {{b, Eigen::MatrixXcd::Constant(1, 1, 0.3)}}, {});
        nh.U1 = CoefficientField::from_bumps(g, 1, {{b, Eigen::MatrixXcd::Constant(1, 1, -0.2)}}, {});
        nh.V = CoefficientField::from_bumps(g, 1, {{b, Eigen::MatrixXcd::Constant(1, 1, 0.5)}}, {});
        const auto spec = make_operator(g, std::move(nh));
        const auto f = GridFunction::sample(g, [](double t, double x, int) { return cplx(std::sin(t + 2 * x) * std::exp(-x * x)); });
        const auto out = apply_D(spec, f);
        double err = 0.0;
        for (int j = 1; j < m; ++j)
            for (int k = 1; k < m; ++k) err = std::max(err, std::abs(out.at(j, k) - continuum(g.t(j), g.x(k))));
        errors.push_back(err);
    }
    EXPECT_NEAR(errors[0] / errors[1], 4.0, 0.6);
    EXPECT_NEAR(errors[1] / errors[2], 4.0, 0.4);
}

TEST(ApplyDAdjoint, SummationByParts) {
    std::mt19937_64 rng(3);
    for (int n : {1, 2}) {
        const auto g = make_grid(25, 30, 0.04, 0.05, 0, 0, n);
        for (bool symmetric : {false, true}) {
            const auto spec = general_spec(g, symmetric);
            const IndexBox box{2, 22, 2, 27};
            for (int trial = 0; trial < 5; ++trial) {
                const auto f = test::random_in_box(g, box, rng);
                const auto h = test::random_in_box(g, box, rng);
                const cplx lhs = inner_product(apply_D(spec, f), h);
                const cplx rhs = inner_product(f, apply_D_adjoint(spec, h));
                EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
            }
        }
    }
}

TEST(ApplyDAdjoint, SymmetricSpecCoincides) {
    std::mt19937_64 rng(5);
    const auto g = make_grid(20, 20, 0.05, 0.05, 0, 0, 2);
    const auto spec = general_spec(g, true);
    const auto f = test::random_in_box(g, IndexBox{2, 17, 2, 17}, rng);
    const auto a = apply_D(spec, f);
    const auto b = apply_D_adjoint(spec, f);
    EXPECT_LE(test::interior_sup(a - b, 1), 1e-12 * sup_norm(a));
}

TEST(ApplyDAdjoint, PotentialBecomesAdjoint) {
    const auto g = make_grid(9, 9, 0.1, 0.1, 0, 0, 2);
    Eigen::MatrixXcd v(2, 2);
    v << 1.0, cplx(2.0, 1.0), cplx(-3.0, 0.5), 4.0;
    NormallyHyperbolicSpec nh;
    nh.components = 2;
    nh.U0 = CoefficientField::zero(g, 2);
    nh.U1 = CoefficientField::zero(g, 2);
    nh.V = CoefficientField::constant(g, v);
    const auto spec = make_operator(g, std::move(nh));
    GridFunction f(g);
    f.at(4, 4, 0) = 1.0;
    const auto a = apply_D_adjoint(spec, f);
    const auto plain = apply_D(spec, f);
    // Same principal part; zeroth-order term swaps V for V^dagger.
    EXPECT_NEAR(std::abs(a.at(4, 4, 1) - std::conj(v(0, 1))), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(plain.at(4, 4, 1) - v(1, 0)), 0.0, 1e-12);
}

TEST(DiracPair, CliffordViolationRejected) {
    auto d = DiracPairSpec::standard(1.0);
    d.gamma1 = Eigen::Matrix2cd::Identity();
    EXPECT_THROW(d.validate(), PreconditionError);
    const auto g = make_grid(9, 9, 0.1, 0.1, 0, 0, 2);
    EXPECT_THROW(make_operator(g, d), PreconditionError);
    const auto g1 = make_grid(9, 9, 0.1, 0.1, 0, 0, 1);
    EXPECT_THROW(make_operator(g1, DiracPairSpec::standard(1.0)), GridError);
}

TEST(DiracPair, ConstantSpinorMassOne) {
    const auto g = make_grid(15, 15, 0.1, 0.1, 0, 0, 2);
    const auto spec = make_operator(g, DiracPairSpec::standard(1.0));
    const auto f = GridFunction::sample(g, [](double, double, int a) { return a == 0 ? cplx(1.0, 2.0) : cplx(-0.5); });
    const auto out = compose_pair(spec, f);
    EXPECT_LE(test::interior_sup(out - f, 2), 1e-13);
}

TEST(DiracPair, ComposeMatchesBoxSecondOrder) {
    // m = 0, Gaussian spinor: D'D f = box f to O(h^2).
    const double sigma = 0.25;
    std::vector<double> rel;
    for (int level = 0; level < 2; ++level) {
        const int m = 40 << level;
        const double h = 2.0 / m;
        const auto g = make_grid(m + 1, m + 1, h, h, -1, -1, 2);
        const auto spec = make_operator(g, DiracPairSpec::standard(0.0));
        auto gauss = [&](double t, double x) { return std::exp(-(t * t + x * x) / (sigma * sigma)); };
        const auto f = GridFunction::sample(g, [&](double t, double x, int a) { return (a == 0 ? cplx(1.0) : cplx(0.0, 1.0)) * gauss(t, x); });
        const auto box = GridFunction::sample(g, [&](double t, double x, int a) {
            return (a == 0 ? cplx(1.0) : cplx(0.0, 1.0)) * 4.0 * (t * t - x * x) / std::pow(sigma, 4) * gauss(t, x);
        });
        const auto out = compose_pair(spec, f);
        const auto inner = interior_mask(g, 2);
        rel.push_back(mask_sup_norm(out - box, inner) / mask_sup_norm(box, inner));
    }
    EXPECT_LT(rel[1], rel[0]);
    EXPECT_NEAR(rel[0] / rel[1], 4.0, 0.6);
}

TEST(DiracPair, DDPrimeCommutesWithDPrimeD) {
    std::mt19937_64 rng(11);
    const auto g = make_grid(20, 20, 0.05, 0.05, 0, 0, 2);
    const auto spec = make_operator(g, DiracPairSpec::standard(0.7));
    const auto f = test::random_in_box(g, IndexBox{3, 16, 3, 16}, rng);
    const auto a = apply_D_prime(spec, apply_D(spec, f));
    const auto b = apply_D(spec, apply_D_prime(spec, f));
    EXPECT_LE(test::interior_sup(a - b, 2), 1e-12 * sup_norm(a));
    // and both equal the stride-2 normally hyperbolic companion
    const auto c = apply_D(companion_operator(spec), f);
    EXPECT_LE(test::interior_sup(a - c, 2), 1e-12 * sup_norm(a));
}
