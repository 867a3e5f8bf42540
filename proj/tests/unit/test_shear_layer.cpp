#include <gtest/gtest.h>

#include <cmath>

#include "prandtl/collocation.hpp"
#include "prandtl/shear_layer.hpp"

using namespace prandtl;

namespace {

const ShearLayerProfile& solved()
{
    static const ShearLayerProfile p = solve_tau(ScanRegion{}, 0.0);
    return p;
}

const cplx tau_exact = std::exp(-3.0 * I * pi / 4.0);

Errc code_of(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::precondition;
}

} // namespace

TEST(AssembleB, PrintedEntries)
{
    const Mat2 b = assemble_B(I, 1.0);
    EXPECT_EQ(b[0][0], cplx(0.0));
    EXPECT_EQ(b[0][1], cplx(1.0));
    EXPECT_NEAR(std::abs(b[1][0] - cplx(-4, -4)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(b[1][1] - cplx(-4, -3)), 0.0, 1e-14);
}

TEST(AssembleB, LimitAtInfinity)
{
    const Mat2 b = assemble_B(tau_exact, 1e6 * std::exp(0.3 * I));
    EXPECT_LT(std::abs(b[0][1] - 1.0), 1e-5);
    EXPECT_LT(std::abs(b[1][0] + I), 1e-5);
    EXPECT_LT(std::abs(b[1][1]), 1e-5);
    // eigenvalues of [[0,1],[-i,0]] are +-sqrt(-i) = +-i e^{i pi/4}
    const cplx l = std::sqrt(b[0][1] * b[1][0] + 0.25 * b[1][1] * b[1][1]) + 0.5 * b[1][1];
    const cplx target = I * std::exp(I * pi / 4.0);
    EXPECT_LT(std::min(std::abs(l - target), std::abs(l + target)), 1e-5);
}

TEST(AssembleB, SingularPoints)
{
    EXPECT_EQ(code_of([] { assemble_B(I, 0.0); }), Errc::singular_coefficient);
    EXPECT_EQ(code_of([] { assemble_B(4.0, 2.0); }), Errc::singular_coefficient);
}

TEST(ConnectionDefect, PathThroughSingularity)
{
    const double Z = 8.0;
    EXPECT_EQ(code_of([&] { connection_defect(Z * Z / 4.0, 0.0, Z); }), Errc::path_through_singularity);
}

TEST(ConnectionDefect, TruncationTooSmall)
{
    EXPECT_EQ(code_of([] { connection_defect(tau_exact, 0.0, 1.5); }), Errc::truncation_too_small);
}

TEST(ConnectionDefect, HolomorphicInTau)
{
    const cplx t0(0.4, -0.9);
    const double h = 1e-5;
    auto f = [](cplx t) { return connection_defect(t, 0.0, 8.0); };
    const cplx dx = (f(t0 + h) - f(t0 - h)) / (2 * h);
    const cplx dy = (f(t0 + I * h) - f(t0 - I * h)) / (2 * h);
    EXPECT_LT(std::abs(dx + I * dy) / std::abs(dx), 1e-6);
}

TEST(SolveTau, UnstableRootAndRescaling)
{
    const auto& p = solved();
    EXPECT_LT(p.tau_tilde.imag(), 0.0);
    EXPECT_LT(p.tau.imag(), 0.0);
    EXPECT_LT(std::abs(p.defect), 1e-10);
    EXPECT_LT(std::abs(connection_defect(p.tau_tilde, 0.0, 8.0)), 1e-8);
    EXPECT_NEAR(std::abs(p.tau - p.tau_tilde / std::sqrt(2.0)), 0.0, 1e-15);
    EXPECT_LT(std::abs(p.tau_tilde - tau_exact), 1e-8);
}

TEST(SolveTau, CollocationCrossValidation)
{
    const auto c = collocation_tau(solved().tau_tilde);
    EXPECT_LT(std::abs(c.tau_tilde - solved().tau_tilde), 1e-6);
    EXPECT_LT(std::abs(c.tau_tilde - tau_exact), 1e-6);
}

TEST(SolveTau, RayIndependence)
{
    const auto q = resolve_on_ray(solved().tau_tilde, 0.05);
    EXPECT_LT(std::abs(q.tau_tilde - solved().tau_tilde), 1e-8);
}

TEST(SolveTau, RefinementInvariance)
{
    SolveOptions o;
    o.layer.truncation_Z = 16.0;
    o.layer.rel_tol = 1e-12;
    const auto q = resolve_on_ray(solved().tau_tilde, 0.0, o);
    EXPECT_LT(std::abs(q.tau_tilde - solved().tau_tilde), 1e-8);
}

TEST(SolveTau, IsolatedRoot)
{
    const double centre = std::abs(connection_defect(solved().tau_tilde, 0.0, 8.0));
    double ring = INFINITY;
    for (int k = 0; k < 16; ++k)
        ring = std::min(ring, std::abs(connection_defect(solved().tau_tilde + 0.1 * std::exp(I * (2 * pi * k / 16)),
                                                         0.0, 8.0)));
    EXPECT_GT(ring, 1e3 * centre);
}

TEST(SolveTau, ConjugateIsNotARoot)
{
    // the equation is not conjugation symmetric: conj(tau~*) gives an O(1) defect
    const double at_conj = std::abs(connection_defect(std::conj(solved().tau_tilde), 0.0, 8.0));
    EXPECT_GT(at_conj, 1e-6);
}

TEST(SolveTau, EmptyRegionHasNoRoot)
{
    ScanRegion r{2.0, 3.0, -3.0, -2.0, 5, 5};
    const Errc c = code_of([&] { solve_tau(r, 0.0); });
    EXPECT_TRUE(c == Errc::no_root_in_region || c == Errc::newton_diverged);
}

TEST(ShearLayerProfile, BoundaryLimits)
{
    const auto& p = solved();
    EXPECT_LT(std::abs(p.W_tilde.back() - 1.0), 1e-6);
    EXPECT_LT(std::abs(p.W_tilde.front()), 1e-6);
    EXPECT_LT(std::abs(p.V.front()), 1e-6);
    EXPECT_LT(std::abs(p.V.back()), 1e-6);
}

TEST(ShearLayerProfile, JumpConditions)
{
    const auto& p = solved();
    EXPECT_LT(std::abs(p.jumps[0] + p.tau), 1e-6);
    EXPECT_LT(std::abs(p.jumps[1]), 1e-6);
    EXPECT_LT(std::abs(p.jumps[2] - 1.0), 1e-6); // -u_s''(a) = +1
}

TEST(ShearLayerProfile, VTildeRelation)
{
    const auto& p = solved();
    for (std::size_t i = 0; i < p.z_grid.size(); ++i) {
        const cplx z = p.zscale() * p.z_grid[i];
        EXPECT_LT(std::abs(p.V_tilde[i] - (p.tau - 0.5 * z * z) * p.W_tilde[i]), 1e-10);
    }
}

TEST(ShearLayerProfile, ThirdOrderResidual)
{
    // (tau~ - z^2)^2 W' + i (Q W)''' with W' = X and derivatives by finite differences of X
    const auto& p = solved();
    const double h = 1e-3;
    RVec r;
    for (double x = -6.0; x <= 6.0 + 1e-12; x += h)
        r.push_back(x);
    const auto s = p.solution.sample(r);
    const CVec xp = fd_derivative(s.x, h), xpp = fd_derivative(xp, h);
    double worst = 0.0, scale = max_abs(s.x);
    for (std::size_t i = 2; i + 2 < r.size(); ++i) {
        if (std::abs(r[i]) < 0.1)
            continue;
        const double z = r[i];
        const cplx Q = p.tau_tilde - z * z;
        const cplx res = Q * Q * s.x[i] + I * (-6.0 * s.x[i] - 6.0 * z * xp[i] + Q * xpp[i]);
        worst = std::max(worst, std::abs(res) / scale);
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(SectorDecay, FittedRates)
{
    const auto rep = verify_sector_decay(solved(), pi / 8, pi / 8, 0.05, 1);
    ASSERT_EQ(rep.rays.size(), 1u);
    EXPECT_GT(rep.rays[0].alpha, 0.0);
    EXPECT_GT(rep.rays[0].r_squared, 0.99);
    EXPECT_TRUE(rep.all_positive);
}

TEST(SectorDecay, RealAxisRate)
{
    EXPECT_NEAR(predicted_decay_alpha(0.0), std::sqrt(2.0) / 4.0, 1e-15);
    EXPECT_NEAR(solved().decay_rate_alpha / (std::sqrt(2.0) / 4.0), 1.0, 0.1);
}

TEST(SectorDecay, OutsideSectorRejected)
{
    EXPECT_THROW(verify_sector_decay(solved(), pi / 2, pi / 2, 0.05, 1), Error);
}
