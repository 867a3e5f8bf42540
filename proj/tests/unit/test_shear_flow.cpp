#include <gtest/gtest.h>

#include <cmath>

#include "prandtl/shear_flow.hpp"

using namespace prandtl;

namespace {

const ShearFlow& canonical()
{
    static const ShearFlow f = build_shear_flow(FlowParams::canonical());
    return f;
}

} // namespace

TEST(ShearFlow, ImposedValuesAtCriticalPoint)
{
    EXPECT_DOUBLE_EQ(canonical().eval(1.0, 0), 1.5);
    EXPECT_EQ(canonical().eval(1.0, 1), 0.0);
    EXPECT_DOUBLE_EQ(canonical().eval(1.0, 2), -1.0);
}

TEST(ShearFlow, ExactPieces)
{
    EXPECT_DOUBLE_EQ(canonical().eval(0.1, 0), 0.1);
    EXPECT_DOUBLE_EQ(canonical().eval(0.1, 1), 1.0);
    EXPECT_EQ(canonical().eval(5.0, 0), 1.0);
    EXPECT_EQ(canonical().eval(5.0, 1), 0.0);
    EXPECT_NEAR(canonical().eval(1.1, 0), 1.495, 1e-15);
    for (int i = 0; i <= 50; ++i) {
        const double y = 0.75 + 0.5 * i / 50.0, t = y - 1.0;
        EXPECT_NEAR(canonical().eval(y, 0), 1.5 - 0.5 * t * t, 1e-14 * 1.5);
        EXPECT_NEAR(canonical().eval(y, 3), 0.0, 1e-14);
    }
}

TEST(ShearFlow, NegativeYRejected)
{
    EXPECT_THROW(canonical().eval(-0.1, 0), Error);
}

TEST(ShearFlow, StructureOfPresets)
{
    for (const auto& p : {FlowParams::canonical(), FlowParams::wide_cap()}) {
        const auto rep = validate_structure(ShearFlow(p));
        for (const auto& c : rep.checks)
            EXPECT_TRUE(c.passed) << c.name << " discrepancy " << c.discrepancy;
    }
}

TEST(ShearFlow, PositiveCurvatureFailsSignCheck)
{
    FlowParams p = FlowParams::canonical();
    p.curvature = 1.0;
    const auto rep = validate_structure(ShearFlow(p));
    EXPECT_FALSE(rep["negative_curvature"].passed);
    EXPECT_THROW(build_shear_flow(p), Error);
}

TEST(ShearFlow, UndershootFailsPositivity)
{
    FlowParams p = FlowParams::canonical();
    p.crit_value = 0.01;
    const auto rep = validate_structure(ShearFlow(p));
    EXPECT_FALSE(rep["positivity"].passed);
    try {
        build_shear_flow(p);
        FAIL() << "expected InfeasibleProfile";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::infeasible_profile);
    }
}

TEST(ShearFlow, InvalidGeometryRejected)
{
    FlowParams p = FlowParams::canonical();
    p.linear_radius_m = 0.9; // beyond a - quad_radius
    EXPECT_THROW(build_shear_flow(p), Error);
    p = FlowParams::canonical();
    p.support_M = 1.1;
    EXPECT_THROW(build_shear_flow(p), Error);
}

TEST(ShearFlow, C4ContinuityAtKnots)
{
    const auto rep = validate_structure(canonical());
    EXPECT_LT(rep["c4_continuity"].discrepancy, 1e-8);
}

TEST(ShearFlow, FiniteDifferenceOrder)
{
    // centred differences of order j against order j + 1 on the left blend
    for (int j = 0; j <= 3; ++j) {
        double err[2];
        for (int r = 0; r < 2; ++r) {
            const double h = 1e-2 / (1 << r);
            double e = 0.0;
            for (int i = 1; i < 40; ++i) {
                const double y = 0.2 + 0.55 * i / 40.0;
                const double fd = (canonical().eval(y + h, j) - canonical().eval(y - h, j)) / (2 * h);
                e = std::max(e, std::abs(fd - canonical().eval(y, j + 1)));
            }
            err[r] = e;
        }
        EXPECT_GE(std::log2(err[0] / err[1]), 1.9) << "order " << j;
    }
}

TEST(ShearFlow, EnergyConstantPieces)
{
    // sup term is max(U, crit_value); the linear piece contributes m^2/2
    EXPECT_DOUBLE_EQ(canonical().sup_abs(), 1.5);
    EXPECT_NEAR(energy_constant(canonical()), 4.027646029972954, 1e-10);
    EXPECT_NEAR(energy_constant(build_shear_flow(FlowParams::wide_cap())), 21.549071705042095, 1e-9);
}
