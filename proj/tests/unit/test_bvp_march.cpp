#include <gtest/gtest.h>

#include <cmath>

#include "prandtl/bvp_march.hpp"
#include "prandtl/dispersion.hpp"
#include "prandtl/quasimode.hpp"

using namespace prandtl;

namespace {

const ShearFlow& wide()
{
    static const ShearFlow f = build_shear_flow(FlowParams::wide_cap());
    return f;
}

UniformGrid grid(std::size_t n = 4096)
{
    return UniformGrid::with_node(wide().support(), n, wide().params().linear_radius_m);
}

CVec sample(const UniformGrid& g, double (*u)(double))
{
    CVec v(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        v[i] = u(g.y(i));
    return v;
}

double y2e(double y) { return y * y * std::exp(-y); }

double max_diff(const CVec& a, const CVec& b, std::size_t i0 = 0, std::size_t i1 = SIZE_MAX)
{
    double d = 0.0;
    for (std::size_t i = i0; i < std::min(a.size(), i1); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

struct QuasimodeMarch {
    double target;
    CVec u1;
    BvpModeState s, s0;
};

// wide_cap, eps = 1e-2: conjugated quasimode profile marched with m = 1/eps and m = 0
const QuasimodeMarch& quasimode_march()
{
    static const QuasimodeMarch r = [] {
        const double e = 1e-2;
        const auto p0 = solve_tau(ScanRegion{}, 0.0);
        const auto p = resolve_on_ray(p0.tau_tilde, quasimode_ray(wide(), e, p0.tau, Variant::BVP));
        const auto q = assemble_quasimode(wide(), p, e, 2, Variant::BVP);
        CVec u1(q.U_profile.size());
        for (std::size_t i = 0; i < u1.size(); ++i)
            u1[i] = std::conj(q.U_profile[i]);
        u1[0] = 0.0;
        return QuasimodeMarch{growth_rate_sigma(wide(), p0.tau) / std::sqrt(e), u1,
                              march_bvp(wide(), 100, q.grid, u1, 1.0, 0.005),
                              march_bvp(wide(), 0, q.grid, u1, 1.0, 0.005)};
    }();
    return r;
}

} // namespace

TEST(ApplyL, ZeroAndPieces)
{
    const auto g = grid();
    EXPECT_EQ(max_abs(apply_L(wide(), g, CVec(g.n))), 0.0);
    const CVec u = sample(g, y2e);
    const CVec f = apply_L(wide(), g, u);
    const double m = wide().params().linear_radius_m, M = wide().support();
    // beyond the support u_s' = 0 and L is multiplication by U
    for (std::size_t i = g.index_of(M); i < g.n; ++i)
        EXPECT_NEAR(std::abs(f[i] - wide().params().far_field_U * u[i]), 0.0, 1e-15);
    // on the linear piece d_y (Lu) = y u'
    const CVec df = fd_derivative(f, g.h), du = fd_derivative(u, g.h);
    for (std::size_t i = 1; i < g.index_of(m); ++i)
        EXPECT_NEAR(std::abs(df[i] - g.y(i) * du[i]), 0.0, 1e-5);
}

TEST(ApplyL, RejectsNonzeroWallValue)
{
    const auto g = grid();
    EXPECT_THROW(apply_L(wide(), g, CVec(g.n, 1.0)), Error);
}

TEST(InvertL, RoundTrip)
{
    const auto g = grid();
    const CVec u = sample(g, y2e);
    const CVec back = invert_L(wide(), g, apply_L(wide(), g, u));
    EXPECT_LT(max_diff(back, u) / max_abs(u), 1e-10);
    EXPECT_EQ(max_abs(invert_L(wide(), g, CVec(g.n))), 0.0);
}

TEST(InvertL, TraceViolation)
{
    const auto g = grid();
    CVec f(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        f[i] = 1.0 + g.y(i);
    try {
        invert_L(wide(), g, f);
        FAIL() << "expected TraceViolation";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::trace_violation);
    }
    // f(0) = 0 but f'(0) != 0
    for (std::size_t i = 0; i < g.n; ++i)
        f[i] = std::sin(g.y(i));
    EXPECT_THROW(invert_L(wide(), g, f), Error);
    EXPECT_THROW(invert_L_representation(wide(), g, f), Error);
}

TEST(InvertL, RepresentationConverges)
{
    double err[2];
    for (int r = 0; r < 2; ++r) {
        const auto g = grid(2048u << r);
        const CVec u = sample(g, y2e);
        err[r] = max_diff(invert_L_representation(wide(), g, apply_L(wide(), g, u)), u) / max_abs(u);
    }
    EXPECT_LT(err[1], 1e-4);
    EXPECT_GT(err[0] / err[1], 3.0);
}

TEST(ApplyLprime, LinearPieceAndFarField)
{
    const auto g = grid();
    const CVec u = sample(g, y2e);
    const CVec lp = apply_Lprime(wide(), g, u), du = fd_derivative(u, g.h);
    const double m = wide().params().linear_radius_m, M = wide().support();
    EXPECT_EQ(max_diff(lp, du, 0, g.index_of(m) + 1), 0.0);
    EXPECT_LT(max_diff(lp, du, g.index_of(M) + 1), 1e-14);
    // between m and M the nonlocal term is active
    EXPECT_GT(max_diff(lp, du, g.index_of(m) + 1, g.index_of(M)), 1e-3);
}

TEST(MarchBvp, ZeroDataStaysZero)
{
    const auto g = UniformGrid::with_node(2.0 * wide().support(), 1024, wide().params().linear_radius_m);
    for (int m : {0, 1, 4, 16}) {
        const auto s = march_bvp(wide(), m, g, CVec(g.n), 1.0, 0.005);
        EXPECT_FALSE(s.overflow);
        for (const auto& st : s.norms_history)
            EXPECT_EQ(st.u_sup, 0.0) << "m = " << m;
    }
}

TEST(MarchBvp, QuasimodeGrowthRate)
{
    const auto& r = quasimode_march();
    EXPECT_FALSE(r.s.overflow);
    EXPECT_NEAR(r.s.x, 1.0, 1e-12);
    const LineFit g = fit_x_growth(r.s.norms_history), g0 = fit_x_growth(r.s0.norms_history);
    EXPECT_NEAR(g.slope / r.target, 1.0, 0.2);
    EXPECT_LE(g0.slope, 0.05 * r.target);
}

TEST(MarchBvp, OverflowStopsMarch)
{
    const auto& r = quasimode_march();
    MarchOptions o;
    o.overflow_limit = 2.0 * r.s.norms_history.front().Lu_h2;
    const auto s = march_bvp(wide(), 100, r.s.grid, r.u1, 1.0, 0.005, o);
    EXPECT_TRUE(s.overflow);
    EXPECT_LT(s.x, 1.0);
}

TEST(MarchBvp, EnergyBookkeepingSecondOrder)
{
    const auto& r = quasimode_march();
    const auto s2 = march_bvp(wide(), 100, r.s.grid, r.u1, 1.0, 0.0025);
    const auto e1 = energy_bookkeeping(r.s.norms_history, 0.1);
    const auto e2 = energy_bookkeeping(s2.norms_history, 0.1);
    for (int k = 0; k <= 2; ++k) {
        EXPECT_LT(e2.max_rel_error[k], 1e-2) << "k = " << k;
        EXPECT_GT(e1.max_rel_error[k] / e2.max_rel_error[k], 3.0) << "k = " << k;
    }
    // the a priori constant settles under dx refinement
    const double C1 = estimate_constant(r.s.norms_history), C2 = estimate_constant(s2.norms_history);
    EXPECT_GT(C1, 0.0);
    EXPECT_NEAR(C2 / C1, 1.0, 0.1);
}

TEST(HardyLemma, CorpusDoublingAndRoundTrip)
{
    const double M = wide().support();
    const auto h1 = hardy_lemma_check(wide(), hardy_corpus(M, 8, 1));
    const auto h2 = hardy_lemma_check(wide(), hardy_corpus(M, 16, 1));
    EXPECT_EQ(h2.entries.size(), 19u);
    EXPECT_LT(h2.worst_round_trip, 1e-10);
    EXPECT_GT(h1.C, 0.0);
    EXPECT_LE(h1.C, h2.C); // the doubled corpus contains the first one
    EXPECT_NEAR(h2.C / h1.C, 1.0, 0.2);
    EXPECT_TRUE(std::isfinite(h2.C_m));
}

TEST(HardyLemma, CorpusIsDeterministicAndVanishesAtWall)
{
    const double M = wide().support();
    const auto a = hardy_corpus(M, 4, 7), b = hardy_corpus(M, 4, 7);
    ASSERT_EQ(a.size(), 7u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        EXPECT_NEAR(a[i].u(0.0), 0.0, 1e-15);
        for (double y : {0.3, 1.7, 4.1})
            EXPECT_EQ(a[i].u(y), b[i].u(y));
    }
}

TEST(HardyLemma, ZeroFunction)
{
    const auto r = hardy_lemma_check(wide(), {{"zero", [](double) { return 0.0; }}});
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(r.entries[0].Lu_h2, 0.0);
    EXPECT_EQ(r.C, 0.0);
}
