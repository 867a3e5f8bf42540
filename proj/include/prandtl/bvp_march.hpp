#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "errors.hpp"
#include "numerics.hpp"
#include "shear_flow.hpp"

namespace prandtl {

namespace detail {

inline RVec flow_samples(const ShearFlow& flow, const UniformGrid& g, int order)
{
    RVec out(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        out[i] = flow.eval(g.y(i), order);
    return out;
}

/// H^k norm restricted to nodes [i0, i1].
inline double sobolev_norm_on(const CVec& f, double h, int k, std::size_t i0, std::size_t i1)
{
    return weighted_sobolev_norm(CVec(f.begin() + i0, f.begin() + i1 + 1), h, 0.0, k);
}

} // namespace detail

/// L u = u_s u - u_s' int_0^y u (trapezoidal prefix integral).
inline CVec apply_L(const ShearFlow& flow, const UniformGrid& grid, const CVec& u)
{
    require(u.size() == grid.n, "profile does not match the grid");
    require(std::abs(u[0]) <= 1e-12 * std::max(1.0, max_abs(u)), "apply_L needs u(0) = 0");
    const CVec cum = cumtrapz(u, grid.h);
    CVec f(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i)
        f[i] = flow.eval(grid.y(i), 0) * u[i] - flow.eval(grid.y(i), 1) * cum[i];
    return f;
}

struct TraceOptions {
    double value_tol = 1e-10; // |f(0)| relative to max|f|
    double slope_tol = 1e-2;  // |f'(0)| relative to max|f'|
};

inline void check_traces(const CVec& f, double h, const TraceOptions& o = {})
{
    const double fmax = std::max(max_abs(f), std::numeric_limits<double>::min());
    const CVec df = fd_derivative(f, h);
    const double dmax = std::max(max_abs(df), std::numeric_limits<double>::min());
    if (std::abs(f[0]) > o.value_tol * fmax)
        throw Error(Errc::trace_violation, "f(0) = " + std::to_string(std::abs(f[0])) + " makes int f/t^2 diverge");
    if (std::abs(df[0]) > o.slope_tol * dmax)
        throw Error(Errc::trace_violation, "f'(0) = " + std::to_string(std::abs(df[0])) + " makes int f/t^2 diverge");
}

/// Exact inverse of the discrete apply_L: forward recurrence on the trapezoidal prefix integral.
inline CVec invert_L(const ShearFlow& flow, const UniformGrid& grid, const CVec& f, const TraceOptions& o = {})
{
    require(f.size() == grid.n, "profile does not match the grid");
    check_traces(f, grid.h, o);
    const double h = grid.h;
    CVec u(grid.n);
    cplx cum = 0.0;
    for (std::size_t i = 1; i < grid.n; ++i) {
        const double us = flow.eval(grid.y(i), 0), usp = flow.eval(grid.y(i), 1);
        const cplx carry = cum + 0.5 * h * u[i - 1];
        u[i] = (f[i] + usp * carry) / (us - 0.5 * h * usp);
        cum = carry + 0.5 * h * u[i];
    }
    return u;
}

/// u = u_s' int_0^y f/u_s^2 + f/u_s, with int_0^m f/t^2 = int_0^m f'/t - f(m)/m on the linear piece.
/// Quadrature is second order; f' comes from centered differences.
inline CVec invert_L_representation(const ShearFlow& flow, const UniformGrid& grid, const CVec& f,
                                    const TraceOptions& o = {})
{
    require(f.size() == grid.n, "profile does not match the grid");
    check_traces(f, grid.h, o);
    const double m = flow.params().linear_radius_m;
    const std::size_t im = grid.index_of(m);
    require(grid.has_node(m), "grid must contain the end of the linear piece as a node");
    const CVec df = fd_derivative(f, grid.h);
    // int_0^y f'/t on [0, m]: f'(t)/t -> f''(0) at t = 0
    CVec g(grid.n);
    g[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (grid.h * grid.h);
    for (std::size_t i = 1; i < grid.n; ++i)
        g[i] = i <= im ? df[i] / grid.y(i) : f[i] / std::pow(flow.eval(grid.y(i), 0), 2);
    CVec head(g.begin(), g.begin() + im + 1);
    const CVec ch = cumtrapz(head, grid.h);
    CVec tail(g.begin() + im, g.end());
    tail[0] = f[im] / (m * m);
    const CVec ct = cumtrapz(tail, grid.h);
    CVec u(grid.n);
    for (std::size_t i = 1; i < grid.n; ++i) {
        const double y = grid.y(i), us = flow.eval(y, 0), usp = flow.eval(y, 1);
        cplx integral;
        if (i <= im)
            integral = ch[i] - f[i] / y; // int_0^y f/t^2 = int_0^y f'/t - f(y)/y
        else
            integral = ch[im] - f[im] / m + ct[i - im];
        u[i] = usp * integral + f[i] / us;
    }
    return u;
}

/// L'u = u' - (u_s''/u_s) int_0^y u, with an exact zero coefficient on the linear piece.
inline CVec apply_Lprime(const ShearFlow& flow, const UniformGrid& grid, const CVec& u)
{
    require(u.size() == grid.n, "profile does not match the grid");
    require(std::abs(u[0]) <= 1e-12 * std::max(1.0, max_abs(u)), "apply_Lprime needs u(0) = 0");
    const double m = flow.params().linear_radius_m;
    const CVec du = fd_derivative(u, grid.h);
    const CVec cum = cumtrapz(u, grid.h);
    CVec out(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double y = grid.y(i);
        out[i] = du[i];
        if (y > m)
            out[i] -= flow.eval(y, 2) / flow.eval(y, 0) * cum[i];
    }
    return out;
}

struct BvpStation {
    double x = 0.0;
    double u_h1 = 0.0;   // ||u||_{H^1}
    double Lu_h2 = 0.0;  // ||Lu||_{H^2}
    double u_sup = 0.0;
    std::array<double, 3> Lu_dk2{}; // ||d^k Lu||^2, k = 0..2
    std::array<double, 3> I_k{};    // I_{k,1} + I_{k,2}
    double u_yy2 = 0.0;             // ||d^2 u||^2
};

struct BvpModeState {
    int m = 0;
    double x = 0.0;
    UniformGrid grid;
    CVec u_hat, Lu;
    std::vector<BvpStation> norms_history;
    bool overflow = false;
};

struct MarchOptions {
    double theta = 0.5;           // 0.5 Crank-Nicolson, 1 backward Euler
    int startup_euler_steps = 2;  // damping of the wall-stiff modes at x = 0
    double overflow_limit = 1e12;
};

namespace detail {

inline BvpStation station_norms(const CVec& u, const CVec& f, int m, double h, double x)
{
    BvpStation s;
    s.x = x;
    s.u_h1 = weighted_sobolev_norm(u, h, 0.0, 1);
    s.Lu_h2 = weighted_sobolev_norm(f, h, 0.0, 2);
    s.u_sup = max_abs(u);
    // (1/2) d_x ||d^k Lu||^2 = Re( d^k(-i m u + u''), d^k Lu )
    CVec dk_f = f, dk_u = u;
    // u'' from the march stencil; the equation at the wall forces u''(0) = 0
    const std::size_t n = u.size();
    CVec u2(n);
    for (std::size_t i = 1; i + 1 < n; ++i)
        u2[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
    u2[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) / (h * h);
    {
        RVec d(u2.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = std::norm(u2[i]);
        s.u_yy2 = trapz(d, h);
    }
    CVec dk_u2 = u2;
    const cplx im = I * static_cast<double>(m);
    for (int k = 0; k <= 2; ++k) {
        RVec nf(f.size()), ip(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            nf[i] = std::norm(dk_f[i]);
            ip[i] = std::real(std::conj(-im * dk_u[i] + dk_u2[i]) * dk_f[i]);
        }
        s.Lu_dk2[k] = trapz(nf, h);
        s.I_k[k] = trapz(ip, h);
        if (k < 2) {
            dk_f = fd_derivative(dk_f, h);
            dk_u = fd_derivative(dk_u, h);
            dk_u2 = fd_derivative(dk_u2, h);
        }
    }
    return s;
}

} // namespace detail

/// Marches d_x L u = -i m u + d_y^2 u for one temporal mode e^{i m t} from u(0, y) = u1.
/// Unknowns (u_i, I_i = int_0^{y_i} u) interleaved; theta-scheme in x with a constant sparse LU.
inline BvpModeState march_bvp(const ShearFlow& flow, int m, const UniformGrid& grid, const CVec& u1, double X,
                              double dx, const MarchOptions& o = {})
{
    require(u1.size() == grid.n, "boundary data does not match the grid");
    require(std::abs(u1[0]) <= 1e-12 * std::max(1.0, max_abs(u1)), "boundary data needs u1(0) = 0");
    require(dx > 0 && X >= 0, "march needs dx > 0 and X >= 0");
    using SpMat = Eigen::SparseMatrix<cplx>;
    const std::size_t n = grid.n;
    const double h = grid.h, h2 = h * h;
    const RVec us = detail::flow_samples(flow, grid, 0), usp = detail::flow_samples(flow, grid, 1);
    const cplx im = I * static_cast<double>(m);

    auto B = [&](const CVec& u) { // -i m u + D2 u, reflecting at Y
        CVec r(n);
        for (std::size_t i = 1; i + 1 < n; ++i)
            r[i] = -im * u[i] + (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
        r[n - 1] = -im * u[n - 1] + 2.0 * (u[n - 2] - u[n - 1]) / h2;
        return r;
    };
    auto build = [&](double c) {
        std::vector<Eigen::Triplet<cplx>> t;
        t.reserve(8 * n);
        t.emplace_back(0, 0, 1.0);
        t.emplace_back(1, 1, 1.0);
        for (std::size_t i = 1; i < n; ++i) {
            const auto ru = static_cast<int>(2 * i), ri = ru + 1;
            const int u_i = ru, I_i = ri, u_m = ru - 2, u_p = ru + 2;
            // f_i - c B_i
            t.emplace_back(ru, u_i, us[i] - c * (-im));
            t.emplace_back(ru, I_i, -usp[i]);
            if (i + 1 < n) {
                t.emplace_back(ru, u_i, 2.0 * c / h2);
                t.emplace_back(ru, u_m, -c / h2);
                t.emplace_back(ru, u_p, -c / h2);
            } else {
                t.emplace_back(ru, u_i, 2.0 * c / h2);
                t.emplace_back(ru, u_m, -2.0 * c / h2);
            }
            // I_i - I_{i-1} - h/2 (u_i + u_{i-1}) = 0
            t.emplace_back(ri, I_i, 1.0);
            t.emplace_back(ri, I_i - 2, -1.0);
            t.emplace_back(ri, u_i, -0.5 * h);
            t.emplace_back(ri, u_m, -0.5 * h);
        }
        SpMat A(static_cast<int>(2 * n), static_cast<int>(2 * n));
        A.setFromTriplets(t.begin(), t.end());
        A.makeCompressed();
        return A;
    };

    BvpModeState s;
    s.m = m;
    s.grid = grid;
    s.u_hat = u1;
    s.u_hat[0] = 0.0;
    s.Lu = apply_L(flow, grid, s.u_hat);
    s.norms_history.push_back(detail::station_norms(s.u_hat, s.Lu, m, h, 0.0));
    if (X == 0.0)
        return s;

    Eigen::SparseLU<SpMat> lu_euler, lu_theta;
    const SpMat A_theta = build(o.theta * dx);
    lu_theta.compute(A_theta);
    if (lu_theta.info() != Eigen::Success)
        throw Error(Errc::precondition, "march matrix is singular");
    if (o.startup_euler_steps > 0) {
        lu_euler.compute(build(dx));
        if (lu_euler.info() != Eigen::Success)
            throw Error(Errc::precondition, "march matrix is singular");
    }
    const auto steps = static_cast<std::size_t>(std::llround(X / dx));
    Eigen::VectorXcd rhs(2 * n);
    for (std::size_t j = 0; j < steps; ++j) {
        const bool euler = static_cast<int>(j) < o.startup_euler_steps;
        const double expl = euler ? 0.0 : (1.0 - o.theta) * dx;
        const CVec Bu = B(s.u_hat);
        rhs.setZero();
        for (std::size_t i = 1; i < n; ++i)
            rhs(2 * i) = s.Lu[i] + expl * Bu[i];
        const Eigen::VectorXcd sol = euler ? lu_euler.solve(rhs) : lu_theta.solve(rhs);
        for (std::size_t i = 0; i < n; ++i)
            s.u_hat[i] = sol(2 * i);
        s.u_hat[0] = 0.0;
        s.Lu = apply_L(flow, grid, s.u_hat);
        s.x = dx * static_cast<double>(j + 1);
        s.norms_history.push_back(detail::station_norms(s.u_hat, s.Lu, m, h, s.x));
        if (!std::isfinite(s.norms_history.back().Lu_h2) || s.norms_history.back().Lu_h2 > o.overflow_limit) {
            s.overflow = true;
            break;
        }
    }
    return s;
}

/// Least-squares slope of log||u||_{H^1} against x after discarding the first `skip` fraction.
inline LineFit fit_x_growth(const std::vector<BvpStation>& h, double skip = 0.2)
{
    require(h.size() >= 3, "growth fit needs at least three stations");
    const double x0 = h.front().x + skip * (h.back().x - h.front().x);
    RVec x, lg;
    for (const auto& s : h)
        if (s.x >= x0 && s.u_h1 > 0) {
            x.push_back(s.x);
            lg.push_back(std::log(s.u_h1));
        }
    require(x.size() >= 3, "growth window holds fewer than three stations");
    return fit_line(x, lg);
}

struct EnergyBookkeeping {
    std::array<double, 3> max_rel_error{}; // per k: |D_x (1/2)||d^k Lu||^2 - avg(I_k)| / scale
};

/// Compares the per-station change of (1/2)||d^k Lu||^2 with the averaged I_{k,1} + I_{k,2}.
/// Stations with x < x_skip are left out: the startup transient is not resolved in x.
inline EnergyBookkeeping energy_bookkeeping(const std::vector<BvpStation>& h, double x_skip = 0.0)
{
    EnergyBookkeeping r;
    for (std::size_t j = 0; j + 1 < h.size(); ++j) {
        if (h[j].x < x_skip)
            continue;
        const double dx = h[j + 1].x - h[j].x;
        for (int k = 0; k <= 2; ++k) {
            const double lhs = 0.5 * (h[j + 1].Lu_dk2[k] - h[j].Lu_dk2[k]) / dx;
            const double rhs = 0.5 * (h[j + 1].I_k[k] + h[j].I_k[k]);
            const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
            r.max_rel_error[k] = std::max(r.max_rel_error[k], std::abs(lhs - rhs) / scale);
        }
    }
    return r;
}

/// Smallest C with ||Lu(x)||_{H^2}^2 - ||Lu(0)||_{H^2}^2 <= C int_0^x ||Lu||_{H^2}^2 along a march.
inline double estimate_constant(const std::vector<BvpStation>& h)
{
    double C = 0.0, integral = 0.0;
    const double e0 = h.front().Lu_h2 * h.front().Lu_h2;
    for (std::size_t j = 1; j < h.size(); ++j) {
        const double dx = h[j].x - h[j - 1].x;
        integral += 0.5 * dx * (h[j].Lu_h2 * h[j].Lu_h2 + h[j - 1].Lu_h2 * h[j - 1].Lu_h2);
        const double lhs = h[j].Lu_h2 * h[j].Lu_h2 - e0;
        if (integral > 0 && lhs > 0)
            C = std::max(C, lhs / integral);
    }
    return C;
}

// ---- Hardy-type lemma ------------------------------------------------------------------------

struct TestFunction {
    std::string name;
    std::function<double(double)> u;
};

/// Deterministic corpus: analytic shapes plus `random_count` random C2 cubic splines with u(0) = 0.
inline std::vector<TestFunction> hardy_corpus(double M, std::size_t random_count, unsigned seed)
{
    std::vector<TestFunction> c;
    c.push_back({"y^2 e^-y", [](double y) { return y * y * std::exp(-y); }});
    c.push_back({"y^3 e^-2y", [](double y) { return y * y * y * std::exp(-2.0 * y); }});
    c.push_back({"sin(y) bump", [M](double y) {
                     const double s = 2.0 * y / M - 1.0;
                     return std::abs(s) < 1.0 ? std::sin(y) * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
                 }});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const int knots = 12;
    const double step = M / (knots - 1);
    for (std::size_t r = 0; r < random_count; ++r) {
        std::vector<double> v(knots);
        v[0] = 0.0;
        for (int i = 1; i < knots; ++i)
            v[i] = nd(rng);
        auto sp = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
            v.begin(), v.end(), 0.0, step, nd(rng), 0.0);
        c.push_back({"spline#" + std::to_string(r), [sp, M](double y) { return (*sp)(std::min(y, M)); }});
    }
    return c;
}

struct HardyEntry {
    std::string name;
    double u_h1 = 0.0, u_h2_mM = 0.0, Lu_h2 = 0.0;
    double ratio1 = 0.0, ratio2 = 0.0;
    double round_trip = 0.0; // max|invert_L(apply_L u) - u| / max|u|
};

struct HardyReport {
    std::vector<HardyEntry> entries;
    double C = 0.0;   // max ||u||_{H^1(0,M)} / ||Lu||_{H^2(0,M)}
    double C_m = 0.0; // max ||u||_{H^2(m,M)} / ||Lu||_{H^2(0,M)}
    double worst_round_trip = 0.0;
};

inline HardyReport hardy_lemma_check(const ShearFlow& flow, const std::vector<TestFunction>& corpus,
                                     std::size_t grid_points = 4096)
{
    const double M = flow.support(), m = flow.params().linear_radius_m;
    const UniformGrid grid = UniformGrid::with_node(M, grid_points, m);
    const std::size_t im = grid.index_of(m), iM = grid.n - 1;
    HardyReport rep;
    for (const auto& t : corpus) {
        CVec u(grid.n);
        for (std::size_t i = 0; i < grid.n; ++i)
            u[i] = t.u(grid.y(i));
        u[0] = 0.0;
        HardyEntry e;
        e.name = t.name;
        const CVec f = apply_L(flow, grid, u);
        e.u_h1 = detail::sobolev_norm_on(u, grid.h, 1, 0, iM);
        e.u_h2_mM = detail::sobolev_norm_on(u, grid.h, 2, im, iM);
        e.Lu_h2 = detail::sobolev_norm_on(f, grid.h, 2, 0, iM);
        if (e.Lu_h2 > 0) {
            e.ratio1 = e.u_h1 / e.Lu_h2;
            e.ratio2 = e.u_h2_mM / e.Lu_h2;
            const CVec back = invert_L(flow, grid, f);
            double err = 0.0;
            for (std::size_t i = 0; i < grid.n; ++i)
                err = std::max(err, std::abs(back[i] - u[i]));
            e.round_trip = err / std::max(max_abs(u), 1e-300);
        }
        rep.C = std::max(rep.C, e.ratio1);
        rep.C_m = std::max(rep.C_m, e.ratio2);
        rep.worst_round_trip = std::max(rep.worst_round_trip, e.round_trip);
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

} // namespace prandtl
