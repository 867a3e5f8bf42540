#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "shear_flow.hpp"

namespace prandtl {

/// Largest stable Courant number |k| sup|u_s| dt of the explicit RK3 part on the imaginary axis.
inline constexpr double rk3_imaginary_stability = 1.7320508075688772;

struct NormSample {
    double t = 0.0;
    double l2 = 0.0; // ||w||_{L^2}
    double h1 = 0.0; // ||d_y w||_{L^2}, discrete Dirichlet form
};

struct ModeState {
    int k = 0;
    double t = 0.0;
    UniformGrid grid;
    CVec w_hat;
    CVec cumulative_integral;
    std::vector<NormSample> norms_history;
};

/// Trapezoidal L2 norm and the H1 seminorm sum |w_{i+1} - w_i|^2 / h; both are the norms for which the
/// discrete Laplacian (Dirichlet at 0, reflecting at Y) satisfies summation by parts exactly.
inline NormSample mode_norms(const CVec& w, double h, double t = 0.0)
{
    RVec dens(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        dens[i] = std::norm(w[i]);
    double grad = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        grad += std::norm(w[i + 1] - w[i]);
    return {t, std::sqrt(trapz(dens, h)), std::sqrt(grad / h)};
}

inline ModeState make_mode_state(int k, const UniformGrid& grid, CVec w0)
{
    require(w0.size() == grid.n, "initial profile does not match the grid");
    require(std::abs(w0[0]) < 1e-12 * std::max(1.0, max_abs(w0)), "initial profile violates w(0) = 0");
    ModeState s;
    s.k = k;
    s.grid = grid;
    w0[0] = 0.0;
    s.w_hat = std::move(w0);
    s.cumulative_integral = cumtrapz(s.w_hat, grid.h);
    s.norms_history.push_back(mode_norms(s.w_hat, grid.h, 0.0));
    return s;
}

/// Low-storage RK3 / Crank-Nicolson IMEX stepper for
///   d_t w + i k u_s w - i k u_s' int_0^y w - d_y^2 w = 0,
/// diffusion implicit, transport and the nonlocal term explicit.
class IvpStepper {
public:
    IvpStepper(const ShearFlow& flow, int k, const UniformGrid& grid)
        : k_(k), grid_(grid), us_(grid.n), usp_(grid.n)
    {
        for (std::size_t i = 0; i < grid.n; ++i) {
            us_[i] = flow.eval(grid.y(i), 0);
            usp_[i] = flow.eval(grid.y(i), 1);
        }
        sup_u_ = flow.sup_abs();
    }

    double max_dt() const
    {
        return k_ == 0 ? std::numeric_limits<double>::infinity()
                       : rk3_imaginary_stability / (std::abs(k_) * sup_u_);
    }

    void step(ModeState& s, double dt) const
    {
        if (dt <= 0.0 || dt > max_dt() * (1.0 + 1e-12))
            throw Error(Errc::cfl_violation, "dt = " + std::to_string(dt) + " exceeds the stability budget " +
                                                 std::to_string(max_dt()));
        static constexpr double gam[3] = {8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0};
        static constexpr double zet[3] = {0.0, -17.0 / 60.0, -5.0 / 12.0};
        static constexpr double alp[3] = {4.0 / 15.0, 1.0 / 15.0, 1.0 / 6.0};
        const std::size_t n = grid_.n;
        CVec N_prev(n), N_cur(n), rhs(n);
        CVec& w = s.w_hat;
        for (int st = 0; st < 3; ++st) {
            explicit_part(w, N_cur);
            const CVec Lw = laplacian(w);
            for (std::size_t i = 0; i < n; ++i)
                rhs[i] = w[i] + dt * (alp[st] * Lw[i] + gam[st] * N_cur[i] + zet[st] * N_prev[i]);
            implicit_solve(alp[st] * dt, rhs);
            w = rhs;
            std::swap(N_prev, N_cur);
        }
        s.t += dt;
        s.cumulative_integral = cumtrapz(w, grid_.h);
        s.norms_history.push_back(mode_norms(w, grid_.h, s.t));
    }

private:
    void explicit_part(const CVec& w, CVec& out) const
    {
        const CVec cum = cumtrapz(w, grid_.h);
        const cplx ik = I * static_cast<double>(k_);
        for (std::size_t i = 0; i < w.size(); ++i)
            out[i] = -ik * us_[i] * w[i] + ik * usp_[i] * cum[i];
        out[0] = 0.0;
    }

    CVec laplacian(const CVec& w) const
    {
        const std::size_t n = w.size();
        const double h2 = grid_.h * grid_.h;
        CVec L(n);
        for (std::size_t i = 1; i + 1 < n; ++i)
            L[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / h2;
        L[n - 1] = 2.0 * (w[n - 2] - w[n - 1]) / h2;
        return L;
    }

    /// (I - c D2) x = rhs on nodes 1..n-1 with x_0 = 0.
    void implicit_solve(double c, CVec& rhs) const
    {
        const std::size_t n = rhs.size();
        const double r = c / (grid_.h * grid_.h);
        const std::size_t m = n - 1;
        CVec a(m, -r), b(m, 1.0 + 2.0 * r), cc(m, -r), x(rhs.begin() + 1, rhs.end());
        a[0] = 0.0;
        cc[m - 1] = 0.0;
        a[m - 1] = -2.0 * r;
        solve_tridiagonal(a, b, cc, x);
        rhs[0] = 0.0;
        std::copy(x.begin(), x.end(), rhs.begin() + 1);
    }

    int k_;
    UniformGrid grid_;
    RVec us_, usp_;
    double sup_u_ = 0.0;
};

inline void step(const ShearFlow& flow, ModeState& s, double dt)
{
    IvpStepper(flow, s.k, s.grid).step(s, dt);
}

struct IvpOptions {
    double courant = 0.05; // |k| sup|u_s| dt; accuracy-limited, well inside rk3_imaginary_stability
    double dt = 0.0;      // 0: derived from `courant`
    double dt_k0 = 1e-3;  // step for k = 0
};

inline double ivp_time_step(const ShearFlow& flow, int k, const IvpOptions& o = {})
{
    if (o.dt > 0.0)
        return o.dt;
    if (k == 0)
        return o.dt_k0;
    return o.courant / (std::abs(k) * flow.sup_abs());
}

/// Integrates to time T (last step shortened to land on T); the full state history is not kept.
inline ModeState run_ivp(const ShearFlow& flow, int k, const UniformGrid& grid, const CVec& initial, double T,
                         const IvpOptions& o = {})
{
    require(T >= 0.0, "final time must be non-negative");
    ModeState s = make_mode_state(k, grid, initial);
    const IvpStepper stepper(flow, k, grid);
    const double dt = ivp_time_step(flow, k, o);
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    for (std::size_t j = 0; j < steps; ++j)
        stepper.step(s, std::min(dt, T - s.t));
    return s;
}

struct EnergyReport {
    double C_s = 0.0;
    std::size_t steps = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity(); // min (rhs + slack - lhs) / scale
    std::size_t worst_step = 0;
    bool envelope_ok = true;
    double envelope_worst_ratio = 0.0; // max ||w(t)|| / (e^{C_s |k| t} ||w(0)||)
    double fraction_ok() const { return steps ? 1.0 - double(violations) / double(steps) : 1.0; }
};

/// Per step: (1/2) D_t ||w||^2 + ||d_y w||^2 <= C_s |k| ||w||^2 + slack, with time-averaged norms and
/// slack = slack_coeff * dt * (|k| C_s + 1) * ||w||^2 (first-order discretisation defect of the stepper).
inline EnergyReport energy_monitor(const ShearFlow& flow, int k, const std::vector<NormSample>& history,
                                   double slack_coeff = 1.0)
{
    EnergyReport r;
    r.C_s = energy_constant(flow);
    const double rate = std::abs(k) * r.C_s;
    if (history.empty())
        return r;
    const double w0 = history.front().l2;
    for (std::size_t j = 0; j + 1 < history.size(); ++j) {
        const auto& a = history[j];
        const auto& b = history[j + 1];
        const double dt = b.t - a.t;
        if (dt <= 0)
            continue;
        ++r.steps;
        const double m2 = 0.5 * (a.l2 * a.l2 + b.l2 * b.l2);
        const double lhs = 0.5 * (b.l2 * b.l2 - a.l2 * a.l2) / dt + 0.5 * (a.h1 * a.h1 + b.h1 * b.h1);
        const double rhs = rate * m2;
        const double slack = slack_coeff * dt * (rate + 1.0) * m2;
        const double scale = std::max(rhs + std::abs(lhs), std::numeric_limits<double>::min());
        const double margin = (rhs + slack - lhs) / scale;
        if (lhs > rhs + slack + 1e-14 * scale)
            ++r.violations;
        if (margin < r.worst_margin) {
            r.worst_margin = margin;
            r.worst_step = j;
        }
    }
    for (const auto& s : history) {
        const double env = std::exp(rate * s.t) * w0;
        if (env > 0) {
            const double ratio = s.l2 / env;
            r.envelope_worst_ratio = std::max(r.envelope_worst_ratio, ratio);
        }
        if (s.l2 > std::exp(rate * s.t) * w0 * (1.0 + 1e-10) + 1e-300)
            r.envelope_ok = false;
    }
    return r;
}

struct GrowthFit {
    double rate = 0.0;
    double residual = 0.0; // rms residual of log||w|| about the line
    double r_squared = 1.0;
};

/// Least-squares slope of log||w||_{L^2} against t over the window [t0 + skip (t1 - t0), t1].
inline GrowthFit measure_growth_rate(const std::vector<NormSample>& history, double skip_fraction = 0.2,
                                     double t_end = std::numeric_limits<double>::infinity())
{
    require(history.size() >= 3, "growth fit needs at least three samples");
    const double t0 = history.front().t;
    const double t1 = std::min(history.back().t, t_end);
    const double ts = t0 + skip_fraction * (t1 - t0);
    RVec t, lg;
    for (const auto& s : history)
        if (s.t >= ts && s.t <= t1 && s.l2 > 0) {
            t.push_back(s.t);
            lg.push_back(std::log(s.l2));
        }
    if (t.size() < 3)
        throw Error(Errc::fit_unstable, "growth window holds fewer than three samples");
    const LineFit f = fit_line(t, lg);
    GrowthFit g{f.slope, f.rms_residual, f.r_squared};
    // residual measured against the total change of log||w|| over the window
    const double span = std::abs(f.slope) * (t.back() - t.front());
    if (g.residual > 1e-10 && g.residual > 0.1 * span)
        throw Error(Errc::fit_unstable, "growth fit residual exceeds 10% of the fitted change");
    return g;
}

} // namespace prandtl
