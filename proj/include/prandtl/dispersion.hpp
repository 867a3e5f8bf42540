#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "shear_flow.hpp"

namespace prandtl {

enum class Variant { IVP, BVP };

inline const char* variant_name(Variant v) { return v == Variant::IVP ? "IVP" : "BVP"; }

/// Coefficients of (w + u_s) v' - u_s' v + i e v''' = 0.
struct NormalForm {
    cplx omega;
    cplx eps;
};

inline NormalForm normal_form(double epsilon, cplx omega, Variant variant)
{
    require(epsilon > 0, "epsilon must be positive");
    if (variant == Variant::IVP)
        return {omega, epsilon};
    require(omega != cplx{}, "BVP variant needs omega != 0");
    return {1.0 / omega, -epsilon / omega};
}

/// Roots of i e mu^3 + (w + U) mu = 0 written as {0, mu, -mu} with Re mu >= 0.
inline std::array<cplx, 3> far_field_roots(const ShearFlow& flow, NormalForm nf)
{
    const cplx mu = std::sqrt(I * (nf.omega + flow.far_field()) / nf.eps);
    return {0.0, mu, -mu};
}

struct ShootOptions {
    double rel_tol = 1e-11;
    double y_max = 0.0; // 0 means 2M
};

struct ShootResult {
    cplx defect;        // psi_1(0), holomorphic in omega
    double wall_ratio;  // |psi_1(0)| against the other Pluecker components
};

namespace detail {

inline cplx wall_rate(NormalForm nf)
{
    return std::sqrt(I * nf.omega / nf.eps);
}

/// Compound-matrix shooting from y_max to 0. The Pluecker vector of the admissible plane
/// (constant mode, decaying exponential) is carried as psi = phi * exp(-mu_ref (Y - y)).
/// Per-segment renormalisation is undone exactly through the accumulated log-scale, so the
/// returned psi_1(0) is the holomorphic defect.
inline ShootResult shoot(const ShearFlow& flow, NormalForm nf, const ShootOptions& o, cplx mu_ref)
{
    using State = std::array<cplx, 3>;
    const double M = flow.support();
    const double Y = o.y_max > 0 ? o.y_max : 2.0 * M;
    require(Y >= M, "y_max must cover the support of u_s'");
    const cplx w_far = nf.omega + flow.far_field();
    if (std::abs(w_far) < 1e-14)
        throw Error(Errc::far_field_degenerate, "omega + U = 0: far-field roots collide");
    const cplx mu = far_field_roots(flow, nf)[1];
    // the far field [M, Y] has constant coefficients: psi stays on the eigenvector
    State x{-1.0, mu, 0.0};
    double log_scale = 0.0;
    const double seg = std::min(M, 4.0 / std::max(mu_ref.real(), 1e-3));
    double y_top = M;
    while (y_top > 0.0) {
        const double len = std::min(seg, y_top);
        const double y0 = y_top;
        auto rhs = [&](const State& p, State& dp, double s) {
            const double y = std::max(0.0, y0 - s);
            const cplx c1 = I * (nf.omega + flow.eval(y, 0)) / nf.eps;
            const cplx c0 = -I * flow.eval(y, 1) / nf.eps;
            dp[0] = -(p[1] + mu_ref * p[0]);
            dp[1] = -(c1 * p[0] + p[2] + mu_ref * p[1]);
            dp[2] = -(-c0 * p[0] + mu_ref * p[2]);
        };
        integrate_samples<State>(rhs, x, RVec{len}, 1e-3 * o.rel_tol, o.rel_tol,
                                 [&](std::size_t, const State& v) { x = v; });
        const double n = std::sqrt(std::norm(x[0]) + std::norm(x[1]) + std::norm(x[2]));
        if (!std::isfinite(n) || n == 0.0)
            throw Error(Errc::stiffness_overflow, "Pluecker vector left double range");
        for (auto& c : x)
            c /= n;
        log_scale += std::log(n);
        y_top -= len;
    }
    const double m = std::abs(mu_ref);
    const double a = std::abs(x[0]) * m * m, b = std::abs(x[1]) * m, c = std::abs(x[2]);
    if (log_scale > 700.0)
        throw Error(Errc::stiffness_overflow, "defect magnitude exceeds double range");
    return {x[0] * std::exp(log_scale), a / (a + b + c)};
}

} // namespace detail

/// Shooting defect in the normal form (complex epsilon allowed).
inline ShootResult shoot_normal_form(const ShearFlow& flow, NormalForm nf, const ShootOptions& o = {})
{
    const cplx mu_ref = far_field_roots(flow, nf)[1];
    try {
        return detail::shoot(flow, nf, o, mu_ref);
    } catch (const Error& e) {
        if (e.code() != Errc::stiffness_overflow)
            throw;
    }
    // fall back to the largest local rate on the profile (holomorphic in omega as long as
    // the same profile point is selected)
    cplx best = mu_ref;
    for (int i = 0; i <= 400; ++i) {
        const double y = flow.support() * i / 400.0;
        const cplx r = std::sqrt(I * (nf.omega + flow.eval(y)) / nf.eps);
        if (r.real() > best.real())
            best = r;
    }
    return detail::shoot(flow, nf, o, best);
}

inline cplx shoot_dispersion(const ShearFlow& flow, double epsilon, cplx omega, Variant variant,
                             const ShootOptions& o = {})
{
    return shoot_normal_form(flow, normal_form(epsilon, omega, variant), o).defect;
}

/// |defect(omega)| relative to its mean modulus on the circle |w - omega| = radius.
inline double relative_defect(const ShearFlow& flow, double epsilon, cplx omega, Variant variant, double radius,
                              const ShootOptions& o = {})
{
    const double centre = std::abs(shoot_dispersion(flow, epsilon, omega, variant, o));
    double ring = 0.0;
    const int n = 8;
    for (int k = 0; k < n; ++k)
        ring += std::abs(shoot_dispersion(flow, epsilon, omega + radius * std::exp(I * (2.0 * pi * k / n)), variant, o));
    return centre / (ring / n);
}

/// Root near -u_s(a) of F(z) = z + u_s(a) - (-eps z)^{1/2} tau; returns omega = 1/z.
inline cplx solve_omega_bvp(const ShearFlow& flow, double epsilon, cplx tau, double* residual = nullptr)
{
    require(epsilon > 0, "epsilon must be positive");
    const double ua = flow.u_a();
    auto F = [&](cplx z) { return z + ua - std::sqrt(-epsilon * z) * tau; };
    auto crosses_cut = [&](cplx z) {
        const cplx w = -epsilon * z;
        return w.real() < 0.0 && std::abs(w.imag()) < 1e-3 * std::abs(w);
    };
    for (double damping : {1.0, 0.5, 0.25}) {
        cplx z = -ua;
        bool ok = true;
        for (int it = 0; it < 100; ++it) {
            const cplx sq = std::sqrt(-epsilon * z);
            const cplx dF = 1.0 + epsilon * tau / (2.0 * sq);
            const cplx step = F(z) / dF;
            z -= damping * step;
            if (crosses_cut(z)) {
                ok = false;
                break;
            }
            if (std::abs(step) < 1e-16 * std::abs(z) && std::abs(F(z)) < 1e-13)
                break;
        }
        if (ok && std::abs(F(z)) < 1e-12) {
            if (residual)
                *residual = std::abs(F(z));
            return 1.0 / z;
        }
    }
    throw Error(Errc::branch_crossing, "Newton for F(z) crossed the principal branch cut");
}

inline double growth_rate_sigma(const ShearFlow& flow, cplx tau)
{
    require(tau.imag() < 0, "growth_rate_sigma needs Im tau < 0");
    return std::abs(tau.imag()) / std::pow(flow.u_a(), 1.5);
}

struct DispersionResult {
    Variant variant = Variant::IVP;
    double epsilon = 0.0;
    cplx omega{};
    cplx omega_tilde{};
    cplx eps_tilde{};
    cplx predicted_omega{};
    double defect_norm = 0.0; // |defect| relative to its mean on the circle of radius 0.05 sqrt(eps)
    double sigma = 0.0;
    double comparison_error = 0.0; // |omega - predicted| / sqrt(eps)
    int iterations = 0;
};

inline cplx predicted_omega(const ShearFlow& flow, double epsilon, cplx tau, Variant variant)
{
    if (variant == Variant::IVP)
        return -flow.u_a() + std::sqrt(epsilon) * tau;
    return solve_omega_bvp(flow, epsilon, tau);
}

/// Complex Newton on the shooting defect, started from the asymptotic prediction unless a
/// guess is given. Steps are capped at a fraction of the O(sqrt eps) eigenvalue offset.
inline DispersionResult find_unstable_eigenvalue(const ShearFlow& flow, double epsilon, Variant variant, cplx tau,
                                                 std::optional<cplx> guess = std::nullopt,
                                                 const ShootOptions& o = {})
{
    DispersionResult r;
    r.variant = variant;
    r.epsilon = epsilon;
    r.predicted_omega = predicted_omega(flow, epsilon, tau, variant);
    r.sigma = variant == Variant::IVP ? std::abs(tau.imag()) : growth_rate_sigma(flow, tau);
    const double trust =
        0.5 * std::sqrt(epsilon) * std::abs(tau) / (variant == Variant::BVP ? std::pow(flow.u_a(), 1.5) : 1.0);
    cplx w = guess.value_or(r.predicted_omega);
    auto f = [&](cplx om) { return shoot_dispersion(flow, epsilon, om, variant, o); };
    std::string trace;
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
        const cplx fw = f(w);
        const double h = 1e-7 * std::abs(w);
        const cplx d = (f(w + h) - f(w - h)) / (2.0 * h);
        cplx step = fw / d;
        if (!std::isfinite(std::abs(step)))
            throw Error(Errc::newton_diverged, "non-finite Newton step; " + trace);
        if (std::abs(step) > trust)
            step *= trust / std::abs(step);
        w -= step;
        r.iterations = it + 1;
        trace += "|dw|=" + std::to_string(std::abs(step)) + " ";
        if (std::abs(step) < 1e-13 * std::abs(w)) {
            converged = true;
            break;
        }
    }
    r.omega = w;
    r.defect_norm = relative_defect(flow, epsilon, w, variant, 0.05 * std::sqrt(epsilon), o);
    if (!converged && r.defect_norm > 1e-9)
        throw Error(Errc::newton_diverged, trace);
    if (variant == Variant::IVP && w.imag() > 0)
        throw Error(Errc::wrong_branch, "converged to a stable IVP mode");
    if (variant == Variant::BVP && w.imag() < 0)
        throw Error(Errc::wrong_branch, "converged to a spatially decaying BVP mode");
    const NormalForm nf = normal_form(epsilon, w, variant);
    r.omega_tilde = variant == Variant::BVP ? nf.omega : w;
    r.eps_tilde = variant == Variant::BVP ? nf.eps : cplx(epsilon);
    r.comparison_error = std::abs(w - r.predicted_omega) / std::sqrt(epsilon);
    return r;
}

struct Eigenfunction {
    RVec y;
    CVec v, vp, vpp;
    double bc_residual = 0.0; // max(|v(0)|/max|v|, |v'(0)|/max|v'|)
};

/// Eigenfunction by shooting two admissible solutions inward with Gram-Schmidt
/// re-orthonormalisation and back-substitution of the coefficients.
inline Eigenfunction eigenfunction(const ShearFlow& flow, NormalForm nf, const UniformGrid& grid,
                                   double rel_tol = 1e-11)
{
    using Vec3 = std::array<cplx, 3>;
    using State = std::array<cplx, 6>;
    const cplx mu = far_field_roots(flow, nf)[1];
    const cplx mu_ref = detail::wall_rate(nf);
    const double seg_len = std::min(1.0, 2.0 / std::abs(mu_ref));
    const std::size_t n = grid.n;
    const double Y = grid.y_max();

    auto col = [](const State& s, int k) { return Vec3{s[3 * k], s[3 * k + 1], s[3 * k + 2]}; };
    auto dot = [](const Vec3& a, const Vec3& b) { return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] + std::conj(a[2]) * b[2]; };
    auto nrm = [&](const Vec3& a) { return std::sqrt(dot(a, a).real()); };

    // far field: constant and decaying exponential at y = Y
    const cplx ed = std::exp(-mu * Y);
    Vec3 q0{1.0, 0.0, 0.0};
    Vec3 q1{ed, -mu * ed, mu * mu * ed};
    std::vector<std::vector<State>> seg_samples;
    std::vector<std::vector<std::size_t>> seg_index;
    std::vector<std::array<cplx, 4>> R; // [r00, r01, 0, r11]

    auto orthonormalise = [&](Vec3 a, Vec3 b, std::array<cplx, 4>& r) {
        r[0] = nrm(a);
        for (auto& x : a) x /= r[0];
        r[1] = dot(a, b);
        for (int i = 0; i < 3; ++i) b[i] -= r[1] * a[i];
        r[3] = nrm(b);
        for (auto& x : b) x /= r[3];
        return State{a[0], a[1], a[2], b[0], b[1], b[2]};
    };
    std::array<cplx, 4> r0{};
    State cur = orthonormalise(q0, q1, r0);

    std::size_t j = n - 1; // next grid index (descending)
    double y_top = Y;
    while (true) {
        const double y_bot = std::max(0.0, y_top - seg_len);
        std::vector<std::size_t> idx;
        RVec s_samples;
        while (j != static_cast<std::size_t>(-1) && grid.y(j) >= y_bot - 1e-14) {
            idx.push_back(j);
            s_samples.push_back(y_top - grid.y(j));
            if (j == 0) { j = static_cast<std::size_t>(-1); break; }
            --j;
        }
        s_samples.push_back(y_top - y_bot);
        std::vector<State> states(s_samples.size());
        auto rhs = [&](const State& x, State& dx, double s) {
            const double y = y_top - s;
            const cplx c1 = I * (nf.omega + flow.eval(y, 0)) / nf.eps;
            const cplx c0 = -I * flow.eval(y, 1) / nf.eps;
            for (int k = 0; k < 2; ++k) {
                dx[3 * k] = -x[3 * k + 1];
                dx[3 * k + 1] = -x[3 * k + 2];
                dx[3 * k + 2] = -(c0 * x[3 * k] + c1 * x[3 * k + 1]);
            }
        };
        integrate_samples<State>(rhs, cur, s_samples, 1e-3 * rel_tol, rel_tol,
                                 [&](std::size_t i, const State& x) { states[i] = x; });
        const State end = states.back();
        states.pop_back();
        seg_samples.push_back(std::move(states));
        seg_index.push_back(std::move(idx));
        std::array<cplx, 4> r{};
        cur = orthonormalise(col(end, 0), col(end, 1), r);
        R.push_back(r);
        if (y_bot <= 0.0)
            break;
        y_top = y_bot;
    }
    // null vector of the (v, v') rows at the wall: smallest singular direction of a 2x2
    Eigen::Matrix2cd B;
    B << cur[0], cur[3], cur[1], cur[4];
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(B, Eigen::ComputeFullV);
    Eigen::Vector2cd c = svd.matrixV().col(1);

    Eigenfunction ef;
    ef.y = grid.nodes();
    ef.v.assign(n, 0.0);
    ef.vp.assign(n, 0.0);
    ef.vpp.assign(n, 0.0);
    for (std::size_t s = seg_samples.size(); s-- > 0;) {
        // R_s c_s = c_{s+1}
        const auto& r = R[s];
        Eigen::Vector2cd cs;
        cs(1) = c(1) / r[3];
        cs(0) = (c(0) - r[1] * cs(1)) / r[0];
        c = cs;
        for (std::size_t k = 0; k < seg_index[s].size(); ++k) {
            const State& x = seg_samples[s][k];
            const std::size_t i = seg_index[s][k];
            ef.v[i] = x[0] * c(0) + x[3] * c(1);
            ef.vp[i] = x[1] * c(0) + x[4] * c(1);
            ef.vpp[i] = x[2] * c(0) + x[5] * c(1);
        }
    }
    const double mv = max_abs(ef.v), mvp = max_abs(ef.vp);
    if (!std::isfinite(mv) || !std::isfinite(mvp))
        throw Error(Errc::stiffness_overflow, "eigenfunction back-substitution left double range");
    ef.bc_residual = std::max(std::abs(ef.v[0]) / mv, std::abs(ef.vp[0]) / mvp);
    // fix the phase and size by the far-field value
    const cplx scale = ef.v[n - 1];
    for (std::size_t i = 0; i < n; ++i) {
        ef.v[i] /= scale;
        ef.vp[i] /= scale;
        ef.vpp[i] /= scale;
    }
    return ef;
}

} // namespace prandtl
