#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "dispersion.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "shear_flow.hpp"
#include "shear_layer.hpp"

namespace prandtl {

/// Derivative samples d[j][i] = j-th derivative at node i.
using JetField = std::vector<CVec>;

namespace detail {

inline double binom(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

inline JetField jet_product(const JetField& a, const JetField& b)
{
    const int K = static_cast<int>(std::min(a.size(), b.size())) - 1;
    const std::size_t n = a[0].size();
    JetField out(K + 1, CVec(n));
    for (int j = 0; j <= K; ++j)
        for (int k = 0; k <= j; ++k) {
            const double c = binom(j, k);
            for (std::size_t i = 0; i < n; ++i)
                out[j][i] += c * a[k][i] * b[j - k][i];
        }
    return out;
}

inline JetField jet_reciprocal(const JetField& w)
{
    const int K = static_cast<int>(w.size()) - 1;
    const std::size_t n = w[0].size();
    JetField q(K + 1, CVec(n));
    for (std::size_t i = 0; i < n; ++i)
        q[0][i] = 1.0 / w[0][i];
    for (int j = 1; j <= K; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            cplx s{};
            for (int k = 1; k <= j; ++k)
                s += binom(j, k) * w[k][i] * q[j - k][i];
            q[j][i] = -s / w[0][i];
        }
    return q;
}

/// Jets of u_s + c for orders 0..K.
inline JetField flow_jets(const ShearFlow& flow, const UniformGrid& g, int K, cplx shift)
{
    JetField d(K + 1, CVec(g.n));
    for (int j = 0; j <= K; ++j)
        for (std::size_t i = 0; i < g.n; ++i)
            d[j][i] = flow.eval(g.y(i), j) + (j == 0 ? shift : cplx{});
    return d;
}

/// Prefix integral from node `from` upward; per-cell trapezoid with Euler-Maclaurin end corrections.
inline CVec integrate_from(const JetField& g, std::size_t from, double h)
{
    const std::size_t n = g[0].size();
    CVec out(n);
    const bool d1 = g.size() > 1, d3 = g.size() > 3;
    for (std::size_t i = from + 1; i < n; ++i) {
        cplx cell = 0.5 * h * (g[0][i - 1] + g[0][i]);
        if (d1)
            cell -= h * h / 12.0 * (g[1][i] - g[1][i - 1]);
        if (d3)
            cell += std::pow(h, 4) / 720.0 * (g[3][i] - g[3][i - 1]);
        out[i] = out[i - 1] + cell;
    }
    return out;
}

} // namespace detail

/// H(y - a) (u_s - u_s(a) - u_s''(a)(y-a)^2/2) and its derivatives up to `order`.
inline JetField regular_part_jets(const ShearFlow& flow, const UniformGrid& grid, int order = 3)
{
    require(grid.has_node(flow.a()), "grid must contain the critical point as a node");
    const double a = flow.a(), ua = flow.u_a(), k = flow.curvature();
    JetField d(order + 1, CVec(grid.n));
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double y = grid.y(i);
        if (y < a - 1e-12)
            continue;
        const double s = y - a;
        const double poly[3] = {ua + 0.5 * k * s * s, k * s, k};
        for (int j = 0; j <= order; ++j)
            d[j][i] = flow.eval(y, j) - (j < 3 ? poly[j] : 0.0);
    }
    return d;
}

inline CVec build_regular_part(const ShearFlow& flow, const UniformGrid& grid)
{
    return regular_part_jets(flow, grid, 0)[0];
}

/// e^{1/2} V~((y - a)/e^{1/4}) and derivatives 0..3, principal powers of the complex e.
inline JetField shear_layer_part_jets(const ShearLayerProfile& profile, cplx eps, const UniformGrid& grid, double a)
{
    const double theta = -std::arg(eps) / 4.0;
    if (std::abs(theta - profile.ray_angle_theta) > 1e-8)
        throw Error(Errc::ray_mismatch, "profile ray " + std::to_string(profile.ray_angle_theta) +
                                            " differs from arg(eps^-1/4) = " + std::to_string(theta));
    const double zs = profile.zscale();
    const double kappa = profile.curvature;
    const cplx tau = profile.tau;
    const cplx e4 = std::sqrt(std::sqrt(eps));
    const cplx e2 = std::sqrt(eps);
    const double scale = std::pow(std::abs(eps), 0.25) * zs;
    RVec r(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i)
        r[i] = (grid.y(i) - a) / scale;
    const auto s = profile.solution.sample(r);
    const cplx ray = std::exp(I * theta);
    JetField d(4, CVec(grid.n));
    for (std::size_t i = 0; i < grid.n; ++i) {
        const cplx z = zs * r[i] * ray;
        const cplx P = tau + 0.5 * kappa * z * z;
        const cplx x = s.x[i] / zs, xp = s.xp[i] / (zs * zs), xpp = s.xpp[i] / (zs * zs * zs);
        const cplx W = s.w[i];
        const cplx v0 = P * W;
        const cplx v1 = kappa * z * W + P * x;
        const cplx v2 = kappa * W + 2.0 * kappa * z * x + P * xp;
        const cplx v3 = 3.0 * kappa * x + 3.0 * kappa * z * xp + P * xpp;
        d[0][i] = e2 * v0;
        d[1][i] = e2 / e4 * v1;
        d[2][i] = v2;
        d[3][i] = v3 / e4;
    }
    return d;
}

inline CVec build_shear_layer_part(const ShearLayerProfile& profile, cplx eps_tilde, const UniformGrid& grid, double a)
{
    return shear_layer_part_jets(profile, eps_tilde, grid, a)[0];
}

/// Solution of (w + u_s) v' - u_s' v = f, v = H(y-a)(u_s + w) int_a^y f/(u_s + w)^2, from the
/// jets of f (orders 0..K). Returns jets of orders 0..K+1.
inline JetField build_correction(const ShearFlow& flow, cplx omega, const JetField& f, const UniformGrid& grid,
                                 double critical_tol = 1e-10)
{
    require(grid.has_node(flow.a()), "grid must contain the critical point as a node");
    const int K = static_cast<int>(f.size()) - 1;
    const std::size_t ia = grid.index_of(flow.a());
    JetField w = detail::flow_jets(flow, grid, K + 1, omega);
    for (std::size_t i = ia; i < grid.n; ++i)
        if (std::abs(w[0][i]) < critical_tol)
            throw Error(Errc::critical_layer_hit, "u_s + omega vanishes at y = " + std::to_string(grid.y(i)));
    JetField wk(w.begin(), w.begin() + K + 1);
    // only y >= a is needed; guard the reciprocal against the critical layer left of a
    for (int j = 0; j <= K; ++j)
        for (std::size_t i = 0; i < ia; ++i)
            wk[j][i] = j == 0 ? 1.0 : 0.0;
    const JetField q = detail::jet_reciprocal(wk);
    const JetField g = detail::jet_product(f, detail::jet_product(q, q));
    JetField G(K + 2, CVec(grid.n));
    G[0] = detail::integrate_from(g, ia, grid.h);
    for (int j = 1; j <= K + 1; ++j)
        G[j] = g[j - 1];
    JetField v = detail::jet_product(w, G);
    for (auto& row : v)
        for (std::size_t i = 0; i < ia; ++i)
            row[i] = 0.0;
    return v;
}

struct QuasimodeOptions {
    std::size_t grid_points = 4096;
    double y_max = 0.0; // 0 means 2M
    double cap_zero_tol = 1e-10;
};

struct QuasimodeNorms {
    double U_L2 = 0.0;
    std::array<double, 4> U_weighted{}; // ||e^y U||_{H^k}, k = 0..3
    std::array<double, 3> R_weighted{}; // ||e^y R||_{H^k}, k = 0..2
};

struct Quasimode {
    Variant variant = Variant::IVP;
    double epsilon = 0.0;
    int order_n = 1;
    cplx omega{};       // physical eigenvalue omega^app
    cplx omega_nf{};    // coefficient in the normal form: omega (IVP) or 1/omega (BVP)
    cplx eps_nf{};      // eps (IVP) or -eps/omega (BVP)
    UniformGrid grid;
    RVec y_grid;
    CVec V_profile, U_profile, residual_R;
    JetField V_jets;               // V and derivatives 0..3
    std::vector<CVec> corrections; // v_{i,reg}, i = 2..n
    double boundary_correction = 0.0;
    double max_cap_forcing = 0.0;  // sup of |f^i| on the quadratic cap, right of a
    QuasimodeNorms norms;
};

/// -[(w + u_s) v' - u_s' v + i e v'''] for a normal form (w, e) from v and its derivatives.
/// This is the tangential-momentum residual of the mode scaled so that its v-profile is v.
inline CVec apply_linearized_operator(const ShearFlow& flow, NormalForm nf, const UniformGrid& grid,
                                      const JetField& v)
{
    require(v.size() >= 4, "operator needs derivatives up to order 3");
    CVec R(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double y = grid.y(i);
        R[i] = -((nf.omega + flow.eval(y, 0)) * v[1][i] - flow.eval(y, 1) * v[0][i] + I * nf.eps * v[3][i]);
    }
    return R;
}

inline CVec apply_linearized_operator(const ShearFlow& flow, const Quasimode& mode)
{
    return apply_linearized_operator(flow, {mode.omega_nf, mode.eps_nf}, mode.grid, mode.V_jets);
}

/// Physical omega^app: -u_s(a) + sqrt(eps) tau (IVP) or the root of the implicit relation (BVP).
inline cplx quasimode_omega(const ShearFlow& flow, double epsilon, cplx tau, Variant variant)
{
    return variant == Variant::IVP ? -flow.u_a() + std::sqrt(epsilon) * tau : solve_omega_bvp(flow, epsilon, tau);
}

/// Ray angle at which the shear-layer profile has to be evaluated.
inline double quasimode_ray(const ShearFlow& flow, double epsilon, cplx tau, Variant variant)
{
    const NormalForm nf = normal_form(epsilon, quasimode_omega(flow, epsilon, tau, variant), variant);
    return -std::arg(nf.eps) / 4.0;
}

inline Quasimode assemble_quasimode(const ShearFlow& flow, const ShearLayerProfile& profile, double epsilon, int n,
                                    Variant variant, const QuasimodeOptions& o = {})
{
    require(n >= 1 && n <= 4, "quasimode order must be in 1..4");
    require(epsilon > 0, "epsilon must be positive");
    require(std::abs(profile.curvature - flow.curvature()) < 1e-12, "profile curvature differs from the flow");
    Quasimode q;
    q.variant = variant;
    q.epsilon = epsilon;
    q.order_n = n;
    q.omega = quasimode_omega(flow, epsilon, profile.tau, variant);
    const NormalForm nf = normal_form(epsilon, q.omega, variant);
    q.omega_nf = nf.omega;
    q.eps_nf = nf.eps;
    const double Y = o.y_max > 0 ? o.y_max : 2.0 * flow.support();
    q.grid = UniformGrid::with_node(Y, o.grid_points, flow.a());
    q.y_grid = q.grid.nodes();
    const std::size_t N = q.grid.n;

    JetField V = regular_part_jets(flow, q.grid, 3);
    const JetField sl = shear_layer_part_jets(profile, nf.eps, q.grid, flow.a());
    for (int j = 0; j <= 3; ++j)
        for (std::size_t i = 0; i < N; ++i)
            V[j][i] += sl[j][i];

    // corrections: f^i = -i v_{i-2}''' with v_0 = H(u_s + omega), v_1 = 0
    std::vector<JetField> v_reg(n + 1);
    if (n >= 2) {
        const std::size_t ia = q.grid.index_of(flow.a());
        const int K = 8;
        JetField v0 = detail::flow_jets(flow, q.grid, K, nf.omega);
        for (auto& row : v0)
            for (std::size_t i = 0; i < ia; ++i)
                row[i] = 0.0;
        v_reg[0] = v0;
        const double cap_hi = flow.a() + flow.params().quad_radius;
        for (int i = 2; i <= n; ++i) {
            const JetField& prev = v_reg[i - 2];
            if (prev.empty() || prev.size() < 4) {
                v_reg[i] = {};
                q.corrections.push_back(CVec(N));
                continue;
            }
            JetField f(prev.begin() + 3, prev.end());
            for (auto& row : f)
                for (auto& x : row)
                    x *= -I;
            for (std::size_t k = ia; k < N && q.grid.y(k) <= cap_hi; ++k)
                q.max_cap_forcing = std::max(q.max_cap_forcing, std::abs(f[0][k]));
            v_reg[i] = build_correction(flow, nf.omega, f, q.grid);
            const cplx w = std::pow(nf.eps, 0.5 * i);
            for (int j = 0; j <= 3; ++j)
                for (std::size_t k = 0; k < N; ++k)
                    V[j][k] += w * v_reg[i][j][k];
            q.corrections.push_back(v_reg[i][0]);
        }
        if (q.max_cap_forcing > o.cap_zero_tol)
            throw Error(Errc::critical_layer_hit, "correction forcing does not vanish on the quadratic cap");
    }

    // restore v(0) = v'(0) = 0 with a wall-localised exponential of width |eps|^{1/4}
    const double l = std::pow(std::abs(nf.eps), 0.25);
    const cplx c0 = -V[0][0], c1 = -(V[1][0] + V[0][0] / l);
    q.boundary_correction = std::max(std::abs(V[0][0]), l * std::abs(V[1][0]));
    for (std::size_t i = 0; i < N; ++i) {
        const double y = q.grid.y(i);
        const double e = std::exp(-y / l);
        const cplx p = c0 + c1 * y;
        V[0][i] += p * e;
        V[1][i] += (c1 - p / l) * e;
        V[2][i] += (-2.0 * c1 / l + p / (l * l)) * e;
        V[3][i] += (3.0 * c1 / (l * l) - p / (l * l * l)) * e;
    }

    q.V_jets = V;
    q.V_profile = V[0];
    q.U_profile.resize(N);
    for (std::size_t i = 0; i < N; ++i)
        q.U_profile[i] = variant == Variant::IVP ? V[1][i] : -I * nf.omega * V[1][i];
    q.residual_R = apply_linearized_operator(flow, q);

    const double width = std::pow(std::abs(nf.eps), 0.25);
    q.norms.U_L2 = weighted_sobolev_norm(q.U_profile, q.grid.h, 0.0, 0, width);
    for (int k = 0; k <= 3; ++k)
        q.norms.U_weighted[k] = weighted_sobolev_norm(q.U_profile, q.grid.h, 1.0, k, width);
    for (int k = 0; k <= 2; ++k)
        q.norms.R_weighted[k] = weighted_sobolev_norm(q.residual_R, q.grid.h, 1.0, k, width);
    return q;
}

struct JumpReport {
    std::array<cplx, 3> regular{};   // H(y-a)(u_s + omega): value, first, second derivative
    std::array<cplx, 3> layer{};     // e^{1/2} V((y-a)/e^{1/4})
    std::array<cplx, 3> assembled{}; // regular + layer, expected 0
};

/// Jumps at y = a of the two halves of the ansatz written with H(y-a)(u_s + omega) and V.
inline JumpReport quasimode_jumps(const ShearFlow& flow, const ShearLayerProfile& profile, cplx omega_nf, cplx eps_nf)
{
    JumpReport r;
    r.regular = {flow.u_a() + omega_nf, 0.0, flow.curvature()};
    const cplx e4 = std::sqrt(std::sqrt(eps_nf));
    const cplx e2 = std::sqrt(eps_nf);
    r.layer = {e2 * profile.jumps[0], e2 / e4 * profile.jumps[1], profile.jumps[2]};
    for (int j = 0; j < 3; ++j)
        r.assembled[j] = r.regular[j] + r.layer[j];
    return r;
}

} // namespace prandtl
