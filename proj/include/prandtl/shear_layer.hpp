#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "numerics.hpp"

namespace prandtl {

using Mat2 = std::array<std::array<cplx, 2>, 2>;

/// Decaying Gaussian branch at +infinity: X ~ z^alpha exp(lambda z^2 / 2).
inline const cplx lambda_recessive = I * std::exp(I * (pi / 4.0));

/// Algebraic exponent of the recessive branch.
inline cplx recessive_alpha(cplx tau_tilde)
{
    return 0.5 * (tau_tilde * std::exp(-I * (pi / 4.0)) - 7.0);
}

inline Mat2 assemble_B(cplx tau_tilde, cplx z)
{
    const cplx q = tau_tilde - z * z;
    if (z == cplx{} || q == cplx{})
        throw Error(Errc::singular_coefficient, "B evaluated at z = 0 or on a turning point");
    Mat2 b{};
    b[0][0] = 0.0;
    b[0][1] = 1.0;
    b[1][0] = (6.0 + I * q * q) / (z * z * q);
    b[1][1] = 6.0 / q - 1.0 / (z * z);
    return b;
}

/// z * B(z) * (X, X'/z): the regularised right-hand side of the first-order system.
inline std::array<cplx, 2> regularized_rhs(cplx tau_tilde, cplx z, const std::array<cplx, 2>& v)
{
    const Mat2 b = assemble_B(tau_tilde, z);
    return {z * (b[0][0] * v[0] + b[0][1] * v[1]), z * (b[1][0] * v[0] + b[1][1] * v[1])};
}

/// X'' from i Q X'' - 6 i z X' + (Q^2 - 6 i) X = 0, Q = tau~ - z^2.
inline cplx x_second(cplx tau_tilde, cplx z, cplx x, cplx xp)
{
    const cplx q = tau_tilde - z * z;
    return (6.0 * z * xp + (6.0 + I * q * q) * x) / q;
}

struct LayerOptions {
    double truncation_Z = 8.0;
    double rel_tol = 1e-11;
    double abs_tol = 1e-13;
    double truncation_tol = 1e-9;
    double singular_margin = 1e-6;
};

namespace detail {

/// Smallest |tau~ - z^2| over z = r e^{i theta}, |r| <= Z.
inline double min_turning_distance(cplx tau_tilde, double theta, double Z)
{
    const cplx rot = tau_tilde * std::exp(-2.0 * I * theta);
    const double s = std::clamp(rot.real(), 0.0, Z * Z);
    return std::abs(rot - s);
}

inline void check_ray(cplx tau_tilde, double theta, const LayerOptions& o)
{
    const double Z = o.truncation_Z;
    if (min_turning_distance(tau_tilde, theta, Z) < o.singular_margin)
        throw Error(Errc::path_through_singularity, "tau~ - z^2 vanishes on the integration ray");
    const cplx zend = Z * std::exp(I * theta);
    const cplx alpha = recessive_alpha(tau_tilde);
    // relative residual of the leading asymptotic term, damped by the inward suppression
    const cplx g = lambda_recessive * zend + alpha / zend;
    const cplx xpp = g * g + lambda_recessive - alpha / (zend * zend);
    const cplx q = tau_tilde - zend * zend;
    const cplx res = I * q * xpp - 6.0 * I * zend * g + (q * q - 6.0 * I);
    const double rel = std::abs(res) / std::abs(q * q);
    const double suppression = std::exp((lambda_recessive * std::exp(2.0 * I * theta)).real() * Z * Z);
    if (rel * suppression > o.truncation_tol)
        throw Error(Errc::truncation_too_small,
                    "asymptotic remainder " + std::to_string(rel * suppression) + " at Z = " + std::to_string(Z));
}

/// Values of the recessive solution on one half of a ray, plus the tail integral towards
/// the far end (int_z^inf X on the right, int_-inf^z X on the left).
struct HalfRay {
    CVec x, xp, tail;
};

/// side = +1 integrates from +Z e^{i theta} inward, side = -1 from -Z e^{i theta}.
/// `radii` holds |r| values in [0, Z], in descending order.
inline HalfRay integrate_half(cplx tau_tilde, double theta, int side, const RVec& radii, const LayerOptions& o)
{
    using State = std::array<cplx, 3>;
    const double Z = o.truncation_Z;
    const cplx e = std::exp(I * theta);
    const cplx alpha = recessive_alpha(tau_tilde);
    const cplx w = Z * e; // outward coordinate at the seed
    // holomorphic normalisation keeps the seed of unit size
    const cplx scale = std::exp(alpha * std::log(w) + 0.5 * lambda_recessive * w * w);
    const cplx g = lambda_recessive * w + alpha / w;
    const double sd = static_cast<double>(side);
    State x0{1.0, sd * g, -1.0 / (lambda_recessive * w)};
    auto rhs = [&](const State& x, State& dx, double s) {
        const cplx z = sd * (Z - s) * e;
        dx[0] = -sd * e * x[1];
        dx[1] = -sd * e * x_second(tau_tilde, z, x[0], x[1]);
        dx[2] = e * x[0];
    };
    RVec s_samples(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i)
        s_samples[i] = Z - radii[i];
    HalfRay out;
    out.x.resize(radii.size());
    out.xp.resize(radii.size());
    out.tail.resize(radii.size());
    integrate_samples<State>(rhs, x0, s_samples, o.abs_tol, o.rel_tol, [&](std::size_t i, const State& x) {
        out.x[i] = scale * x[0];
        out.xp[i] = scale * x[1];
        out.tail[i] = scale * x[2];
    });
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (!std::isfinite(std::abs(out.x[i])) || !std::isfinite(std::abs(out.xp[i])))
            throw Error(Errc::stiffness_overflow, "non-finite value in shear-layer integration");
    return out;
}

} // namespace detail

/// Wronskian mismatch at z~ = 0 between the recessive solutions from -Z and +Z.
inline cplx connection_defect(cplx tau_tilde, double theta, double truncation_Z, LayerOptions o = {})
{
    o.truncation_Z = truncation_Z;
    detail::check_ray(tau_tilde, theta, o);
    const RVec zero{0.0};
    auto r = detail::integrate_half(tau_tilde, theta, +1, zero, o);
    auto l = detail::integrate_half(tau_tilde, theta, -1, zero, o);
    return r.x[0] * l.xp[0] - r.xp[0] * l.x[0];
}

/// Normalised connecting solution: W~(-inf) = 0, W~(+inf) = 1, X = dW~/dz~.
class ShearLayerSolution {
public:
    struct Samples {
        CVec x, xp, xpp, w;
    };

    struct OneSided {
        cplx x, xp, xpp, w;
    };

    ShearLayerSolution() = default;

    ShearLayerSolution(cplx tau_tilde, double theta, LayerOptions o) : tau_(tau_tilde), theta_(theta), opt_(o)
    {
        detail::check_ray(tau_, theta_, opt_);
        const RVec zero{0.0};
        auto r = detail::integrate_half(tau_, theta_, +1, zero, opt_);
        auto l = detail::integrate_half(tau_, theta_, -1, zero, opt_);
        const double nr = std::norm(r.x[0]) + std::norm(r.xp[0]);
        right_scale_ = (l.x[0] * std::conj(r.x[0]) + l.xp[0] * std::conj(r.xp[0])) / nr;
        total_ = l.tail[0] + right_scale_ * r.tail[0];
        if (std::abs(total_) < 1e-8 * std::sqrt(std::norm(l.x[0]) + std::norm(l.xp[0])))
            throw Error(Errc::no_root_in_region, "connecting solution has zero integral (odd mode)");
        left0_ = {l.x[0] / total_, l.xp[0] / total_, x_second(tau_, 0.0, l.x[0], l.xp[0]) / total_, l.tail[0] / total_};
        const cplx xr = right_scale_ * r.x[0] / total_, xpr = right_scale_ * r.xp[0] / total_;
        right0_ = {xr, xpr, x_second(tau_, 0.0, xr, xpr), 1.0 - right_scale_ * r.tail[0] / total_};
        match_gap_ = std::abs(left0_.x - right0_.x) + std::abs(left0_.xp - right0_.xp);
    }

    cplx tau_tilde() const { return tau_; }
    double theta() const { return theta_; }
    double truncation_Z() const { return opt_.truncation_Z; }
    const LayerOptions& options() const { return opt_; }
    const OneSided& left_limit() const { return left0_; }
    const OneSided& right_limit() const { return right0_; }
    double matching_gap() const { return match_gap_; }

    /// Samples along z~ = r e^{i theta} for ascending r; r <= 0 uses the left solution.
    /// Outside [-Z, Z] the limits W~ = 0, 1 and X = 0 are used.
    Samples sample(const RVec& r) const
    {
        const double Z = opt_.truncation_Z;
        const std::size_t n = r.size();
        Samples s{CVec(n), CVec(n), CVec(n), CVec(n)};
        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (r[i] < -Z)
                s.w[i] = 0.0;
            else if (r[i] > Z)
                s.w[i] = 1.0;
            else if (r[i] <= 0.0)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        const cplx e = std::exp(I * theta_);
        if (!left_idx.empty()) {
            // left half integrates from -Z towards 0: ascending r means descending |r|
            RVec radii;
            for (std::size_t i : left_idx)
                radii.push_back(-r[i]);
            auto h = detail::integrate_half(tau_, theta_, -1, radii, opt_);
            for (std::size_t k = 0; k < left_idx.size(); ++k) {
                std::size_t i = left_idx[k];
                s.x[i] = h.x[k] / total_;
                s.xp[i] = h.xp[k] / total_;
                s.xpp[i] = x_second(tau_, r[i] * e, s.x[i], s.xp[i]);
                s.w[i] = h.tail[k] / total_;
            }
        }
        if (!right_idx.empty()) {
            RVec radii;
            for (auto it = right_idx.rbegin(); it != right_idx.rend(); ++it)
                radii.push_back(r[*it]);
            auto h = detail::integrate_half(tau_, theta_, +1, radii, opt_);
            const std::size_t m = right_idx.size();
            for (std::size_t k = 0; k < m; ++k) {
                std::size_t i = right_idx[m - 1 - k];
                s.x[i] = right_scale_ * h.x[k] / total_;
                s.xp[i] = right_scale_ * h.xp[k] / total_;
                s.xpp[i] = x_second(tau_, r[i] * e, s.x[i], s.xp[i]);
                s.w[i] = 1.0 - right_scale_ * h.tail[k] / total_;
            }
        }
        return s;
    }

private:
    cplx tau_{};
    double theta_ = 0.0;
    LayerOptions opt_{};
    cplx right_scale_{};
    cplx total_{};
    OneSided left0_{}, right0_{};
    double match_gap_ = 0.0;
};

struct ScanRegion {
    double re_min = -3.0, re_max = 3.0;
    double im_min = -3.0, im_max = -0.05;
    int n_re = 25, n_im = 13;
};

struct ShearLayerProfile {
    cplx tau_tilde{};
    cplx tau{};
    double ray_angle_theta = 0.0;
    double curvature = -1.0;
    CVec z_grid;
    CVec W_tilde;
    CVec X_samples;
    CVec V_tilde;
    CVec V;
    cplx defect{};
    double decay_rate_alpha = 0.0;
    int newton_iterations = 0;
    std::array<cplx, 3> jumps{}; // [V], [V'], [V''] at z = 0
    ShearLayerSolution solution;

    /// Physical z = zscale * z~.
    double zscale() const { return std::pow(2.0, 0.25) * std::pow(std::abs(curvature), -0.25); }
};

struct SolveOptions {
    LayerOptions layer{};
    double curvature = -1.0;
    double newton_tol = 1e-10;
    int max_newton = 50;
    int profile_points = 801;
};

namespace detail {

struct NewtonOutcome {
    cplx root;
    cplx defect;
    int iterations;
    bool converged;
    std::string trace;
};

template <class F>
NewtonOutcome complex_newton(F&& f, cplx z0, double tol, int max_iter, double max_step = INFINITY)
{
    cplx z = z0;
    cplx fz = f(z);
    cplx z_prev = z0 + 1e-4, f_prev = f(z_prev);
    std::string trace;
    for (int it = 0; it < max_iter; ++it) {
        trace += "[" + std::to_string(it) + "] |f|=" + std::to_string(std::abs(fz)) + " ";
        if (std::abs(fz) < tol)
            return {z, fz, it, true, trace};
        const double h = 1e-6 * std::max(1.0, std::abs(z));
        cplx d = (f(z + h) - f(z - h)) / (2.0 * h);
        cplx step = fz / d;
        if (!std::isfinite(std::abs(step)) || d == cplx{}) {
            // secant fallback
            step = fz * (z - z_prev) / (fz - f_prev);
        }
        if (std::abs(step) > max_step)
            step *= max_step / std::abs(step);
        z_prev = z;
        f_prev = fz;
        z -= step;
        fz = f(z);
        if (!std::isfinite(std::abs(fz)))
            break;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z)) && std::abs(fz) < 1e3 * tol)
            return {z, fz, it + 1, true, trace};
    }
    return {z, fz, max_iter, std::abs(fz) < tol, trace};
}

} // namespace detail

/// Fit log|f(r)| = c - alpha r^2 + beta log r over the given samples; returns (alpha, R^2).
inline std::pair<double, double> fit_gaussian_decay(const RVec& r, const RVec& log_abs)
{
    Eigen::MatrixXd A(r.size(), 3);
    Eigen::VectorXd b(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = -r[i] * r[i];
        A(i, 2) = std::log(r[i]);
        b(i) = log_abs[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    Eigen::VectorXd res = b - A * c;
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    return {c(1), ss_tot > 0 ? 1.0 - res.squaredNorm() / ss_tot : 1.0};
}

/// Fills z-grid samples, V profiles and jumps of V at the origin.
inline void build_V_profiles(ShearLayerProfile& p, double curvature)
{
    p.curvature = curvature;
    const double zs = p.zscale();
    const double s = 1.0 / zs; // dz~/dz
    p.tau = p.tau_tilde * std::sqrt(std::abs(curvature)) / std::sqrt(2.0);
    const cplx e = std::exp(I * p.ray_angle_theta);
    p.V_tilde.resize(p.z_grid.size());
    p.V.resize(p.z_grid.size());
    for (std::size_t i = 0; i < p.z_grid.size(); ++i) {
        const cplx z = zs * p.z_grid[i];
        const cplx P = p.tau + 0.5 * curvature * z * z;
        p.V_tilde[i] = P * p.W_tilde[i];
        const bool right = (p.z_grid[i] / e).real() > 0.0;
        p.V[i] = p.V_tilde[i] - (right ? P : cplx{});
    }
    const auto& L = p.solution.left_limit();
    const auto& R = p.solution.right_limit();
    const cplx v_l = p.tau * L.w, v_r = p.tau * (R.w - 1.0);
    const cplx d1_l = p.tau * s * L.x, d1_r = p.tau * s * R.x;
    const cplx d2_l = curvature * L.w + p.tau * s * s * L.xp;
    const cplx d2_r = curvature * R.w + p.tau * s * s * R.xp - curvature;
    p.jumps = {v_r - v_l, d1_r - d1_l, d2_r - d2_l};
    const double e0 = std::abs(p.jumps[0] + p.tau);
    const double e1 = std::abs(p.jumps[1]);
    const double e2 = std::abs(p.jumps[2] + curvature);
    if (std::max({e0, e1, e2}) > 1e-6)
        throw Error(Errc::jump_mismatch, "jump conditions of V violated by " + std::to_string(std::max({e0, e1, e2})));
}

/// Profile for a known tau~ (e.g. re-solved on a rotated ray).
inline ShearLayerProfile make_profile(cplx tau_tilde, double theta, const SolveOptions& o)
{
    ShearLayerProfile p;
    p.tau_tilde = tau_tilde;
    p.ray_angle_theta = theta;
    p.defect = connection_defect(tau_tilde, theta, o.layer.truncation_Z, o.layer);
    p.solution = ShearLayerSolution(tau_tilde, theta, o.layer);
    const double Z = o.layer.truncation_Z;
    const int n = o.profile_points;
    RVec r(n);
    for (int i = 0; i < n; ++i)
        r[i] = -Z + 2.0 * Z * i / (n - 1);
    auto smp = p.solution.sample(r);
    const cplx e = std::exp(I * theta);
    p.z_grid.resize(n);
    for (int i = 0; i < n; ++i)
        p.z_grid[i] = r[i] * e;
    p.W_tilde = smp.w;
    p.X_samples = smp.x;
    RVec rr, la;
    for (int i = 0; i < n; ++i)
        if (r[i] >= 2.0 && std::abs(smp.x[i]) > 0)
            rr.push_back(r[i]), la.push_back(std::log(std::abs(smp.x[i])));
    if (rr.size() >= 8)
        p.decay_rate_alpha = fit_gaussian_decay(rr, la).first;
    build_V_profiles(p, o.curvature);
    return p;
}

/// Scan + complex Newton for the connection eigenvalue tau~.
inline ShearLayerProfile solve_tau(const ScanRegion& region, double theta, const SolveOptions& o = {})
{
    require(region.im_max < 0.0, "scan region must lie in the lower half-plane");
    const double Z = o.layer.truncation_Z;
    auto f = [&](cplx t) { return connection_defect(t, theta, Z, o.layer); };
    const int nr = region.n_re, ni = region.n_im;
    std::vector<double> mag(static_cast<std::size_t>(nr * ni), INFINITY);
    auto at = [&](int i, int j) -> cplx {
        return {region.re_min + (region.re_max - region.re_min) * i / (nr - 1),
                region.im_min + (region.im_max - region.im_min) * j / (ni - 1)};
    };
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < ni; ++j) {
            try {
                mag[i * ni + j] = std::abs(f(at(i, j)));
            } catch (const Error&) {
            }
        }
    // local minima of |defect| on the scan lattice, ascending
    std::vector<std::pair<double, cplx>> basins;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < ni; ++j) {
            const double v = mag[i * ni + j];
            if (!std::isfinite(v))
                continue;
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    int a = i + di, b = j + dj;
                    if ((di || dj) && a >= 0 && a < nr && b >= 0 && b < ni && mag[a * ni + b] < v) {
                        is_min = false;
                        break;
                    }
                }
            if (is_min)
                basins.emplace_back(v, at(i, j));
        }
    std::sort(basins.begin(), basins.end(), [](auto& x, auto& y) { return x.first < y.first; });
    if (basins.empty())
        throw Error(Errc::no_root_in_region, "scan found no basin of |defect|");
    std::string traces;
    const double cell = std::abs(at(1, 1) - at(0, 0));
    for (const auto& [v, z0] : basins) {
        detail::NewtonOutcome nt;
        try {
            nt = detail::complex_newton(f, z0, o.newton_tol, o.max_newton, cell);
        } catch (const Error& e) {
            traces += std::string(e.what()) + "; ";
            continue;
        }
        if (!nt.converged) {
            traces += nt.trace + "; ";
            continue;
        }
        const bool inside = nt.root.real() >= region.re_min - cell && nt.root.real() <= region.re_max + cell &&
                            nt.root.imag() >= region.im_min - cell && nt.root.imag() <= region.im_max + cell;
        if (!inside || nt.root.imag() >= 0.0)
            continue;
        try {
            ShearLayerProfile p = make_profile(nt.root, theta, o);
            p.newton_iterations = nt.iterations;
            return p;
        } catch (const Error& e) {
            if (e.code() != Errc::no_root_in_region)
                throw;
        }
    }
    if (!traces.empty())
        throw Error(Errc::newton_diverged, traces);
    throw Error(Errc::no_root_in_region, "no admissible (even) root in the scan region");
}

/// Newton refinement of a known tau~ on another ray.
inline ShearLayerProfile resolve_on_ray(cplx tau_guess, double theta, const SolveOptions& o = {})
{
    const double Z = o.layer.truncation_Z;
    auto f = [&](cplx t) { return connection_defect(t, theta, Z, o.layer); };
    auto nt = detail::complex_newton(f, tau_guess, o.newton_tol, o.max_newton, 0.1);
    if (!nt.converged)
        throw Error(Errc::newton_diverged, nt.trace);
    ShearLayerProfile p = make_profile(nt.root, theta, o);
    p.newton_iterations = nt.iterations;
    return p;
}

struct DecayRay {
    double theta = 0.0;
    double alpha = 0.0;
    double alpha_predicted = 0.0;
    double r_squared = 0.0;
    double alpha_W = 0.0;
    double r_squared_W = 0.0;
};

struct DecayReport {
    std::vector<DecayRay> rays;
    bool all_positive = false;
};

/// Leading Gaussian rate of the recessive branch on the ray of angle theta.
inline double predicted_decay_alpha(double theta)
{
    return -0.5 * (lambda_recessive * std::exp(2.0 * I * theta)).real();
}

inline DecayReport verify_sector_decay(const ShearLayerProfile& p, double theta_lo, double theta_hi, double delta,
                                       int n_rays = 5)
{
    const bool right = theta_lo > -pi / 8 + delta - 1e-15 && theta_hi < 3 * pi / 8 - delta + 1e-15;
    const bool left = theta_lo > 7 * pi / 8 + delta - 1e-15 && theta_hi < 11 * pi / 8 - delta + 1e-15;
    require(theta_lo <= theta_hi && delta > 0 && (right || left), "sector outside the decay sectors");
    DecayReport rep;
    rep.all_positive = true;
    LayerOptions o = p.solution.options();
    for (int k = 0; k < n_rays; ++k) {
        const double th = n_rays == 1 ? theta_lo : theta_lo + (theta_hi - theta_lo) * k / (n_rays - 1);
        const double ray = right ? th : th - pi;
        const double rate = -(lambda_recessive * std::exp(2.0 * I * ray)).real();
        o.truncation_Z = std::min(40.0, std::max(p.solution.truncation_Z(), std::sqrt(30.0 / rate)));
        RVec radii;
        const int n = 200;
        const double r0 = 0.25 * o.truncation_Z;
        for (int i = 0; i < n; ++i)
            radii.push_back(o.truncation_Z - (o.truncation_Z - r0) * i / (n - 1));
        auto h = detail::integrate_half(p.tau_tilde, ray, right ? +1 : -1, radii, o);
        RVec rr, lx, rw, lw;
        for (int i = 0; i < n; ++i) {
            const double ax = std::abs(h.x[i]), aw = std::abs(h.tail[i]);
            if (ax > 1e-290 && std::isfinite(ax)) {
                rr.push_back(radii[i]);
                lx.push_back(std::log(ax));
            }
            if (aw > 1e-290 && std::isfinite(aw)) {
                rw.push_back(radii[i]);
                lw.push_back(std::log(aw));
            }
        }
        if (rr.size() < 8 || rw.size() < 8)
            throw Error(Errc::fit_failed, "|X| underflows before enough samples");
        DecayRay d;
        d.theta = th;
        std::tie(d.alpha, d.r_squared) = fit_gaussian_decay(rr, lx);
        std::tie(d.alpha_W, d.r_squared_W) = fit_gaussian_decay(rw, lw);
        d.alpha_predicted = predicted_decay_alpha(ray);
        rep.all_positive = rep.all_positive && d.alpha > 0 && d.alpha_W > 0;
        rep.rays.push_back(d);
    }
    return rep;
}

} // namespace prandtl
