#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "errors.hpp"

namespace prandtl {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I{0.0, 1.0};

/// Uniform grid y_j = j*h, j = 0..n-1.
struct UniformGrid {
    double h = 0.0;
    std::size_t n = 0;

    double y(std::size_t j) const { return h * static_cast<double>(j); }
    double y_max() const { return h * static_cast<double>(n - 1); }

    RVec nodes() const
    {
        RVec out(n);
        for (std::size_t j = 0; j < n; ++j)
            out[j] = y(j);
        return out;
    }

    std::size_t index_of(double y0) const
    {
        return static_cast<std::size_t>(std::llround(y0 / h));
    }

    bool has_node(double y0, double tol = 1e-12) const
    {
        return std::abs(y(index_of(y0)) - y0) <= tol * std::max(1.0, y0);
    }

    static UniformGrid uniform(double y_max, std::size_t n)
    {
        require(n >= 3 && y_max > 0.0, "grid needs at least 3 points on a positive interval");
        return {y_max / static_cast<double>(n - 1), n};
    }

    /// Grid with at least `n_min` points on [0, y_max] and a node exactly at `anchor`.
    static UniformGrid with_node(double y_max, std::size_t n_min, double anchor)
    {
        require(anchor > 0.0 && anchor < y_max, "anchor must lie inside the grid");
        double h0 = y_max / static_cast<double>(n_min - 1);
        double cells_to_anchor = std::ceil(anchor / h0 - 1e-9);
        double h = anchor / cells_to_anchor;
        auto cells = static_cast<std::size_t>(std::ceil(y_max / h - 1e-9));
        return {h, cells + 1};
    }
};

template <class V>
double max_abs(const V& v)
{
    double m = 0.0;
    for (const auto& x : v)
        m = std::max(m, std::abs(x));
    return m;
}

/// Trapezoidal integral of samples on a uniform grid.
template <class T>
T trapz(const std::vector<T>& f, double h)
{
    if (f.size() < 2)
        return T{};
    T s = 0.5 * (f.front() + f.back());
    for (std::size_t j = 1; j + 1 < f.size(); ++j)
        s += f[j];
    return s * h;
}

/// Running trapezoidal prefix integral, out[0] = 0.
template <class T>
std::vector<T> cumtrapz(const std::vector<T>& f, double h)
{
    std::vector<T> out(f.size(), T{});
    for (std::size_t j = 1; j < f.size(); ++j)
        out[j] = out[j - 1] + 0.5 * h * (f[j - 1] + f[j]);
    return out;
}

/// Second-order centered first derivative with one-sided closure.
template <class T>
std::vector<T> fd_derivative(const std::vector<T>& f, double h)
{
    const std::size_t n = f.size();
    std::vector<T> d(n, T{});
    if (n < 3)
        return d;
    for (std::size_t j = 1; j + 1 < n; ++j)
        d[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    return d;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
    double rms_residual = 0.0;
};

inline LineFit fit_line(const RVec& x, const RVec& y)
{
    require(x.size() == y.size() && x.size() >= 2, "line fit needs two matching samples");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / n);
    f.r_squared = syy > 0 ? 1.0 - ss / syy : 1.0;
    return f;
}

/// ||e^{w y} f||_{H^k} by trapezoidal quadrature and repeated centered differences.
/// `layer_width` > 0 enables the resolution check (16 points per width).
inline double weighted_sobolev_norm(const CVec& f, double h, double weight, int k, double layer_width = 0.0)
{
    require(k >= 0 && k <= 3, "Sobolev index must be in 0..3");
    require(h > 0, "grid spacing must be positive");
    if (layer_width > 0.0 && h > layer_width / 16.0)
        throw Error(Errc::under_resolved, "fewer than 16 points across the layer width");
    CVec d = f;
    double total = 0.0;
    for (int j = 0; j <= k; ++j) {
        RVec dens(d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            dens[i] = std::norm(std::exp(weight * h * static_cast<double>(i)) * d[i]);
        total += trapz(dens, h);
        if (j < k)
            d = fd_derivative(d, h);
    }
    return std::sqrt(total);
}

/// Thomas algorithm: a sub, b diag, c super diagonals; rhs overwritten with the solution.
inline void solve_tridiagonal(const CVec& a, const CVec& b, const CVec& c, CVec& rhs)
{
    const std::size_t n = b.size();
    CVec cp(n), dp(n);
    cp[0] = c[0] / b[0];
    dp[0] = rhs[0] / b[0];
    for (std::size_t i = 1; i < n; ++i) {
        cplx den = b[i] - a[i] * cp[i - 1];
        cp[i] = i + 1 < n ? c[i] / den : cplx{};
        dp[i] = (rhs[i] - a[i] * dp[i - 1]) / den;
    }
    rhs[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        rhs[i] = dp[i] - cp[i] * rhs[i + 1];
}

/// Principal square root with Re >= 0.
inline cplx principal_sqrt(cplx z) { return std::sqrt(z); }

/// Integrates dx/ds = f(x, s) from s = 0 to each sample point in `s_samples` (ascending,
/// starting at or after 0) with an adaptive Dormand-Prince pair. Calls `observe(idx, x)`.
template <class State, class System, class Observer>
std::size_t integrate_samples(System&& f, State x0, const RVec& s_samples, double abs_tol,
                              double rel_tol, Observer&& observe)
{
    namespace odeint = boost::numeric::odeint;
    using stepper_t = odeint::runge_kutta_dopri5<State>;
    auto stepper = odeint::make_controlled(abs_tol, rel_tol, stepper_t());
    RVec times;
    times.reserve(s_samples.size() + 1);
    times.push_back(0.0);
    for (double s : s_samples)
        times.push_back(std::max(s, 0.0));
    std::size_t calls = 0;
    auto rhs = [&](const State& x, State& dx, double s) {
        ++calls;
        f(x, dx, s);
    };
    double h0 = times.size() > 1 && times.back() > 0 ? times.back() * 1e-3 : 1e-3;
    std::size_t k = 0;
    odeint::integrate_times(stepper, rhs, x0, times.begin(), times.end(), h0,
                            [&](const State& x, double) {
                                if (k > 0)
                                    observe(k - 1, x);
                                ++k;
                            });
    return calls;
}

} // namespace prandtl
