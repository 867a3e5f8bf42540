#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "errors.hpp"

namespace prandtl {

struct FlowParams {
    double far_field_U = 1.0;
    double crit_point_a = 1.0;
    double crit_value = 1.5;
    double curvature = -1.0;
    double linear_radius_m = 0.2;
    double quad_radius = 0.25;
    double support_M = 4.0;

    bool operator==(const FlowParams&) const = default;

    static FlowParams canonical() { return {}; }

    /// Wider quadratic cap: the shear layer stays inside the exact cap down to k ~ 64.
    static FlowParams wide_cap() { return {0.5, 3.0, 3.0, -1.0, 0.2, 1.5, 6.0}; }
};

/// Degree-9 polynomial on [y0, y1] in the local variable t = (y - y0)/(y1 - y0).
struct BlendPiece {
    double y0 = 0.0;
    double y1 = 0.0;
    std::array<double, 10> coeff{};

    double eval(double y, int order) const
    {
        const double len = y1 - y0;
        const double t = (y - y0) / len;
        double acc = 0.0;
        for (int j = 9; j >= order; --j) {
            double c = coeff[j];
            for (int r = 0; r < order; ++r)
                c *= static_cast<double>(j - r);
            acc = acc * t + c;
        }
        return acc / std::pow(len, order);
    }
};

namespace detail {

/// Hermite interpolant matching value and derivatives 0..4 at both ends.
inline BlendPiece hermite_blend(double y0, double y1, const std::array<double, 5>& left,
                                const std::array<double, 5>& right)
{
    const double len = y1 - y0;
    Eigen::Matrix<double, 10, 10> A = Eigen::Matrix<double, 10, 10>::Zero();
    Eigen::Matrix<double, 10, 1> b;
    auto falling = [](int j, int d) {
        double v = 1.0;
        for (int r = 0; r < d; ++r)
            v *= static_cast<double>(j - r);
        return v;
    };
    for (int d = 0; d < 5; ++d) {
        A(d, d) = falling(d, d);
        for (int j = d; j < 10; ++j)
            A(5 + d, j) = falling(j, d);
        b(d) = left[d] * std::pow(len, d);
        b(5 + d) = right[d] * std::pow(len, d);
    }
    Eigen::Matrix<double, 10, 1> c = A.partialPivLu().solve(b);
    BlendPiece p{y0, y1, {}};
    for (int j = 0; j < 10; ++j)
        p.coeff[j] = c(j);
    return p;
}

} // namespace detail

/// Shear profile: u = y on [0, m], exact quadratic cap on [a - q, a + q], u = U for y >= M,
/// with C4 polynomial blends in between.
class ShearFlow {
public:
    explicit ShearFlow(const FlowParams& p) : p_(p)
    {
        require(p.linear_radius_m > 0 && p.linear_radius_m < p.crit_point_a - p.quad_radius,
                "need 0 < m < a - quad_radius");
        require(p.quad_radius > 0, "quad_radius must be positive");
        require(p.crit_point_a + p.quad_radius < p.support_M, "need a + quad_radius < M");
        require(p.far_field_U >= 0, "far-field velocity must be non-negative");
        std::array<double, 5> wall{p.linear_radius_m, 1, 0, 0, 0};
        std::array<double, 5> cap_l{}, cap_r{};
        for (int d = 0; d < 5; ++d) {
            cap_l[d] = cap(p.crit_point_a - p.quad_radius, d);
            cap_r[d] = cap(p.crit_point_a + p.quad_radius, d);
        }
        std::array<double, 5> far{p.far_field_U, 0, 0, 0, 0};
        left_ = detail::hermite_blend(p.linear_radius_m, p.crit_point_a - p.quad_radius, wall, cap_l);
        right_ = detail::hermite_blend(p.crit_point_a + p.quad_radius, p.support_M, cap_r, far);
    }

    const FlowParams& params() const { return p_; }
    double a() const { return p_.crit_point_a; }
    double u_a() const { return p_.crit_value; }
    double curvature() const { return p_.curvature; }
    double far_field() const { return p_.far_field_U; }
    double support() const { return p_.support_M; }
    const BlendPiece& left_blend() const { return left_; }
    const BlendPiece& right_blend() const { return right_; }

    /// Closed-form cap polynomial (valid on the cap only).
    double cap(double y, int order) const
    {
        const double t = y - p_.crit_point_a;
        switch (order) {
        case 0: return p_.crit_value + 0.5 * p_.curvature * t * t;
        case 1: return p_.curvature * t;
        case 2: return p_.curvature;
        default: return 0.0;
        }
    }

    /// d^order u_s / dy^order; orders up to 9 are exact inside each piece.
    double eval(double y, int order = 0) const
    {
        require(y >= 0.0, "eval needs y >= 0");
        require(order >= 0 && order <= 9, "derivative order out of range");
        const double m = p_.linear_radius_m, a = p_.crit_point_a, q = p_.quad_radius;
        if (y <= m)
            return order == 0 ? y : (order == 1 ? 1.0 : 0.0);
        if (y < a - q)
            return left_.eval(y, order);
        if (y <= a + q)
            return cap(y, order);
        if (y < p_.support_M)
            return right_.eval(y, order);
        return order == 0 ? p_.far_field_U : 0.0;
    }

    double operator()(double y) const { return eval(y, 0); }

    /// Knots in increasing order: m, a - q, a + q, M.
    std::array<double, 4> knots() const
    {
        return {p_.linear_radius_m, p_.crit_point_a - p_.quad_radius,
                p_.crit_point_a + p_.quad_radius, p_.support_M};
    }

    /// Value of the piece on each side of a knot, evaluated from its own formula.
    double eval_one_sided(int knot, int order, bool from_right) const
    {
        const auto k = knots();
        const double y = k[knot];
        switch (knot) {
        case 0: return from_right ? left_.eval(y, order) : (order == 0 ? y : order == 1 ? 1.0 : 0.0);
        case 1: return from_right ? cap(y, order) : left_.eval(y, order);
        case 2: return from_right ? right_.eval(y, order) : cap(y, order);
        default: return from_right ? (order == 0 ? p_.far_field_U : 0.0) : right_.eval(y, order);
        }
    }

    double sup_abs(int samples_per_piece = 4000) const
    {
        double s = std::max(std::abs(p_.crit_value), std::abs(p_.far_field_U));
        s = std::max(s, p_.linear_radius_m);
        for (const BlendPiece* b : {&left_, &right_})
            for (int i = 0; i <= samples_per_piece; ++i) {
                double y = b->y0 + (b->y1 - b->y0) * i / samples_per_piece;
                s = std::max(s, std::abs(b->eval(y, 0)));
            }
        return s;
    }

private:
    FlowParams p_;
    BlendPiece left_, right_;
};

/// C_s = sup|u_s| + int_0^inf y |u_s'|^2 dy.
inline double energy_constant(const ShearFlow& flow)
{
    const auto& p = flow.params();
    const double m = p.linear_radius_m, a = p.crit_point_a, q = p.quad_radius;
    double integral = 0.5 * m * m;
    integral += p.curvature * p.curvature * a * 2.0 * q * q * q / 3.0;
    // y * (u')^2 on a blend is a polynomial of degree 17: 10-point Gauss is exact.
    using boost::math::quadrature::gauss;
    for (const BlendPiece* b : {&flow.left_blend(), &flow.right_blend()}) {
        auto g = [b](double y) {
            double d = b->eval(y, 1);
            return y * d * d;
        };
        integral += gauss<double, 10>::integrate(g, b->y0, b->y1);
    }
    return flow.sup_abs() + integral;
}

struct StructureCheck {
    std::string name;
    bool passed = false;
    double discrepancy = 0.0;
};

struct StructureReport {
    std::vector<StructureCheck> checks;

    bool all_passed() const
    {
        for (const auto& c : checks)
            if (!c.passed)
                return false;
        return true;
    }

    const StructureCheck& operator[](const std::string& name) const
    {
        for (const auto& c : checks)
            if (c.name == name)
                return c;
        throw Error(Errc::precondition, "no structure check named " + name);
    }
};

inline StructureReport validate_structure(const ShearFlow& flow, int samples = 20000)
{
    const auto& p = flow.params();
    StructureReport r;
    auto add = [&r](std::string name, double disc, bool ok) { r.checks.push_back({std::move(name), ok, disc}); };

    add("wall_zero", std::abs(flow(0.0)), flow(0.0) == 0.0);

    double lin = 0.0;
    for (int i = 0; i <= 200; ++i) {
        double y = p.linear_radius_m * i / 200.0;
        lin = std::max(lin, std::abs(flow(y) - y));
    }
    add("linear_near_wall", lin, lin <= 1e-14);

    double d1 = std::abs(flow.eval(p.crit_point_a, 1));
    add("critical_point", d1, d1 <= 1e-14);
    double d2 = flow.eval(p.crit_point_a, 2);
    add("negative_curvature", d2, d2 < 0.0);

    double cap = 0.0;
    for (int i = 0; i <= 200; ++i) {
        double y = p.crit_point_a - p.quad_radius + 2.0 * p.quad_radius * i / 200.0;
        double t = y - p.crit_point_a;
        double exact = p.crit_value + p.curvature * t * t / 2.0;
        cap = std::max(cap, std::abs(flow(y) - exact) / std::abs(exact));
    }
    add("exact_cap", cap, cap <= 1e-14);

    double far = 0.0;
    for (int i = 0; i <= 100; ++i) {
        double y = p.support_M * (1.0 + i / 50.0);
        far = std::max(far, std::abs(flow(y) - p.far_field_U));
    }
    add("far_field", far, far == 0.0);

    double umin = INFINITY;
    for (int i = 1; i <= samples; ++i) {
        double y = p.support_M * i / samples;
        umin = std::min(umin, flow(y));
    }
    add("positivity", umin, umin > 0.0);

    double jump = 0.0;
    for (int k = 0; k < 4; ++k)
        for (int d = 0; d <= 4; ++d) {
            double lft = flow.eval_one_sided(k, d, false), rgt = flow.eval_one_sided(k, d, true);
            jump = std::max(jump, std::abs(lft - rgt) / std::max(1.0, std::abs(lft)));
        }
    add("c4_continuity", jump, jump < 1e-8);
    return r;
}

/// Checked construction: throws InfeasibleProfile when the blends lose positivity.
inline ShearFlow build_shear_flow(const FlowParams& p)
{
    require(p.crit_value > 0, "crit_value must be positive");
    require(p.curvature < 0, "curvature must be negative");
    ShearFlow flow(p);
    auto rep = validate_structure(flow);
    if (!rep["positivity"].passed)
        throw Error(Errc::infeasible_profile,
                    "blends undershoot to u_s = " + std::to_string(rep["positivity"].discrepancy));
    if (!rep.all_passed())
        throw Error(Errc::infeasible_profile, "profile violates a structural invariant");
    return flow;
}

} // namespace prandtl
