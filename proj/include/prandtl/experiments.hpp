#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bvp_march.hpp"
#include "collocation.hpp"
#include "dispersion.hpp"
#include "ivp_evolution.hpp"
#include "quasimode.hpp"
#include "shear_flow.hpp"
#include "shear_layer.hpp"

namespace prandtl {

using nlohmann::json;

inline const std::vector<std::string>& experiment_ids()
{
    static const std::vector<std::string> ids{"tau-solve", "dispersion-sweep", "quasimode-residual", "ivp-scaling",
                                              "bvp-uniqueness"};
    return ids;
}

struct ExperimentConfig {
    std::string experiment = "tau-solve";
    std::string flow_preset = "wide_cap"; // canonical | wide_cap | custom
    FlowParams flow = FlowParams::wide_cap();
    unsigned seed = 1;
    std::string out_dir = "out";

    // tau-solve
    int collocation_points = 160;
    double newton_tol = 1e-10;
    double B_probe_radius = 1e6;

    // dispersion-sweep
    std::vector<double> dispersion_eps{1e-2, 2.5e-3, 6.25e-4};

    // quasimode-residual
    std::vector<double> quasimode_eps{1.0 / 64, 1.0 / 128, 1.0 / 256};
    std::vector<int> orders{1, 2};
    std::size_t grid_points = 4096;

    // ivp-scaling
    std::vector<int> ks{64, 256, 1024};
    std::vector<int> zero_ks{0, 1, 64};
    double courant = 0.05;
    double time_factor = 3.0; // T = time_factor / sqrt(k)

    // bvp-uniqueness
    double bvp_eps = 1e-2;
    double dx = 0.005;
    double X = 1.0;
    std::vector<int> zero_ms{0, 1, 4, 16};
    std::size_t corpus_random = 8;

    bool operator==(const ExperimentConfig&) const = default;
};

inline json flow_to_json(const FlowParams& p)
{
    return {{"far_field_U", p.far_field_U}, {"crit_point_a", p.crit_point_a}, {"crit_value", p.crit_value},
            {"curvature", p.curvature},     {"linear_radius_m", p.linear_radius_m},
            {"quad_radius", p.quad_radius}, {"support_M", p.support_M}};
}

inline json to_json(const ExperimentConfig& c)
{
    json flow = flow_to_json(c.flow);
    flow["preset"] = c.flow_preset;
    return {{"experiment", c.experiment},
            {"flow", flow},
            {"seed", c.seed},
            {"out_dir", c.out_dir},
            {"tau_solve", {{"collocation_points", c.collocation_points},
                           {"newton_tol", c.newton_tol},
                           {"B_probe_radius", c.B_probe_radius}}},
            {"dispersion", {{"epsilons", c.dispersion_eps}}},
            {"quasimode", {{"epsilons", c.quasimode_eps}, {"orders", c.orders}, {"grid_points", c.grid_points}}},
            {"ivp", {{"ks", c.ks}, {"zero_ks", c.zero_ks}, {"courant", c.courant}, {"time_factor", c.time_factor}}},
            {"bvp", {{"epsilon", c.bvp_eps},
                     {"dx", c.dx},
                     {"X", c.X},
                     {"zero_ms", c.zero_ms},
                     {"corpus_random", c.corpus_random}}}};
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& what)
{
    throw Error(Errc::config_invalid, what);
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& ctx)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(ctx + "." + key + ": " + e.what());
    }
}

inline void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& ctx)
{
    if (!j.is_object())
        config_error(ctx + " must be an object");
    for (const auto& [k, v] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
            config_error("unknown key " + ctx + "." + k);
}

inline bool all_positive(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0 && std::isfinite(x); });
}

} // namespace detail

/// Range checks on every knob; throws ConfigInvalid.
inline void validate(const ExperimentConfig& c)
{
    using detail::config_error;
    const auto& ids = experiment_ids();
    if (std::find(ids.begin(), ids.end(), c.experiment) == ids.end())
        config_error("unknown experiment '" + c.experiment + "'");
    if (c.flow_preset != "canonical" && c.flow_preset != "wide_cap" && c.flow_preset != "custom")
        config_error("flow.preset must be canonical, wide_cap or custom");
    try {
        ShearFlow probe(c.flow);
        (void)probe;
    } catch (const Error& e) {
        config_error(std::string("flow: ") + e.what());
    }
    if (c.flow.crit_value <= 0 || c.flow.curvature >= 0)
        config_error("flow needs crit_value > 0 and curvature < 0");
    if (c.collocation_points < 40 || c.collocation_points > 600)
        config_error("tau_solve.collocation_points must lie in [40, 600]");
    if (!(c.newton_tol > 0 && c.newton_tol < 1e-4))
        config_error("tau_solve.newton_tol must lie in (0, 1e-4)");
    if (!(c.B_probe_radius >= 10))
        config_error("tau_solve.B_probe_radius must be >= 10");
    if (c.dispersion_eps.size() < 2 || !detail::all_positive(c.dispersion_eps) ||
        *std::max_element(c.dispersion_eps.begin(), c.dispersion_eps.end()) > 0.1)
        config_error("dispersion.epsilons needs at least two values in (0, 0.1]");
    if (c.quasimode_eps.size() < 2 || !detail::all_positive(c.quasimode_eps) ||
        *std::max_element(c.quasimode_eps.begin(), c.quasimode_eps.end()) > 0.1)
        config_error("quasimode.epsilons needs at least two values in (0, 0.1]");
    if (c.orders.empty() || std::any_of(c.orders.begin(), c.orders.end(), [](int n) { return n < 1 || n > 6; }))
        config_error("quasimode.orders must lie in [1, 6]");
    if (c.grid_points < 256 || c.grid_points > (1u << 18))
        config_error("quasimode.grid_points must lie in [256, 262144]");
    if (c.ks.size() < 2 || std::any_of(c.ks.begin(), c.ks.end(), [](int k) { return k < 1 || k > 16384; }))
        config_error("ivp.ks needs at least two values in [1, 16384]");
    if (std::any_of(c.zero_ks.begin(), c.zero_ks.end(), [](int k) { return k < 0 || k > 16384; }))
        config_error("ivp.zero_ks must lie in [0, 16384]");
    if (!(c.courant > 0 && c.courant <= rk3_imaginary_stability))
        config_error("ivp.courant must lie in (0, sqrt 3]");
    if (!(c.time_factor > 0 && c.time_factor <= 50))
        config_error("ivp.time_factor must lie in (0, 50]");
    if (!(c.bvp_eps > 0 && c.bvp_eps <= 0.1))
        config_error("bvp.epsilon must lie in (0, 0.1]");
    if (!(c.dx > 0 && c.dx <= 0.1) || !(c.X > 0 && c.X <= 20) || c.X < 10 * c.dx)
        config_error("bvp.dx must lie in (0, 0.1] and bvp.X in [10 dx, 20]");
    if (std::any_of(c.zero_ms.begin(), c.zero_ms.end(), [](int m) { return m < 0 || m > 100000; }))
        config_error("bvp.zero_ms must lie in [0, 100000]");
    if (c.corpus_random < 1 || c.corpus_random > 512)
        config_error("bvp.corpus_random must lie in [1, 512]");
}

inline ExperimentConfig config_from_json(const json& j)
{
    using detail::read_opt;
    ExperimentConfig c;
    detail::check_keys(j, {"experiment", "flow", "seed", "out_dir", "tau_solve", "dispersion", "quasimode", "ivp", "bvp"},
                       "config");
    read_opt(j, "experiment", c.experiment, "config");
    read_opt(j, "seed", c.seed, "config");
    read_opt(j, "out_dir", c.out_dir, "config");
    if (j.contains("flow")) {
        const json& f = j["flow"];
        detail::check_keys(f, {"preset", "far_field_U", "crit_point_a", "crit_value", "curvature", "linear_radius_m",
                               "quad_radius", "support_M"},
                           "flow");
        read_opt(f, "preset", c.flow_preset, "flow");
        if (c.flow_preset == "canonical")
            c.flow = FlowParams::canonical();
        else if (c.flow_preset == "wide_cap")
            c.flow = FlowParams::wide_cap();
        read_opt(f, "far_field_U", c.flow.far_field_U, "flow");
        read_opt(f, "crit_point_a", c.flow.crit_point_a, "flow");
        read_opt(f, "crit_value", c.flow.crit_value, "flow");
        read_opt(f, "curvature", c.flow.curvature, "flow");
        read_opt(f, "linear_radius_m", c.flow.linear_radius_m, "flow");
        read_opt(f, "quad_radius", c.flow.quad_radius, "flow");
        read_opt(f, "support_M", c.flow.support_M, "flow");
    }
    if (j.contains("tau_solve")) {
        const json& s = j["tau_solve"];
        detail::check_keys(s, {"collocation_points", "newton_tol", "B_probe_radius"}, "tau_solve");
        read_opt(s, "collocation_points", c.collocation_points, "tau_solve");
        read_opt(s, "newton_tol", c.newton_tol, "tau_solve");
        read_opt(s, "B_probe_radius", c.B_probe_radius, "tau_solve");
    }
    if (j.contains("dispersion")) {
        detail::check_keys(j["dispersion"], {"epsilons"}, "dispersion");
        read_opt(j["dispersion"], "epsilons", c.dispersion_eps, "dispersion");
    }
    if (j.contains("quasimode")) {
        const json& s = j["quasimode"];
        detail::check_keys(s, {"epsilons", "orders", "grid_points"}, "quasimode");
        read_opt(s, "epsilons", c.quasimode_eps, "quasimode");
        read_opt(s, "orders", c.orders, "quasimode");
        read_opt(s, "grid_points", c.grid_points, "quasimode");
    }
    if (j.contains("ivp")) {
        const json& s = j["ivp"];
        detail::check_keys(s, {"ks", "zero_ks", "courant", "time_factor"}, "ivp");
        read_opt(s, "ks", c.ks, "ivp");
        read_opt(s, "zero_ks", c.zero_ks, "ivp");
        read_opt(s, "courant", c.courant, "ivp");
        read_opt(s, "time_factor", c.time_factor, "ivp");
    }
    if (j.contains("bvp")) {
        const json& s = j["bvp"];
        detail::check_keys(s, {"epsilon", "dx", "X", "zero_ms", "corpus_random"}, "bvp");
        read_opt(s, "epsilon", c.bvp_eps, "bvp");
        read_opt(s, "dx", c.dx, "bvp");
        read_opt(s, "X", c.X, "bvp");
        read_opt(s, "zero_ms", c.zero_ms, "bvp");
        read_opt(s, "corpus_random", c.corpus_random, "bvp");
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::config_invalid, "cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::config_invalid, path + ": " + e.what());
    }
    return config_from_json(j);
}

// ---- artifact bundle ----------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string str() const
    {
        std::ostringstream os;
        os << std::setprecision(17);
        for (std::size_t i = 0; i < columns.size(); ++i)
            os << (i ? "," : "") << columns[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i)
                os << (i ? "," : "") << r[i];
            os << '\n';
        }
        return os.str();
    }
};

struct CriterionResult {
    std::string id; // "1", "8-ivp", ...
    bool pass = false;
    std::string detail;
};

struct GoldenValue {
    double value = 0.0;
    double rel_tol = 1e-6;
};

struct ArtifactBundle {
    std::string experiment;
    std::map<std::string, CsvTable> tables;
    json summary;
    std::vector<CriterionResult> criteria;
    std::map<std::string, GoldenValue> goldens; // numbers eligible for regression

    bool all_passed() const
    {
        return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.pass; });
    }

    std::string report() const
    {
        std::ostringstream os;
        os << "experiment " << experiment << '\n';
        for (const auto& c : criteria)
            os << "criterion " << c.id << ": " << (c.pass ? "PASS" : "FAIL") << "  " << c.detail << '\n';
        return os.str();
    }
};

inline void write_bundle(const ArtifactBundle& b, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& [name, t] : b.tables)
        std::ofstream(dir / (name + ".csv")) << t.str();
    json s = b.summary;
    s["experiment"] = b.experiment;
    json crit = json::array();
    for (const auto& c : b.criteria)
        crit.push_back({{"id", c.id}, {"pass", c.pass}, {"detail", c.detail}});
    s["criteria"] = crit;
    json g = json::object();
    for (const auto& [k, v] : b.goldens)
        g[k] = v.value;
    s["golden_values"] = g;
    std::ofstream(dir / "summary.json") << s.dump(2) << '\n';
    std::ofstream(dir / "report.txt") << b.report();
}

// ---- goldens --------------------------------------------------------------------------------------

struct GoldenDiff {
    std::string key;
    double expected = 0.0, actual = 0.0, rel_diff = 0.0, rel_tol = 0.0;
    bool pass = false;
};

struct GoldenReport {
    std::vector<GoldenDiff> diffs;
    bool all_passed() const
    {
        return std::all_of(diffs.begin(), diffs.end(), [](const auto& d) { return d.pass; });
    }
};

/// Store layout: {"key": {"value": x, "rel_tol": t}, ...}. Every stored key must be produced by the bundle.
inline GoldenReport compare_goldens(const ArtifactBundle& b, const json& store)
{
    GoldenReport r;
    for (const auto& [key, entry] : store.items()) {
        auto it = b.goldens.find(key);
        if (it == b.goldens.end())
            throw Error(Errc::missing_golden, "golden '" + key + "' not produced by " + b.experiment);
        GoldenDiff d;
        d.key = key;
        d.expected = entry.at("value").get<double>();
        d.rel_tol = entry.value("rel_tol", it->second.rel_tol);
        d.actual = it->second.value;
        d.rel_diff = std::abs(d.actual - d.expected) / std::max(std::abs(d.expected), 1e-300);
        d.pass = d.rel_diff <= d.rel_tol || d.actual == d.expected;
        r.diffs.push_back(d);
    }
    return r;
}

inline json golden_store(const ArtifactBundle& b)
{
    json s = json::object();
    for (const auto& [k, v] : b.goldens)
        s[k] = {{"value", v.value}, {"rel_tol", v.rel_tol}};
    return s;
}

// ---- experiments ----------------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double x, int prec = 4)
{
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

inline bool strictly_decreasing(const RVec& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]))
            return false;
    return true;
}

inline ShearLayerProfile base_profile(const ExperimentConfig& c)
{
    SolveOptions o;
    o.newton_tol = c.newton_tol;
    o.curvature = c.flow.curvature;
    return solve_tau(ScanRegion{}, 0.0, o);
}

} // namespace detail

inline ArtifactBundle run_tau_solve(const ExperimentConfig& c)
{
    ArtifactBundle b;
    b.experiment = c.experiment;
    // B asymptotics on four directions of |z~| = R
    double B_err = 0.0, eig_err = 0.0;
    const cplx e1 = I * std::exp(I * (pi / 4.0));
    for (double ang : {0.1, 0.7, 2.0, 3.5}) {
        const cplx z = c.B_probe_radius * std::exp(I * ang);
        const Mat2 B = assemble_B(std::exp(-3.0 * I * pi / 4.0), z);
        B_err = std::max({B_err, std::abs(B[0][0]), std::abs(B[0][1] - 1.0), std::abs(B[1][0] + I),
                          std::abs(B[1][1])});
        const cplx tr = B[0][0] + B[1][1], det = B[0][0] * B[1][1] - B[0][1] * B[1][0];
        const cplx disc = std::sqrt(tr * tr - 4.0 * det);
        for (cplx l : {0.5 * (tr + disc), 0.5 * (tr - disc)})
            eig_err = std::max(eig_err, std::min(std::abs(l - e1), std::abs(l + e1)));
    }
    b.criteria.push_back({"1", B_err < 1e-5 && eig_err < 1e-5,
                          "max|B - [[0,1],[-i,0]]| = " + detail::fmt(B_err) + ", eigenvalue error " +
                              detail::fmt(eig_err) + " at |z~| = " + detail::fmt(c.B_probe_radius)});

    const ShearLayerProfile p = detail::base_profile(c);
    const CollocationResult col = collocation_tau(p.tau_tilde, c.collocation_points);
    const double gap = std::abs(col.tau_tilde - p.tau_tilde);
    const double exact_gap = std::abs(p.tau_tilde - std::exp(-3.0 * I * pi / 4.0));
    const double kappa = p.curvature;
    const std::array<double, 3> jump_err{std::abs(p.jumps[0] + p.tau), std::abs(p.jumps[1]),
                                         std::abs(p.jumps[2] + kappa)};
    const double jmax = *std::max_element(jump_err.begin(), jump_err.end());
    const bool ok2 = p.tau_tilde.imag() < 0 && std::abs(p.defect) < 1e-10 && gap < 1e-6 && jmax < 1e-6;
    b.criteria.push_back({"2", ok2,
                          "tau~ = " + detail::fmt(p.tau_tilde.real(), 12) + detail::fmt(p.tau_tilde.imag(), 12) +
                              "i, |defect| = " + detail::fmt(std::abs(p.defect)) + ", collocation gap " +
                              detail::fmt(gap) + ", max jump error " + detail::fmt(jmax)});

    CsvTable prof{{"z_re", "z_im", "V_re", "V_im", "W_re", "W_im"}, {}};
    for (std::size_t i = 0; i < p.z_grid.size(); ++i)
        prof.rows.push_back({p.z_grid[i].real(), p.z_grid[i].imag(), p.V[i].real(), p.V[i].imag(),
                             p.W_tilde[i].real(), p.W_tilde[i].imag()});
    b.tables["shear_layer_profile"] = prof;
    const ShearFlow flow(c.flow);
    b.summary = {{"tau_tilde", {p.tau_tilde.real(), p.tau_tilde.imag()}},
                 {"tau", {p.tau.real(), p.tau.imag()}},
                 {"defect", std::abs(p.defect)},
                 {"newton_iterations", p.newton_iterations},
                 {"newton_tol", c.newton_tol},
                 {"collocation_tau_tilde", {col.tau_tilde.real(), col.tau_tilde.imag()}},
                 {"collocation_iterations", col.iterations},
                 {"collocation_gap", gap},
                 {"gap_to_exp_minus_3i_pi_over_4", exact_gap},
                 {"jump_errors", jump_err},
                 {"decay_rate_alpha", p.decay_rate_alpha},
                 {"B_error", B_err},
                 {"B_eigen_error", eig_err},
                 {"energy_constant", energy_constant(flow)},
                 {"flow", flow_to_json(c.flow)}};
    b.goldens["tau_tilde_re"] = {p.tau_tilde.real(), 1e-8};
    b.goldens["tau_tilde_im"] = {p.tau_tilde.imag(), 1e-8};
    b.goldens["energy_constant"] = {energy_constant(flow), 1e-9};
    b.goldens["decay_rate_alpha"] = {p.decay_rate_alpha, 1e-3};
    return b;
}

inline ArtifactBundle run_dispersion_sweep(const ExperimentConfig& c)
{
    ArtifactBundle b;
    b.experiment = c.experiment;
    const ShearFlow flow(c.flow);
    const ShearLayerProfile p = detail::base_profile(c);
    RVec eps = c.dispersion_eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const double ua = flow.u_a();

    CsvTable bvp{{"epsilon", "omega_re", "omega_im", "residual", "normalized_error"}, {}};
    RVec bvp_err;
    double worst_res = 0.0;
    for (double e : eps) {
        double res = 0.0;
        const cplx w = solve_omega_bvp(flow, e, p.tau, &res);
        const double err = std::abs((w + 1.0 / ua) / std::sqrt(e) + p.tau / std::pow(ua, 1.5));
        bvp_err.push_back(err);
        worst_res = std::max(worst_res, res);
        bvp.rows.push_back({e, w.real(), w.imag(), res, err});
    }
    b.tables["omega_bvp"] = bvp;
    const bool ok3 = worst_res < 1e-12 && detail::strictly_decreasing(bvp_err);
    std::string d3 = "max |F| = " + detail::fmt(worst_res) + ", normalized errors";
    for (double x : bvp_err)
        d3 += " " + detail::fmt(x);
    b.criteria.push_back({"3", ok3, d3});

    CsvTable ivp{{"epsilon", "variant", "omega_re", "omega_im", "predicted_re", "predicted_im", "error_over_sqrt_eps",
                  "defect_norm", "iterations", "rate_ratio"},
                 {}};
    RVec ivp_err;
    double worst_defect = 0.0;
    json iters = json::array();
    for (Variant v : {Variant::IVP, Variant::BVP})
        for (double e : eps) {
            const DispersionResult r = find_unstable_eigenvalue(flow, e, v, p.tau);
            const double ratio = v == Variant::IVP ? r.omega.imag() / (std::sqrt(e) * r.sigma)
                                                   : r.omega.imag() / e / (r.sigma / std::sqrt(e));
            ivp.rows.push_back({e, v == Variant::IVP ? 0.0 : 1.0, r.omega.real(), r.omega.imag(),
                                r.predicted_omega.real(), r.predicted_omega.imag(), r.comparison_error,
                                r.defect_norm, double(r.iterations), ratio});
            iters.push_back(r.iterations);
            if (v == Variant::IVP) {
                ivp_err.push_back(r.comparison_error);
                worst_defect = std::max(worst_defect, r.defect_norm);
                b.goldens["omega_ivp_re@" + detail::fmt(e, 6)] = {r.omega.real(), 1e-6};
                b.goldens["omega_ivp_im@" + detail::fmt(e, 6)] = {r.omega.imag(), 1e-5};
            }
        }
    b.tables["dispersion"] = ivp;
    const bool ok4 = worst_defect < 1e-9 && detail::strictly_decreasing(ivp_err);
    std::string d4 = "max defect " + detail::fmt(worst_defect) + ", |omega - omega_app|/sqrt(eps)";
    for (double x : ivp_err)
        d4 += " " + detail::fmt(x);
    b.criteria.push_back({"4", ok4, d4});
    b.summary = {{"tau", {p.tau.real(), p.tau.imag()}},
                 {"sigma", growth_rate_sigma(flow, p.tau)},
                 {"epsilons", eps},
                 {"newton_iterations", iters},
                 {"newton_step_tol", 1e-13},
                 {"flow", flow_to_json(c.flow)}};
    return b;
}

inline ArtifactBundle run_quasimode_residual(const ExperimentConfig& c)
{
    ArtifactBundle b;
    b.experiment = c.experiment;
    const ShearFlow flow(c.flow);
    const ShearLayerProfile p = detail::base_profile(c);
    RVec eps = c.quasimode_eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    QuasimodeOptions qo;
    qo.grid_points = c.grid_points;

    CsvTable t{{"n", "epsilon", "R_L2", "R_H1", "U_L2", "U_H0", "U_H1", "U_H2", "U_H3"}, {}};
    json slopes = json::object();
    bool ok = true;
    std::string detail;
    for (int n : c.orders) {
        RVec le, lr;
        std::vector<std::array<double, 4>> U;
        for (double e : eps) {
            const Quasimode q = assemble_quasimode(flow, p, e, n, Variant::IVP, qo);
            t.rows.push_back({double(n), e, q.norms.R_weighted[0], q.norms.R_weighted[1], q.norms.U_L2,
                              q.norms.U_weighted[0], q.norms.U_weighted[1], q.norms.U_weighted[2],
                              q.norms.U_weighted[3]});
            le.push_back(std::log(e));
            lr.push_back(std::log(q.norms.R_weighted[0]));
            U.push_back(q.norms.U_weighted);
        }
        const double slope = fit_line(le, lr).slope;
        slopes[std::to_string(n)] = slope;
        b.goldens["residual_slope_n" + std::to_string(n)] = {slope, 1e-3};
        const bool slope_ok = slope >= n - 0.2;
        ok = ok && slope_ok;
        detail += "n=" + std::to_string(n) + " slope " + detail::fmt(slope) + (slope_ok ? "" : " (< n-0.2)") + "; ";
        for (int k : {2, 3}) {
            const double target = std::pow(2.0, (k - 1) / 4.0);
            detail += "n=" + std::to_string(n) + " k=" + std::to_string(k) + " ratios";
            for (std::size_t i = 1; i < eps.size(); ++i) {
                // growth per halving of eps, normalised for non-dyadic steps
                const double halvings = std::log2(eps[i - 1] / eps[i]);
                const double ratio = std::pow(U[i][k] / U[i - 1][k], 1.0 / halvings);
                const bool r_ok = std::abs(ratio / target - 1.0) <= 0.2;
                ok = ok && r_ok;
                detail += " " + detail::fmt(ratio);
            }
            detail += " (target " + detail::fmt(target) + "); ";
        }
    }
    b.tables["quasimode_norms"] = t;
    b.criteria.push_back({"5", ok, detail});
    b.summary = {{"residual_slopes", slopes},
                 {"epsilons", eps},
                 {"grid_points", c.grid_points},
                 {"weight", 1.0},
                 {"flow", flow_to_json(c.flow)}};
    return b;
}

inline ArtifactBundle run_ivp_scaling(const ExperimentConfig& c)
{
    ArtifactBundle b;
    b.experiment = c.experiment;
    const ShearFlow flow(c.flow);
    const ShearLayerProfile p = detail::base_profile(c);
    const double itau = std::abs(p.tau.imag());
    std::vector<int> ks = c.ks;
    std::sort(ks.begin(), ks.end());
    IvpOptions io;
    io.courant = c.courant;

    CsvTable t{{"k", "rate", "rate_over_sqrt_k", "ratio_to_prediction", "fit_r_squared", "energy_fraction_ok",
                "energy_worst_margin", "envelope_ok", "steps"},
               {}};
    RVec rates;
    bool ok6 = true, ok7 = true;
    std::string d6, d7;
    for (int k : ks) {
        const double e = 1.0 / k;
        const Quasimode q = assemble_quasimode(flow, p, e, 2, Variant::IVP);
        const ModeState s = run_ivp(flow, k, q.grid, q.U_profile, c.time_factor / std::sqrt(double(k)), io);
        const GrowthFit g = measure_growth_rate(s.norms_history);
        const EnergyReport en = energy_monitor(flow, k, s.norms_history);
        const double ratio = g.rate / (itau * std::sqrt(double(k)));
        rates.push_back(g.rate);
        ok6 = ok6 && ratio >= 0.85 && ratio <= 1.15;
        ok7 = ok7 && en.fraction_ok() >= 0.999 && en.envelope_ok;
        d6 += "k=" + std::to_string(k) + " ratio " + detail::fmt(ratio) + "; ";
        d7 += "k=" + std::to_string(k) + " " + detail::fmt(100.0 * en.fraction_ok(), 6) + "% ok; ";
        t.rows.push_back({double(k), g.rate, g.rate / std::sqrt(double(k)), ratio, g.r_squared, en.fraction_ok(),
                          en.worst_margin, en.envelope_ok ? 1.0 : 0.0, double(en.steps)});
        b.goldens["rate@k=" + std::to_string(k)] = {g.rate, 1e-4};
    }
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] == 4 * ks[i - 1]) {
            const double r = rates[i] / rates[i - 1];
            ok6 = ok6 && r >= 1.8 && r <= 2.2;
            d6 += "lambda(" + std::to_string(ks[i]) + ")/lambda(" + std::to_string(ks[i - 1]) + ") = " +
                  detail::fmt(r) + "; ";
        }
    b.criteria.push_back({"6", ok6, d6});
    b.criteria.push_back({"7", ok7, d7 + "C_s = " + detail::fmt(energy_constant(flow), 10)});

    // zero data
    CsvTable z{{"k", "sup_norm"}, {}};
    bool ok8 = true;
    std::string d8;
    for (int k : c.zero_ks) {
        const auto grid = UniformGrid::with_node(2.0 * flow.support(), c.grid_points, flow.a());
        const double T = k ? c.time_factor / std::sqrt(double(k)) : 1.0;
        IvpOptions zo = io;
        ModeState s = make_mode_state(k, grid, CVec(grid.n));
        const IvpStepper st(flow, k, grid);
        double sup = 0.0;
        const double dt = ivp_time_step(flow, k, zo);
        while (s.t < T - 1e-12) {
            st.step(s, std::min(dt, T - s.t));
            sup = std::max(sup, max_abs(s.w_hat));
        }
        ok8 = ok8 && sup < 1e-12;
        d8 += "k=" + std::to_string(k) + " sup " + detail::fmt(sup) + "; ";
        z.rows.push_back({double(k), sup});
    }
    b.criteria.push_back({"8-ivp", ok8, d8});
    b.tables["ivp_rates"] = t;
    b.tables["ivp_zero_data"] = z;
    b.summary = {{"ks", ks},
                 {"courant", c.courant},
                 {"time_factor", c.time_factor},
                 {"abs_im_tau", itau},
                 {"energy_constant", energy_constant(flow)},
                 {"flow", flow_to_json(c.flow)}};
    if (ks.size() >= 2) {
        RVec lk, lr;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            lk.push_back(std::log(double(ks[i])));
            lr.push_back(std::log(rates[i]));
        }
        b.summary["sqrt_k_fit_slope"] = fit_line(lk, lr).slope;
    }
    return b;
}

inline ArtifactBundle run_bvp_uniqueness(const ExperimentConfig& c)
{
    ArtifactBundle b;
    b.experiment = c.experiment;
    const ShearFlow flow(c.flow);
    const double M = flow.support();

    // zero data
    const auto grid0 = UniformGrid::with_node(2.0 * M, 1024, flow.params().linear_radius_m);
    CsvTable z{{"m", "sup_norm"}, {}};
    bool ok8 = true;
    std::string d8;
    for (int m : c.zero_ms) {
        const BvpModeState s = march_bvp(flow, m, grid0, CVec(grid0.n), c.X, c.dx);
        double sup = 0.0;
        for (const auto& st : s.norms_history)
            sup = std::max(sup, st.u_sup);
        ok8 = ok8 && sup < 1e-12;
        d8 += "m=" + std::to_string(m) + " sup " + detail::fmt(sup) + "; ";
        z.rows.push_back({double(m), sup});
    }
    b.criteria.push_back({"8-bvp", ok8, d8});
    b.tables["bvp_zero_data"] = z;

    // L round trip and Hardy constants
    const auto corpus = hardy_corpus(M, c.corpus_random, c.seed);
    const auto corpus2 = hardy_corpus(M, 2 * c.corpus_random, c.seed);
    const HardyReport h1 = hardy_lemma_check(flow, corpus, c.grid_points);
    const HardyReport h2 = hardy_lemma_check(flow, corpus2, c.grid_points);
    const double stab = std::abs(h2.C / h1.C - 1.0);
    const double rt = std::max(h1.worst_round_trip, h2.worst_round_trip);
    b.criteria.push_back({"9", rt < 1e-10 && stab <= 0.2 && std::isfinite(h2.C),
                          "worst round trip " + detail::fmt(rt) + ", C = " + detail::fmt(h1.C) + " -> " +
                              detail::fmt(h2.C) + " on corpus doubling, C_m = " + detail::fmt(h2.C_m)});
    CsvTable ht{{"index", "u_H1", "u_H2_m_M", "Lu_H2", "ratio_H1", "ratio_H2_m_M", "round_trip"}, {}};
    for (std::size_t i = 0; i < h2.entries.size(); ++i) {
        const auto& e = h2.entries[i];
        ht.rows.push_back({double(i), e.u_h1, e.u_h2_mM, e.Lu_h2, e.ratio1, e.ratio2, e.round_trip});
    }
    b.tables["hardy"] = ht;

    // quasimode boundary data
    const ShearLayerProfile p0 = detail::base_profile(c);
    const double e = c.bvp_eps;
    const ShearLayerProfile p = resolve_on_ray(p0.tau_tilde, quasimode_ray(flow, e, p0.tau, Variant::BVP));
    QuasimodeOptions qo;
    qo.grid_points = c.grid_points;
    const Quasimode q = assemble_quasimode(flow, p, e, 2, Variant::BVP, qo);
    CVec u1(q.U_profile.size());
    for (std::size_t i = 0; i < u1.size(); ++i)
        u1[i] = std::conj(q.U_profile[i]);
    u1[0] = 0.0;
    const int m = static_cast<int>(std::lround(1.0 / e));
    const double target = growth_rate_sigma(flow, p0.tau) / std::sqrt(e);
    const BvpModeState s = march_bvp(flow, m, q.grid, u1, c.X, c.dx);
    const BvpModeState s0 = march_bvp(flow, 0, q.grid, u1, c.X, c.dx);
    const LineFit g = fit_x_growth(s.norms_history);
    const LineFit g0 = fit_x_growth(s0.norms_history);
    const bool ok10 = !s.overflow && std::abs(g.slope / target - 1.0) <= 0.2 && g0.slope <= 0.05 * target;
    b.criteria.push_back({"10", ok10,
                          "m = " + std::to_string(m) + " rate " + detail::fmt(g.slope) + " vs sigma/sqrt(eps) " +
                              detail::fmt(target) + " (ratio " + detail::fmt(g.slope / target) +
                              "); m = 0 rate " + detail::fmt(g0.slope) + " (limit " +
                              detail::fmt(0.05 * target) + ")"});
    CsvTable st{{"x", "u_H1", "Lu_H2", "u_H1_steady", "Lu_H2_steady"}, {}};
    for (std::size_t i = 0; i < s.norms_history.size() && i < s0.norms_history.size(); ++i)
        st.rows.push_back({s.norms_history[i].x, s.norms_history[i].u_h1, s.norms_history[i].Lu_h2,
                           s0.norms_history[i].u_h1, s0.norms_history[i].Lu_h2});
    b.tables["bvp_stations"] = st;

    const EnergyBookkeeping eb = energy_bookkeeping(s.norms_history, 0.1);
    const BvpModeState s_half = march_bvp(flow, m, q.grid, u1, c.X, 0.5 * c.dx);
    const double C1 = estimate_constant(s.norms_history), C2 = estimate_constant(s_half.norms_history);
    b.summary = {{"epsilon", e},
                 {"m", m},
                 {"dx", c.dx},
                 {"X", c.X},
                 {"sigma", growth_rate_sigma(flow, p0.tau)},
                 {"rate", g.slope},
                 {"rate_r_squared", g.r_squared},
                 {"steady_rate", g0.slope},
                 {"energy_bookkeeping_rel_error", eb.max_rel_error},
                 {"estimate_constant", {C1, C2}},
                 {"hardy_C", {h1.C, h2.C}},
                 {"hardy_C_m", {h1.C_m, h2.C_m}},
                 {"seed", c.seed},
                 {"flow", flow_to_json(c.flow)}};
    b.goldens["bvp_rate"] = {g.slope, 1e-4};
    b.goldens["hardy_C"] = {h2.C, 1e-6};
    return b;
}

inline ArtifactBundle run_experiment(const ExperimentConfig& c)
{
    validate(c);
    try {
        if (c.experiment == "tau-solve")
            return run_tau_solve(c);
        if (c.experiment == "dispersion-sweep")
            return run_dispersion_sweep(c);
        if (c.experiment == "quasimode-residual")
            return run_quasimode_residual(c);
        if (c.experiment == "ivp-scaling")
            return run_ivp_scaling(c);
        return run_bvp_uniqueness(c);
    } catch (const Error& e) {
        throw Error(e.code(), c.experiment + ": " + e.what());
    }
}

} // namespace prandtl
