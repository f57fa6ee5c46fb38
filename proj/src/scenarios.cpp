#include "qnls/config.hpp"
#include "qnls/conservation.hpp"
#include "qnls/evolution.hpp"
#include "qnls/experiment.hpp"
#include "qnls/initial_data.hpp"
#include "qnls/littlewood_paley.hpp"
#include "qnls/model.hpp"
#include "qnls/morawetz.hpp"
#include "qnls/multilinear.hpp"
#include "qnls/norms.hpp"
#include "qnls/stats.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace qnls {

namespace {

using nlohmann::json;

// Diagnostic parameter first, then the top-level table, then the fallback.
double num(const RunContext& c, const json& p, const std::string& table, const std::string& key, double fb) {
    if (p.contains(key)) return get_number(p, key, fb);
    if (c.config().contains(table)) return get_number(c.config()[table], key, fb);
    return fb;
}

BoxGrid grid_of(const RunContext& c, const json& p, int dim, int n, double L) {
    return BoxGrid(static_cast<int>(num(c, p, "grid", "dim", dim)), static_cast<int>(num(c, p, "grid", "points", n)),
                   num(c, p, "grid", "length", L));
}

ModelSpec model_of(const RunContext& c, const json& p, const ModelSpec& fallback) {
    if (p.contains("model")) return ModelSpec::from_json(p["model"]);
    if (c.config().contains("model")) return ModelSpec::from_json(c.config()["model"]);
    return fallback;
}

DataSpec data_of(const RunContext& c, DataSpec d) {
    if (!c.config().contains("data")) return d;
    json merged = d.to_json();
    for (const auto& [k, v] : c.config()["data"].items()) merged[k] = v;
    return DataSpec::from_json(merged);
}

SolverOptions solver_of(const RunContext& c, const json& p, double T, double dt, int stride = 1) {
    SolverOptions o;
    o.T = num(c, p, "solver", "T", T);
    o.dt = num(c, p, "solver", "dt", dt);
    o.stride = static_cast<int>(num(c, p, "solver", "stride", stride));
    return o;
}

Field white(const BoxGrid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& z : f.values) z = cplx(nd(rng), nd(rng));
    return f;
}

double rel(const Field& a, const Field& b) {
    const double n = l2_norm(b);
    return l2_norm(a - b) / (n > 0 ? n : 1.0);
}

// Complex linear polynomial times a Gaussian, centre jittered by the seed.
Field poly_bump(const BoxGrid& g, double sigma, unsigned seed, double kx = 0.0, double ky = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> shift(-0.2, 0.2);
    cplx c[4];
    for (auto& v : c) v = cplx(nd(rng), nd(rng));
    Vec3 ctr{shift(rng), shift(rng), shift(rng)};
    Field u(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        double r2 = 0.0;
        cplx poly = c[0];
        for (int j = 0; j < g.dim(); ++j) {
            r2 += (x[j] - ctr[j]) * (x[j] - ctr[j]);
            poly += c[j + 1] * (x[j] / sigma);
        }
        u[i] = poly * std::exp(-r2 / (2 * sigma * sigma)) * std::exp(cplx(0.0, kx * x[0] + ky * x[1]));
    }
    return u;
}

Field gaussian(const BoxGrid& g, double sigma, const std::vector<double>& k) {
    Field u(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        double r2 = 0.0, ph = 0.0;
        for (int j = 0; j < g.dim(); ++j) {
            r2 += x[j] * x[j];
            ph += (j < static_cast<int>(k.size()) ? k[j] : 0.0) * x[j];
        }
        u[i] = std::exp(cplx(-r2 / (2 * sigma * sigma), ph));
    }
    return u;
}

std::string tag(int i) { return std::to_string(i); }

// ---------------------------------------------------------------- flat-identities

void exact_suite(RunContext& c) {
    const json& p = c.params("exact");
    BoxGrid g = grid_of(c, p, 2, 32, 2 * M_PI);
    const int fields = get_int(p, "fields", 100);
    const double tol = get_number(p, "tol", 1e-12);
    const double t = get_number(p, "t", 0.7), s = get_number(p, "s", -0.45);
    DyadicFilterBank bank(g);
    double part = 0, planch = 0, unit = 0, group = 0;
    for (int i = 0; i < fields; ++i) {
        Field f = white(g, c.seed() * 1000u + i);
        Field sum(g);
        for (int k = 1; k <= bank.shells(); ++k) sum += bank.project(f, k);
        part = std::max(part, rel(sum, f));
        const double n2 = l2_norm_sq(f);
        planch = std::max(planch, std::abs(spectral_l2_norm_sq(to_spectral(f)) - n2) / n2);
        Field ft = flat_propagator(f, t);
        unit = std::max(unit, std::abs(l2_norm_sq(ft) - n2) / n2);
        group = std::max(group, rel(flat_propagator(ft, s), flat_propagator(f, t + s)));
    }
    c.add(CriterionRow::at_most("exact.partition", 1, "sum of LP projections vs identity", part, tol));
    c.add(CriterionRow::at_most("exact.plancherel", 1, "Plancherel defect", planch, tol));
    c.add(CriterionRow::at_most("exact.unitarity", 1, "flat propagator norm defect", unit, tol));
    c.add(CriterionRow::at_most("exact.group-law", 1, "propagator group law defect", group, tol));
}

void density_flux(RunContext& c) {
    const json& p = c.params("density-flux");
    BoxGrid g = grid_of(c, p, 2, 32, 2 * M_PI);
    DataSpec ds;
    ds.kind = "band-limited";
    ds.amplitude = 1.0;
    ds.modes = 4;
    Field u0 = make_initial_data(g, data_of(c, ds), c.seed());
    const auto dts = get_numbers(p, "dts", {1e-3, 5e-4, 2.5e-4});
    const int steps = get_int(p, "steps", 4);
    const double tol = get_number(p, "tol", 1e-6);
    std::vector<double> rm, rp;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        Trajectory tr = solve_flat(u0, steps * dts[i], dts[i]);
        Ledger l = flat_flux_residual(tr);
        rm.push_back(max_l2(l, "mass"));
        rp.push_back(max_l2(l, "momentum"));
        c.write_csv("density_flux_" + tag(static_cast<int>(i)) + ".csv",
                    [&](const std::string& path) { write_ledger_csv(path, l); });
        if (i == 0)
            c.save_trajectory("trajectory", tr, {"density-flux.mass", "density-flux.momentum"}, 5);
    }
    c.note("density_flux", {{"dts", dts}, {"mass", rm}, {"momentum", rp}});
    c.add(CriterionRow::at_most("density-flux.mass", 2, "mass identity L2 residual at the first dt", rm[0], tol));
    c.add(CriterionRow::at_most("density-flux.momentum", 2, "momentum identity L2 residual at the first dt", rp[0], tol));
    if (dts.size() >= 3) {
        c.add(CriterionRow::within("density-flux.mass-order", 2, "mass residual refinement slope",
                                   loglog_fit(dts, rm).slope, 4.0, 0.3));
        c.add(CriterionRow::within("density-flux.momentum-order", 2, "momentum residual refinement slope",
                                   loglog_fit(dts, rp).slope, 4.0, 0.3));
    }
}

void morawetz_flat(RunContext& c) {
    const json& p = c.params("morawetz");
    BoxGrid g(2, get_int(p, "points", 16), get_number(p, "length", 8.0));
    Field u0 = gaussian(g, get_number(p, "sigma_u", 0.8), get_numbers(p, "carrier_u", {0.2, 0.1}));
    Field v0 = gaussian(g, get_number(p, "sigma_v", 0.88), get_numbers(p, "carrier_v", {-0.1, 0.2}));
    const double dt = get_number(p, "dt", 1e-3);
    WeightSpec w = WeightSpec::quadratic();
    auto rows = morawetz_identity_residual(solve_flat(u0, 4 * dt, dt), solve_flat(v0, 4 * dt, dt), {0, 0, 0}, w);
    c.write_csv("morawetz.csv", [&](const std::string& path) { write_morawetz_csv(path, rows); });
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.residual) / std::max(1.0, std::abs(r.J4)));
    const double closed = j4_quadratic_closed(u0, v0);
    const double cf = std::abs(j4(u0, v0, {0, 0, 0}, w) - closed) / std::max(1.0, std::abs(closed));
    c.add(CriterionRow::at_most("morawetz.identity", 3, "|dI/dt - J4| / max(|J4|, 1)", worst,
                                get_number(p, "tol", 1e-6)));
    c.add(CriterionRow::at_most("morawetz.closed-form", 3, "J4 vs 8|d(u conj v)|^2 closed form", cf,
                                get_number(p, "closed_tol", 1e-8)));
}

void positivity(RunContext& c) {
    const json& p = c.params("positivity");
    BoxGrid g(2, get_int(p, "points", 16), get_number(p, "length", 8.0));
    const int fields = get_int(p, "fields", 100);
    const double sigma = get_number(p, "sigma", 0.6);
    WeightSpec w = WeightSpec::absolute();
    double slack = std::numeric_limits<double>::infinity();
    int violations = 0;
    std::vector<double> slacks;
    for (int i = 0; i < fields; ++i) {
        Field u = poly_bump(g, sigma, c.seed() * 1000u + i, 0.5, -0.3);
        const double J = j4(u, u, {0, 0, 0}, w);
        const double s = (J - im_clean_lhs(u, false)) / std::abs(J);
        slacks.push_back(s);
        slack = std::min(slack, s);
        violations += s < 0.0;
    }
    c.note("positivity_slack", slacks);
    c.add(CriterionRow::at_least("positivity.min-slack", 5, "min relative slack of J4(u,u) over the clean form",
                                 slack, 0.0));
    c.add(CriterionRow::at_most("positivity.violations", 5, "fields with negative slack", violations, 0.0));
}

void im_clean_suite(RunContext& c) {
    const json& p = c.params("im-clean");
    const int fields = get_int(p, "fields", 20);
    const double sigma = get_number(p, "sigma", 0.9);
    const bool refine = get_int(p, "calibrate", 1) != 0;
    json out = json::object();
    for (int n : {2, 3}) {
        const std::string d = tag(n) + "d";
        BoxGrid g(n, get_int(p, "points_" + d, n == 2 ? 64 : 32), get_number(p, "length", 8.0));
        std::vector<double> ratios;
        for (int i = 0; i < fields; ++i) ratios.push_back(im_clean(poly_bump(g, sigma, c.seed() * 1000u + i)).ratio);
        const double m = mean(ratios), spread = stddev(ratios) / m;
        const double cn = calibrated_cn(n).value;
        out[d] = {{"ratios", ratios}, {"mean", m}, {"relative_std", spread}, {"c_n", cn}};
        c.add(CriterionRow::at_most("im-clean.spread-" + d, 4, "relative std of lhs/rhs over fields", spread,
                                    get_number(p, "tol", 1e-3)));
        c.add(CriterionRow::within("im-clean.constant-" + d, 4, "mean ratio / calibrated c_n", m / cn, 1.0, 0.01));
        if (refine) {
            CnCalibration cal = calibrate_cn(n);
            out[d]["calibration"] = {{"value", cal.value}, {"extrapolation_error", cal.extrapolation_error}};
            c.add(CriterionRow::at_most("im-clean.refinement-" + d, 4, "c_n change under grid refinement (relative)",
                                        std::max(cal.extrapolation_error, std::abs(cal.value - cn)) / cn, 0.01));
        }
    }
    c.write_json("im_clean.json", out);
}

void flat_identities(RunContext& c) {
    if (c.wants("exact")) exact_suite(c);
    if (c.wants("density-flux")) density_flux(c);
    if (c.wants("morawetz")) morawetz_flat(c);
    if (c.wants("positivity")) positivity(c);
    if (c.wants("im-clean")) im_clean_suite(c);
}

// ---------------------------------------------------------------- para-identities

double worst_relative(const Ledger& l, const std::string& prefix) {
    double w = 0.0;
    for (const auto& r : l)
        if (r.id.rfind(prefix, 0) == 0) w = std::max(w, r.l2 / std::max(r.flux_norm, 1e-300));
    return w;
}

void para_densities(RunContext& c) {
    const json& p = c.params("densities");
    BoxGrid g = grid_of(c, p, 2, 128, 2 * M_PI);
    ModelSpec m = model_of(c, p, ModelSpec::quasilinear_iso(g.dim(), 1.0, 0.0));
    const int k = get_int(p, "shell", 3);
    DataSpec bs;
    bs.kind = "band-limited";
    bs.modes = 2;
    bs.amplitude = get_number(p, "background_amplitude", 0.3);
    Field u0 = make_initial_data(g, data_of(c, bs), c.seed());
    SolverOptions o = solver_of(c, p, 0.05, 5e-4);
    o.skip_checks = true;
    Trajectory bg = solve_qnls(m, u0, o);

    DataSpec vs;
    vs.kind = "band-limited";
    vs.modes = get_int(p, "modes", 12);
    vs.amplitude = 1.0;
    Field v0 = make_initial_data(g, vs, c.seed() + 1);
    DyadicFilterBank bank(g);
    vs.modes = get_int(p, "forcing_modes", 10);
    vs.amplitude = get_number(p, "forcing_amplitude", 0.5);
    // The flow re-projects onto the shell window, so the forcing lives there too.
    Field fk = bank.project(make_initial_data(g, vs, c.seed() + 2), k);
    const double fa = get_number(p, "forcing_scale", 0.3);
    Forcing f = [&](double t) { return cplx(fa * std::cos(t)) * fk; };
    SolverOptions vo = o;
    vo.T = get_number(p, "T_v", 0.02);
    Trajectory v = solve_paradifferential(m, bg, v0, f, k, vo);
    Ledger l = para_flux_residual(v, ParaContext{&m, &bg, k, f});
    c.write_csv("para_density_flux.csv", [&](const std::string& path) { write_ledger_csv(path, l); });
    c.save_trajectory("paradifferential", v, {"para.mass", "para.momentum"}, 5);
    const double tol = get_number(p, "tol", 1e-6);
    c.add(CriterionRow::at_most("para.mass", 0, "covariant mass identity, relative L2 residual",
                                worst_relative(l, "mass"), tol));
    c.add(CriterionRow::at_most("para.momentum", 0, "covariant momentum identity, relative L2 residual",
                                worst_relative(l, "momentum"), tol));
}

void para_morawetz(RunContext& c) {
    const json& p = c.params("morawetz");
    BoxGrid g(1, get_int(p, "points", 256), get_number(p, "length", 16.0));
    ModelSpec m = ModelSpec::quasilinear_iso(1, get_number(p, "kappa", 1.0), 0.0);
    const double amp = get_number(p, "background_amplitude", 0.3);
    Field bgu(g), a(g), b(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.point(i)[0];
        bgu[i] = amp * std::exp(-x * x / 8.0);
        a[i] = std::exp(-(x + 0.5) * (x + 0.5) / 1.5) * std::exp(cplx(0.0, 11.0 * x));
        b[i] = std::exp(-(x - 0.7) * (x - 0.7) / 1.2) * std::exp(cplx(0.0, -10.0 * x));
    }
    SolverOptions o;
    o.T = 0.02;
    o.dt = get_number(p, "dt", 2.5e-4);
    o.skip_checks = true;
    Trajectory bg = solve_qnls(m, bgu, o);
    o.T = 16 * o.dt;
    const int k = get_int(p, "shell", 3);
    Trajectory u = solve_paradifferential(m, bg, a, {}, k, o);
    Trajectory v = solve_paradifferential(m, bg, b, {}, k, o);
    ParaContext ctx{&m, &bg, k, {}};
    auto rows = morawetz_para_residual(u, ctx, v, ctx, {0, 0, 0}, WeightSpec::quadratic());
    c.write_csv("para_morawetz.csv", [&](const std::string& path) { write_morawetz_csv(path, rows); });
    double worst = 0.0;
    for (const auto& r : rows)
        worst = std::max(worst, std::abs(r.residual) / std::max({1.0, std::abs(r.J4), std::abs(r.K)}));
    c.add(CriterionRow::at_most("para.morawetz", 0, "|dI/dt - J4 - K| / max(|J4|, |K|, 1), 1D", worst,
                                get_number(p, "tol", 1e-6)));
}

void para_identities(RunContext& c) {
    if (c.wants("densities")) para_densities(c);
    if (c.wants("morawetz")) para_morawetz(c);
}

// ---------------------------------------------------------------- qnls-smalldata-2d

Field h1_data(const BoxGrid& g, unsigned seed, int modes, double eps) {
    DataSpec d;
    d.kind = "band-limited";
    d.modes = modes;
    d.norm = "h1";
    d.amplitude = eps;
    return make_initial_data(g, d, seed);
}

void solver_order(RunContext& c) {
    const json& p = c.params("order");
    BoxGrid g = grid_of(c, p, 2, 32, 2 * M_PI);
    ModelSpec m = model_of(c, p, ModelSpec::quasilinear_iso(2, 1.0));
    DataSpec ds;
    ds.kind = "band-limited";
    ds.modes = 3;
    ds.norm = "h1";
    ds.amplitude = 0.5;
    Field u0 = make_initial_data(g, data_of(c, ds), c.seed());
    SolverOptions o = solver_of(c, p, 0.5, 0.02);
    const auto dts = get_numbers(p, "dts", {0.02, 0.01, 0.005});
    std::vector<double> errs;
    for (double dt : dts) {
        o.dt = dt;
        o.stride = 1 << 30;
        Field coarse = solve_qnls(m, u0, o).snapshots.back();
        o.dt = dt / 2;
        Field fine = solve_qnls(m, u0, o).snapshots.back();
        errs.push_back(l2_norm(coarse - fine));
    }
    c.note("self_convergence", {{"dts", dts}, {"errors", errs}});
    c.add(CriterionRow::within("solver.order", 8, "IFRK4 self-convergence order", loglog_fit(dts, errs).slope, 4.0,
                               get_number(p, "tol", 0.3)));
}

void mass_drift(RunContext& c) {
    const json& p = c.params("mass-drift");
    BoxGrid g(2, get_int(p, "points", 64), get_number(p, "length", 2 * M_PI));
    ModelSpec m = p.contains("model") ? ModelSpec::from_json(p["model"]) : ModelSpec::semilinear_cubic(2);
    Field u0 = h1_data(g, c.seed() + 10, get_int(p, "modes", 6), get_number(p, "eps", 0.1));
    SolverOptions o;
    o.T = get_number(p, "T", 10.0);
    o.dt = get_number(p, "dt", 1e-3);
    o.stride = get_int(p, "stride", 1000);
    Trajectory tr = solve_qnls(m, u0, o);
    const double m0 = l2_norm_sq(tr.snapshots.front());
    double drift = 0.0;
    std::vector<double> mass;
    for (const auto& f : tr.snapshots) {
        mass.push_back(l2_norm_sq(f));
        drift = std::max(drift, std::abs(mass.back() - m0) / m0);
    }
    c.write_csv("mass.csv", [&](const std::string& path) {
        std::ofstream os(path);
        os.precision(17);
        os << "time,mass,relative_drift\n";
        for (std::size_t i = 0; i < mass.size(); ++i) os << tr.times[i] << "," << mass[i] << "," << (mass[i] - m0) / m0 << "\n";
    });
    c.save_trajectory("trajectory", tr, {"solver.mass-drift"}, 2);
    c.note("alias_flags", tr.alias_flags);
    c.add(CriterionRow::at_most("solver.mass-drift", 8, "relative mass drift of the conservative model", drift,
                                get_number(p, "tol", 1e-8)));
}

void linearization(RunContext& c) {
    const json& p = c.params("linearization");
    BoxGrid g = grid_of(c, p, 2, 32, 2 * M_PI);
    ModelSpec m = model_of(c, p, ModelSpec::quasilinear_iso(2, 1.0));
    SolverOptions o;
    o.T = get_number(p, "T", 1.0);
    o.dt = get_number(p, "dt", 0.01);
    // The linearized flow samples the background between steps, so keep every step.
    o.stride = 1;
    Field u0 = h1_data(g, c.seed() + 20, 3, get_number(p, "eps", 0.5));
    Field v0 = h1_data(g, c.seed() + 21, 3, 0.3);
    Trajectory bg = solve_qnls(m, u0, o);
    Trajectory lin = solve_linearized(m, bg, v0, o);
    const auto hs = get_numbers(p, "h", {0.1, 0.05, 0.025, 0.0125});
    std::vector<double> errs;
    for (double h : hs) {
        Field fd = cplx(1.0 / h) * (solve_qnls(m, u0 + cplx(h) * v0, o).snapshots.back() - bg.snapshots.back());
        errs.push_back(l2_norm(fd - lin.snapshots.back()));
    }
    c.note("linearization", {{"h", hs}, {"errors", errs}});
    c.add(CriterionRow::at_least("solver.linearization", 8, "finite-difference vs linearized flow slope in h",
                                 loglog_fit(hs, errs).slope, get_number(p, "min_slope", 0.9)));
}

void qnls_smalldata(RunContext& c) {
    if (c.wants("order")) solver_order(c);
    if (c.wants("mass-drift")) mass_drift(c);
    if (c.wants("linearization")) linearization(c);
}

// ---------------------------------------------------------------- transversality-fit

void transversality(RunContext& c) {
    const json& p = c.params("fit");
    for (double dd : get_numbers(p, "dims", {2, 3})) {
        const int n = static_cast<int>(dd);
        const std::string sfx = n == 3 ? "_3d" : "";
        auto key = [&](const std::string& k) { return p.contains(k + sfx) ? k + sfx : k; };
        TransversalityConfig tc;
        tc.dim = n;
        tc.seed = c.seed();
        tc.lambda1_fixed = get_number(p, key("lambda1_fixed"), n == 3 ? 4.0 : 4.0);
        tc.lambda2_values = get_numbers(p, key("lambda2_values"), n == 3 ? std::vector<double>{8, 16, 32}
                                                                          : std::vector<double>{8, 16, 32, 64});
        tc.lambda2_fixed = get_number(p, key("lambda2_fixed"), n == 3 ? 32.0 : 64.0);
        tc.lambda1_values = get_numbers(p, key("lambda1_values"), {2, 4, 8});
        tc.time_samples = get_int(p, key("time_samples"), 81);
        tc.max_points = get_int(p, key("max_points"), n == 3 ? 128 : 512);
        TransversalityFit fit = transversality_scaling_fit(tc);
        c.write_json("transversality_" + tag(n) + "d.json", fit.to_json());
        const double tol = get_number(p, key("tol"), n == 3 ? 0.2 : 0.15);
        c.add(CriterionRow::within("transversality.lambda2-" + tag(n) + "d", 7, "exponent in the high frequency",
                                   fit.lambda2_fit.slope, -0.5, tol));
        c.add(CriterionRow::within("transversality.lambda1-" + tag(n) + "d", 7, "exponent in the low frequency",
                                   fit.lambda1_fit.slope, 0.5 * (n - 1), tol));
    }
}

// ---------------------------------------------------------------- scattering-probe

void scattering(RunContext& c) {
    const json& p = c.params("probe");
    BoxGrid g = grid_of(c, p, 2, 256, 128.0);
    ModelSpec m = model_of(c, p, ModelSpec::semilinear_cubic(2));
    const double eps = get_number(p, "eps", 0.05);
    auto eps_list = get_numbers(p, "eps_scan", {0.2, 0.1, 0.05});
    const auto probes = get_numbers(p, "probes", {10, 20, 30, 40});
    const double s = get_number(p, "s", 1.0);
    SolverOptions o = solver_of(c, p, probes.back(), 0.02);
    o.stride = std::max(1, static_cast<int>(std::lround((probes[1] - probes[0]) / o.dt)));
    DataSpec ds;
    ds.kind = "gaussian-bump";
    ds.width = 2.0;
    ds = data_of(c, ds);

    auto run = [&](double e) {
        DataSpec d = ds;
        d.amplitude = e;
        return solve_qnls(m, make_initial_data(g, d, c.seed()), o);
    };
    Trajectory main = run(eps);
    ScatteringProbe sp = scattering_extract(main, probes, s);
    c.save_trajectory("trajectory", main, {"scattering.increment-ratio"}, static_cast<int>(probes.size()) + 1);

    std::vector<double> first;
    for (double e : eps_list) {
        if (e == eps) first.push_back(sp.increments.front());
        else first.push_back(scattering_extract(run(e), probes, s).increments.front());
    }
    c.write_csv("scattering.csv", [&](const std::string& path) {
        std::ofstream os(path);
        os.precision(17);
        os << "kind,t_or_eps,value\n";
        for (std::size_t i = 0; i < sp.increments.size(); ++i)
            os << "increment," << sp.probe_times[i + 1] << "," << sp.increments[i] << "\n";
        for (std::size_t i = 0; i < eps_list.size(); ++i) os << "first_increment," << eps_list[i] << "," << first[i] << "\n";
    });
    double worst = std::numeric_limits<double>::infinity();
    for (double r : sp.ratios) worst = std::min(worst, r);
    c.note("scattering", {{"increments", sp.increments}, {"ratios", sp.ratios}, {"monotone", sp.monotone},
                          {"eps_scan", eps_list}, {"first_increments", first}});
    c.add(CriterionRow::at_least("scattering.increment-ratio", 9, "min ratio of consecutive Cauchy increments", worst,
                                 get_number(p, "min_ratio", 2.0)));
    c.add(CriterionRow::at_least("scattering.cubic-slope", 9, "log-log slope of the first increment in eps",
                                 loglog_fit(eps_list, first).slope, get_number(p, "min_slope", 2.5)));
}

// ---------------------------------------------------------------- bicharacteristic-sweep

void bicharacteristics(RunContext& c) {
    const json& p = c.params("rays");
    BoxGrid g = grid_of(c, p, 2, 64, 40.0);
    ModelSpec m = model_of(c, p, ModelSpec::quasilinear_iso(2, 1.0));
    const auto eps = get_numbers(p, "eps", {0.2, 0.1, 0.05});
    const auto x0v = get_numbers(p, "x0", {-10.0, 0.7});
    const double angle = get_number(p, "angle", 0.3);
    const double T = get_number(p, "T", 50.0), dt = get_number(p, "dt", 0.05);
    DataSpec ds;
    ds.kind = "gaussian-bump";
    ds.width = 3.0 / std::sqrt(2.0);
    ds = data_of(c, ds);
    Vec3 x0{0, 0, 0}, xi0{std::cos(angle), std::sin(angle), 0.0};
    for (std::size_t i = 0; i < x0v.size() && i < 3; ++i) x0[i] = x0v[i];
    std::vector<double> dev, drift;
    std::vector<Bicharacteristic> rays;
    for (double e : eps) {
        DataSpec d = ds;
        d.amplitude = e;
        rays.push_back(bicharacteristic_trace(metric_field(m, make_initial_data(g, d, c.seed())), x0, xi0, T, dt));
        dev.push_back(rays.back().max_xi_deviation);
        drift.push_back(rays.back().max_H_drift);
    }
    c.write_csv("rays.csv", [&](const std::string& path) {
        std::ofstream os(path);
        os.precision(17);
        os << "eps,time,x0,x1,xi0,xi1,H\n";
        for (std::size_t r = 0; r < rays.size(); ++r)
            for (std::size_t i = 0; i < rays[r].times.size(); ++i)
                os << eps[r] << "," << rays[r].times[i] << "," << rays[r].x[i][0] << "," << rays[r].x[i][1] << ","
                   << rays[r].xi[i][0] << "," << rays[r].xi[i][1] << "," << rays[r].H[i] << "\n";
    });
    c.note("rays", {{"eps", eps}, {"xi_deviation", dev}, {"H_drift", drift}});
    c.add(CriterionRow::at_most("rays.H-drift", 10, "max relative Hamiltonian drift", *std::max_element(drift.begin(), drift.end()),
                                get_number(p, "tol", 1e-6)));
    c.add(CriterionRow::at_least("rays.xi-slope", 10, "log-log slope of max |xi(t) - xi(0)| in eps",
                                 loglog_fit(eps, dev).slope, get_number(p, "min_slope", 1.8)));
}

// ---------------------------------------------------------------- resonance-tables

using Quad = std::array<std::array<std::int64_t, 3>, 4>;

struct Direct {
    bool resonant, doubly, transversal;
};

// Evaluates Δ⁴ξ and Δ⁴ξ² term by term and counts coincident frequencies.
Direct direct_oracle(int dim, const Quad& x, const std::array<int, 3>& s) {
    bool zero = true;
    std::int64_t q = 0;
    for (int d = 0; d < dim; ++d) zero = zero && s[0] * x[0][d] + s[1] * x[1][d] + s[2] * x[2][d] - x[3][d] == 0;
    for (int i = 0; i < 4; ++i) {
        std::int64_t n2 = 0;
        for (int d = 0; d < dim; ++d) n2 += x[i][d] * x[i][d];
        q += (i < 3 ? s[i] : -1) * n2;
    }
    int pairs = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) pairs += x[i] == x[j];
    return {zero && q == 0, zero && q == 0 && pairs == 6, pairs < 3};
}

// 2D resonance for the alternating pattern: closed quadrilateral with a right angle at ξ².
bool rectangle(const Quad& x) {
    std::int64_t dot = 0;
    bool closes = true;
    for (int d = 0; d < 2; ++d) {
        dot += (x[0][d] - x[1][d]) * (x[2][d] - x[1][d]);
        closes = closes && x[0][d] + x[2][d] == x[1][d] + x[3][d];
    }
    return closes && dot == 0;
}

void resonance(RunContext& c) {
    const json& p = c.params("tables");
    const int samples = get_int(p, "samples", 10000);
    const int R = get_int(p, "range", 6);
    std::mt19937_64 rng(c.seed());
    std::uniform_int_distribution<int> comp(-R, R), coin(0, 3);
    const std::array<std::array<int, 3>, 3> sign_sets{{{+1, -1, +1}, {+1, +1, +1}, {+1, +1, -1}}};
    int mismatches = 0, rect_mismatch = 0, resonant = 0;
    std::vector<InteractionQuadruple> table;
    for (int n = 0; n < samples; ++n) {
        const int dim = 1 + n % 3;
        Quad x{};
        for (auto& v : x)
            for (int d = 0; d < dim; ++d) v[d] = comp(rng);
        const int mode = coin(rng);
        // Bias the sample towards the resonant set, which random draws rarely hit.
        if (mode == 1) {
            for (int d = 0; d < dim; ++d) x[3][d] = x[0][d] - x[1][d] + x[2][d];
        } else if (mode == 2 && dim == 2) {
            std::int64_t a = comp(rng), b = comp(rng), t = comp(rng);
            x[0] = {x[1][0] + a, x[1][1] + b, 0};
            x[2] = {x[1][0] - t * b, x[1][1] + t * a, 0};
            for (int d = 0; d < 2; ++d) x[3][d] = x[0][d] - x[1][d] + x[2][d];
        } else if (mode == 3) {
            x[1] = x[0];
            if (coin(rng) < 2) x[2] = x[0];
            if (coin(rng) < 2) x[3] = x[0];
        }
        const auto s = n % 4 == 3 ? sign_sets[1 + (n / 4) % 2] : sign_sets[0];
        auto q = InteractionQuadruple::make(dim, x, s);
        auto got = classify(q);
        auto want = direct_oracle(dim, q.xi, s);
        mismatches += got.resonant != want.resonant || got.doubly_resonant != want.doubly ||
                      got.transversal != want.transversal;
        resonant += want.resonant;
        if (dim == 2 && s == sign_sets[0]) rect_mismatch += got.resonant != rectangle(q.xi);
        table.push_back(q);
    }
    int pairing_bad = 0;
    for (int a = -R; a <= R; ++a)
        for (int b = -R; b <= R; ++b)
            for (int d3 = -R; d3 <= R; ++d3) {
                const int d4 = a - b + d3;
                auto q = InteractionQuadruple::make(1, Quad{{{a, 0, 0}, {b, 0, 0}, {d3, 0, 0}, {d4, 0, 0}}});
                const bool pairing = (a == b && d3 == d4) || (a == d4 && d3 == b);
                pairing_bad += classify(q).resonant != pairing;
            }
    c.write_csv("classification.csv", [&](const std::string& path) { write_classification_csv(path, table); });
    c.note("resonant_samples", resonant);
    c.add(CriterionRow::at_most("resonance.oracle", 6, "classify vs direct evaluation, mismatches", mismatches, 0.0));
    c.add(CriterionRow::at_most("resonance.rectangle", 6, "2D resonance vs rectangle test, mismatches", rect_mismatch, 0.0));
    c.add(CriterionRow::at_most("resonance.pairing-1d", 6, "1D resonance vs pairing, mismatches", pairing_bad, 0.0));
    c.add(CriterionRow::at_least("resonance.coverage", 6, "resonant quadruples in the sample", resonant,
                                 get_number(p, "min_resonant", 500)));
}

} // namespace

const std::vector<ScenarioInfo>& scenario_catalog() {
    static const std::vector<ScenarioInfo> catalog{
        {"flat-identities", {"exact", "density-flux", "morawetz", "positivity", "im-clean"}, flat_identities},
        {"para-identities", {"densities", "morawetz"}, para_identities},
        {"qnls-smalldata-2d", {"order", "mass-drift", "linearization"}, qnls_smalldata},
        {"transversality-fit", {"fit"}, transversality},
        {"scattering-probe", {"probe"}, scattering},
        {"bicharacteristic-sweep", {"rays"}, bicharacteristics},
        {"resonance-tables", {"tables"}, resonance},
    };
    return catalog;
}

} // namespace qnls
