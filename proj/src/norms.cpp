#include "qnls/norms.hpp"

#include "qnls/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace qnls {

namespace {

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    return std::abs(s);
}

double lq_norm(const Field& f, double q) {
    if (std::isinf(q)) return max_abs(f);
    double s = 0.0;
    for (const auto& v : f.values) s += std::pow(std::abs(v), q);
    return std::pow(s * f.grid.cell_volume(), 1.0 / q);
}

double time_norm(const std::vector<double>& t, const std::vector<double>& x, double p) {
    if (std::isinf(p)) return *std::max_element(x.begin(), x.end());
    std::vector<double> xp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = std::pow(x[i], p);
    return std::pow(trapezoid(t, xp), 1.0 / p);
}

void require_matching_times(const Trajectory& a, const Trajectory& b) {
    require_same_grid(a.grid, b.grid);
    if (a.size() != b.size()) throw std::invalid_argument("trajectories have different snapshot counts");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
            throw std::invalid_argument("trajectories have different snapshot times");
}

std::vector<Vec3> shift_lattice(const BoxGrid& g, int lattice) {
    const int n = g.dim();
    int count = 1;
    for (int j = 0; j < n; ++j) count *= lattice;
    std::vector<Vec3> out;
    for (int c = 0; c < count; ++c) {
        int q = c;
        Vec3 x{0, 0, 0};
        for (int j = 0; j < n; ++j) {
            x[j] = (q % lattice - lattice / 2) * g.length() / lattice;
            q /= lattice;
        }
        out.push_back(x);
    }
    return out;
}

Trajectory project_trajectory(const Trajectory& tr, const DyadicFilterBank& bank, int k) {
    Trajectory out(tr.grid);
    out.dt = tr.dt;
    out.stride = tr.stride;
    out.scheme = tr.scheme;
    for (std::size_t i = 0; i < tr.size(); ++i) out.append(tr.times[i], bank.project(tr.snapshots[i], k));
    return out;
}

} // namespace

bool strichartz_admissible(int n, double p, double q) {
    if (p < 2.0 || q < 2.0) return false;
    if (n == 2 && p == 2.0 && std::isinf(q)) return false;
    if (n == 1 && p == 2.0) return false;
    const double lhs = (std::isinf(p) ? 0.0 : 2.0 / p) + (std::isinf(q) ? 0.0 : n / q);
    return std::abs(lhs - 0.5 * n) <= 1e-12;
}

StrichartzValue strichartz_norm(const Trajectory& traj, double p, double q, bool allow_nonsharp) {
    if (!allow_nonsharp && !strichartz_admissible(traj.grid.dim(), p, q))
        throw std::invalid_argument("exponent pair (" + std::to_string(p) + ", " + std::to_string(q) +
                                    ") is not sharp admissible in dimension " + std::to_string(traj.grid.dim()));
    if (traj.size() < 2) throw std::invalid_argument("Strichartz norm needs at least two snapshots");
    std::vector<double> x;
    for (const auto& s : traj.snapshots) x.push_back(lq_norm(s, q));
    StrichartzValue out{time_norm(traj.times, x, p), std::nan("")};
    if (traj.size() >= 3) {
        std::vector<double> t2, x2;
        for (std::size_t i = 0; i < traj.size(); i += 2) {
            t2.push_back(traj.times[i]);
            x2.push_back(x[i]);
        }
        out.value_double_stride = time_norm(t2, x2, p);
    }
    return out;
}

double bilinear_l2(const Trajectory& u, int ku, const Trajectory& v, int kv, const Vec3& x0, double exponent) {
    require_matching_times(u, v);
    const int n = u.grid.dim();
    if (exponent != 0.0 && std::abs(exponent - 0.5 * (3 - n)) > 1e-12)
        throw std::invalid_argument("bilinear exponent must be 0 or (3-n)/2");
    DyadicFilterBank bank(u.grid);
    std::vector<double> vals;
    for (std::size_t i = 0; i < u.size(); ++i) {
        Field a = dealias(bank.project(u.snapshots[i], ku));
        Field b = translate(dealias(bank.project(v.snapshots[i], kv)), x0);
        Field prod = pointwise_product(a, conj(b));
        if (exponent != 0.0) prod = fractional_multiplier(prod, exponent);
        vals.push_back(l2_norm_sq(prod));
    }
    return std::sqrt(trapezoid(u.times, vals));
}

Field frequency_packet(const BoxGrid& g, const Vec3& centre, double width, cplx phase) {
    SpectralRep F(g);
    const double half = 0.5 * g.length();
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 xi = g.wavenumber(i);
        double d2 = 0.0, shift = 0.0;
        for (int j = 0; j < g.dim(); ++j) {
            d2 += (xi[j] - centre[j]) * (xi[j] - centre[j]);
            shift += xi[j] * half;
        }
        F.coeffs[i] = phase * std::exp(-d2 / (2 * width * width)) * std::exp(cplx(0.0, shift));
    }
    Field u = to_physical(F);
    u *= 1.0 / l2_norm(u);
    return u;
}

TransversalitySample transversal_pair_norm(int dim, double lambda1, double lambda2, int time_samples,
                                           unsigned seed, int max_points) {
    if (lambda1 <= 0 || lambda2 <= lambda1) throw std::invalid_argument("need 0 < lambda1 < lambda2");
    if (time_samples < 3) throw std::invalid_argument("need at least three time samples");
    const double s = 0.5 * lambda1;
    const double sigma = 1.0 / (std::sqrt(2.0) * s); // spatial width of |u|²
    const double L = 12.0 * sigma;
    const double kmax = lambda2 + 5.0 * s;
    int N = 8;
    while (N < L * kmax / M_PI) N *= 2;
    if (N > max_points)
        throw std::invalid_argument("transversality grid needs " + std::to_string(N) + " points per axis");
    BoxGrid g(dim, N, L, std::size_t(1) << 24);

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), off(-0.25, 0.25);
    Field a = frequency_packet(g, {-lambda2, 0, 0}, s, std::polar(1.0, ang(rng)));
    Field b = frequency_packet(g, {lambda2, 0, 0}, s, std::polar(1.0, ang(rng)));
    Vec3 shift{0, 0, 0};
    for (int j = 0; j < dim; ++j) shift[j] = off(rng) * sigma;
    b = translate(b, shift);

    // The packets cross at t = 0 with relative speed 4λ₂.
    const double T = 6.0 * sigma / (4.0 * lambda2);
    std::vector<double> ts, vals;
    for (int i = 0; i < time_samples; ++i) {
        const double t = -T + 2.0 * T * i / (time_samples - 1);
        Field at = flat_propagator(a, t), bt = flat_propagator(b, t);
        ts.push_back(t);
        vals.push_back(l2_norm_sq(pointwise_product(at, bt)));
    }
    return {lambda1, lambda2, std::sqrt(trapezoid(ts, vals)), N};
}

TransversalityFit transversality_scaling_fit(const TransversalityConfig& cfg) {
    if (cfg.lambda1_values.size() < 3 || cfg.lambda2_values.size() < 3)
        throw std::invalid_argument("scaling fit needs at least three dyadic points per axis");
    TransversalityFit fit;
    fit.dim = cfg.dim;
    std::vector<double> x, y;
    for (double l2 : cfg.lambda2_values) {
        auto s = transversal_pair_norm(cfg.dim, cfg.lambda1_fixed, l2, cfg.time_samples, cfg.seed, cfg.max_points);
        fit.lambda2_samples.push_back(s);
        x.push_back(l2);
        y.push_back(s.value);
    }
    fit.lambda2_fit = loglog_fit(x, y);
    x.clear();
    y.clear();
    for (double l1 : cfg.lambda1_values) {
        auto s = transversal_pair_norm(cfg.dim, l1, cfg.lambda2_fixed, cfg.time_samples, cfg.seed, cfg.max_points);
        fit.lambda1_samples.push_back(s);
        x.push_back(l1);
        y.push_back(s.value);
    }
    fit.lambda1_fit = loglog_fit(x, y);
    return fit;
}

nlohmann::json TransversalityFit::to_json() const {
    auto fit_json = [](const LinearFit& f) {
        return nlohmann::json{{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.slope_stderr},
                              {"halfwidth95", f.slope_halfwidth}, {"points", f.points}};
    };
    auto samples = [](const std::vector<TransversalitySample>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& s : v)
            a.push_back({{"lambda1", s.lambda1}, {"lambda2", s.lambda2}, {"value", s.value}, {"points", s.points}});
        return a;
    };
    return {{"dim", dim},
            {"lambda1_fit", fit_json(lambda1_fit)},
            {"lambda2_fit", fit_json(lambda2_fit)},
            {"expected_lambda1_slope", 0.5 * (dim - 1)},
            {"expected_lambda2_slope", -0.5},
            {"lambda1_samples", samples(lambda1_samples)},
            {"lambda2_samples", samples(lambda2_samples)}};
}

double d_lambda_family(const std::vector<Trajectory>& v, const std::vector<Trajectory>& f, int lattice) {
    if (v.empty()) throw std::invalid_argument("d_lambda needs a nonempty family");
    double init = 0.0;
    for (const auto& tr : v) {
        if (tr.size() == 0) throw std::invalid_argument("d_lambda: empty trajectory");
        init = std::max(init, l2_norm_sq(tr.snapshots.front()));
    }
    double pair = 0.0;
    for (const auto& tv : v)
        for (const auto& tf : f) {
            require_matching_times(tv, tf);
            for (const Vec3& x0 : shift_lattice(tv.grid, lattice)) {
                std::vector<double> vals;
                for (std::size_t i = 0; i < tv.size(); ++i) {
                    Field fs = translate(tf.snapshots[i], x0);
                    double s = 0.0;
                    for (std::size_t p = 0; p < fs.size(); ++p) s += std::abs(tv.snapshots[i][p]) * std::abs(fs[p]);
                    vals.push_back(s * tv.grid.cell_volume());
                }
                pair = std::max(pair, trapezoid(tv.times, vals));
            }
        }
    return std::sqrt(init + pair);
}

double d_lambda(const Trajectory& v, const Trajectory& f, int k, int lattice) {
    DyadicFilterBank bank(v.grid);
    std::vector<Trajectory> vs, fs;
    for (int j = std::max(1, k - 1); j <= std::min(bank.shells(), k + 1); ++j) {
        vs.push_back(project_trajectory(v, bank, j));
        fs.push_back(project_trajectory(f, bank, j));
    }
    if (vs.empty()) throw std::out_of_range("shell index");
    return d_lambda_family(vs, fs, lattice);
}

ScatteringProbe scattering_extract(const Trajectory& traj, const std::vector<double>& probes, double s) {
    if (probes.size() < 3) throw std::invalid_argument("scattering extraction needs at least three probe times");
    ScatteringProbe out(traj.grid);
    std::vector<Field> w;
    for (double t : probes) {
        const double lo = std::min(traj.times.front(), traj.times.back());
        const double hi = std::max(traj.times.front(), traj.times.back());
        if (t < lo - 1e-12 || t > hi + 1e-12)
            throw std::invalid_argument("probe time " + std::to_string(t) + " outside the trajectory");
        w.push_back(flat_propagator(traj.at(t), -t));
        out.probe_times.push_back(t);
    }
    for (std::size_t i = 0; i + 1 < w.size(); ++i) out.increments.push_back(sobolev_norm(w[i + 1] - w[i], s));
    out.monotone = true;
    for (std::size_t i = 0; i + 1 < out.increments.size(); ++i) {
        out.ratios.push_back(out.increments[i] / out.increments[i + 1]);
        if (!(out.increments[i + 1] < out.increments[i])) out.monotone = false;
    }
    out.candidate = w.back();
    return out;
}

void NormLedger::add(const Trajectory& traj, NormRow row) {
    if (rows.empty()) {
        dim = traj.grid.dim();
        points = traj.grid.n();
        length = traj.grid.length();
    }
    if (row.value < 0.0) throw std::invalid_argument("norm values are nonnegative");
    if (!traj.times.empty()) {
        row.t0 = traj.times.front();
        row.t1 = traj.times.back();
    }
    rows.push_back(std::move(row));
}

void NormLedger::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(12);
    os << "id,k1,k2,x0_0,x0_1,x0_2,value,t0,t1,dim,points,length\n";
    for (const auto& r : rows)
        os << r.id << ',' << r.k1 << ',' << r.k2 << ',' << r.x0[0] << ',' << r.x0[1] << ',' << r.x0[2] << ','
           << r.value << ',' << r.t0 << ',' << r.t1 << ',' << dim << ',' << points << ',' << length << '\n';
}

nlohmann::json NormLedger::to_json() const {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : rows)
        a.push_back({{"id", r.id}, {"k1", r.k1}, {"k2", r.k2}, {"x0", {r.x0[0], r.x0[1], r.x0[2]}},
                     {"value", r.value}, {"t0", r.t0}, {"t1", r.t1}});
    return {{"dim", dim}, {"points", points}, {"length", length}, {"rows", a}};
}

} // namespace qnls
