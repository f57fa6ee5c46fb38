#include "qnls/model.hpp"

#include "qnls/littlewood_paley.hpp"
#include "qnls/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <stdexcept>

namespace qnls {

namespace {

Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

Mat3 scaled_identity(double s) { return {s, 0, 0, 0, s, 0, 0, 0, s}; }

// L² norm of a stack of component arrays.
double field_norm(const std::vector<CVec>& comps, double cell) {
    double s = 0.0;
    for (const auto& c : comps)
        for (const auto& v : c) s += std::norm(v);
    return std::sqrt(s * cell);
}

} // namespace

Metric::Metric() : kind_("identity") {}

Metric Metric::identity() { return Metric(); }

Metric Metric::iso_abs2(double kappa) {
    Metric m;
    m.kind_ = "identity-plus-|u|^2";
    m.kappa_ = kappa;
    return m;
}

Metric Metric::aniso_abs2(double kappa, const Mat3& A) {
    for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
            if (A[j * 3 + l] != A[l * 3 + j])
                throw std::invalid_argument("Metric: anisotropy matrix must be symmetric");
    Metric m;
    m.kind_ = "identity-plus-|u|^2-anisotropic";
    m.kappa_ = kappa;
    m.A_ = A;
    return m;
}

Metric Metric::linear_re(double kappa) {
    Metric m;
    m.kind_ = "identity-plus-re-u";
    m.kappa_ = kappa;
    return m;
}

Metric Metric::plugin(Eval eval, Deriv deriv) {
    Metric m;
    m.kind_ = "plugin";
    m.plug_eval_ = std::move(eval);
    m.plug_deriv_ = std::move(deriv);
    return m;
}

Mat3 Metric::eval(cplx u) const {
    if (kind_ == "identity") return identity3();
    if (kind_ == "identity-plus-|u|^2") return scaled_identity(1.0 + kappa_ * std::norm(u));
    if (kind_ == "identity-plus-|u|^2-anisotropic") {
        Mat3 g = identity3();
        const double a = kappa_ * std::norm(u);
        for (int i = 0; i < 9; ++i) g[i] += a * A_[i];
        return g;
    }
    if (kind_ == "identity-plus-re-u") return scaled_identity(1.0 + kappa_ * u.real());
    return plug_eval_(u);
}

Mat3 Metric::deriv(cplx u, cplx w) const {
    if (kind_ == "identity") return Mat3{};
    if (kind_ == "identity-plus-|u|^2") {
        Mat3 d{};
        const double s = 2.0 * kappa_ * (std::conj(u) * w).real();
        d[0] = d[4] = d[8] = s;
        return d;
    }
    if (kind_ == "identity-plus-|u|^2-anisotropic") {
        Mat3 d{};
        const double s = 2.0 * kappa_ * (std::conj(u) * w).real();
        for (int i = 0; i < 9; ++i) d[i] = s * A_[i];
        return d;
    }
    if (kind_ == "identity-plus-re-u") {
        Mat3 d{};
        d[0] = d[4] = d[8] = kappa_ * w.real();
        return d;
    }
    if (plug_deriv_) return plug_deriv_(u, w);
    const double h = 1e-6;
    Mat3 a = plug_eval_(u + h * w), b = plug_eval_(u - h * w), d{};
    for (int i = 0; i < 9; ++i) d[i] = (a[i] - b[i]) / (2.0 * h);
    return d;
}

int Monomial::derivative_count() const {
    int c = 0;
    for (const auto& f : factors) c += f.axis >= 0;
    return c;
}

int Monomial::charge() const {
    int c = 0;
    for (const auto& f : factors) c += f.conj ? -1 : 1;
    return c;
}

namespace {
cplx factor_value(const Factor& f, cplx u, const cplx* du) {
    cplx v = f.axis < 0 ? u : du[f.axis];
    return f.conj ? std::conj(v) : v;
}
} // namespace

cplx Nonlinearity::eval(cplx u, const cplx* du) const {
    cplx s = 0.0;
    for (const auto& m : terms) {
        cplx p = m.coeff;
        for (const auto& f : m.factors) p *= factor_value(f, u, du);
        s += p;
    }
    return s;
}

cplx Nonlinearity::deriv(cplx u, const cplx* du, cplx w, const cplx* dw) const {
    cplx s = 0.0;
    for (const auto& m : terms) {
        const std::size_t d = m.factors.size();
        for (std::size_t i = 0; i < d; ++i) {
            cplx p = m.coeff * factor_value(m.factors[i], w, dw);
            for (std::size_t l = 0; l < d; ++l)
                if (l != i) p *= factor_value(m.factors[l], u, du);
            s += p;
        }
    }
    return s;
}

bool Nonlinearity::needs_gradient() const {
    for (const auto& m : terms)
        if (m.derivative_count() > 0) return true;
    return false;
}

Factor parse_factor(const std::string& token) {
    Factor f;
    std::string t = token;
    if (t.size() >= 2 && t[0] == 'd' && std::isdigit(static_cast<unsigned char>(t[1]))) {
        f.axis = t[1] - '0';
        t = t.substr(2);
    }
    if (t == "u")
        f.conj = false;
    else if (t == "ubar")
        f.conj = true;
    else
        throw std::invalid_argument("unknown monomial factor '" + token + "'");
    return f;
}

std::string factor_token(const Factor& f) {
    std::string s = f.axis >= 0 ? "d" + std::to_string(f.axis) : "";
    return s + (f.conj ? "ubar" : "u");
}

bool ModelSpec::has_phase_rotation() const {
    for (const auto& m : N.terms)
        if (m.charge() != 1) return false;
    return true;
}

Symbol ModelSpec::cubic_symbol() const {
    // Slot factor of a monomial factor: 1, iξ_j on plain slots, −iξ_j on the conj slot.
    auto slot_fn = [](const Factor& f) -> SlotFactor {
        if (f.axis < 0) return {};
        const int a = f.axis;
        const double sgn = f.conj ? -1.0 : 1.0;
        return [a, sgn](const Vec3& xi) { return cplx(0.0, sgn * xi[a]); };
    };
    std::vector<SeparableTerm> terms;
    for (const auto& m : N.terms) {
        if (m.degree() != 3 || m.charge() != 1) continue;
        std::vector<Factor> plain, cj;
        for (const auto& f : m.factors) (f.conj ? cj : plain).push_back(f);
        for (int swap = 0; swap < 2; ++swap) {
            SeparableTerm t;
            t.coeff = 0.5 * m.coeff;
            t.factors = {slot_fn(plain[swap]), slot_fn(cj[0]), slot_fn(plain[1 - swap])};
            terms.push_back(std::move(t));
        }
    }
    if (terms.empty()) return Symbol::constant({Slot::plain, Slot::conj, Slot::plain}, 0.0);
    return Symbol({Slot::plain, Slot::conj, Slot::plain}, std::move(terms));
}

void ModelSpec::validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument("model: dim must be 1, 2 or 3");
    Mat3 g0 = metric.eval(0.0);
    for (int j = 0; j < dim; ++j)
        for (int l = 0; l < dim; ++l)
            if (g0[j * 3 + l] != (j == l ? 1.0 : 0.0))
                throw std::invalid_argument("model: g(0) must equal the identity");
    for (const auto& m : N.terms) {
        if (m.derivative_count() > 2)
            throw std::invalid_argument("model: nonlinearity is more than quadratic in the gradient");
        for (const auto& f : m.factors)
            if (f.axis >= dim) throw std::invalid_argument("model: derivative axis exceeds dimension");
    }
    // Sampled symmetry and positivity on |u| ≤ pd_radius.
    for (int r = 1; r <= 4; ++r)
        for (int a = 0; a < 8; ++a) {
            cplx u = std::polar(pd_radius * r / 4.0, 2.0 * 3.141592653589793 * a / 8.0);
            Mat3 g = metric.eval(u);
            for (int j = 0; j < dim; ++j)
                for (int l = 0; l < dim; ++l)
                    if (g[j * 3 + l] != g[l * 3 + j])
                        throw std::invalid_argument("model: metric is not symmetric");
            // Leading principal minors.
            double m1 = g[0];
            double m2 = g[0] * g[4] - g[1] * g[3];
            double m3 = g[0] * (g[4] * g[8] - g[5] * g[7]) - g[1] * (g[3] * g[8] - g[5] * g[6]) +
                        g[2] * (g[3] * g[7] - g[4] * g[6]);
            if (m1 <= 0.0 || (dim >= 2 && m2 <= 0.0) || (dim == 3 && m3 <= 0.0))
                throw std::invalid_argument("model: metric is not positive definite within pd_radius");
        }
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j;
    j["dim"] = dim;
    nlohmann::json mj;
    mj["kind"] = metric.kind();
    if (metric.kind() != "identity") mj["kappa"] = metric.kappa();
    if (metric.kind() == "identity-plus-|u|^2-anisotropic") {
        nlohmann::json A = nlohmann::json::array();
        for (int r = 0; r < dim; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < dim; ++c) row.push_back(metric.aniso()[r * 3 + c]);
            A.push_back(row);
        }
        mj["aniso"] = A;
    }
    j["metric"] = mj;
    nlohmann::json nl = nlohmann::json::array();
    for (const auto& m : N.terms) {
        nlohmann::json t;
        t["coeff"] = {m.coeff.real(), m.coeff.imag()};
        nlohmann::json fs = nlohmann::json::array();
        for (const auto& f : m.factors) fs.push_back(factor_token(f));
        t["factors"] = fs;
        nl.push_back(t);
    }
    j["nonlinearity"] = nl;
    j["flags"] = {{"cubic", declared_cubic}, {"conservative", declared_conservative},
                  {"phase_rotation", has_phase_rotation()}};
    j["pd_radius"] = pd_radius;
    return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec m;
    m.dim = j.at("dim").get<int>();
    if (j.contains("metric")) {
        const auto& mj = j.at("metric");
        std::string kind = mj.value("kind", std::string("identity"));
        double kappa = mj.value("kappa", 1.0);
        if (kind == "identity")
            m.metric = Metric::identity();
        else if (kind == "identity-plus-|u|^2")
            m.metric = Metric::iso_abs2(kappa);
        else if (kind == "identity-plus-re-u")
            m.metric = Metric::linear_re(kappa);
        else if (kind == "identity-plus-|u|^2-anisotropic") {
            Mat3 A{1, 0, 0, 0, 1, 0, 0, 0, 1};
            if (mj.contains("aniso")) {
                A = Mat3{};
                const auto& rows = mj.at("aniso");
                for (std::size_t r = 0; r < rows.size(); ++r)
                    for (std::size_t c = 0; c < rows[r].size(); ++c)
                        A[r * 3 + c] = rows[r][c].get<double>();
            }
            m.metric = Metric::aniso_abs2(kappa, A);
        } else
            throw std::invalid_argument("model: unknown metric kind '" + kind + "'");
    }
    if (j.contains("nonlinearity")) {
        for (const auto& t : j.at("nonlinearity")) {
            Monomial mono;
            if (t.contains("coeff")) {
                const auto& c = t.at("coeff");
                if (c.is_array())
                    mono.coeff = cplx(c.at(0).get<double>(), c.size() > 1 ? c.at(1).get<double>() : 0.0);
                else
                    mono.coeff = c.get<double>();
            }
            for (const auto& f : t.at("factors")) mono.factors.push_back(parse_factor(f.get<std::string>()));
            m.N.terms.push_back(std::move(mono));
        }
    }
    if (j.contains("flags")) {
        m.declared_cubic = j["flags"].value("cubic", true);
        m.declared_conservative = j["flags"].value("conservative", false);
    }
    m.pd_radius = j.value("pd_radius", 0.5);
    m.validate();
    return m;
}

ModelSpec ModelSpec::semilinear_cubic(int dim, double coeff) {
    ModelSpec m;
    m.dim = dim;
    m.N.terms.push_back({coeff, {parse_factor("u"), parse_factor("ubar"), parse_factor("u")}});
    m.declared_conservative = true;
    return m;
}

ModelSpec ModelSpec::quasilinear_iso(int dim, double kappa, double cubic_coeff) {
    ModelSpec m = semilinear_cubic(dim, cubic_coeff);
    m.metric = Metric::iso_abs2(kappa);
    return m;
}

CubicValidation validate_cubic(const ModelSpec& m, unsigned seed) {
    BoxGrid g(m.dim, 16, 2.0 * 3.141592653589793);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    SpectralRep U(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        bool low = true;
        for (int d = 0; d < m.dim; ++d)
            if (std::abs(g.mode_index(idx[d])) > 3) low = false;
        if (low) U.coeffs[i] = cplx(nd(rng), nd(rng));
    }
    Field u = to_physical(U);
    const double scale = 1.0 / max_abs(u);
    u *= scale;
    std::vector<Field> du;
    for (int d = 0; d < m.dim; ++d) du.push_back(differentiate(u, d));

    CubicValidation r;
    for (int e = 3; e <= 10; ++e) {
        const double eps = std::ldexp(1.0, -e);
        std::vector<CVec> gm(1, CVec(g.size() * m.dim * m.dim));
        std::vector<CVec> nv(1, CVec(g.size()));
        for (std::size_t i = 0; i < g.size(); ++i) {
            Mat3 gg = m.metric.eval(eps * u[i]);
            for (int j = 0; j < m.dim; ++j)
                for (int l = 0; l < m.dim; ++l)
                    gm[0][i * m.dim * m.dim + j * m.dim + l] = gg[j * 3 + l] - (j == l ? 1.0 : 0.0);
            cplx grad[3];
            for (int d = 0; d < m.dim; ++d) grad[d] = eps * du[d][i];
            nv[0][i] = m.N.eval(eps * u[i], grad);
        }
        r.eps.push_back(eps);
        r.metric_norms.push_back(field_norm(gm, g.cell_volume()));
        r.nonlinearity_norms.push_back(field_norm(nv, g.cell_volume()));
    }
    auto all_zero = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    };
    r.metric_vacuous = all_zero(r.metric_norms);
    r.nonlinearity_vacuous = all_zero(r.nonlinearity_norms);
    r.metric_slope = r.metric_vacuous ? INFINITY : loglog_fit(r.eps, r.metric_norms).slope;
    r.nonlinearity_slope =
        r.nonlinearity_vacuous ? INFINITY : loglog_fit(r.eps, r.nonlinearity_norms).slope;
    r.pass = r.metric_slope >= 2.0 - 0.05 && r.nonlinearity_slope >= 3.0 - 0.05;
    return r;
}

MetricField identity_metric(const BoxGrid& g) {
    MetricField mf;
    mf.n = g.dim();
    for (int j = 0; j < mf.n; ++j)
        for (int l = 0; l < mf.n; ++l) {
            Field f(g);
            if (j == l)
                for (auto& v : f.values) v = 1.0;
            mf.comp.push_back(std::move(f));
        }
    return mf;
}

MetricField metric_field(const ModelSpec& m, const Field& u) {
    const int n = u.grid.dim();
    MetricField mf;
    mf.n = n;
    mf.comp.assign(n * n, Field(u.grid));
    for (std::size_t i = 0; i < u.size(); ++i) {
        Mat3 g = m.metric.eval(u[i]);
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) mf.comp[j * n + l][i] = g[j * 3 + l];
    }
    return mf;
}

MetricField truncated_metric(const ModelSpec& m, const Field& u, int k) {
    if (k < 3) throw std::invalid_argument("truncated_metric: requires k >= 3");
    const int n = u.grid.dim();
    DyadicFilterBank bank(u.grid);
    Field low = bank.project_leq(u, k - 3);
    MetricField mf = identity_metric(u.grid);
    if (m.metric.is_identity()) return mf;
    for (int j = 0; j < n; ++j)
        for (int l = j; l < n; ++l) {
            Field dev(u.grid);
            for (std::size_t i = 0; i < u.size(); ++i)
                dev[i] = m.metric.eval(low[i])[j * 3 + l] - (j == l ? 1.0 : 0.0);
            dev = bank.project_leq(dev, k - 1);
            for (std::size_t i = 0; i < u.size(); ++i)
                mf.comp[j * n + l][i] = (j == l ? 1.0 : 0.0) + dev[i].real();
            if (l != j) mf.comp[l * n + j] = mf.comp[j * n + l];
        }
    return mf;
}

namespace {

struct RayState {
    Vec3 x{0, 0, 0}, xi{0, 0, 0};
};

class RayField {
public:
    explicit RayField(const MetricField& g) : n_(g.n) {
        for (int j = 0; j < n_; ++j)
            for (int l = j; l < n_; ++l) interp_.emplace_back(g(j, l));
    }

    // Metric and its spatial gradient at x.
    void sample(const Vec3& x, Mat3& g, std::array<Mat3, 3>& dg) const {
        g = Mat3{};
        dg = {};
        int c = 0;
        for (int j = 0; j < n_; ++j)
            for (int l = j; l < n_; ++l, ++c) {
                Vec3 grad;
                double v = interp_[c].value_and_gradient(x, grad).real();
                g[j * 3 + l] = g[l * 3 + j] = v;
                for (int d = 0; d < n_; ++d) dg[d][j * 3 + l] = dg[d][l * 3 + j] = grad[d];
            }
    }

    double hamiltonian(const RayState& s) const {
        Mat3 g;
        std::array<Mat3, 3> dg;
        sample(s.x, g, dg);
        return quad(g, s.xi);
    }

    RayState rhs(const RayState& s) const {
        Mat3 g;
        std::array<Mat3, 3> dg;
        sample(s.x, g, dg);
        RayState r;
        for (int j = 0; j < n_; ++j) {
            double a = 0.0;
            for (int k = 0; k < n_; ++k) a += g[j * 3 + k] * s.xi[k];
            r.x[j] = 2.0 * a;
            r.xi[j] = -quad(dg[j], s.xi);
        }
        return r;
    }

    Vec3 velocity(const RayState& s) const { return rhs(s).x; }

private:
    double quad(const Mat3& g, const Vec3& xi) const {
        double h = 0.0;
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k) h += g[j * 3 + k] * xi[j] * xi[k];
        return h;
    }

    int n_;
    std::vector<SpectralInterpolant> interp_;
};

RayState axpy(const RayState& a, double h, const RayState& b) {
    RayState r;
    for (int d = 0; d < 3; ++d) {
        r.x[d] = a.x[d] + h * b.x[d];
        r.xi[d] = a.xi[d] + h * b.xi[d];
    }
    return r;
}

RayState rk4_step(const RayField& f, const RayState& s, double h) {
    RayState k1 = f.rhs(s);
    RayState k2 = f.rhs(axpy(s, 0.5 * h, k1));
    RayState k3 = f.rhs(axpy(s, 0.5 * h, k2));
    RayState k4 = f.rhs(axpy(s, h, k3));
    RayState r = s;
    for (int d = 0; d < 3; ++d) {
        r.x[d] += h / 6.0 * (k1.x[d] + 2.0 * k2.x[d] + 2.0 * k3.x[d] + k4.x[d]);
        r.xi[d] += h / 6.0 * (k1.xi[d] + 2.0 * k2.xi[d] + 2.0 * k3.xi[d] + k4.xi[d]);
    }
    return r;
}

double dist(const Vec3& a, const Vec3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                     (a[2] - b[2]) * (a[2] - b[2]));
}

} // namespace

Bicharacteristic bicharacteristic_trace(const MetricField& g, const Vec3& x0, const Vec3& xi0,
                                        double T, double dt, double h_tol, int max_halvings) {
    const double nrm = std::sqrt(xi0[0] * xi0[0] + xi0[1] * xi0[1] + xi0[2] * xi0[2]);
    if (std::abs(nrm - 1.0) > 1e-12)
        throw std::invalid_argument("bicharacteristic_trace: |xi0| must be 1");
    if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("bicharacteristic_trace: T, dt > 0");
    RayField field(g);
    RayState s;
    s.x = x0;
    s.xi = xi0;
    const double H0 = field.hamiltonian(s);
    const Vec3 v0 = field.velocity(s);

    Bicharacteristic b;
    auto record = [&](double t, const RayState& st, double H) {
        b.times.push_back(t);
        b.x.push_back(st.x);
        b.xi.push_back(st.xi);
        b.H.push_back(H);
        b.max_xi_deviation = std::max(b.max_xi_deviation, dist(st.xi, xi0));
        b.max_xdot_deviation = std::max(b.max_xdot_deviation, dist(field.velocity(st), v0));
        b.max_H_drift = std::max(b.max_H_drift, std::abs(H - H0) / std::abs(H0));
    };
    record(0.0, s, H0);

    const long steps = std::lround(T / dt);
    for (long n = 0; n < steps; ++n) {
        int halvings = 0;
        for (;;) {
            const long sub = 1L << halvings;
            const double h = dt / static_cast<double>(sub);
            RayState trial = s;
            bool ok = true;
            for (long q = 0; q < sub && ok; ++q) {
                trial = rk4_step(field, trial, h);
                ok = std::abs(field.hamiltonian(trial) - H0) <= h_tol * std::abs(H0);
            }
            if (ok) {
                s = trial;
                break;
            }
            if (++halvings > max_halvings)
                throw std::runtime_error("bicharacteristic_trace: H drift persists after maximal halving");
        }
        b.max_halvings = std::max(b.max_halvings, halvings);
        record((n + 1) * dt, s, field.hamiltonian(s));
    }
    return b;
}

} // namespace qnls
