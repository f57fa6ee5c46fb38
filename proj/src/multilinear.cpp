#include "qnls/multilinear.hpp"

#include "qnls/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qnls {

namespace {

double norm3(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

double bracket(const Vec3& a) { return std::sqrt(1.0 + a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

// Spectral multiplier for one slot; conj slots use the conjugated symbol so that
// the physical factor conj(ā(D)u) pairs a(ξ) with conj(û(ξ)).
Field slot_field(const Field& in, const SlotFactor& a, Slot s, bool dealias_input) {
    Field w = dealias_input ? dealias(in) : in;
    if (a) {
        if (s == Slot::plain)
            w = apply_multiplier(w, a);
        else
            w = apply_multiplier(w, [&a](const Vec3& xi) { return std::conj(a(xi)); });
    }
    if (s == Slot::conj) w = conj(w);
    return w;
}

void check_inputs(const Symbol& sym, const std::vector<Field>& inputs) {
    if (static_cast<int>(inputs.size()) != sym.arity())
        throw std::invalid_argument("form: input count does not match arity");
    for (const auto& f : inputs) require_same_grid(inputs.front().grid, f.grid);
    if (!sym.separable())
        throw std::invalid_argument("form: closed-form symbols are classification-only");
}

Field product_of_term(const Symbol& sym, const SeparableTerm& t, const std::vector<Field>& inputs,
                      bool dealias_inputs) {
    Field acc(inputs.front().grid);
    for (auto& v : acc.values) v = t.coeff;
    for (int i = 0; i < sym.arity(); ++i) {
        const SlotFactor& a = i < static_cast<int>(t.factors.size()) ? t.factors[i] : SlotFactor{};
        Field w = slot_field(inputs[i], a, sym.pattern()[i], dealias_inputs);
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] *= w[p];
    }
    return acc;
}

std::vector<SeparableTerm> unit_terms(cplx v) {
    SeparableTerm t;
    t.coeff = v;
    return {t};
}

} // namespace

Symbol::Symbol(std::vector<Slot> pattern, Closed closed)
    : pattern_(std::move(pattern)), closed_(std::move(closed)) {}

Symbol::Symbol(std::vector<Slot> pattern, std::vector<SeparableTerm> terms)
    : pattern_(std::move(pattern)), terms_(std::move(terms)) {
    if (terms_.size() > 64) throw std::invalid_argument("Symbol: rank above 64");
}

Symbol Symbol::constant(std::vector<Slot> pattern, cplx value) {
    return Symbol(std::move(pattern), unit_terms(value));
}

bool Symbol::phase_rotation() const {
    int plain = 0, cj = 0;
    for (auto s : pattern_) (s == Slot::plain ? plain : cj)++;
    return plain - cj == 0 || plain - cj == 1;
}

cplx Symbol::operator()(const std::vector<Vec3>& xi) const {
    if (closed_) return closed_(xi);
    cplx s = 0.0;
    for (const auto& t : terms_) {
        cplx p = t.coeff;
        for (std::size_t i = 0; i < t.factors.size() && i < xi.size(); ++i)
            if (t.factors[i]) p *= t.factors[i](xi[i]);
        s += p;
    }
    return s;
}

Field evaluate_form(const Symbol& sym, const std::vector<Field>& inputs) {
    check_inputs(sym, inputs);
    Field out(inputs.front().grid);
    for (const auto& t : sym.terms()) out += product_of_term(sym, t, inputs, true);
    return dealias(out);
}

cplx evaluate_functional(const Symbol& sym, const std::vector<Field>& inputs) {
    check_inputs(sym, inputs);
    cplx s = 0.0;
    for (const auto& t : sym.terms()) s += integrate(product_of_term(sym, t, inputs, false));
    return s;
}

InteractionQuadruple InteractionQuadruple::make(int dim,
                                                const std::array<std::array<std::int64_t, 3>, 4>& xi,
                                                std::array<int, 3> signs) {
    InteractionQuadruple q;
    q.dim = dim;
    q.xi = xi;
    q.signs = signs;
    for (int i = 0; i < 4; ++i)
        for (int d = dim; d < 3; ++d) q.xi[i][d] = 0;
    q.recompute();
    return q;
}

void InteractionQuadruple::recompute() {
    delta = {0, 0, 0};
    delta_sq = 0;
    for (int d = 0; d < 3; ++d) {
        for (int i = 0; i < 3; ++i) delta[d] += signs[i] * xi[i][d];
        delta[d] -= xi[3][d];
    }
    for (int i = 0; i < 4; ++i) {
        std::int64_t s = 0;
        for (int d = 0; d < 3; ++d) s += xi[i][d] * xi[i][d];
        delta_sq += (i < 3 ? signs[i] : -1) * s;
    }
}

bool InteractionQuadruple::consistent() const {
    InteractionQuadruple c = *this;
    c.recompute();
    return c.delta == delta && c.delta_sq == delta_sq;
}

std::string to_string(ResonanceClass c) {
    switch (c) {
    case ResonanceClass::nonresonant: return "nonresonant";
    case ResonanceClass::resonant: return "resonant";
    case ResonanceClass::doubly_resonant: return "doubly_resonant";
    case ResonanceClass::transversal: return "transversal";
    }
    return "?";
}

std::string Classification::text() const {
    std::string s = to_string(label);
    if (transversal && label != ResonanceClass::transversal) s += "+transversal";
    return s;
}

Classification classify(const InteractionQuadruple& q) {
    Classification c{};
    c.resonant = q.delta[0] == 0 && q.delta[1] == 0 && q.delta[2] == 0 && q.delta_sq == 0;
    int maxmult = 0;
    for (int i = 0; i < 4; ++i) {
        int m = 0;
        for (int j = 0; j < 4; ++j) m += (q.xi[i] == q.xi[j]);
        maxmult = std::max(maxmult, m);
    }
    c.transversal = maxmult <= 2;
    c.doubly_resonant = c.resonant && maxmult == 4;
    if (c.doubly_resonant)
        c.label = ResonanceClass::doubly_resonant;
    else if (c.resonant)
        c.label = ResonanceClass::resonant;
    else if (c.transversal)
        c.label = ResonanceClass::transversal;
    else
        c.label = ResonanceClass::nonresonant;
    return c;
}

double diag_cutoff(const std::vector<Vec3>& xi, double theta) {
    double spread = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        scale += bracket(xi[i]);
        for (std::size_t j = i + 1; j < xi.size(); ++j) spread += norm3(sub(xi[i], xi[j]));
    }
    // 1 below θ/2, 0 above θ, smooth in between.
    double r = spread / (theta * scale);
    return lp_profile(2.0 * r);
}

CubicSplit split_cubic(const Symbol& sym, int k, double theta) {
    if (sym.arity() != 3) throw std::invalid_argument("split_cubic: symbol must be cubic");
    const auto& pat = sym.pattern();
    const bool pr = sym.phase_rotation();
    auto out_freq = [pat](const std::vector<Vec3>& xi) {
        Vec3 o{0, 0, 0};
        for (int i = 0; i < 3; ++i) {
            double s = pat[i] == Slot::plain ? 1.0 : -1.0;
            for (int d = 0; d < 3; ++d) o[d] += s * xi[i][d];
        }
        return o;
    };
    auto shell = [k](double r) {
        if (k == 1) return DyadicFilterBank::leq_weight(1, r);
        return DyadicFilterBank::leq_weight(k, r) - DyadicFilterBank::leq_weight(k - 1, r);
    };
    auto w_res = [=](const std::vector<Vec3>& xi) {
        if (!pr) return 0.0;
        return shell(norm3(out_freq(xi))) * diag_cutoff(xi, theta);
    };
    auto low = [](const std::vector<Vec3>& xi) {
        double m = 0.0;
        for (const auto& x : xi) m = std::max(m, norm3(x));
        return lp_profile(m);
    };
    Symbol base = sym;
    CubicSplit s{
        Symbol(pat, [=](const std::vector<Vec3>& xi) { return w_res(xi) * base(xi); }),
        Symbol(pat, [=](const std::vector<Vec3>& xi) {
            return (1.0 - w_res(xi)) * low(xi) * base(xi);
        }),
        Symbol(pat, [=](const std::vector<Vec3>& xi) {
            return (1.0 - w_res(xi)) * (1.0 - low(xi)) * diag_cutoff(xi, theta) * base(xi);
        }),
        Symbol(pat, [=](const std::vector<Vec3>& xi) {
            return (1.0 - w_res(xi)) * (1.0 - low(xi)) * (1.0 - diag_cutoff(xi, theta)) * base(xi);
        }),
    };
    return s;
}

ConservativeReport conservative_check(const Symbol& sym, int dim, double extent,
                                      int samples_per_axis, double tol) {
    if (sym.arity() != 3 || sym.pattern()[0] != Slot::plain || sym.pattern()[1] != Slot::conj ||
        sym.pattern()[2] != Slot::plain)
        throw std::invalid_argument("conservative_check: requires the (u, conj u, u) pattern");
    ConservativeReport r;
    const int m = samples_per_axis;
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= m;
    const double step = m > 1 ? 2.0 * extent / (m - 1) : 0.0;
    const double fd = 1e-5;
    for (std::size_t f = 0; f < total; ++f) {
        Vec3 xi{0, 0, 0};
        std::size_t rem = f;
        for (int d = 0; d < dim; ++d) {
            xi[d] = -extent + step * static_cast<double>(rem % m);
            rem /= m;
        }
        std::vector<Vec3> args{xi, xi, xi};
        r.max_imag = std::max(r.max_imag, std::abs(sym(args).imag()));
        if (dim == 1) {
            for (int slot = 0; slot < 3; ++slot) {
                auto ap = args, am = args;
                ap[slot][0] += fd;
                am[slot][0] -= fd;
                double g = ((sym(ap) - sym(am)) / (2.0 * fd)).imag();
                r.max_imag_gradient = std::max(r.max_imag_gradient, std::abs(g));
            }
        }
        ++r.samples;
    }
    r.pass = r.max_imag < tol && r.max_imag_gradient < tol;
    return r;
}

void write_classification_csv(const std::string& path, const std::vector<InteractionQuadruple>& qs) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "xi1,xi2,xi3,xi4,signs,delta,delta_sq,class\n";
    auto vec = [](const InteractionQuadruple& q, const std::array<std::int64_t, 3>& v) {
        std::string s;
        for (int d = 0; d < q.dim; ++d) s += (d ? " " : "") + std::to_string(v[d]);
        return s;
    };
    for (const auto& q : qs) {
        for (int i = 0; i < 4; ++i) os << vec(q, q.xi[i]) << ",";
        for (int i = 0; i < 3; ++i) os << (q.signs[i] > 0 ? '+' : '-');
        os << "," << vec(q, q.delta) << "," << q.delta_sq << "," << classify(q).text() << "\n";
    }
}

} // namespace qnls
