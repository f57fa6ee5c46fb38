#include "qnls/initial_data.hpp"

#include "qnls/config.hpp"
#include "qnls/littlewood_paley.hpp"
#include "qnls/norms.hpp"

#include <cmath>
#include <random>

namespace qnls {

namespace {

Vec3 vec3(const nlohmann::json& j, const std::string& key, const Vec3& fallback) {
    auto v = get_numbers(j, key, {fallback[0], fallback[1], fallback[2]});
    if (v.size() > 3) throw ConfigError("config: key '" + key + "' has more than three components");
    Vec3 out{0, 0, 0};
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

Field shell_random(const BoxGrid& g, int k, std::mt19937_64& rng) {
    DyadicFilterBank bank(g);
    if (k < 1 || k > bank.shells()) throw ConfigError("data: shell index out of range for this grid");
    std::normal_distribution<double> nd;
    SpectralRep F(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double w = bank.shell_weight(k, std::sqrt(g.wavenumber_sq(i)));
        if (w != 0.0 && dealias_keep(g, i) && !g.has_nyquist(i)) F.coeffs[i] = w * cplx(nd(rng), nd(rng));
        else if (w != 0.0) { nd(rng); nd(rng); }
    }
    if (spectral_l2_norm_sq(F) == 0.0)
        throw ConfigError("data: shell " + std::to_string(k) + " has no resolved modes on this grid");
    return to_physical(F);
}

void normalize(Field& f, const DataSpec& s) {
    double n = 0.0;
    if (s.norm == "peak")
        n = max_abs(f);
    else if (s.norm == "l2")
        n = l2_norm(f);
    else if (s.norm == "h1")
        n = sobolev_norm(f, 1.0);
    else
        throw ConfigError("data: norm must be peak, l2 or h1");
    if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("data: initial field vanishes, cannot normalize");
    f *= s.amplitude / n;
}

} // namespace

DataSpec DataSpec::from_json(const nlohmann::json& j) {
    DataSpec s;
    s.kind = get_string(j, "kind", s.kind);
    s.amplitude = get_number(j, "amplitude", s.amplitude);
    s.norm = get_string(j, "norm", s.norm);
    s.width = get_number(j, "width", s.width);
    s.centre = vec3(j, "centre", s.centre);
    s.carrier = vec3(j, "carrier", s.carrier);
    auto m = get_numbers(j, "mode", {1, 0, 0});
    for (std::size_t i = 0; i < 3; ++i) s.mode[i] = i < m.size() ? static_cast<int>(m[i]) : 0;
    s.shell = get_int(j, "shell", s.shell);
    s.shell2 = get_int(j, "shell2", s.shell2);
    s.modes = get_int(j, "modes", s.modes);
    if (s.kind != "gaussian-bump" && s.kind != "shell-random" && s.kind != "plane-wave" &&
        s.kind != "two-shell" && s.kind != "packet" && s.kind != "band-limited")
        throw ConfigError("data: unknown kind '" + s.kind + "'");
    if (!(s.width > 0.0)) throw ConfigError("data: width must be positive");
    return s;
}

nlohmann::json DataSpec::to_json() const {
    return {{"kind", kind},     {"amplitude", amplitude}, {"norm", norm},   {"width", width},
            {"centre", centre}, {"carrier", carrier},     {"mode", mode},   {"shell", shell},
            {"shell2", shell2}, {"modes", modes}};
}

Field make_initial_data(const BoxGrid& g, const DataSpec& s, unsigned seed) {
    Field f(g);
    std::mt19937_64 rng(seed);
    if (s.kind == "gaussian-bump") {
        for (std::size_t i = 0; i < g.size(); ++i) {
            Vec3 x = g.point(i);
            double r2 = 0.0, ph = 0.0;
            for (int d = 0; d < g.dim(); ++d) {
                r2 += (x[d] - s.centre[d]) * (x[d] - s.centre[d]);
                ph += s.carrier[d] * x[d];
            }
            f[i] = std::exp(-r2 / (2.0 * s.width * s.width)) * std::exp(cplx(0.0, ph));
        }
        f = dealias(f);
    } else if (s.kind == "plane-wave") {
        for (std::size_t i = 0; i < g.size(); ++i) {
            Vec3 x = g.point(i);
            double ph = 0.0;
            for (int d = 0; d < g.dim(); ++d) ph += g.k0() * s.mode[d] * x[d];
            f[i] = std::exp(cplx(0.0, ph));
        }
    } else if (s.kind == "shell-random") {
        f = shell_random(g, s.shell, rng);
    } else if (s.kind == "two-shell") {
        Field a = shell_random(g, s.shell, rng);
        Field b = shell_random(g, s.shell2, rng);
        a *= 1.0 / l2_norm(a);
        b *= 1.0 / l2_norm(b);
        f = a + b;
    } else if (s.kind == "band-limited") {
        std::normal_distribution<double> nd;
        SpectralRep F(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto idx = g.unflatten(i);
            bool keep = true;
            for (int d = 0; d < g.dim(); ++d) keep = keep && std::abs(g.mode_index(idx[d])) <= s.modes;
            if (keep) F.coeffs[i] = cplx(nd(rng), nd(rng));
        }
        f = to_physical(F);
    } else if (s.kind == "packet") {
        f = frequency_packet(g, s.carrier, s.width);
    }
    normalize(f, s);
    return f;
}

} // namespace qnls
