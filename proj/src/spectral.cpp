#include "qnls/spectral.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace qnls {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct PlanCache {
    std::mutex mu;
    std::map<std::tuple<int, int, int, bool>, fftw_plan> plans;

    fftw_plan get(const BoxGrid& g, int sign, bool in_place) {
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_tuple(g.dim(), g.n(), sign, in_place);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        int dims[3] = {g.n(), g.n(), g.n()};
        auto* a = fftw_alloc_complex(g.size());
        auto* b = in_place ? a : fftw_alloc_complex(g.size());
        fftw_plan p = fftw_plan_dft(g.dim(), dims, a, b, sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!in_place) fftw_free(b);
        fftw_free(a);
        plans.emplace(key, p);
        return p;
    }
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

void run_fft(const BoxGrid& g, const cplx* in, cplx* out, int sign) {
    bool in_place = (in == out);
    fftw_plan p = plan_cache().get(g, sign, in_place);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little,
                  "snapshot IO assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("snapshot: truncated header");
    return v;
}

} // namespace

BoxGrid::BoxGrid(int dim, int points_per_axis, double box_length, std::size_t budget)
    : dim_(dim), n_(points_per_axis), L_(box_length) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("BoxGrid: dim must be 1, 2 or 3");
    if (!is_pow2(points_per_axis) || points_per_axis < 8)
        throw std::invalid_argument("BoxGrid: points_per_axis must be a power of two >= 8");
    if (!(box_length > 0.0)) throw std::invalid_argument("BoxGrid: box_length must be positive");
    size_ = 1;
    for (int d = 0; d < dim; ++d) size_ *= static_cast<std::size_t>(n_);
    if (size_ > budget) throw std::invalid_argument("BoxGrid: point count exceeds budget");

    axis_k_.resize(n_);
    for (int i = 0; i < n_; ++i)
        axis_k_[i] = is_nyquist_index(i) ? 0.0 : k0() * mode_index(i);

    auto table = std::make_shared<RVec>(size_);
    for (std::size_t f = 0; f < size_; ++f) {
        auto idx = unflatten(f);
        double s = 0.0;
        for (int d = 0; d < dim_; ++d) s += axis_k_[idx[d]] * axis_k_[idx[d]];
        (*table)[f] = s;
    }
    ksq_ = std::move(table);
}

double BoxGrid::cell_volume() const { return std::pow(spacing(), dim_); }
double BoxGrid::volume() const { return std::pow(L_, dim_); }
double BoxGrid::k0() const { return two_pi / L_; }

std::array<int, 3> BoxGrid::unflatten(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int d = dim_ - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(flat % n_);
        flat /= n_;
    }
    return idx;
}

std::size_t BoxGrid::flatten(const std::array<int, 3>& idx) const {
    std::size_t f = 0;
    for (int d = 0; d < dim_; ++d) f = f * n_ + static_cast<std::size_t>(idx[d]);
    return f;
}

Vec3 BoxGrid::point(std::size_t flat) const {
    auto idx = unflatten(flat);
    Vec3 x{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) x[d] = position(idx[d]);
    return x;
}

Vec3 BoxGrid::wavenumber(std::size_t flat) const {
    auto idx = unflatten(flat);
    Vec3 k{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) k[d] = axis_k_[idx[d]];
    return k;
}

bool BoxGrid::has_nyquist(std::size_t flat) const {
    auto idx = unflatten(flat);
    for (int d = 0; d < dim_; ++d)
        if (is_nyquist_index(idx[d])) return true;
    return false;
}

double BoxGrid::xi_max() const {
    double kmax = k0() * (n_ / 2 - 1);
    return kmax * std::sqrt(static_cast<double>(dim_));
}

void require_same_grid(const BoxGrid& a, const BoxGrid& b) {
    if (a != b) throw GridMismatch("grid mismatch");
}

Field::Field(const BoxGrid& g, CVec v) : grid(g), values(std::move(v)) {
    if (values.size() != g.size()) throw GridMismatch("Field: value count does not match grid");
}

Field& Field::operator+=(const Field& o) {
    require_same_grid(grid, o.grid);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    require_same_grid(grid, o.grid);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
}

Field& Field::operator*=(cplx s) {
    for (auto& v : values) v *= s;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx s, Field a) { return a *= s; }

Field conj(const Field& f) {
    Field r(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = std::conj(f[i]);
    return r;
}

Field real_part(const Field& f) {
    Field r(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = f[i].real();
    return r;
}

Field pointwise_product(const Field& a, const Field& b) {
    require_same_grid(a.grid, b.grid);
    Field r(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
    return r;
}

SpectralRep::SpectralRep(const BoxGrid& g, CVec c) : grid(g), coeffs(std::move(c)) {
    if (coeffs.size() != g.size()) throw GridMismatch("SpectralRep: coefficient count does not match grid");
}

void fft_forward(const BoxGrid& g, const cplx* in, cplx* out) {
    run_fft(g, in, out, FFTW_FORWARD);
    const double s = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] *= s;
}

void fft_inverse(const BoxGrid& g, const cplx* in, cplx* out) {
    run_fft(g, in, out, FFTW_BACKWARD);
}

SpectralRep to_spectral(const Field& f) {
    SpectralRep F(f.grid);
    fft_forward(f.grid, f.values.data(), F.coeffs.data());
    return F;
}

Field to_physical(const SpectralRep& F) {
    Field f(F.grid);
    fft_inverse(F.grid, F.coeffs.data(), f.values.data());
    return f;
}

double l2_norm_sq(const Field& f) {
    double s = 0.0;
    for (const auto& v : f.values) s += std::norm(v);
    return s * f.grid.cell_volume();
}

double l2_norm(const Field& f) { return std::sqrt(l2_norm_sq(f)); }

double spectral_l2_norm_sq(const SpectralRep& F) {
    double s = 0.0;
    for (const auto& c : F.coeffs) s += std::norm(c);
    return s * F.grid.volume();
}

double integrate_real(const Field& f) { return integrate(f).real(); }

cplx integrate(const Field& f) {
    cplx s = 0.0;
    for (const auto& v : f.values) s += v;
    return s * f.grid.cell_volume();
}

cplx inner(const Field& a, const Field& b) {
    require_same_grid(a.grid, b.grid);
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s * a.grid.cell_volume();
}

double max_abs(const Field& f) {
    double m = 0.0;
    for (const auto& v : f.values) m = std::max(m, std::abs(v));
    return m;
}

void apply_multiplier_inplace(SpectralRep& F, const Multiplier& m) {
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) F.coeffs[i] *= m(F.grid.wavenumber(i));
}

Field apply_multiplier(const Field& f, const Multiplier& m) {
    SpectralRep F = to_spectral(f);
    apply_multiplier_inplace(F, m);
    return to_physical(F);
}

Field differentiate(const Field& f, int axis) {
    if (axis < 0 || axis >= f.grid.dim()) throw std::invalid_argument("differentiate: axis out of range");
    return apply_multiplier(f, [axis](const Vec3& xi) { return cplx(0.0, xi[axis]); });
}

Field fractional_multiplier(const Field& f, double s) {
    const int n = f.grid.dim();
    if (s <= -n) throw std::invalid_argument("fractional_multiplier: requires s > -n");
    if (s == 0.0) return f;
    SpectralRep F = to_spectral(f);
    const auto& ksq = f.grid.wavenumber_sq_table();
    for (std::size_t i = 0; i < F.coeffs.size(); ++i)
        F.coeffs[i] *= ksq[i] > 0.0 ? std::pow(ksq[i], 0.5 * s) : 0.0;
    return to_physical(F);
}

Field flat_propagator(const Field& f, double t) {
    SpectralRep F = to_spectral(f);
    const auto& ksq = f.grid.wavenumber_sq_table();
    for (std::size_t i = 0; i < F.coeffs.size(); ++i)
        F.coeffs[i] *= std::polar(1.0, -t * ksq[i]);
    return to_physical(F);
}

Field translate(const Field& f, const Vec3& x0) {
    return apply_multiplier(f, [&x0](const Vec3& xi) {
        return std::polar(1.0, -(xi[0] * x0[0] + xi[1] * x0[1] + xi[2] * x0[2]));
    });
}

Field laplacian(const Field& f) {
    SpectralRep F = to_spectral(f);
    const auto& ksq = f.grid.wavenumber_sq_table();
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) F.coeffs[i] *= -ksq[i];
    return to_physical(F);
}

Field sobolev_weight(const Field& f, double s) {
    if (s == 0.0) return f;
    SpectralRep F = to_spectral(f);
    const auto& ksq = f.grid.wavenumber_sq_table();
    for (std::size_t i = 0; i < F.coeffs.size(); ++i)
        F.coeffs[i] *= std::pow(1.0 + ksq[i], 0.5 * s);
    return to_physical(F);
}

double sobolev_norm(const Field& f, double s) {
    SpectralRep F = to_spectral(f);
    const auto& ksq = f.grid.wavenumber_sq_table();
    double acc = 0.0;
    for (std::size_t i = 0; i < F.coeffs.size(); ++i)
        acc += std::pow(1.0 + ksq[i], s) * std::norm(F.coeffs[i]);
    return std::sqrt(acc * f.grid.volume());
}

bool dealias_keep(const BoxGrid& g, std::size_t flat) {
    auto idx = g.unflatten(flat);
    const int cut = g.n() / 3;
    for (int d = 0; d < g.dim(); ++d)
        if (std::abs(g.mode_index(idx[d])) > cut) return false;
    return true;
}

void dealias_inplace(SpectralRep& F) {
    for (std::size_t i = 0; i < F.coeffs.size(); ++i)
        if (!dealias_keep(F.grid, i)) F.coeffs[i] = 0.0;
}

Field dealias(const Field& f) {
    SpectralRep F = to_spectral(f);
    dealias_inplace(F);
    return to_physical(F);
}

double dealias_excess_fraction(const SpectralRep& F) {
    double total = 0.0, excess = 0.0;
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) {
        double w = std::norm(F.coeffs[i]);
        total += w;
        if (!dealias_keep(F.grid, i)) excess += w;
    }
    return total > 0.0 ? excess / total : 0.0;
}

double central_mass_fraction(const Field& f, double half_width) {
    double total = 0.0, inside = 0.0;
    const double q = half_width * f.grid.length();
    for (std::size_t i = 0; i < f.size(); ++i) {
        double w = std::norm(f[i]);
        total += w;
        Vec3 x = f.grid.point(i);
        bool in = true;
        for (int d = 0; d < f.grid.dim(); ++d)
            if (std::abs(x[d]) >= q) in = false;
        if (in) inside += w;
    }
    return total > 0.0 ? inside / total : 1.0;
}

SpectralInterpolant::SpectralInterpolant(const Field& f) : grid_(f.grid) {
    coeffs_ = to_spectral(f).coeffs;
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
        if (grid_.has_nyquist(i)) coeffs_[i] = 0.0;
}

cplx SpectralInterpolant::value(const Vec3& x) const {
    Vec3 g;
    return value_and_gradient(x, g);
}

cplx SpectralInterpolant::value_and_gradient(const Vec3& x, Vec3& grad) const {
    const int n = grid_.n();
    const int dim = grid_.dim();
    const double half = 0.5 * grid_.length();
    // Per-axis phase tables e^{iξ(x+L/2)}.
    std::array<CVec, 3> ph;
    for (int d = 0; d < dim; ++d) {
        ph[d].resize(n);
        for (int i = 0; i < n; ++i)
            ph[d][i] = std::polar(1.0, grid_.axis_wavenumber(i) * (x[d] + half));
    }
    cplx val = 0.0;
    std::array<cplx, 3> gr{0.0, 0.0, 0.0};
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        if (coeffs_[f] == 0.0) continue;
        auto idx = grid_.unflatten(f);
        cplx e = coeffs_[f];
        for (int d = 0; d < dim; ++d) e *= ph[d][idx[d]];
        val += e;
        for (int d = 0; d < dim; ++d) gr[d] += cplx(0.0, grid_.axis_wavenumber(idx[d])) * e;
    }
    grad = {0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) grad[d] = gr[d].real();
    return val;
}

void write_snapshot(const std::string& path, const Field& f, double time) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("snapshot: cannot open " + path);
    os.write("QNLS1", 5);
    put_le<std::int32_t>(os, f.grid.dim());
    put_le<std::int32_t>(os, f.grid.n());
    put_le<double>(os, f.grid.length());
    put_le<double>(os, time);
    for (const auto& v : f.values) {
        put_le<double>(os, v.real());
        put_le<double>(os, v.imag());
    }
    if (!os) throw std::runtime_error("snapshot: write failed for " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("snapshot: cannot open " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "QNLS1", 5) != 0)
        throw std::runtime_error("snapshot: bad magic in " + path);
    int dim = get_le<std::int32_t>(is);
    int n = get_le<std::int32_t>(is);
    double L = get_le<double>(is);
    double t = get_le<double>(is);
    BoxGrid g(dim, n, L);
    Field f(g);
    for (auto& v : f.values) {
        double re = get_le<double>(is);
        double im = get_le<double>(is);
        v = cplx(re, im);
    }
    return {std::move(f), t};
}

} // namespace qnls
