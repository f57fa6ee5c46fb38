#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace qnls {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;
using Vec3 = std::array<double, 3>;

class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Square periodic box [-L/2, L/2)^n sampled on N points per axis.
// Flat indices are row-major with axis 0 slowest.
class BoxGrid {
public:
    static constexpr std::size_t default_budget = std::size_t(1) << 21;

    BoxGrid(int dim, int points_per_axis, double box_length,
            std::size_t budget = default_budget);

    int dim() const { return dim_; }
    int n() const { return n_; }
    double length() const { return L_; }
    std::size_t size() const { return size_; }
    double spacing() const { return L_ / n_; }
    double cell_volume() const;
    double volume() const;
    double k0() const;

    double position(int i) const { return -0.5 * L_ + i * spacing(); }
    Vec3 point(std::size_t flat) const;
    std::array<int, 3> unflatten(std::size_t flat) const;
    std::size_t flatten(const std::array<int, 3>& idx) const;

    // Signed integer mode index for axis sample i; the Nyquist index maps to N/2.
    int mode_index(int i) const { return i <= n_ / 2 ? i : i - n_; }
    bool is_nyquist_index(int i) const { return i == n_ / 2; }

    // Wavenumber along one axis with the Nyquist component set to zero.
    double axis_wavenumber(int i) const { return axis_k_[i]; }
    Vec3 wavenumber(std::size_t flat) const;
    double wavenumber_sq(std::size_t flat) const { return (*ksq_)[flat]; }
    const RVec& wavenumber_sq_table() const { return *ksq_; }
    bool has_nyquist(std::size_t flat) const;
    double xi_max() const;

    bool operator==(const BoxGrid& o) const {
        return dim_ == o.dim_ && n_ == o.n_ && L_ == o.L_;
    }
    bool operator!=(const BoxGrid& o) const { return !(*this == o); }

private:
    int dim_;
    int n_;
    double L_;
    std::size_t size_;
    RVec axis_k_;
    std::shared_ptr<const RVec> ksq_;
};

void require_same_grid(const BoxGrid& a, const BoxGrid& b);

struct Field {
    BoxGrid grid;
    CVec values;

    explicit Field(const BoxGrid& g) : grid(g), values(g.size(), cplx(0.0)) {}
    Field(const BoxGrid& g, CVec v);

    std::size_t size() const { return values.size(); }
    cplx& operator[](std::size_t i) { return values[i]; }
    const cplx& operator[](std::size_t i) const { return values[i]; }

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(cplx s);
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx s, Field a);
Field conj(const Field& f);
Field real_part(const Field& f);
Field pointwise_product(const Field& a, const Field& b);

// Zero-mode equals the mean of the samples (forward carries 1/N^n).
struct SpectralRep {
    BoxGrid grid;
    CVec coeffs;

    explicit SpectralRep(const BoxGrid& g) : grid(g), coeffs(g.size(), cplx(0.0)) {}
    SpectralRep(const BoxGrid& g, CVec c);
};

SpectralRep to_spectral(const Field& f);
Field to_physical(const SpectralRep& F);

// Raw transforms on contiguous arrays of grid.size() entries.
void fft_forward(const BoxGrid& g, const cplx* in, cplx* out);
void fft_inverse(const BoxGrid& g, const cplx* in, cplx* out);

// ∫|f|^2 dx on the box.
double l2_norm_sq(const Field& f);
double l2_norm(const Field& f);
double spectral_l2_norm_sq(const SpectralRep& F);
double integrate_real(const Field& f);
cplx integrate(const Field& f);
// ∫ conj(a) b dx
cplx inner(const Field& a, const Field& b);
double max_abs(const Field& f);

using Multiplier = std::function<cplx(const Vec3& xi)>;

// Multiplies spectral coefficients by m(ξ), with ξ having Nyquist components zeroed.
Field apply_multiplier(const Field& f, const Multiplier& m);
void apply_multiplier_inplace(SpectralRep& F, const Multiplier& m);

Field differentiate(const Field& f, int axis);
Field fractional_multiplier(const Field& f, double s);
Field flat_propagator(const Field& f, double t);
Field translate(const Field& f, const Vec3& x0);
Field laplacian(const Field& f);
Field sobolev_weight(const Field& f, double s);
double sobolev_norm(const Field& f, double s);

// Keeps modes with |m_j| <= N/3 on every axis.
bool dealias_keep(const BoxGrid& g, std::size_t flat);
Field dealias(const Field& f);
void dealias_inplace(SpectralRep& F);
double dealias_excess_fraction(const SpectralRep& F);

// Fraction of L^2 mass within the central box |x_j| < half_width·L.
double central_mass_fraction(const Field& f, double half_width = 0.25);

// Trigonometric interpolant and its gradient at an arbitrary point.
class SpectralInterpolant {
public:
    explicit SpectralInterpolant(const Field& f);
    cplx value(const Vec3& x) const;
    cplx value_and_gradient(const Vec3& x, Vec3& grad) const;

private:
    BoxGrid grid_;
    CVec coeffs_;
};

struct Snapshot {
    Field field;
    double time;
};

void write_snapshot(const std::string& path, const Field& f, double time);
Snapshot read_snapshot(const std::string& path);

} // namespace qnls
