#pragma once

#include "qnls/spectral.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qnls {

enum class Slot { plain, conj };

using SlotFactor = std::function<cplx(const Vec3& xi)>;

// Π_i a_i(ξ^i); an empty factor stands for 1.
struct SeparableTerm {
    cplx coeff = 1.0;
    std::vector<SlotFactor> factors;
};

// Symbol of a translation-invariant form. The output frequency is Σ ±ξ^i with the
// sign fixed by the slot pattern, and a conj slot pairs with conj(û(ξ^i)).
class Symbol {
public:
    using Closed = std::function<cplx(const std::vector<Vec3>&)>;

    Symbol(std::vector<Slot> pattern, Closed closed);
    Symbol(std::vector<Slot> pattern, std::vector<SeparableTerm> terms);
    static Symbol constant(std::vector<Slot> pattern, cplx value);

    int arity() const { return static_cast<int>(pattern_.size()); }
    const std::vector<Slot>& pattern() const { return pattern_; }
    bool separable() const { return !terms_.empty() || !closed_; }
    const std::vector<SeparableTerm>& terms() const { return terms_; }
    bool phase_rotation() const;

    cplx operator()(const std::vector<Vec3>& xi) const;

private:
    std::vector<Slot> pattern_;
    std::vector<SeparableTerm> terms_;
    Closed closed_;
};

// Dealiased physical-space evaluation of a rank-separable form.
Field evaluate_form(const Symbol& sym, const std::vector<Field>& inputs);
// ∫ of the form evaluated on the inputs (the associated functional).
cplx evaluate_functional(const Symbol& sym, const std::vector<Field>& inputs);

enum class ResonanceClass { nonresonant, resonant, doubly_resonant, transversal };

struct InteractionQuadruple {
    int dim = 2;
    std::array<std::array<std::int64_t, 3>, 4> xi{}; // lattice indices
    std::array<int, 3> signs{+1, -1, +1};            // +1 plain, -1 conjugated input
    std::array<std::int64_t, 3> delta{};              // Σ s_i ξ^i − ξ⁴
    std::int64_t delta_sq = 0;                        // Σ s_i|ξ^i|² − |ξ⁴|²

    static InteractionQuadruple make(int dim, const std::array<std::array<std::int64_t, 3>, 4>& xi,
                                     std::array<int, 3> signs = {+1, -1, +1});
    void recompute();
    bool consistent() const;
};

struct Classification {
    ResonanceClass label;
    bool resonant;
    bool doubly_resonant;
    bool transversal;
    std::string text() const;
};

Classification classify(const InteractionQuadruple& q);
std::string to_string(ResonanceClass c);

struct CubicSplit {
    Symbol res, zero, nr, tr;
};

// Smooth near-diagonal cutoff: 1 when Σ|ξ_i−ξ_j| ≤ θ/2 · Σ⟨ξ_i⟩, 0 beyond θ · Σ⟨ξ_i⟩.
double diag_cutoff(const std::vector<Vec3>& xi, double theta = 0.125);
CubicSplit split_cubic(const Symbol& sym, int k, double theta = 0.125);

struct ConservativeReport {
    double max_imag = 0.0;
    double max_imag_gradient = 0.0;
    int samples = 0;
    bool pass = false;
};

// Samples c(ξ,ξ,ξ) on a lattice box; in 1D also the diagonal gradient by central differences.
ConservativeReport conservative_check(const Symbol& sym, int dim, double extent = 8.0,
                                      int samples_per_axis = 9, double tol = 1e-10);

void write_classification_csv(const std::string& path,
                              const std::vector<InteractionQuadruple>& qs);

} // namespace qnls
