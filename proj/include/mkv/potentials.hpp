#pragma once

#include <optional>

#include "mkv/grid.hpp"

namespace mkv {

/// Interaction family V(x, mu) = V0(x) + \int v0 dmu + g * (v1 * mu)(x)
/// with confining V0, bounded mean drive v0 and bounded even kernel v1,
/// all sampled on the same symmetric 1D grid.
struct MeanFieldPotential {
    ScalarField V0;
    ScalarField v0;
    ScalarField v1;
    double g = 0.0;

    /// Validates shapes and structure; throws on a confinement profile that
    /// does not peak at the box boundary, an uneven kernel, or g < 0.
    static MeanFieldPotential make(ScalarField V0, ScalarField v0, ScalarField v1, double g);

    const UniformGrid& grid() const { return V0.grid; }
    bool has_interaction() const;
};

/// Certificate produced by the structural validators. All constants are
/// sample-level fits, not proofs; they are reported so failures can be
/// inspected.
struct HypothesisReport {
    bool bochner_pass = false;
    double bochner_min_spectrum = 0.0;
    double bochner_max_spectrum = 0.0;

    bool qv_pass = false;
    double growth_exponent = 0.0;  // fitted log-log slope of the radial profile
    double epsilon = 0.0;          // growth margin above quadratic
    double e1 = 0.0, e2 = 0.0, e3 = 0.0;

    // sandwich constants: V0 - c1 <= V(x,mu) <= c2*V0 + c3 for probability mu
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// V(., mu) on the potential grid.
ScalarField evaluate(const MeanFieldPotential& P, const DensityField& mu);

/// V(., mu) + v0 + g (v1 * mu): the field whose product with the density is
/// the first variation of the interaction energy. This is the operator
/// coefficient the self-consistent solves use.
ScalarField effective_field(const MeanFieldPotential& P, const DensityField& mu);

/// Symmetrized N-particle potential on the tensor grid built from N copies of
/// the 1-particle axis:
///   sum_i V0(x_i) + v0(x_i)  +  2g/(N-1) * sum_{i<k} v1(x_i - x_k).
/// Pairwise kernel values are read by node-index offset with the same
/// zero-outside extension convolve() uses, so product states reproduce the
/// mean-field energy exactly.
ScalarField assemble_VN(const MeanFieldPotential& P, int N);

// ---------------------------------------------------------------------------
// Structural validators
// ---------------------------------------------------------------------------

/// Discrete Bochner test: real DFT of the kernel samples (last node dropped,
/// the grid being symmetric makes the sequence even-periodic). Passes iff the
/// minimum spectral value is >= -1e-10 times the maximum.
HypothesisReport bochner_check(const ScalarField& kernel);

/// Growth/derivative test on an increasing radial profile vbar(r):
///   (i)  vbar(r) >= e1 r^(2+eps) - e2 with eps fitted from the outer-tail
///        log-log slope (pass needs eps >= 0.05),
///   (ii) vbar'(r) <= e3 vbar(r)^(3/2) certified on samples with vbar >= 1.
HypothesisReport qv_check(std::span<const double> r, std::span<const double> vbar);

/// Runs both validators on a potential: Bochner on v1 (trivial pass when
/// there is no interaction), QV on the radial lower envelope of V0, and the
/// sandwich constants bounding the mu-dependence.
HypothesisReport validate_hypotheses(const MeanFieldPotential& P);

// ---------------------------------------------------------------------------
// Kernel scaling (intermediate regime)
// ---------------------------------------------------------------------------

/// v_N(x) = N^beta v0(N^beta x) resampled on `target` and rescaled so the
/// trapezoidal mass matches the base kernel exactly. Requires at least 6
/// nodes across the scaled support, else throws ResolutionError with a
/// workable per-axis count. beta in (0, 1]; N = 1 returns the kernel
/// unchanged.
ScalarField scaled_kernel(const ScalarField& base, double beta, int N,
                          const UniformGrid& target);

// ---------------------------------------------------------------------------
// Named constructors
// ---------------------------------------------------------------------------

/// c0 + c2 x^2 + c4 x^4 sampled on g.
ScalarField poly_potential(const UniformGrid& g, double c0, double c2, double c4);

/// exp(-x^2 / (2 sigma^2)), amplitude 1.
ScalarField gaussian_kernel(const UniformGrid& g, double sigma);

/// cos(k x).
ScalarField cosine_kernel(const UniformGrid& g, double k);

/// Smooth bump supported on [-width/2, width/2], normalized to unit
/// trapezoidal mass on g.
ScalarField bump_kernel(const UniformGrid& g, double width);

/// All-zero field on g.
ScalarField zero_field(const UniformGrid& g);

/// Resample a field onto another grid by multilinear interpolation
/// (zero outside the source box).
ScalarField resample_field(const ScalarField& f, const UniformGrid& target);

}  // namespace mkv
