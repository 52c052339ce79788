#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mkv/errors.hpp"

namespace mkv {

inline constexpr int kMaxDims = 4;
inline constexpr int kMinPointsPerAxis = 8;

/// Axis-aligned tensor grid with uniform spacing per axis.
/// Node i on an axis sits at lo + i*h with h = (hi - lo)/(points - 1),
/// so both endpoints are nodes.
class UniformGrid {
public:
    struct Axis {
        double lo;
        double hi;
        int points;
    };

    UniformGrid() = default;
    explicit UniformGrid(std::vector<Axis> axes);

    /// Convenience: d identical axes (the N-particle layout).
    static UniformGrid tensor(const Axis& axis, int dims);

    int dims() const { return static_cast<int>(axes_.size()); }
    const Axis& axis(int d) const { return axes_[static_cast<size_t>(d)]; }
    double spacing(int d) const { return spacing_[static_cast<size_t>(d)]; }
    std::size_t size() const { return total_; }

    /// Product of spacings; the rectangle-rule cell volume.
    double cell_volume() const;

    double coord(int d, int i) const {
        return axes_[static_cast<size_t>(d)].lo + spacing_[static_cast<size_t>(d)] * i;
    }

    /// Row-major linear index; the last axis is contiguous.
    std::size_t index(std::span<const int> multi) const;
    void unindex(std::size_t linear, std::span<int> multi) const;

    /// Stride of one step along axis d in the linear layout.
    std::size_t stride(int d) const { return stride_[static_cast<size_t>(d)]; }

    bool operator==(const UniformGrid& other) const;
    bool operator!=(const UniformGrid& other) const { return !(*this == other); }

    /// True when bounds agree within 1e-12 and point counts match.
    bool same_layout(const UniformGrid& other) const;

    /// Symmetric about the origin on every axis (lo = -hi within 1e-12*(hi-lo)).
    bool symmetric() const;

private:
    std::vector<Axis> axes_;
    std::vector<double> spacing_;
    std::vector<std::size_t> stride_;
    std::size_t total_ = 0;
};

/// Real-valued samples on the nodes of a UniformGrid, row-major storage.
struct ScalarField {
    UniformGrid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(UniformGrid g)
        : grid(std::move(g)), values(grid.size(), 0.0) {}
    ScalarField(UniformGrid g, std::vector<double> v);

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Nonnegative ScalarField with trapezoidal mass 1.
/// Construction clips negative round-off (anything below -1e-12 of the max is
/// an error, not round-off) and rescales to unit mass.
class DensityField {
public:
    DensityField() = default;
    explicit DensityField(ScalarField f);

    const ScalarField& field() const { return field_; }
    const UniformGrid& grid() const { return field_.grid; }
    const std::vector<double>& values() const { return field_.values; }
    double operator[](std::size_t i) const { return field_.values[i]; }
    std::size_t size() const { return field_.values.size(); }

private:
    ScalarField field_;
};

// ---------------------------------------------------------------------------
// Differential and integral operators
// ---------------------------------------------------------------------------

/// Per-axis first derivative. Interior nodes use the second-order central
/// stencil, boundary nodes the one-sided second-order stencil, so the result
/// is exact on quadratics everywhere.
std::vector<ScalarField> gradient(const ScalarField& f);

/// Single-axis variant of gradient().
ScalarField gradient_axis(const ScalarField& f, int axis);

/// Sum of per-axis second differences with the Dirichlet ghost convention
/// (field = 0 one node outside the box).
ScalarField laplacian(const ScalarField& f);

/// Tensor trapezoidal quadrature of f, optionally against a weight field on
/// the same grid.
double integrate(const ScalarField& f);
double integrate(const ScalarField& f, const ScalarField& weight);

/// Trapezoidal weight of node i (product of per-axis weights, h/2 at ends).
double trapezoid_weight(const UniformGrid& g, std::size_t linear);

/// Integrate out the axes listed in `drop` (trapezoidal), renormalize the
/// result to unit mass. `drop` must be a nonempty strict subset of the axes.
DensityField marginalize(const DensityField& rho, std::span<const int> drop);

/// Discrete convolution h * sum_j kernel(x_i - x_j) f(x_j) for 1D fields.
/// The kernel must be sampled on a symmetric grid with an odd point count and
/// the same spacing as f (within 1e-12); it is treated as zero outside its
/// box. The result lives on f's grid.
ScalarField convolve(const ScalarField& f, const ScalarField& kernel);

/// Kernel value at a signed node offset: kernel sample at (center + offset),
/// zero outside the sampled range. This is the same extension convolve() uses,
/// so pairwise sums evaluated through it match convolution-based quadratures
/// exactly.
double kernel_at_offset(const ScalarField& kernel, std::int64_t offset);

/// Multilinear interpolation at a point inside the grid box (else throws
/// OutOfDomainError).
double interpolate(const ScalarField& f, std::span<const double> point);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Flat binary layout, little-endian: u64 dims, then per axis (f64 lo, f64 hi,
/// u64 points), then the row-major f64 payload.
void save_field_binary(const ScalarField& f, const std::string& path);
ScalarField load_field_binary(const std::string& path);

/// CSV with one node per line: x0,...,x{d-1},value (17 significant digits).
void save_field_csv(const ScalarField& f, const std::string& path);

/// Format a double with enough digits to round-trip (%.17g).
std::string format_double(double v);

}  // namespace mkv
