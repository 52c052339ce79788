#include "mkv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace mkv {

// ---------------------------------------------------------------------------
// UniformGrid
// ---------------------------------------------------------------------------

UniformGrid::UniformGrid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    const int d = static_cast<int>(axes_.size());
    if (d < 1 || d > kMaxDims)
        throw InvalidGridError("grid dims must be 1.." + std::to_string(kMaxDims) +
                               ", got " + std::to_string(d));
    spacing_.resize(axes_.size());
    for (size_t i = 0; i < axes_.size(); ++i) {
        const Axis& a = axes_[i];
        if (!(a.lo < a.hi))
            throw InvalidGridError("axis " + std::to_string(i) + ": lo must be < hi");
        if (a.points < kMinPointsPerAxis)
            throw InvalidGridError("axis " + std::to_string(i) + ": need at least " +
                                   std::to_string(kMinPointsPerAxis) + " points, got " +
                                   std::to_string(a.points));
        spacing_[i] = (a.hi - a.lo) / (a.points - 1);
    }
    stride_.assign(axes_.size(), 1);
    for (int i = d - 2; i >= 0; --i)
        stride_[static_cast<size_t>(i)] =
            stride_[static_cast<size_t>(i + 1)] * static_cast<size_t>(axes_[static_cast<size_t>(i + 1)].points);
    total_ = stride_[0] * static_cast<size_t>(axes_[0].points);
}

UniformGrid UniformGrid::tensor(const Axis& axis, int dims) {
    return UniformGrid(std::vector<Axis>(static_cast<size_t>(dims), axis));
}

double UniformGrid::cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) v *= h;
    return v;
}

std::size_t UniformGrid::index(std::span<const int> multi) const {
    std::size_t linear = 0;
    for (int d = 0; d < dims(); ++d)
        linear += stride_[static_cast<size_t>(d)] * static_cast<size_t>(multi[static_cast<size_t>(d)]);
    return linear;
}

void UniformGrid::unindex(std::size_t linear, std::span<int> multi) const {
    for (int d = 0; d < dims(); ++d) {
        multi[static_cast<size_t>(d)] = static_cast<int>(linear / stride_[static_cast<size_t>(d)]);
        linear %= stride_[static_cast<size_t>(d)];
    }
}

bool UniformGrid::operator==(const UniformGrid& other) const {
    if (axes_.size() != other.axes_.size()) return false;
    for (size_t i = 0; i < axes_.size(); ++i)
        if (axes_[i].lo != other.axes_[i].lo || axes_[i].hi != other.axes_[i].hi ||
            axes_[i].points != other.axes_[i].points)
            return false;
    return true;
}

bool UniformGrid::same_layout(const UniformGrid& other) const {
    if (axes_.size() != other.axes_.size()) return false;
    for (size_t i = 0; i < axes_.size(); ++i) {
        if (axes_[i].points != other.axes_[i].points) return false;
        if (std::abs(axes_[i].lo - other.axes_[i].lo) > 1e-12) return false;
        if (std::abs(axes_[i].hi - other.axes_[i].hi) > 1e-12) return false;
    }
    return true;
}

bool UniformGrid::symmetric() const {
    for (const Axis& a : axes_)
        if (std::abs(a.lo + a.hi) > 1e-12 * (a.hi - a.lo)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

ScalarField::ScalarField(UniformGrid g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size())
        throw InvalidGridError("field value count " + std::to_string(values.size()) +
                               " does not match grid size " + std::to_string(grid.size()));
}

DensityField::DensityField(ScalarField f) : field_(std::move(f)) {
    double mx = 0.0;
    for (double v : field_.values) mx = std::max(mx, std::abs(v));
    if (mx == 0.0) throw NormalizationError("density is identically zero");
    const double neg_tol = -1e-12 * mx;
    for (double& v : field_.values) {
        if (v < neg_tol)
            throw NormalizationError("density has negative values beyond round-off");
        if (v < 0.0) v = 0.0;
    }
    const double mass = integrate(field_);
    if (!(mass > 0.0))
        throw NormalizationError("density mass must be positive, got " + std::to_string(mass));
    const double inv = 1.0 / mass;
    for (double& v : field_.values) v *= inv;
}

// ---------------------------------------------------------------------------
// Derivatives
// ---------------------------------------------------------------------------

ScalarField gradient_axis(const ScalarField& f, int axis) {
    const UniformGrid& g = f.grid;
    if (axis < 0 || axis >= g.dims())
        throw InvalidAxesError("gradient axis out of range");
    ScalarField out(g);
    const int n = g.axis(axis).points;
    const std::size_t s = g.stride(axis);
    const double h = g.spacing(axis);
    const double inv2h = 1.0 / (2.0 * h);

    // Walk every 1D line along `axis`: outer index decomposes as
    // linear = base + i*s with i the coordinate along the axis.
    const std::size_t total = g.size();
    const std::size_t line = static_cast<std::size_t>(n) * s;
    for (std::size_t block = 0; block < total; block += line) {
        for (std::size_t off = 0; off < s; ++off) {
            const std::size_t base = block + off;
            const double* v = f.values.data();
            double* o = out.values.data();
            // one-sided second-order ends, central interior
            o[base] = (-3.0 * v[base] + 4.0 * v[base + s] - v[base + 2 * s]) * inv2h;
            for (int i = 1; i < n - 1; ++i)
                o[base + static_cast<std::size_t>(i) * s] =
                    (v[base + static_cast<std::size_t>(i + 1) * s] -
                     v[base + static_cast<std::size_t>(i - 1) * s]) * inv2h;
            const std::size_t e = base + static_cast<std::size_t>(n - 1) * s;
            o[e] = (3.0 * v[e] - 4.0 * v[e - s] + v[e - 2 * s]) * inv2h;
        }
    }
    return out;
}

std::vector<ScalarField> gradient(const ScalarField& f) {
    std::vector<ScalarField> out;
    out.reserve(static_cast<size_t>(f.grid.dims()));
    for (int d = 0; d < f.grid.dims(); ++d) out.push_back(gradient_axis(f, d));
    return out;
}

ScalarField laplacian(const ScalarField& f) {
    const UniformGrid& g = f.grid;
    ScalarField out(g);
    for (int d = 0; d < g.dims(); ++d) {
        const int n = g.axis(d).points;
        const std::size_t s = g.stride(d);
        const double invh2 = 1.0 / (g.spacing(d) * g.spacing(d));
        const std::size_t total = g.size();
        const std::size_t line = static_cast<std::size_t>(n) * s;
        for (std::size_t block = 0; block < total; block += line) {
            for (std::size_t off = 0; off < s; ++off) {
                const std::size_t base = block + off;
                const double* v = f.values.data();
                double* o = out.values.data();
                for (int i = 0; i < n; ++i) {
                    // Dirichlet ghost: values one node outside the box are 0.
                    const double left = (i > 0) ? v[base + static_cast<std::size_t>(i - 1) * s] : 0.0;
                    const double right = (i < n - 1) ? v[base + static_cast<std::size_t>(i + 1) * s] : 0.0;
                    const double c = v[base + static_cast<std::size_t>(i) * s];
                    o[base + static_cast<std::size_t>(i) * s] += (left - 2.0 * c + right) * invh2;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

double trapezoid_weight(const UniformGrid& g, std::size_t linear) {
    double w = 1.0;
    for (int d = 0; d < g.dims(); ++d) {
        const std::size_t s = g.stride(d);
        const int n = g.axis(d).points;
        const int i = static_cast<int>((linear / s) % static_cast<std::size_t>(n));
        const double h = g.spacing(d);
        w *= (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
    return w;
}

namespace {

// Trapezoidal sum written as one pass per axis would need d passes; instead
// exploit that the weight is a product over axes and accumulate directly.
// The per-node weight lookup is cheap because only the first/last index on an
// axis differs from h.
template <typename F>
double trapezoid_sum(const UniformGrid& g, F&& value_at) {
    const std::size_t total = g.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < total; ++i) acc += value_at(i) * trapezoid_weight(g, i);
    return acc;
}

}  // namespace

double integrate(const ScalarField& f) {
    // Fast path: 1D avoids the per-node weight product.
    if (f.grid.dims() == 1) {
        const double h = f.grid.spacing(0);
        const std::size_t n = f.values.size();
        double acc = 0.5 * (f.values[0] + f.values[n - 1]);
        for (std::size_t i = 1; i + 1 < n; ++i) acc += f.values[i];
        return acc * h;
    }
    return trapezoid_sum(f.grid, [&](std::size_t i) { return f.values[i]; });
}

double integrate(const ScalarField& f, const ScalarField& weight) {
    if (!f.grid.same_layout(weight.grid))
        throw IncompatibleGridsError("integrate: weight field lives on a different grid");
    return trapezoid_sum(f.grid, [&](std::size_t i) { return f.values[i] * weight.values[i]; });
}

// ---------------------------------------------------------------------------
// Marginalization
// ---------------------------------------------------------------------------

DensityField marginalize(const DensityField& rho, std::span<const int> drop) {
    const UniformGrid& g = rho.grid();
    const int d = g.dims();
    if (drop.empty()) throw InvalidAxesError("marginalize: empty axis list");
    std::vector<bool> dropped(static_cast<size_t>(d), false);
    for (int a : drop) {
        if (a < 0 || a >= d) throw InvalidAxesError("marginalize: axis out of range");
        if (dropped[static_cast<size_t>(a)])
            throw InvalidAxesError("marginalize: duplicate axis");
        dropped[static_cast<size_t>(a)] = true;
    }
    std::vector<UniformGrid::Axis> kept;
    std::vector<int> kept_ids;
    for (int a = 0; a < d; ++a)
        if (!dropped[static_cast<size_t>(a)]) {
            kept.push_back(g.axis(a));
            kept_ids.push_back(a);
        }
    if (kept.empty())
        throw InvalidAxesError("marginalize: cannot drop every axis");

    UniformGrid out_grid{kept};
    ScalarField out(out_grid);

    std::array<int, kMaxDims> multi{};
    const std::size_t total = g.size();
    for (std::size_t i = 0; i < total; ++i) {
        g.unindex(i, std::span<int>(multi.data(), static_cast<size_t>(d)));
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            if (!dropped[static_cast<size_t>(a)]) continue;
            const int n = g.axis(a).points;
            const int ia = multi[static_cast<size_t>(a)];
            w *= (ia == 0 || ia == n - 1) ? 0.5 * g.spacing(a) : g.spacing(a);
        }
        std::size_t out_idx = 0;
        for (size_t k = 0; k < kept_ids.size(); ++k)
            out_idx += out_grid.stride(static_cast<int>(k)) *
                       static_cast<std::size_t>(multi[static_cast<size_t>(kept_ids[k])]);
        out.values[out_idx] += rho[i] * w;
    }
    return DensityField(std::move(out));
}

// ---------------------------------------------------------------------------
// Convolution (zero-padded radix-2 FFT)
// ---------------------------------------------------------------------------

namespace {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& z : a) z *= inv;
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

double kernel_at_offset(const ScalarField& kernel, std::int64_t offset) {
    const std::int64_t n = static_cast<std::int64_t>(kernel.values.size());
    const std::int64_t c = (n - 1) / 2;
    const std::int64_t idx = c + offset;
    if (idx < 0 || idx >= n) return 0.0;
    return kernel.values[static_cast<std::size_t>(idx)];
}

ScalarField convolve(const ScalarField& f, const ScalarField& kernel) {
    if (f.grid.dims() != 1 || kernel.grid.dims() != 1)
        throw InvalidGridError("convolve: only 1D fields are supported");
    const double hf = f.grid.spacing(0);
    const double hk = kernel.grid.spacing(0);
    if (std::abs(hf - hk) > 1e-12)
        throw IncompatibleGridsError("convolve: field and kernel spacing differ");
    if (!kernel.grid.symmetric())
        throw InvalidGridError("convolve: kernel grid must be symmetric about 0");
    if (kernel.grid.axis(0).points % 2 == 0)
        throw InvalidGridError("convolve: kernel needs an odd point count (center node)");

    const std::size_t m = f.values.size();
    const std::size_t k = kernel.values.size();
    const std::size_t c = (k - 1) / 2;
    const std::size_t n = next_pow2(m + k - 1);

    std::vector<std::complex<double>> fa(n), fb(n);
    for (std::size_t i = 0; i < m; ++i) fa[i] = f.values[i];
    for (std::size_t i = 0; i < k; ++i) fb[i] = kernel.values[i];
    fft_inplace(fa, false);
    fft_inplace(fb, false);
    for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
    fft_inplace(fa, true);

    ScalarField out(f.grid);
    for (std::size_t i = 0; i < m; ++i) out.values[i] = hf * fa[c + i].real();
    return out;
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

double interpolate(const ScalarField& f, std::span<const double> point) {
    const UniformGrid& g = f.grid;
    const int d = g.dims();
    if (static_cast<int>(point.size()) != d)
        throw InvalidAxesError("interpolate: point dimension mismatch");

    std::array<int, kMaxDims> cell{};
    std::array<double, kMaxDims> frac{};
    for (int a = 0; a < d; ++a) {
        const auto& ax = g.axis(a);
        const double p = point[static_cast<size_t>(a)];
        if (p < ax.lo || p > ax.hi)
            throw OutOfDomainError("interpolate: coordinate " + std::to_string(p) +
                                   " outside [" + std::to_string(ax.lo) + ", " +
                                   std::to_string(ax.hi) + "] on axis " + std::to_string(a));
        double u = (p - ax.lo) / g.spacing(a);
        int i0 = static_cast<int>(u);
        if (i0 > ax.points - 2) i0 = ax.points - 2;  // p == hi lands here
        cell[static_cast<size_t>(a)] = i0;
        frac[static_cast<size_t>(a)] = u - i0;
    }

    double acc = 0.0;
    const int corners = 1 << d;
    for (int mask = 0; mask < corners; ++mask) {
        double w = 1.0;
        std::size_t idx = 0;
        for (int a = 0; a < d; ++a) {
            const int bit = (mask >> a) & 1;
            w *= bit ? frac[static_cast<size_t>(a)] : 1.0 - frac[static_cast<size_t>(a)];
            idx += g.stride(a) * static_cast<std::size_t>(cell[static_cast<size_t>(a)] + bit);
        }
        acc += w * f.values[idx];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

void put_u64(std::ofstream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(os, u);
}

std::uint64_t get_u64(std::ifstream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("field file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& is) {
    const std::uint64_t u = get_u64(is);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

void save_field_binary(const ScalarField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    put_u64(os, static_cast<std::uint64_t>(f.grid.dims()));
    for (int d = 0; d < f.grid.dims(); ++d) {
        put_f64(os, f.grid.axis(d).lo);
        put_f64(os, f.grid.axis(d).hi);
        put_u64(os, static_cast<std::uint64_t>(f.grid.axis(d).points));
    }
    for (double v : f.values) put_f64(os, v);
    if (!os) throw IoError("write failed for " + path);
}

ScalarField load_field_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    const std::uint64_t dims = get_u64(is);
    if (dims < 1 || dims > static_cast<std::uint64_t>(kMaxDims))
        throw IoError(path + ": bad dimension count " + std::to_string(dims));
    std::vector<UniformGrid::Axis> axes;
    for (std::uint64_t d = 0; d < dims; ++d) {
        const double lo = get_f64(is);
        const double hi = get_f64(is);
        const std::uint64_t pts = get_u64(is);
        axes.push_back({lo, hi, static_cast<int>(pts)});
    }
    UniformGrid g{std::move(axes)};
    std::vector<double> vals(g.size());
    for (double& v : vals) v = get_f64(is);
    return ScalarField(std::move(g), std::move(vals));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void save_field_csv(const ScalarField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    const int d = f.grid.dims();
    for (int a = 0; a < d; ++a) os << "x" << a << ",";
    os << "value\n";
    std::array<int, kMaxDims> multi{};
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        f.grid.unindex(i, std::span<int>(multi.data(), static_cast<size_t>(d)));
        for (int a = 0; a < d; ++a)
            os << format_double(f.grid.coord(a, multi[static_cast<size_t>(a)])) << ",";
        os << format_double(f.values[i]) << "\n";
    }
    if (!os) throw IoError("write failed for " + path);
}

}  // namespace mkv
