#include "mkv/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "eigen_core.hpp"
#include "mkv/errors.hpp"

namespace mkv {

namespace {

constexpr double kDriftFloorRel = 1e-12;
constexpr double kBondFloorRel = 1e-30;
constexpr double kTailFloorRel = 1e-12;
constexpr double kTailSlack = 0.05;

struct PotentialParts {
    double confinement = 0.0;  // int V0 rho
    double interaction = 0.0;  // int v0 rho + g int (v1*rho) rho
};

// Rectangle-rule potential integrals of a raw (cell-normalized) density.
PotentialParts potential_parts(const MeanFieldPotential& P,
                               const std::vector<double>& rho_raw) {
    const UniformGrid& g = P.grid();
    const std::size_t n = g.size();
    const double vol = g.cell_volume();
    PotentialParts out;
    for (std::size_t i = 0; i < n; ++i) {
        out.confinement += P.V0.values[i] * rho_raw[i];
        out.interaction += P.v0.values[i] * rho_raw[i];
    }
    out.confinement *= vol;
    out.interaction *= vol;
    if (P.has_interaction()) {
        ScalarField rho_field{g, rho_raw};
        ScalarField conv = convolve(rho_field, P.v1);
        double pair = 0.0;
        for (std::size_t i = 0; i < n; ++i) pair += conv.values[i] * rho_raw[i];
        out.interaction += P.g * pair * vol;
    }
    return out;
}

// Width of the starting Gaussian from a quadratic fit of the confinement
// near the origin, with a box-width fallback for flat or tabulated profiles.
double fitted_sigma2(const MeanFieldPotential& P) {
    const UniformGrid& g = P.grid();
    const int n = g.axis(0).points;
    int m = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double a = std::abs(g.coord(0, i));
        if (a < best) {
            best = a;
            m = i;
        }
    }
    const double width = g.axis(0).hi - g.axis(0).lo;
    double sigma2 = (width / 8.0) * (width / 8.0);
    if (m > 0 && m + 1 < n) {
        const double h = g.spacing(0);
        const double second =
            (P.V0.values[m + 1] - 2.0 * P.V0.values[m] + P.V0.values[m - 1]) / (h * h);
        const double c2 = 0.5 * second;
        if (c2 > 1e-12 && std::isfinite(c2)) sigma2 = 1.0 / std::sqrt(2.0 * c2);
    }
    return sigma2;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double d = n * sxx - sx * sx;
    LineFit f;
    if (std::abs(d) < 1e-300) return f;
    f.slope = (n * sxy - sx * sy) / d;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

}  // namespace

EnergyBreakdown energy(const ScalarField& phi, const MeanFieldPotential& P) {
    const UniformGrid& g = P.grid();
    if (!phi.grid.same_layout(g))
        throw IncompatibleGridsError("profile grid does not match the potential grid");
    const std::size_t n = g.size();
    const double norm2 = detail::dot_cells(g, phi.values, phi.values);
    if (std::abs(norm2 - 1.0) > 1e-8)
        throw NormalizationError("energy requires a unit L2-normalized profile");

    std::vector<double> rho_raw(n);
    for (std::size_t i = 0; i < n; ++i) rho_raw[i] = phi.values[i] * phi.values[i];

    EnergyBreakdown out;
    out.E_K = 2.0 * detail::dirichlet_form(phi);
    const PotentialParts parts = potential_parts(P, rho_raw);
    out.E_P = parts.confinement + parts.interaction;
    out.E = out.E_K + out.E_P;
    return out;
}

double interaction_integral(const MeanFieldPotential& P, const ScalarField& rho) {
    if (!rho.grid.same_layout(P.grid()))
        throw IncompatibleGridsError("density grid does not match the potential grid");
    return potential_parts(P, rho.values).interaction;
}

MeanFieldGroundState solve_ground_state(const MeanFieldPotential& P,
                                        const SolverOptions& opts) {
    const UniformGrid& g = P.grid();
    if (!(opts.mixing > 0.0 && opts.mixing <= 1.0))
        throw ConsistencyError("mixing weight must lie in (0, 1]");
    if (opts.max_outer < 1) throw ConsistencyError("max_outer must be positive");
    const std::size_t n = g.size();

    bool uniqueness_warning = false;
    if (opts.check_hypotheses && P.has_interaction())
        uniqueness_warning = !bochner_check(P.v1).bochner_pass;

    std::vector<double> phi(n, 1.0);  // uniform start unless fitted below
    if (opts.init == InitProfile::gaussian) {
        const double sigma2 = fitted_sigma2(P);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = g.coord(0, static_cast<int>(i));
            phi[i] = std::exp(-x * x / (4.0 * sigma2));
        }
    }

    detail::GroundOptions eigen_opts;
    eigen_opts.target_rel_residual = opts.eigen_tol;
    eigen_opts.max_iterations = opts.eigen_max_iters;

    auto density_of = [&](const std::vector<double>& f) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = f[i] * f[i];
        return DensityField(ScalarField{g, std::move(r)});
    };

    DensityField rho_cur = density_of(phi);
    detail::GroundResult eig;
    int outer = 0;
    double change = std::numeric_limits<double>::infinity();
    const bool fixed_field = !P.has_interaction();
    for (; outer < opts.max_outer; ++outer) {
        ScalarField W = effective_field(P, rho_cur);
        eig = detail::linear_ground_state(g, W.values, phi, eigen_opts);
        phi = eig.phi;
        DensityField rho_new = density_of(phi);
        change = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            change = std::max(change, std::abs(rho_new[i] - rho_cur[i]));
        if (fixed_field || change <= opts.tol) {
            rho_cur = std::move(rho_new);
            ++outer;
            break;
        }
        std::vector<double> mixed(n);
        for (std::size_t i = 0; i < n; ++i)
            mixed[i] = (1.0 - opts.mixing) * rho_cur[i] +
                       opts.mixing * rho_new[i];
        rho_cur = DensityField(ScalarField{g, std::move(mixed)});
        for (std::size_t i = 0; i < n; ++i) phi[i] = std::sqrt(rho_cur[i]);
    }
    if (!fixed_field && change > opts.tol)
        throw ConvergenceError("self-consistency loop did not reach the density tolerance",
                               change);

    MeanFieldGroundState st;
    st.phi0 = ScalarField{g, phi};
    st.rho0 = rho_cur;
    st.iterations = outer;
    st.uniqueness_warning = uniqueness_warning;

    // Final figures against the converged density.
    ScalarField W = effective_field(P, st.rho0);
    std::vector<double> Hphi;
    detail::apply_hamiltonian(g, W.values, phi, Hphi);
    st.mu0 = detail::dot_cells(g, phi, Hphi);
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = Hphi[i] - st.mu0 * phi[i];
        num += d * d;
    }
    st.residual_norm =
        std::sqrt(num * g.cell_volume()) / std::max(1.0, std::abs(st.mu0));

    const EnergyBreakdown eb = energy(st.phi0, P);
    st.E = eb.E;
    st.E_K = eb.E_K;
    st.E_P = eb.E_P;
    st.drift = optimal_drift(st.rho0);
    return st;
}

double chemical_potential(const MeanFieldGroundState& state,
                          const MeanFieldPotential& P) {
    const EnergyBreakdown eb = energy(state.phi0, P);
    std::vector<double> rho_raw(state.phi0.values.size());
    for (std::size_t i = 0; i < rho_raw.size(); ++i)
        rho_raw[i] = state.phi0.values[i] * state.phi0.values[i];
    const double I = potential_parts(P, rho_raw).interaction;
    return 2.0 * eb.E + 2.0 * I;
}

double residual(const MeanFieldGroundState& state, const MeanFieldPotential& P) {
    const UniformGrid& g = P.grid();
    ScalarField W = effective_field(P, state.rho0);
    std::vector<double> Hphi;
    detail::apply_hamiltonian(g, W.values, state.phi0.values, Hphi);
    double num = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = Hphi[i] - state.mu0 * state.phi0.values[i];
        num += d * d;
    }
    return std::sqrt(num * g.cell_volume()) / std::max(1.0, std::abs(state.mu0));
}

ScalarField optimal_drift_axis(const DensityField& rho, int axis) {
    const UniformGrid& g = rho.grid();
    if (axis < 0 || axis >= g.dims())
        throw InvalidAxesError("drift axis out of range");
    const std::size_t n = g.size();
    double rho_max = 0.0;
    for (double v : rho.values()) rho_max = std::max(rho_max, v);
    const double floor = kDriftFloorRel * rho_max;

    ScalarField out{g, std::vector<double>(n, 0.0)};
    const double h = g.spacing(axis);
    const std::size_t stride = g.stride(axis);
    const std::size_t pts = static_cast<std::size_t>(g.axis(axis).points);
    const std::size_t line = stride * pts;

    std::vector<double> logr(pts);
    std::vector<char> ok(pts);
    std::vector<double> alpha(pts);
    for (std::size_t block = 0; block < n; block += line) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t base = block + off;
            for (std::size_t j = 0; j < pts; ++j) {
                const double v = rho[base + j * stride];
                ok[j] = v >= floor;
                logr[j] = ok[j] ? std::log(v) : 0.0;
            }
            for (std::size_t j = 0; j < pts; ++j) {
                alpha[j] = 0.0;
                if (!ok[j]) continue;
                const bool lo = j > 0 && ok[j - 1];
                const bool hi = j + 1 < pts && ok[j + 1];
                if (lo && hi)
                    alpha[j] = (logr[j + 1] - logr[j - 1]) / (2.0 * h);
                else if (hi)
                    alpha[j] = (logr[j + 1] - logr[j]) / h;
                else if (lo)
                    alpha[j] = (logr[j] - logr[j - 1]) / h;
            }
            // clamp outward: inadmissible nodes copy the nearest admissible one
            std::ptrdiff_t last = -1;
            std::vector<std::ptrdiff_t> nearest(pts, -1);
            for (std::size_t j = 0; j < pts; ++j) {
                if (ok[j]) last = static_cast<std::ptrdiff_t>(j);
                nearest[j] = last;
            }
            last = -1;
            for (std::size_t j = pts; j-- > 0;) {
                if (ok[j]) last = static_cast<std::ptrdiff_t>(j);
                if (!ok[j]) {
                    const std::ptrdiff_t left = nearest[j];
                    const std::ptrdiff_t right = last;
                    std::ptrdiff_t pick = -1;
                    if (left >= 0 && right >= 0)
                        pick = (static_cast<std::ptrdiff_t>(j) - left <=
                                right - static_cast<std::ptrdiff_t>(j))
                                   ? left
                                   : right;
                    else if (left >= 0)
                        pick = left;
                    else if (right >= 0)
                        pick = right;
                    if (pick >= 0) alpha[j] = alpha[static_cast<std::size_t>(pick)];
                }
            }
            for (std::size_t j = 0; j < pts; ++j)
                out.values[base + j * stride] = alpha[j];
        }
    }
    return out;
}

ScalarField optimal_drift(const DensityField& rho) {
    if (rho.grid().dims() != 1)
        throw InvalidAxesError("optimal_drift expects a one-dimensional density");
    return optimal_drift_axis(rho, 0);
}

std::vector<double> optimal_drift_bonds(const DensityField& rho) {
    const UniformGrid& g = rho.grid();
    if (g.dims() != 1)
        throw InvalidAxesError("optimal_drift_bonds expects a one-dimensional density");
    const std::size_t n = g.size();
    const double h = g.spacing(0);
    double rho_max = 0.0;
    for (double v : rho.values()) rho_max = std::max(rho_max, v);
    const double floor = kBondFloorRel * rho_max;

    std::vector<double> bonds(n - 1, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double ra = rho[i];
        const double rb = rho[i + 1];
        if (ra < floor || rb < floor) continue;
        const double pa = std::sqrt(ra);
        const double pb = std::sqrt(rb);
        bonds[i] = 2.0 * (pb - pa) / (h * std::sqrt(pa * pb));
    }
    return bonds;
}

double stationary_control_cost(const DensityField& rho,
                               std::span<const double> bond_drift,
                               const MeanFieldPotential& P) {
    const UniformGrid& g = rho.grid();
    if (g.dims() != 1)
        throw InvalidAxesError("stationary_control_cost expects a 1D density");
    if (!g.same_layout(P.grid()))
        throw IncompatibleGridsError("density grid does not match the potential grid");
    const std::size_t n = g.size();
    if (bond_drift.size() != n - 1)
        throw ConsistencyError("bond drift must have one value per grid bond");
    const double h = g.spacing(0);

    double quad = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double w = std::sqrt(rho[i] * rho[i + 1]);
        quad += bond_drift[i] * bond_drift[i] * w;
    }
    quad *= 0.5 * h;

    const PotentialParts parts = potential_parts(P, rho.values());
    return quad + parts.confinement + parts.interaction;
}

TailBoundReport tail_bound_check(const DensityField& rho,
                                 std::span<const double> radius,
                                 std::span<const double> vbar,
                                 double inner_radius) {
    const UniformGrid& g = rho.grid();
    if (g.dims() != 1)
        throw InvalidAxesError("tail_bound_check expects a one-dimensional density");
    if (radius.size() != vbar.size() || radius.size() < 2)
        throw ConsistencyError("confinement envelope needs matching radius/value samples");
    if (!(inner_radius >= 0.0))
        throw ConsistencyError("inner_radius must be nonnegative");

    // cumulative s(r) = int_0^r sqrt(max(vbar, 0))
    const std::size_t m = radius.size();
    std::vector<double> s(m, 0.0);
    for (std::size_t j = 1; j < m; ++j) {
        const double a = std::sqrt(std::max(vbar[j - 1], 0.0));
        const double b = std::sqrt(std::max(vbar[j], 0.0));
        s[j] = s[j - 1] + 0.5 * (a + b) * (radius[j] - radius[j - 1]);
    }
    auto s_at = [&](double r) {
        if (r <= radius.front()) return s.front();
        if (r >= radius.back()) return s.back();
        std::size_t j = 1;
        while (radius[j] < r) ++j;
        const double t = (r - radius[j - 1]) / (radius[j] - radius[j - 1]);
        return (1.0 - t) * s[j - 1] + t * s[j];
    };

    double rho_max = 0.0;
    for (double v : rho.values()) rho_max = std::max(rho_max, v);
    const double floor = kTailFloorRel * rho_max;

    std::vector<double> xs_sq, xs_s, ys;
    const int n = g.axis(0).points;
    for (int i = 0; i < n; ++i) {
        const double x = g.coord(0, i);
        const double r = std::abs(x);
        const double v = rho[static_cast<std::size_t>(i)];
        if (r < inner_radius || v < floor) continue;
        xs_sq.push_back(r * r);
        xs_s.push_back(s_at(r));
        ys.push_back(std::log(v));
    }

    TailBoundReport rep;
    rep.samples = static_cast<int>(ys.size());
    if (rep.samples < 8) return rep;

    const LineFit up = least_squares(xs_sq, ys);
    rep.a2 = -up.slope;
    rep.a4 = up.intercept;
    double worst_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ys.size(); ++i)
        worst_up = std::max(worst_up, ys[i] - (up.slope * xs_sq[i] + up.intercept));
    rep.worst_upper_violation = worst_up;
    rep.upper_pass = rep.a2 > 0.0 && worst_up <= kTailSlack;

    const LineFit low = least_squares(xs_s, ys);
    rep.a1 = -low.slope;
    rep.a3 = low.intercept;
    double worst_low = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ys.size(); ++i)
        worst_low = std::max(worst_low, (low.slope * xs_s[i] + low.intercept) - ys[i]);
    rep.worst_lower_violation = worst_low;
    rep.lower_pass = rep.a1 > 0.0 && worst_low <= kTailSlack;

    rep.pass = rep.upper_pass && rep.lower_pass;
    return rep;
}

TailBoundReport tail_bound_check(const DensityField& rho,
                                 const MeanFieldPotential& P,
                                 double inner_radius) {
    const UniformGrid& g = P.grid();
    if (!rho.grid().same_layout(g))
        throw IncompatibleGridsError("density grid does not match the potential grid");
    const int n = g.axis(0).points;
    const double lo = g.axis(0).lo, hi = g.axis(0).hi;
    std::vector<double> radius, vbar;
    for (int i = 0; i < n; ++i) {
        const double r = g.coord(0, i);
        if (r < 0.0) continue;
        double v = P.V0.values[static_cast<std::size_t>(i)];
        const double mirrored = -r;
        if (mirrored >= lo && mirrored <= hi) {
            const double coords[1] = {mirrored};
            v = std::min(v, interpolate(P.V0, coords));
        }
        radius.push_back(r);
        vbar.push_back(v);
    }
    return tail_bound_check(rho, radius, vbar, inner_radius);
}

}  // namespace mkv
