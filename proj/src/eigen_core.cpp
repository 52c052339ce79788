#include "eigen_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace mkv::detail {

void apply_hamiltonian(const UniformGrid& g, const std::vector<double>& W,
                       const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t n = g.size();
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 2.0 * W[i] * x[i];

    for (int a = 0; a < g.dims(); ++a) {
        const double h = g.spacing(a);
        const double c = 4.0 / (h * h);
        const std::size_t stride = g.stride(a);
        const std::size_t pts = static_cast<std::size_t>(g.axis(a).points);
        const std::size_t line = stride * pts;
        for (std::size_t block = 0; block < n; block += line) {
            for (std::size_t off = 0; off < stride; ++off) {
                const std::size_t base = block + off;
                for (std::size_t j = 0; j < pts; ++j) {
                    const std::size_t idx = base + j * stride;
                    const double left = (j > 0) ? x[idx - stride] : 0.0;
                    const double right = (j + 1 < pts) ? x[idx + stride] : 0.0;
                    y[idx] += c * (2.0 * x[idx] - left - right);
                }
            }
        }
    }
}

double dirichlet_form(const ScalarField& phi) {
    const UniformGrid& g = phi.grid;
    const std::size_t n = g.size();
    const double vol = g.cell_volume();
    double total = 0.0;
    for (int a = 0; a < g.dims(); ++a) {
        const double h = g.spacing(a);
        const double c = vol / (h * h);
        const std::size_t stride = g.stride(a);
        const std::size_t pts = static_cast<std::size_t>(g.axis(a).points);
        const std::size_t line = stride * pts;
        for (std::size_t block = 0; block < n; block += line) {
            for (std::size_t off = 0; off < stride; ++off) {
                const std::size_t base = block + off;
                // ghost bond at the lower wall
                double prev = 0.0;
                for (std::size_t j = 0; j < pts; ++j) {
                    const double v = phi.values[base + j * stride];
                    const double d = v - prev;
                    total += c * d * d;
                    prev = v;
                }
                total += c * prev * prev;  // upper wall
            }
        }
    }
    return total;
}

double dot_cells(const UniformGrid& g, const std::vector<double>& a,
                 const std::vector<double>& b) {
    double s = 0.0;
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s * g.cell_volume();
}

namespace {

// PCG for (I + dt (H + s)) psi = b with Jacobi preconditioning. The operator
// is SPD by construction of s. Returns the iteration count.
int cg_solve(const UniformGrid& g, const std::vector<double>& W, double dt, double s,
             const std::vector<double>& b, std::vector<double>& psi, double rel_tol,
             int max_iters, std::vector<double>& scratch_h) {
    const std::size_t n = g.size();
    double diag_lap = 0.0;
    for (int a = 0; a < g.dims(); ++a) {
        const double h = g.spacing(a);
        diag_lap += 8.0 / (h * h);
    }

    std::vector<double> r(n), z(n), p(n);
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        apply_hamiltonian(g, W, v, scratch_h);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = v[i] + dt * (scratch_h[i] + s * v[i]);
    };

    std::vector<double> Ap(n);
    apply(psi, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];

    // reduction is measured against the warm-start residual, so a good
    // initial guess can never satisfy the stopping test for free
    double r0_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) r0_norm2 += r[i] * r[i];
    const double stop2 = rel_tol * rel_tol * r0_norm2;

    auto precond = [&](const std::vector<double>& rr, std::vector<double>& zz) {
        for (std::size_t i = 0; i < n; ++i) {
            const double d = 1.0 + dt * (diag_lap + 2.0 * W[i] + s);
            zz[i] = rr[i] / d;
        }
    };

    precond(r, z);
    p = z;
    double rz = 0.0, r_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rz += r[i] * z[i];
        r_norm2 += r[i] * r[i];
    }

    int it = 0;
    while (r_norm2 > stop2 && it < max_iters) {
        apply(p, Ap);
        double pAp = 0.0;
        for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        if (pAp <= 0.0) break;
        const double alpha = rz / pAp;
        r_norm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            psi[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
            r_norm2 += r[i] * r[i];
        }
        precond(r, z);
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        ++it;
    }
    return it;
}

}  // namespace

GroundResult linear_ground_state(const UniformGrid& g, const std::vector<double>& W,
                                 std::vector<double> phi_init,
                                 const GroundOptions& opts) {
    const std::size_t n = g.size();
    if (W.size() != n || phi_init.size() != n)
        throw ConsistencyError("field size does not match grid in ground-state solve");

    double w_min = W[0], w_max = W[0];
    for (double w : W) {
        w_min = std::min(w_min, w);
        w_max = std::max(w_max, w);
    }
    const double shift = -2.0 * w_min;
    double diag_lap = 0.0;
    for (int a = 0; a < g.dims(); ++a) diag_lap += 8.0 / (g.spacing(a) * g.spacing(a));
    const double lambda_max = diag_lap + 2.0 * w_max + shift;
    const double dt = 100.0 / lambda_max;

    auto normalize = [&](std::vector<double>& v) {
        const double norm = std::sqrt(dot_cells(g, v, v));
        if (!(norm > 0.0))
            throw ConvergenceError("ground-state iterate collapsed to zero", 0.0);
        const double inv = 1.0 / norm;
        for (double& x : v) x *= inv;
    };

    std::vector<double>& phi = phi_init;
    normalize(phi);

    std::vector<double> psi = phi, rhs(n), Hphi(n), scratch(n);
    double mu = 0.0, rel_res = 1.0;
    int it = 0;
    const int check_every = 5;
    for (; it < opts.max_iterations; ++it) {
        rhs = phi;
        const double cg_tol = std::clamp(0.05 * rel_res, 1e-12, 1e-3);
        cg_solve(g, W, dt, shift, rhs, psi, cg_tol, 4 * static_cast<int>(std::sqrt(double(n))) + 200,
                 scratch);
        phi = psi;
        if (opts.project && opts.project_every > 0 && (it + 1) % opts.project_every == 0)
            opts.project(phi);
        normalize(phi);
        psi = phi;

        if ((it + 1) % check_every == 0 || it + 1 == opts.max_iterations) {
            apply_hamiltonian(g, W, phi, Hphi);
            mu = dot_cells(g, phi, Hphi);
            double num = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = Hphi[i] - mu * phi[i];
                num += d * d;
            }
            rel_res = std::sqrt(num * g.cell_volume()) / std::max(1.0, std::abs(mu));
            if (rel_res <= opts.target_rel_residual) {
                ++it;
                break;
            }
        }
    }

    if (opts.project) {
        opts.project(phi);
        normalize(phi);
    }

    // Fix the overall sign, then clear round-off negatives in the far tail.
    double mass = 0.0;
    for (double v : phi) mass += v;
    if (mass < 0.0)
        for (double& v : phi) v = -v;
    double phi_max = 0.0;
    for (double v : phi) phi_max = std::max(phi_max, v);
    for (double& v : phi) {
        if (v < 0.0) {
            if (v < -1e-8 * phi_max)
                throw ConvergenceError("ground state has a significant negative part",
                                       rel_res);
            v = 0.0;
        }
    }
    normalize(phi);

    apply_hamiltonian(g, W, phi, Hphi);
    mu = dot_cells(g, phi, Hphi);
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = Hphi[i] - mu * phi[i];
        num += d * d;
    }
    rel_res = std::sqrt(num * g.cell_volume()) / std::max(1.0, std::abs(mu));
    // the tail clip above perturbs phi at the round-off scale, which on fine
    // grids (4/h^2 amplification) can nudge a just-converged residual past
    // the target; allow that margin, the loop itself still aims at the target
    if (rel_res > 1.5 * opts.target_rel_residual)
        throw ConvergenceError("inverse iteration did not reach the residual target",
                               rel_res);

    GroundResult out;
    out.phi = std::move(phi);
    out.mu = mu;
    out.rel_residual = rel_res;
    out.iterations = it;
    return out;
}

}  // namespace mkv::detail
