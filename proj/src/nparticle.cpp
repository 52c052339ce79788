#include "mkv/nparticle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "eigen_core.hpp"
#include "mkv/errors.hpp"

namespace mkv {

namespace {

void check_tensor_grid(const UniformGrid& g) {
    for (int a = 1; a < g.dims(); ++a) {
        if (g.axis(a).lo != g.axis(0).lo || g.axis(a).hi != g.axis(0).hi ||
            g.axis(a).points != g.axis(0).points)
            throw InvalidAxesError("operation requires a tensor grid with identical axes");
    }
}

std::vector<std::vector<std::size_t>> permutation_strides(const UniformGrid& g) {
    const int d = g.dims();
    std::vector<int> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<std::size_t>> out;
    do {
        std::vector<std::size_t> s(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a)
            s[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])] = g.stride(a);
        out.push_back(std::move(s));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

void symmetrize_values(const UniformGrid& g,
                       const std::vector<std::vector<std::size_t>>& perms,
                       std::vector<double>& v) {
    const int d = g.dims();
    if (d == 1 || perms.size() <= 1) return;
    const std::size_t n = g.size();
    std::vector<double> out(n);
    std::vector<int> multi(static_cast<std::size_t>(d));
    const double inv = 1.0 / static_cast<double>(perms.size());
    for (std::size_t i = 0; i < n; ++i) {
        g.unindex(i, multi);
        double acc = 0.0;
        for (const auto& s : perms) {
            std::size_t idx = 0;
            for (int a = 0; a < d; ++a)
                idx += static_cast<std::size_t>(multi[static_cast<std::size_t>(a)]) *
                       s[static_cast<std::size_t>(a)];
            acc += v[idx];
        }
        out[i] = acc * inv;
    }
    v = std::move(out);
}

int budget_points(std::size_t max_nodes, int N) {
    int s = static_cast<int>(std::pow(static_cast<double>(max_nodes), 1.0 / N));
    auto nodes = [&](int p) {
        std::size_t t = 1;
        for (int k = 0; k < N; ++k) t *= static_cast<std::size_t>(p);
        return t;
    };
    while (s > 1 && nodes(s) > max_nodes) --s;
    while (nodes(s + 1) <= max_nodes) ++s;
    return s;
}

}  // namespace

ScalarField symmetrize(const ScalarField& f) {
    check_tensor_grid(f.grid);
    ScalarField out = f;
    const auto perms = permutation_strides(f.grid);
    symmetrize_values(f.grid, perms, out.values);
    return out;
}

NParticleGroundState solve_nparticle(const MeanFieldPotential& P, int N,
                                     const NParticleOptions& opts) {
    if (N < 2 || N > kMaxDims)
        throw ConsistencyError("particle number must lie in {2, 3, 4}");
    const UniformGrid& g1 = P.grid();
    const int pts = g1.axis(0).points;
    std::size_t nodes = 1;
    for (int k = 0; k < N; ++k) nodes *= static_cast<std::size_t>(pts);
    if (nodes > opts.max_nodes)
        throw ResolutionError("tensor grid exceeds the node budget",
                              budget_points(opts.max_nodes, N));

    const ScalarField VN = assemble_VN(P, N);
    const UniformGrid& g = VN.grid;

    // single-particle warm start: ground state of the confinement + self part
    std::vector<double> W1(g1.size());
    for (std::size_t i = 0; i < g1.size(); ++i)
        W1[i] = P.V0.values[i] + P.v0.values[i];
    std::vector<double> phi1(g1.size());
    {
        const double width = g1.axis(0).hi - g1.axis(0).lo;
        const double sigma2 = (width / 8.0) * (width / 8.0);
        for (int i = 0; i < pts; ++i) {
            const double x = g1.coord(0, i);
            phi1[static_cast<std::size_t>(i)] = std::exp(-x * x / (4.0 * sigma2));
        }
        detail::GroundOptions o1;
        o1.target_rel_residual = std::min(1e-10, opts.eigen_tol);
        o1.max_iterations = opts.eigen_max_iters;
        phi1 = detail::linear_ground_state(g1, W1, std::move(phi1), o1).phi;
    }

    std::vector<double> phi(g.size());
    {
        std::vector<int> multi(static_cast<std::size_t>(N));
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.unindex(i, multi);
            double p = 1.0;
            for (int a = 0; a < N; ++a)
                p *= phi1[static_cast<std::size_t>(multi[static_cast<std::size_t>(a)])];
            phi[i] = p;
        }
    }

    const auto perms = permutation_strides(g);
    detail::GroundOptions eo;
    eo.target_rel_residual = opts.eigen_tol;
    eo.max_iterations = opts.eigen_max_iters;
    eo.project_every = opts.symmetrize_every;
    eo.project = [&](std::vector<double>& v) { symmetrize_values(g, perms, v); };

    detail::GroundResult eig = detail::linear_ground_state(g, VN.values, std::move(phi), eo);

    NParticleGroundState st;
    st.N = N;
    st.phiN = ScalarField{g, eig.phi};
    std::vector<double> rho(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) rho[i] = eig.phi[i] * eig.phi[i];
    st.rhoN = DensityField(ScalarField{g, std::move(rho)});
    st.muN = eig.mu;
    st.residual_norm = eig.rel_residual;
    st.iterations = eig.iterations;

    const double kinetic = 2.0 * detail::dirichlet_form(st.phiN);
    double pot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        pot += VN.values[i] * st.phiN.values[i] * st.phiN.values[i];
    pot *= g.cell_volume();
    st.E_KN = kinetic / N;
    st.E_PN = pot / N;
    st.E_N = st.E_KN + st.E_PN;
    st.marginal1 = marginal_k(st.rhoN, 1);
    return st;
}

EnergyBreakdown energy_n(const ScalarField& phiN, const MeanFieldPotential& P) {
    const UniformGrid& g = phiN.grid;
    check_tensor_grid(g);
    const int N = g.dims();
    if (N < 2) throw InvalidAxesError("energy_n expects an N-particle profile");
    const UniformGrid& g1 = P.grid();
    if (g.axis(0).lo != g1.axis(0).lo || g.axis(0).hi != g1.axis(0).hi ||
        g.axis(0).points != g1.axis(0).points)
        throw IncompatibleGridsError("profile axes do not match the potential grid");

    const double norm2 = detail::dot_cells(g, phiN.values, phiN.values);
    if (std::abs(norm2 - 1.0) > 1e-8)
        throw NormalizationError("energy_n requires a unit L2-normalized profile");

    const ScalarField VN = assemble_VN(P, N);
    EnergyBreakdown out;
    out.E_K = 2.0 * detail::dirichlet_form(phiN) / N;
    double pot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        pot += VN.values[i] * phiN.values[i] * phiN.values[i];
    out.E_P = pot * g.cell_volume() / N;
    out.E = out.E_K + out.E_P;
    return out;
}

DensityField marginal_k(const DensityField& rhoN, int k) {
    const int N = rhoN.grid().dims();
    if (k < 1 || k > N) throw InvalidAxesError("marginal order out of range");
    if (k == N) return rhoN;
    std::vector<int> drop;
    for (int a = k; a < N; ++a) drop.push_back(a);
    return marginalize(rhoN, drop);
}

std::vector<ScalarField> optimal_drift_n(const DensityField& rhoN) {
    std::vector<ScalarField> out;
    for (int a = 0; a < rhoN.grid().dims(); ++a)
        out.push_back(optimal_drift_axis(rhoN, a));
    return out;
}

}  // namespace mkv
