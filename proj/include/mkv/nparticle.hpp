#pragma once

#include <vector>

#include "mkv/grid.hpp"
#include "mkv/meanfield.hpp"
#include "mkv/potentials.hpp"

namespace mkv {

struct NParticleOptions {
    double eigen_tol = 1e-9;  // relative eigen-residual
    int eigen_max_iters = 20000;
    std::size_t max_nodes = 2000000;  // tensor-grid budget
    int symmetrize_every = 10;        // projection cadence during iteration
};

struct NParticleGroundState {
    int N = 0;
    ScalarField phiN;    // symmetric, unit rectangle-rule L2 norm
    DensityField rhoN;
    double muN = 0.0;    // Rayleigh quotient of -4 Lap + 2 V_N
    double E_N = 0.0;    // per-particle energy muN / (2N)
    double E_KN = 0.0;
    double E_PN = 0.0;
    DensityField marginal1;
    double residual_norm = 0.0;
    int iterations = 0;
};

/// Ground state of the symmetrized N-particle operator -4 Lap + 2 V_N on the
/// tensor power of the potential grid, N in {2, 3, 4}. Warm starts from the
/// product of the single-particle ground state and projects onto symmetric
/// functions during the iteration. Throws ResolutionError when the tensor
/// grid would exceed max_nodes, with a workable per-axis count.
NParticleGroundState solve_nparticle(const MeanFieldPotential& P, int N,
                                     const NParticleOptions& opts = {});

/// Per-particle energy breakdown of an arbitrary normalized N-particle
/// profile: E_K = 2 int |grad phi|^2 / N, E_P = int V_N phi^2 / N.
EnergyBreakdown energy_n(const ScalarField& phiN, const MeanFieldPotential& P);

/// First k-particle marginal of a symmetric N-particle density (the
/// remaining axes integrated out).
DensityField marginal_k(const DensityField& rhoN, int k);

/// Optimal per-axis drift components grad_i log rho, one field per particle.
std::vector<ScalarField> optimal_drift_n(const DensityField& rhoN);

/// Average of a field over all permutations of its axes. Requires a tensor
/// grid (all axes identical).
ScalarField symmetrize(const ScalarField& f);

}  // namespace mkv
