#pragma once

// Internal machinery shared by the self-consistent and N-particle solvers:
// matrix-free application of  H = -4 Lap + 2 W  with Dirichlet ghost nodes,
// Jacobi-preconditioned CG for the backward-Euler step, and fixed-shift
// inverse iteration for the ground state.

#include <functional>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/grid.hpp"

namespace mkv::detail {

/// y = (-4 Lap + 2 W) x, ghost nodes outside the box read as zero.
void apply_hamiltonian(const UniformGrid& g, const std::vector<double>& W,
                       const std::vector<double>& x, std::vector<double>& y);

/// <phi, -Lap phi> written as the sum over bonds (including the ghost bonds
/// at the boundary) of (delta phi / h)^2 times the cell volume. Agrees with
/// the stencil quadratic form exactly, which keeps energy bookkeeping and
/// Rayleigh quotients consistent to round-off.
double dirichlet_form(const ScalarField& phi);

/// Cell-volume weighted inner product (rectangle rule).
double dot_cells(const UniformGrid& g, const std::vector<double>& a,
                 const std::vector<double>& b);

struct GroundResult {
    std::vector<double> phi;  // nonnegative, unit rectangle-rule L2 norm
    double mu = 0.0;          // Rayleigh quotient of H
    double rel_residual = 0.0;
    int iterations = 0;
};

struct GroundOptions {
    double target_rel_residual = 1e-11;
    int max_iterations = 20000;
    /// optional projection applied to the iterate every `project_every` steps
    /// and at output (the N-particle solver symmetrizes here)
    std::function<void(std::vector<double>&)> project;
    int project_every = 10;
};

/// Ground state of H = -4 Lap + 2 W by inverse iteration on I + dt (H + s)
/// with s = -2 min W (making the matrix an M-matrix) and dt set for a
/// condition number near 100. Throws ConvergenceError when the residual
/// target is not met within the iteration budget.
GroundResult linear_ground_state(const UniformGrid& g, const std::vector<double>& W,
                                 std::vector<double> phi_init,
                                 const GroundOptions& opts);

}  // namespace mkv::detail
