#pragma once

#include <span>
#include <vector>

#include "mkv/grid.hpp"
#include "mkv/potentials.hpp"

namespace mkv {

/// Total, kinetic, and potential parts of the free energy
///   E(rho) = 2 int |grad phi|^2 + int V0 rho + int v0 rho + g int (v1*rho) rho
/// with phi = sqrt(rho). All quadratures are rectangle-rule so the breakdown
/// is exactly compatible with the discrete Euler-Lagrange equation.
struct EnergyBreakdown {
    double E = 0.0;
    double E_K = 0.0;
    double E_P = 0.0;
};

enum class InitProfile { gaussian, uniform };

struct SolverOptions {
    double tol = 1e-9;      // sup-norm change of the density between outer steps
    int max_outer = 500;
    double mixing = 0.5;    // density mixing weight in (0, 1]
    InitProfile init = InitProfile::gaussian;
    double eigen_tol = 1e-11;  // relative eigen-residual inside each outer step
    int eigen_max_iters = 20000;
    bool check_hypotheses = true;  // kernel positivity check, failure only warns
};

struct MeanFieldGroundState {
    ScalarField phi0;    // sqrt of the density, unit rectangle-rule L2 norm
    DensityField rho0;
    double mu0 = 0.0;    // Rayleigh quotient of -4 Lap + 2 W(., rho0)
    double E = 0.0;
    double E_K = 0.0;
    double E_P = 0.0;
    ScalarField drift;   // optimal feedback control grad(log rho0)
    double residual_norm = 0.0;  // relative L2 eigen-residual
    int iterations = 0;          // outer self-consistency steps taken
    bool uniqueness_warning = false;  // kernel failed the positivity check
};

/// Self-consistent ground state of -4 Lap phi + 2 W(., rho) phi = mu phi with
/// W = effective_field and rho = phi^2. Fixed-point iteration with linear
/// density mixing; each step solves the frozen-field eigenproblem by inverse
/// iteration. Throws ConvergenceError when the outer loop stalls.
MeanFieldGroundState solve_ground_state(const MeanFieldPotential& P,
                                        const SolverOptions& opts = {});

/// Energy of an arbitrary normalized profile phi >= 0 (unit rectangle-rule
/// L2 norm within 1e-8, else NormalizationError).
EnergyBreakdown energy(const ScalarField& phi, const MeanFieldPotential& P);

/// I(rho) = int v0 rho + g int (v1*rho) rho, the part of the energy that
/// enters the chemical potential twice: mu = 2 E + 2 I.
double interaction_integral(const MeanFieldPotential& P, const ScalarField& rho);

/// Chemical potential recomputed from the energy identity mu = 2 E + 2 I.
/// Agrees with state.mu0 (a Rayleigh quotient) up to round-off because both
/// sides use the same bond-form kinetic term and cell quadrature.
double chemical_potential(const MeanFieldGroundState& state,
                          const MeanFieldPotential& P);

/// Relative L2 residual of the Euler-Lagrange equation at the state.
double residual(const MeanFieldGroundState& state, const MeanFieldPotential& P);

/// Component along `axis` of the optimal drift grad(log rho): central
/// differences of log rho where the density is above 1e-12 of its maximum,
/// clamped outward to the nearest admissible node along the axis.
ScalarField optimal_drift_axis(const DensityField& rho, int axis);

/// One-dimensional convenience wrapper for optimal_drift_axis.
ScalarField optimal_drift(const DensityField& rho);

/// Optimal drift evaluated on grid bonds (midpoints) of a 1D density, in the
/// form 2 (phi_{i+1} - phi_i) / (h sqrt(phi_i phi_{i+1})). With this
/// discretization the control cost of the optimal drift reproduces the
/// kinetic energy exactly, bond by bond.
std::vector<double> optimal_drift_bonds(const DensityField& rho);

/// Stationary control cost J(alpha, rho) = (1/2) int alpha^2 rho + int V(., rho) rho
/// for a bond-valued drift on a 1D density. The quadratic term is weighted by
/// the geometric mean of the densities at the bond endpoints.
double stationary_control_cost(const DensityField& rho,
                               std::span<const double> bond_drift,
                               const MeanFieldPotential& P);

struct TailBoundReport {
    bool pass = false;
    bool lower_pass = false;
    bool upper_pass = false;
    double a1 = 0.0;  // lower envelope rate: rho >= c3 exp(-a1 s(x))
    double a2 = 0.0;  // upper envelope rate: rho <= c4 exp(-a2 x^2)
    double a3 = 0.0;  // fitted lower intercept, log units
    double a4 = 0.0;  // fitted upper intercept, log units
    double worst_lower_violation = 0.0;  // log units, pass needs <= slack
    double worst_upper_violation = 0.0;
    int samples = 0;
};

/// Checks the two-sided tail envelopes of a 1D density outside |x| >= inner_radius:
/// log rho against x^2 for the Gaussian upper bound, and against
/// s(x) = int_0^|x| sqrt(max(vbar, 0)) for the confinement-rate lower bound.
/// `radius`/`vbar` give the radial profile of the confinement envelope.
/// Both fits must have positive rates and pointwise violations at most
/// 0.05 log units. Only nodes with rho >= 1e-12 max rho are used.
TailBoundReport tail_bound_check(const DensityField& rho,
                                 std::span<const double> radius,
                                 std::span<const double> vbar,
                                 double inner_radius = 2.0);

/// Convenience overload building the radial envelope from the confinement:
/// vbar(r) = min over available signs of V0(+-r).
TailBoundReport tail_bound_check(const DensityField& rho,
                                 const MeanFieldPotential& P,
                                 double inner_radius = 2.0);

}  // namespace mkv
