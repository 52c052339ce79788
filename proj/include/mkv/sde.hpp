#pragma once

#include <cstdint>
#include <vector>

#include "mkv/grid.hpp"
#include "mkv/meanfield.hpp"
#include "mkv/nparticle.hpp"
#include "mkv/potentials.hpp"

namespace mkv {

enum class InitialCondition { point, density };

struct SimConfig {
    double dt = 1e-3;
    double T = 100.0;
    double burn_in = 10.0;
    int n_paths = 64;       // at least 16, for the block error estimate
    std::uint64_t seed = 1;
    int bins = 128;
    InitialCondition initial = InitialCondition::density;
    std::vector<double> start;  // point initialization, one entry per coordinate
    int threads = 0;            // 0 picks the hardware count
};

struct TrajectoryStats {
    double J_hat = 0.0;           // time- and path-averaged running cost
    double standard_error = 0.0;  // from 16 path blocks
    DensityField histogram;       // bin-center density of pooled samples
    double histogram_tv = 0.0;    // TV(histogram, reference bin masses)
    std::size_t n_samples = 0;    // pooled post-burn-in samples
    int discarded_paths = 0;
};

/// Euler-Maruyama for dX = alpha(X) dt + sqrt(2) dW on the drift's grid, with
/// the running cost |alpha|^2/2 + V0 + v0 + g (v1 * rho_ref) accumulated
/// after burn-in. Paths are clamped to the box; a path that turns non-finite
/// is discarded, and more than 1% discards raises InstabilityError. rho_ref
/// fixes the cost's measure argument, the density initialization, and the
/// histogram reference.
TrajectoryStats simulate_meanfield(const ScalarField& drift,
                                   const MeanFieldPotential& P,
                                   const DensityField& rho_ref,
                                   const SimConfig& cfg);

/// Joint N-coordinate version driven by the per-particle drift components of
/// the N-particle ground state; the cost is the per-particle normalized
/// |A|^2/2 + V_N/N and the histogram pools all coordinates.
TrajectoryStats simulate_nparticle(const NParticleGroundState& stateN,
                                   const MeanFieldPotential& P,
                                   const SimConfig& cfg);

/// TV distance between the empirical bin masses of stats.histogram and the
/// masses rho_ref assigns to the same bins. Throws when the histogram holds
/// no samples.
double stationarity_check(const TrajectoryStats& stats, const DensityField& rho_ref);

}  // namespace mkv
