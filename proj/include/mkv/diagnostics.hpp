#pragma once

#include <string>
#include <vector>

#include "mkv/grid.hpp"
#include "mkv/meanfield.hpp"
#include "mkv/nparticle.hpp"
#include "mkv/potentials.hpp"

namespace mkv {

/// int |grad rho|^2 / rho over the nodes where rho clears the positivity
/// floor; divided by the axis count when normalized is set.
double fisher_information(const DensityField& rho, bool normalized = false);

/// KL divergence int rho1 log(rho1/rho2). Returns +infinity when rho1 carries
/// mass on nodes where rho2 sits below its floor.
double relative_entropy(const DensityField& rho1, const DensityField& rho2);

/// Shannon-type integral int rho log rho (negative for spread-out densities).
double entropy_integral(const DensityField& rho);

/// Per-particle divergence of the N-particle ground density from the tensor
/// power of the self-consistent one: (1/N) H(rho_N | rho0^N). Evaluated both
/// as a direct N-dimensional quadrature and through the marginal
/// decomposition (1/N) int rho_N log rho_N - int rho_N^(1) log rho0; returns
/// the direct value and throws ConsistencyError when the two routes disagree
/// beyond 1e-4.
double entropy_per_particle(const NParticleGroundState& stateN,
                            const MeanFieldGroundState& mf);

/// (1/2) int |rho1 - rho2|.
double tv_distance(const DensityField& rho1, const DensityField& rho2);

/// int |rho1 - rho2|.
double l1_distance(const DensityField& rho1, const DensityField& rho2);

/// Exact p-Wasserstein distance between 1D densities via the inverse-CDF
/// representation, p in [1, 2]. Quantiles are read off the cumulative
/// trapezoid CDF at midpoint u-nodes.
double wasserstein_1d(const DensityField& rho1, const DensityField& rho2, double p);

/// k-th absolute moment int |x|^k rho (Euclidean norm across axes).
double moment(const DensityField& rho, double k);

/// Transport bound valid in any dimension for p < k:
///   W_p <= 2^(1-1/p) (M_k(rho1) + M_k(rho2))^(1/k) (2 TV)^((k-p)/(kp)).
double wasserstein_bound(const DensityField& rho1, const DensityField& rho2,
                         double p, double k);

struct DriftDiscrepancy {
    double direct = 0.0;
    double formula = 0.0;
};

/// Mean-square gap per particle between the N-particle optimal drift and the
/// self-consistent drift, averaged against rho_N. `direct` is the bond
/// quadrature of |grad_i log(rho_N / rho0^N)|^2 rho_N; `formula` assembles
/// the same quantity from the energy bookkeeping, 2 E_KN + 2 int W rho_N^(1)
/// - mu0, with W the converged effective field. The two agree up to the
/// eigen-residual of the one-particle solve.
DriftDiscrepancy drift_discrepancy(const NParticleGroundState& stateN,
                                   const MeanFieldGroundState& mf,
                                   const MeanFieldPotential& P);

/// Per-particle path-space relative entropy over [0, T] for the stationary
/// particle system against N independent copies of the self-consistent
/// diffusion: entropy_per_particle + c T D_N. The Girsanov constant c must
/// be 1/4 (diffusion coefficient sqrt(2) bookkeeping) or 1/2 (alternate
/// convention kept for comparison).
double path_entropy(const NParticleGroundState& stateN,
                    const MeanFieldGroundState& mf, double T,
                    double girsanov_constant = 0.25);

/// Structural checks on Fisher information over a batch of symmetric test
/// densities: superadditivity over marginal splits and monotonicity of the
/// normalized value. Gaps are signed so that nonnegative means the property
/// holds; a sample passes when its worst gap clears -1e-6.
struct FisherStructureReport {
    int samples = 0;
    int superadditivity_passes = 0;
    int monotonicity_passes = 0;
    std::vector<double> superadditivity_gaps;  // min over splits of I_N - I_l - I_{N-l}
    std::vector<double> monotonicity_gaps;     // min over l < N of I_N/N - I_l/l
    bool all_pass = false;
};

FisherStructureReport fisher_structure_tests(const std::vector<DensityField>& samples);

/// One row of the convergence table. N = 1 is the self-consistent reference
/// row (its entropy column holds int rho0 log rho0 and the gap columns are
/// zero); rows with N >= 2 compare the N-particle solve against the
/// reference at matched resolution. The sde_* fields are NaN until a
/// simulation fills them.
struct ConvergenceRow {
    int N = 1;
    double E = 0.0;
    double E_K = 0.0;
    double E_P = 0.0;
    double mu = 0.0;
    double entropy_per_particle = 0.0;
    double marginal_L1 = 0.0;
    double marginal_TV = 0.0;
    double marginal_W1 = 0.0;
    double marginal_W2 = 0.0;
    double drift_discrepancy = 0.0;
    double drift_discrepancy_formula = 0.0;
    double path_entropy = 0.0;
    double moment_k = 0.0;
    double sde_cost;
    double sde_cost_se;
    double sde_hist_tv;

    ConvergenceRow();
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double horizon = 1.0;            // T used for the path_entropy column
    double moment_order = 4.0;       // k used for the moment_k column
    double girsanov_constant = 0.25;
    double mu0_identity_canonical = 0.0;  // 2 E + 2 I at the reference state
    double mu0_identity_variant = 0.0;    // 2 E + I, alternate bookkeeping
    bool uniqueness_warning = false;      // set when the kernel fails the Bochner check

    /// Entropy and distance sanity plus the Csiszar-Kullback and W1 <= W2
    /// inequalities on every row; throws ConsistencyError on violation.
    void validate() const;

    /// Fixed column order, 17 significant digits, one line per row.
    std::string to_csv() const;

    /// Versioned flat schema (report_version 1); unfilled sde fields are null.
    std::string to_json() const;
};

}  // namespace mkv
