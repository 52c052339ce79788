#include "mkv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "eigen_core.hpp"
#include "mkv/errors.hpp"

namespace mkv {

namespace {

constexpr double kEntropyFloorRel = 1e-14;
constexpr double kFisherFloorRel = 1e-12;
constexpr double kStructureSlack = 1e-6;
constexpr int kQuantileNodes = 4096;

double max_value(const std::vector<double>& v) {
    double mx = 0.0;
    for (double x : v) mx = std::max(mx, x);
    return mx;
}

void require_same_grid(const DensityField& a, const DensityField& b,
                       const char* what) {
    if (!a.grid().same_layout(b.grid()))
        throw IncompatibleGridsError(std::string(what) +
                                     ": densities live on different grids");
}

void require_tensor_grid(const UniformGrid& g) {
    for (int a = 1; a < g.dims(); ++a) {
        if (g.axis(a).lo != g.axis(0).lo || g.axis(a).hi != g.axis(0).hi ||
            g.axis(a).points != g.axis(0).points)
            throw InvalidAxesError("symmetric-density operation requires identical axes");
    }
}

void require_matching_axis(const UniformGrid& gN, const UniformGrid& g1,
                           const char* what) {
    if (g1.dims() != 1 || gN.axis(0).lo != g1.axis(0).lo ||
        gN.axis(0).hi != g1.axis(0).hi || gN.axis(0).points != g1.axis(0).points)
        throw IncompatibleGridsError(std::string(what) +
                                     ": particle grid does not match the reference axis");
}

// sum over all bonds of 4 (cell/h^2) Phi_i Phi_j (u_i - u_j)^2 with
// Phi the product of phi1 over axes and u = phiN / Phi; written in the
// ratio form (phiN_i sqrt(r) - phiN_j / sqrt(r))^2, r = phi1[j+1]/phi1[j],
// which needs no N-dimensional product evaluation. Bonds touching a
// nonpositive phi1 node carry zero weight and are skipped. Equals N times
// the mean-square drift gap when phi1 solves the one-particle problem.
double drift_gap_bonds(const ScalarField& phiN, const std::vector<double>& phi1) {
    const UniformGrid& g = phiN.grid;
    const int d = g.dims();
    const double cell = g.cell_volume();
    double acc = 0.0;
    for (int a = 0; a < d; ++a) {
        const std::size_t stride = g.stride(a);
        const int m = g.axis(a).points;
        const double h = g.spacing(a);
        const double w = 4.0 * cell / (h * h);
        const std::size_t line = stride * static_cast<std::size_t>(m);
        for (std::size_t block = 0; block < g.size(); block += line) {
            for (std::size_t off = 0; off < stride; ++off) {
                const std::size_t base = block + off;
                for (int j = 0; j + 1 < m; ++j) {
                    const double pa = phi1[static_cast<std::size_t>(j)];
                    const double pb = phi1[static_cast<std::size_t>(j + 1)];
                    if (!(pa > 0.0) || !(pb > 0.0)) continue;
                    const double s = std::sqrt(pb / pa);
                    const double vi =
                        phiN.values[base + static_cast<std::size_t>(j) * stride];
                    const double vj =
                        phiN.values[base + static_cast<std::size_t>(j + 1) * stride];
                    const double t = vi * s - vj / s;
                    acc += w * t * t;
                }
            }
        }
    }
    return acc;
}

std::vector<double> cumulative_cdf(const DensityField& rho) {
    const std::vector<double>& v = rho.values();
    const double h = rho.grid().spacing(0);
    std::vector<double> F(v.size(), 0.0);
    for (std::size_t i = 1; i < v.size(); ++i)
        F[i] = F[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    const double total = F.back();
    if (!(total > 0.0))
        throw NormalizationError("cumulative distribution has no mass");
    for (double& f : F) f /= total;
    return F;
}

double quantile(const std::vector<double>& F, const UniformGrid& g, double u) {
    const auto it = std::lower_bound(F.begin(), F.end(), u);
    if (it == F.begin()) return g.coord(0, 0);
    if (it == F.end()) return g.coord(0, static_cast<int>(F.size()) - 1);
    const std::size_t idx = static_cast<std::size_t>(it - F.begin());
    const double denom = F[idx] - F[idx - 1];
    if (!(denom > 0.0)) return g.coord(0, static_cast<int>(idx));
    return g.coord(0, static_cast<int>(idx) - 1) +
           g.spacing(0) * (u - F[idx - 1]) / denom;
}

std::string json_number(double v) {
    if (!std::isfinite(v)) return "null";
    return format_double(v);
}

}  // namespace

double fisher_information(const DensityField& rho, bool normalized) {
    const std::vector<ScalarField> grads = gradient(rho.field());
    const std::vector<double>& v = rho.values();
    const double floor = kFisherFloorRel * max_value(v);
    ScalarField integrand(rho.grid());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] <= floor) continue;
        double s = 0.0;
        for (const ScalarField& ga : grads) s += ga.values[i] * ga.values[i];
        integrand.values[i] = s / v[i];
    }
    double out = integrate(integrand);
    if (normalized) out /= rho.grid().dims();
    return out;
}

double relative_entropy(const DensityField& rho1, const DensityField& rho2) {
    require_same_grid(rho1, rho2, "relative_entropy");
    const std::vector<double>& p = rho1.values();
    const std::vector<double>& q = rho2.values();
    const double fp = kEntropyFloorRel * max_value(p);
    ScalarField integrand(rho1.grid());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= fp) continue;
        // genuine support violation: the reference carries no mass at all
        // where rho1 does (positive tail values, however small, stay finite)
        if (!(q[i] > 0.0)) return std::numeric_limits<double>::infinity();
        integrand.values[i] = p[i] * std::log(p[i] / q[i]);
    }
    return integrate(integrand);
}

double entropy_integral(const DensityField& rho) {
    const std::vector<double>& v = rho.values();
    const double floor = kEntropyFloorRel * max_value(v);
    ScalarField integrand(rho.grid());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > floor) integrand.values[i] = v[i] * std::log(v[i]);
    }
    return integrate(integrand);
}

double entropy_per_particle(const NParticleGroundState& stateN,
                            const MeanFieldGroundState& mf) {
    const UniformGrid& gN = stateN.rhoN.grid();
    const UniformGrid& g1 = mf.rho0.grid();
    require_matching_axis(gN, g1, "entropy_per_particle");
    const int N = gN.dims();
    const std::vector<double>& rN = stateN.rhoN.values();
    const std::vector<double>& r0 = mf.rho0.values();
    const double fN = kEntropyFloorRel * max_value(rN);
    const double f0 = kEntropyFloorRel * max_value(r0);

    std::vector<double> log0(r0.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < r0.size(); ++i)
        if (r0[i] > f0) log0[i] = std::log(r0[i]);

    ScalarField direct_f(gN);
    std::vector<int> multi(static_cast<std::size_t>(N));
    for (std::size_t i = 0; i < rN.size(); ++i) {
        if (rN[i] <= fN) continue;
        gN.unindex(i, multi);
        double s = std::log(rN[i]);
        bool inside = true;
        for (int a = 0; a < N; ++a) {
            const double l = log0[static_cast<std::size_t>(multi[static_cast<std::size_t>(a)])];
            if (std::isnan(l)) {
                inside = false;
                break;
            }
            s -= l;
        }
        if (inside) direct_f.values[i] = rN[i] * s;
    }
    const double direct = integrate(direct_f) / N;

    ScalarField self_f(gN);
    for (std::size_t i = 0; i < rN.size(); ++i)
        if (rN[i] > fN) self_f.values[i] = rN[i] * std::log(rN[i]);
    ScalarField cross_f(g1);
    const std::vector<double>& m1 = stateN.marginal1.values();
    const double fm = kEntropyFloorRel * max_value(m1);
    for (std::size_t i = 0; i < m1.size(); ++i)
        if (m1[i] > fm && !std::isnan(log0[i])) cross_f.values[i] = m1[i] * log0[i];
    const double decomposition = integrate(self_f) / N - integrate(cross_f);

    if (std::abs(direct - decomposition) > 1e-4)
        throw ConsistencyError(
            "entropy per particle: direct quadrature and marginal decomposition "
            "disagree by " +
            format_double(std::abs(direct - decomposition)));
    return direct;
}

double tv_distance(const DensityField& rho1, const DensityField& rho2) {
    require_same_grid(rho1, rho2, "tv_distance");
    ScalarField integrand(rho1.grid());
    for (std::size_t i = 0; i < rho1.size(); ++i)
        integrand.values[i] = std::abs(rho1[i] - rho2[i]);
    return 0.5 * integrate(integrand);
}

double l1_distance(const DensityField& rho1, const DensityField& rho2) {
    require_same_grid(rho1, rho2, "l1_distance");
    ScalarField integrand(rho1.grid());
    for (std::size_t i = 0; i < rho1.size(); ++i)
        integrand.values[i] = std::abs(rho1[i] - rho2[i]);
    return integrate(integrand);
}

double wasserstein_1d(const DensityField& rho1, const DensityField& rho2, double p) {
    if (rho1.grid().dims() != 1 || rho2.grid().dims() != 1)
        throw InvalidAxesError(
            "wasserstein_1d expects one-dimensional densities; use "
            "wasserstein_bound in higher dimension");
    if (!(p >= 1.0) || !(p <= 2.0))
        throw InvalidExponentError("wasserstein_1d requires p in [1, 2]");
    const std::vector<double> F1 = cumulative_cdf(rho1);
    const std::vector<double> F2 = cumulative_cdf(rho2);
    double acc = 0.0;
    for (int j = 0; j < kQuantileNodes; ++j) {
        const double u = (j + 0.5) / kQuantileNodes;
        const double d = std::abs(quantile(F1, rho1.grid(), u) -
                                  quantile(F2, rho2.grid(), u));
        acc += std::pow(d, p);
    }
    return std::pow(acc / kQuantileNodes, 1.0 / p);
}

double moment(const DensityField& rho, double k) {
    if (!(k > 0.0)) throw InvalidExponentError("moment order must be positive");
    const UniformGrid& g = rho.grid();
    const int d = g.dims();
    ScalarField integrand(g);
    std::vector<int> multi(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < rho.size(); ++i) {
        g.unindex(i, multi);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const double x = g.coord(a, multi[static_cast<std::size_t>(a)]);
            r2 += x * x;
        }
        integrand.values[i] = std::pow(std::sqrt(r2), k) * rho[i];
    }
    return integrate(integrand);
}

double wasserstein_bound(const DensityField& rho1, const DensityField& rho2,
                         double p, double k) {
    if (!(p >= 1.0)) throw InvalidExponentError("transport bound requires p >= 1");
    if (!(p < k)) throw InvalidExponentError("transport bound requires p < k");
    const double tv = tv_distance(rho1, rho2);
    const double mass = moment(rho1, k) + moment(rho2, k);
    const double theta = (k - p) / (k * p);
    return std::pow(2.0, 1.0 - 1.0 / p) * std::pow(mass, 1.0 / k) *
           std::pow(2.0 * tv, theta);
}

DriftDiscrepancy drift_discrepancy(const NParticleGroundState& stateN,
                                   const MeanFieldGroundState& mf,
                                   const MeanFieldPotential& P) {
    const UniformGrid& gN = stateN.phiN.grid;
    const UniformGrid& g1 = P.grid();
    require_matching_axis(gN, g1, "drift_discrepancy");
    require_matching_axis(gN, mf.rho0.grid(), "drift_discrepancy");
    const int N = gN.dims();

    // Re-solve the one-particle problem at the converged effective field to a
    // tight residual; the identity below is exact only at an eigenpair.
    const ScalarField W = effective_field(P, mf.rho0);
    detail::GroundOptions opts;
    opts.target_rel_residual = 1e-11;
    opts.max_iterations = 20000;
    const detail::GroundResult ref =
        detail::linear_ground_state(g1, W.values, mf.phi0.values, opts);

    DriftDiscrepancy out;
    out.direct = drift_gap_bonds(stateN.phiN, ref.phi) / N;

    std::vector<int> multi(static_cast<std::size_t>(N));
    double wint = 0.0;
    for (std::size_t i = 0; i < gN.size(); ++i) {
        gN.unindex(i, multi);
        double s = 0.0;
        for (int a = 0; a < N; ++a)
            s += W.values[static_cast<std::size_t>(multi[static_cast<std::size_t>(a)])];
        wint += s * stateN.phiN.values[i] * stateN.phiN.values[i];
    }
    wint *= gN.cell_volume() / N;
    out.formula = 2.0 * stateN.E_KN + 2.0 * wint - ref.mu;
    return out;
}

double path_entropy(const NParticleGroundState& stateN,
                    const MeanFieldGroundState& mf, double T,
                    double girsanov_constant) {
    if (!(T > 0.0)) throw ConsistencyError("path-entropy horizon must be positive");
    if (girsanov_constant != 0.25 && girsanov_constant != 0.5)
        throw ConsistencyError("Girsanov constant must be 1/4 or 1/2");
    const double entropy = entropy_per_particle(stateN, mf);
    const double gap = drift_gap_bonds(stateN.phiN, mf.phi0.values) / stateN.N;
    return entropy + girsanov_constant * T * gap;
}

FisherStructureReport fisher_structure_tests(const std::vector<DensityField>& samples) {
    FisherStructureReport rep;
    rep.samples = static_cast<int>(samples.size());
    for (const DensityField& s : samples) {
        const UniformGrid& g = s.grid();
        require_tensor_grid(g);
        const int N = g.dims();
        if (N < 2)
            throw InvalidAxesError("structure checks need at least two particles");
        const double IN = fisher_information(s, false);
        std::vector<double> Il(static_cast<std::size_t>(N), 0.0);
        for (int l = 1; l < N; ++l)
            Il[static_cast<std::size_t>(l)] = fisher_information(marginal_k(s, l), false);
        double sgap = std::numeric_limits<double>::infinity();
        double mgap = std::numeric_limits<double>::infinity();
        for (int l = 1; l < N; ++l) {
            sgap = std::min(sgap, IN - Il[static_cast<std::size_t>(l)] -
                                      Il[static_cast<std::size_t>(N - l)]);
            mgap = std::min(mgap, IN / N - Il[static_cast<std::size_t>(l)] / l);
        }
        rep.superadditivity_gaps.push_back(sgap);
        rep.monotonicity_gaps.push_back(mgap);
        if (sgap >= -kStructureSlack) ++rep.superadditivity_passes;
        if (mgap >= -kStructureSlack) ++rep.monotonicity_passes;
    }
    rep.all_pass = rep.samples > 0 && rep.superadditivity_passes == rep.samples &&
                   rep.monotonicity_passes == rep.samples;
    return rep;
}

ConvergenceRow::ConvergenceRow()
    : sde_cost(std::numeric_limits<double>::quiet_NaN()),
      sde_cost_se(std::numeric_limits<double>::quiet_NaN()),
      sde_hist_tv(std::numeric_limits<double>::quiet_NaN()) {}

void ConvergenceReport::validate() const {
    for (const ConvergenceRow& r : rows) {
        if (r.marginal_L1 < 0.0 || r.marginal_TV < 0.0 || r.marginal_W1 < 0.0 ||
            r.marginal_W2 < 0.0)
            throw ConsistencyError("report row carries a negative distance");
        if (r.moment_k < 0.0)
            throw ConsistencyError("report row carries a negative moment");
        if (r.N < 2) continue;
        if (r.entropy_per_particle < -1e-10)
            throw ConsistencyError("relative entropy per particle is negative");
        if (r.drift_discrepancy < -1e-10)
            throw ConsistencyError("drift discrepancy is negative");
        if (r.marginal_TV >
            std::sqrt(2.0 * std::max(0.0, r.entropy_per_particle)) + 1e-8)
            throw ConsistencyError("total variation exceeds the entropy bound");
        if (r.marginal_W1 > r.marginal_W2 + 1e-8)
            throw ConsistencyError("W1 exceeds W2");
        if (std::abs(r.marginal_L1 - 2.0 * r.marginal_TV) > 1e-10)
            throw ConsistencyError("L1 and TV columns are inconsistent");
    }
}

std::string ConvergenceReport::to_csv() const {
    std::string out =
        "N,E,E_K,E_P,mu,entropy_per_particle,marginal_L1,marginal_TV,"
        "marginal_W1,marginal_W2,drift_discrepancy,drift_discrepancy_formula,"
        "path_entropy,moment_k,sde_cost,sde_cost_se,sde_hist_tv\n";
    for (const ConvergenceRow& r : rows) {
        out += std::to_string(r.N);
        const double cols[] = {r.E,
                               r.E_K,
                               r.E_P,
                               r.mu,
                               r.entropy_per_particle,
                               r.marginal_L1,
                               r.marginal_TV,
                               r.marginal_W1,
                               r.marginal_W2,
                               r.drift_discrepancy,
                               r.drift_discrepancy_formula,
                               r.path_entropy,
                               r.moment_k,
                               r.sde_cost,
                               r.sde_cost_se,
                               r.sde_hist_tv};
        for (double c : cols) out += "," + format_double(c);
        out += "\n";
    }
    return out;
}

std::string ConvergenceReport::to_json() const {
    std::string out = "{\n  \"report_version\": 1,\n";
    out += "  \"horizon\": " + json_number(horizon) + ",\n";
    out += "  \"moment_order\": " + json_number(moment_order) + ",\n";
    out += "  \"girsanov_constant\": " + json_number(girsanov_constant) + ",\n";
    out += "  \"mu0_identity_canonical\": " + json_number(mu0_identity_canonical) + ",\n";
    out += "  \"mu0_identity_variant\": " + json_number(mu0_identity_variant) + ",\n";
    out += std::string("  \"uniqueness_warning\": ") +
           (uniqueness_warning ? "true" : "false") + ",\n";
    out += "  \"rows\": [\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ConvergenceRow& r = rows[i];
        out += "    {\"N\": " + std::to_string(r.N);
        const std::pair<const char*, double> fields[] = {
            {"E", r.E},
            {"E_K", r.E_K},
            {"E_P", r.E_P},
            {"mu", r.mu},
            {"entropy_per_particle", r.entropy_per_particle},
            {"marginal_L1", r.marginal_L1},
            {"marginal_TV", r.marginal_TV},
            {"marginal_W1", r.marginal_W1},
            {"marginal_W2", r.marginal_W2},
            {"drift_discrepancy", r.drift_discrepancy},
            {"drift_discrepancy_formula", r.drift_discrepancy_formula},
            {"path_entropy", r.path_entropy},
            {"moment_k", r.moment_k},
            {"sde_cost", r.sde_cost},
            {"sde_cost_se", r.sde_cost_se},
            {"sde_hist_tv", r.sde_hist_tv}};
        for (const auto& [name, value] : fields)
            out += std::string(", \"") + name + "\": " + json_number(value);
        out += i + 1 < rows.size() ? "},\n" : "}\n";
    }
    out += "  ]\n}\n";
    return out;
}

}  // namespace mkv
