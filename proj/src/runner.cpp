#include "mkv/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mkv/grid.hpp"
#include "mkv/meanfield.hpp"
#include "mkv/nparticle.hpp"
#include "mkv/potentials.hpp"
#include "mkv/sde.hpp"

namespace mkv {

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what());
    }
}

UniformGrid axis_grid(double extent, int points) {
    return UniformGrid({{-extent, extent, points}});
}

ScalarField build_poly(const UniformGrid& g, const std::vector<double>& c) {
    return poly_potential(g, c[0], c[1], c[2]);
}

ScalarField build_kernel(const KernelSpec& k, const UniformGrid& g) {
    switch (k.kind) {
        case KernelKind::none:
            return zero_field(g);
        case KernelKind::gaussian:
            return gaussian_kernel(g, k.param);
        case KernelKind::cosine:
            return cosine_kernel(g, k.param);
        case KernelKind::bump:
            return bump_kernel(g, k.param);
        case KernelKind::table: {
            ScalarField f = load_field_binary(k.path);
            if (f.grid.dims() != 1)
                throw InvalidAxesError("kernel table must be one-dimensional: " + k.path);
            if (f.grid.same_layout(g)) return f;
            return resample_field(f, g);
        }
    }
    throw ConsistencyError("unhandled kernel kind");
}

MeanFieldPotential build_potential(const Scenario& sc, const UniformGrid& g) {
    ScalarField V0 = build_poly(g, sc.V0_coeffs);
    ScalarField v0 = build_poly(g, sc.v0_coeffs);
    ScalarField v1 = build_kernel(sc.kernel, g);
    const double coupling = sc.kernel.kind == KernelKind::none ? 0.0 : sc.g;
    return MeanFieldPotential::make(std::move(V0), std::move(v0), std::move(v1), coupling);
}

}  // namespace

ExperimentResult run_experiment(const Scenario& sc, int threads) {
    if (threads < 1) threads = 1;
    ExperimentResult result;
    const double horizon = sc.sde_enabled ? sc.sde.T : 1.0;

    const UniformGrid top = axis_grid(sc.extent, sc.points);
    const MeanFieldPotential P = stage("validate", [&] { return build_potential(sc, top); });
    result.hypotheses = stage("validate", [&] { return validate_hypotheses(P); });
    result.uniqueness_warning = P.has_interaction() && !result.hypotheses.bochner_pass;

    const MeanFieldGroundState mf =
        stage("meanfield", [&] { return solve_ground_state(P, sc.meanfield); });
    if (mf.uniqueness_warning) result.uniqueness_warning = true;

    ConvergenceReport& report = result.report;
    report.horizon = horizon;
    report.moment_order = 4.0;
    report.girsanov_constant = 0.25;
    report.uniqueness_warning = result.uniqueness_warning;
    const double I = interaction_integral(P, mf.rho0.field());
    report.mu0_identity_canonical = 2.0 * mf.E + 2.0 * I;
    report.mu0_identity_variant = 2.0 * mf.E + I;

    ConvergenceRow ref;
    ref.N = 1;
    ref.E = mf.E;
    ref.E_K = mf.E_K;
    ref.E_P = mf.E_P;
    ref.mu = mf.mu0;
    ref.entropy_per_particle = entropy_integral(mf.rho0);
    ref.moment_k = moment(mf.rho0, report.moment_order);
    report.rows.push_back(ref);

    struct SolvedN {
        MeanFieldPotential P;
        NParticleGroundState st;
    };
    std::vector<SolvedN> solved;  // kept alive for the simulation stage

    for (std::size_t i = 0; i < sc.N_list.size(); ++i) {
        const int N = sc.N_list[i];
        const int pts =
            sc.points_per_axis.empty() ? default_axis_points(N) : sc.points_per_axis[i];
        const UniformGrid axis = axis_grid(sc.extent, pts);
        const bool matches_top = axis.same_layout(top);

        MeanFieldPotential PN =
            matches_top ? P : stage("validate", [&] { return build_potential(sc, axis); });
        const MeanFieldGroundState mfN =
            matches_top ? mf
                        : stage("meanfield", [&] { return solve_ground_state(PN, sc.meanfield); });

        NParticleOptions nopts;
        nopts.eigen_tol = sc.tol_N;
        NParticleGroundState st =
            stage("nparticle", [&] { return solve_nparticle(PN, N, nopts); });

        ConvergenceRow row = stage("diagnostics", [&] {
            ConvergenceRow r;
            r.N = N;
            r.E = st.E_N;
            r.E_K = st.E_KN;
            r.E_P = st.E_PN;
            r.mu = st.muN;
            r.entropy_per_particle = entropy_per_particle(st, mfN);
            r.marginal_L1 = l1_distance(st.marginal1, mfN.rho0);
            r.marginal_TV = tv_distance(st.marginal1, mfN.rho0);
            r.marginal_W1 = wasserstein_1d(st.marginal1, mfN.rho0, 1.0);
            r.marginal_W2 = wasserstein_1d(st.marginal1, mfN.rho0, 2.0);
            const DriftDiscrepancy dd = drift_discrepancy(st, mfN, PN);
            r.drift_discrepancy = dd.direct;
            r.drift_discrepancy_formula = dd.formula;
            r.path_entropy = path_entropy(st, mfN, horizon, report.girsanov_constant);
            r.moment_k = moment(st.marginal1, report.moment_order);
            return r;
        });
        report.rows.push_back(row);

        if (sc.sde_enabled) solved.push_back({std::move(PN), std::move(st)});
    }

    if (sc.sde_enabled) {
        SimConfig cfg = sc.sde;
        cfg.threads = threads;
        const TrajectoryStats stats =
            stage("sde", [&] { return simulate_meanfield(mf.drift, P, mf.rho0, cfg); });
        report.rows[0].sde_cost = stats.J_hat;
        report.rows[0].sde_cost_se = stats.standard_error;
        report.rows[0].sde_hist_tv = stats.histogram_tv;
        result.histograms.emplace_back("meanfield", stats.histogram);
        for (std::size_t i = 0; i < solved.size(); ++i) {
            const TrajectoryStats sN =
                stage("sde", [&] { return simulate_nparticle(solved[i].st, solved[i].P, cfg); });
            ConvergenceRow& row = report.rows[1 + i];
            row.sde_cost = sN.J_hat;
            row.sde_cost_se = sN.standard_error;
            row.sde_hist_tv = sN.histogram_tv;
            result.histograms.emplace_back("N" + std::to_string(solved[i].st.N), sN.histogram);
        }
    }

    if (sc.scaling_enabled) {
        const int maxN =
            *std::max_element(sc.scaling_N_list.begin(), sc.scaling_N_list.end());
        const int pts =
            sc.scaling_points != 0 ? sc.scaling_points : default_axis_points(maxN);
        result.scaling = stage("scaling", [&] {
            const UniformGrid sgrid = axis_grid(sc.extent, pts);
            ScalarField confinement = build_poly(sgrid, sc.V0_coeffs);
            ScalarField base = bump_kernel(sgrid, sc.bump_width);
            const ScalingScenario ssc = make_scaling_scenario(
                sc.beta_list, sc.scaling_N_list, std::move(confinement), std::move(base));
            NParticleOptions nopts;
            nopts.eigen_tol = sc.tol_N;
            return scaling_sweep(ssc, sgrid, nopts, threads);
        });
        result.has_scaling = true;
    }

    stage("report", [&] {
        report.validate();
        return 0;
    });
    return result;
}

std::vector<std::string> emit_report(const ExperimentResult& result, const Scenario& sc,
                                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir.string());

    std::vector<std::string> written;
    std::vector<std::string> names;
    const auto write_text = [&](const std::string& name, const std::string& body) {
        const fs::path p = dir / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + p.string());
        out << body;
        out.flush();
        if (!out) throw IoError("write failed: " + p.string());
        written.push_back(p.string());
        names.push_back(name);
    };

    if (sc.write_csv) write_text("report.csv", result.report.to_csv());
    if (sc.write_json) write_text("report.json", result.report.to_json());
    if (result.has_scaling && sc.write_csv) write_text("scaling.csv", result.scaling.to_csv());
    if (sc.write_csv) {
        for (const auto& [label, hist] : result.histograms) {
            const std::string name = "histogram_" + label + ".csv";
            const fs::path p = dir / name;
            save_field_csv(hist.field(), p.string());
            written.push_back(p.string());
            names.push_back(name);
        }
    }

    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(sc.source_hash));
    std::string manifest = "{\n  \"tool_version\": \"0.1.0\",\n";
    manifest += "  \"scenario_hash\": \"" + std::string(hash) + "\",\n";
    manifest += "  \"seed\": " + std::to_string(sc.sde.seed) + ",\n";
    manifest += std::string("  \"uniqueness_warning\": ") +
                (result.uniqueness_warning ? "true" : "false") + ",\n";
    manifest += "  \"outputs\": [";
    for (std::size_t i = 0; i < names.size(); ++i)
        manifest += (i == 0 ? "\"" : ", \"") + names[i] + "\"";
    manifest += "]\n}\n";
    write_text("manifest.json", manifest);
    return written;
}

}  // namespace mkv
