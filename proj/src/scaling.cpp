#include "mkv/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <thread>
#include <utility>

#include "eigen_core.hpp"
#include "mkv/diagnostics.hpp"
#include "mkv/errors.hpp"

namespace mkv {

namespace {

constexpr double kUpperBoundSlack = 1e-6;
constexpr double kTrendSlack = 1e-6;
constexpr double kBetaTrendSlack = 1e-4;

}  // namespace

ScalingScenario make_scaling_scenario(std::vector<double> beta_list,
                                      std::vector<int> N_list,
                                      ScalarField confinement,
                                      ScalarField base_kernel) {
    if (beta_list.empty()) throw ConsistencyError("scaling sweep needs at least one beta");
    for (double b : beta_list)
        if (!(b > 0.0) || !(b < 1.0))
            throw InvalidProfileError("scaling exponent must lie strictly inside (0, 1)");
    if (N_list.empty()) throw ConsistencyError("scaling sweep needs at least one N");
    for (int N : N_list)
        if (N < 2 || N > kMaxDims)
            throw ConsistencyError("scaling sweep supports N in {2, .., " +
                                   std::to_string(kMaxDims) + "}");
    if (confinement.grid.dims() != 1 || base_kernel.grid.dims() != 1)
        throw InvalidGridError("scaling scenario fields must be one-dimensional");

    double kmax = 0.0;
    for (double v : base_kernel.values) kmax = std::max(kmax, std::abs(v));
    for (double v : base_kernel.values)
        if (v < -1e-12 * kmax)
            throw InvalidProfileError("scaling kernel must be nonnegative");

    std::sort(beta_list.begin(), beta_list.end());
    beta_list.erase(std::unique(beta_list.begin(), beta_list.end()), beta_list.end());
    std::sort(N_list.begin(), N_list.end());
    N_list.erase(std::unique(N_list.begin(), N_list.end()), N_list.end());

    ScalingScenario sc;
    sc.g_target = integrate(base_kernel);
    if (!(sc.g_target > 0.0))
        throw InvalidProfileError("scaling kernel must carry positive mass");
    sc.beta_list = std::move(beta_list);
    sc.N_list = std::move(N_list);
    sc.confinement = std::move(confinement);
    sc.base_kernel = std::move(base_kernel);
    return sc;
}

MeanFieldGroundState solve_local_meanfield(const ScalarField& V0, double g,
                                           const SolverOptions& opts) {
    const UniformGrid& grid = V0.grid;
    if (grid.dims() != 1)
        throw InvalidGridError("local solver expects a one-dimensional confinement");
    if (!(g >= 0.0)) throw ConsistencyError("local coupling must be nonnegative");
    if (!(opts.mixing > 0.0 && opts.mixing <= 1.0))
        throw ConsistencyError("mixing weight must lie in (0, 1]");
    if (opts.max_outer < 1) throw ConsistencyError("max_outer must be positive");
    const std::size_t n = grid.size();
    const double vol = grid.cell_volume();

    std::vector<double> phi(n, 1.0);
    if (opts.init == InitProfile::gaussian) {
        // quadratic fit of the confinement at the origin, as in the kernel solver
        const double width = grid.axis(0).hi - grid.axis(0).lo;
        double sigma2 = (width / 8.0) * (width / 8.0);
        int m = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < grid.axis(0).points; ++i)
            if (std::abs(grid.coord(0, i)) < best) {
                best = std::abs(grid.coord(0, i));
                m = i;
            }
        if (m > 0 && m + 1 < grid.axis(0).points) {
            const double h = grid.spacing(0);
            const double second =
                (V0.values[static_cast<std::size_t>(m + 1)] -
                 2.0 * V0.values[static_cast<std::size_t>(m)] +
                 V0.values[static_cast<std::size_t>(m - 1)]) /
                (h * h);
            if (second > 2e-12 && std::isfinite(second))
                sigma2 = 1.0 / std::sqrt(second);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid.coord(0, static_cast<int>(i));
            phi[i] = std::exp(-x * x / (4.0 * sigma2));
        }
    }

    detail::GroundOptions eigen_opts;
    eigen_opts.target_rel_residual = opts.eigen_tol;
    eigen_opts.max_iterations = opts.eigen_max_iters;

    auto density_of = [&](const std::vector<double>& f) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = f[i] * f[i];
        return DensityField(ScalarField{grid, std::move(r)});
    };
    auto field_at = [&](const DensityField& rho) {
        std::vector<double> W(n);
        for (std::size_t i = 0; i < n; ++i)
            W[i] = V0.values[i] + 2.0 * g * rho[i];
        return W;
    };

    DensityField rho_cur = density_of(phi);
    int outer = 0;
    double change = std::numeric_limits<double>::infinity();
    const bool fixed_field = g == 0.0;
    for (; outer < opts.max_outer; ++outer) {
        const std::vector<double> W = field_at(rho_cur);
        detail::GroundResult eig = detail::linear_ground_state(grid, W, phi, eigen_opts);
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
            mixed[i] = (1.0 - opts.mixing) * rho_cur[i] + opts.mixing * rho_new[i];
        rho_cur = DensityField(ScalarField{grid, std::move(mixed)});
        for (std::size_t i = 0; i < n; ++i) phi[i] = std::sqrt(rho_cur[i]);
    }
    if (!fixed_field && change > opts.tol)
        throw ConvergenceError("local self-consistency loop did not reach the density tolerance",
                               change);

    MeanFieldGroundState st;
    st.phi0 = ScalarField{grid, phi};
    st.rho0 = rho_cur;
    st.iterations = outer;

    const std::vector<double> W = field_at(st.rho0);
    std::vector<double> Hphi;
    detail::apply_hamiltonian(grid, W, phi, Hphi);
    st.mu0 = detail::dot_cells(grid, phi, Hphi);
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = Hphi[i] - st.mu0 * phi[i];
        num += d * d;
    }
    st.residual_norm = std::sqrt(num * vol) / std::max(1.0, std::abs(st.mu0));

    st.E_K = 2.0 * detail::dirichlet_form(st.phi0);
    double conf = 0.0, pair = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = st.rho0[i];
        conf += V0.values[i] * r;
        pair += r * r;
    }
    st.E_P = conf * vol + g * pair * vol;
    st.E = st.E_K + st.E_P;
    st.drift = optimal_drift(st.rho0);
    return st;
}

ScalingReport scaling_sweep(const ScalingScenario& sc, const UniformGrid& grid,
                            const NParticleOptions& opts, int threads) {
    if (grid.dims() != 1)
        throw InvalidGridError("scaling sweep runs on a one-dimensional axis");
    if (sc.beta_list.empty() || sc.N_list.empty())
        throw ConsistencyError("scaling scenario carries no sweep cells");
    if (threads < 1) throw ConsistencyError("thread count must be positive");

    const ScalarField V0 = sc.confinement.grid.same_layout(grid)
                               ? sc.confinement
                               : resample_field(sc.confinement, grid);
    const ScalarField none = zero_field(grid);

    ScalingReport rep;
    rep.g_target = sc.g_target;

    const MeanFieldGroundState local = solve_local_meanfield(V0, sc.g_target);
    rep.E_local = local.E;
    rep.mu_local = local.mu0;

    // per-N anchors: the same N-particle problem with the kernel left unscaled
    const ScalarField v_plain = scaled_kernel(sc.base_kernel, 0.5, 1, grid);
    const MeanFieldPotential P_anchor = MeanFieldPotential::make(V0, none, v_plain, 1.0);
    rep.anchor_energies.resize(sc.N_list.size());
    for (std::size_t j = 0; j < sc.N_list.size(); ++j)
        rep.anchor_energies[j] = solve_nparticle(P_anchor, sc.N_list[j], opts).E_N;

    const std::size_t n_cells = sc.beta_list.size() * sc.N_list.size();
    rep.cells.resize(n_cells);
    auto run_cell = [&](std::size_t c) {
        const std::size_t bi = c / sc.N_list.size();
        const std::size_t nj = c % sc.N_list.size();
        const double beta = sc.beta_list[bi];
        const int N = sc.N_list[nj];

        const ScalarField vN = scaled_kernel(sc.base_kernel, beta, N, grid);
        const MeanFieldPotential P = MeanFieldPotential::make(V0, none, vN, 1.0);
        const NParticleGroundState st = solve_nparticle(P, N, opts);

        ScalingCell& cell = rep.cells[c];
        cell.beta = beta;
        cell.N = N;
        cell.E_N = st.E_N;
        cell.mu_N = st.muN;
        cell.energy_gap = rep.E_local - st.E_N;
        cell.marginal_L1 = l1_distance(st.marginal1, local.rho0);
        cell.kernel_mass = integrate(vN);
        cell.anchor_gap = std::abs(st.E_N - rep.anchor_energies[nj]);
    };

    const int workers = std::min<int>(threads, static_cast<int>(n_cells));
    if (workers <= 1) {
        for (std::size_t c = 0; c < n_cells; ++c) run_cell(c);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t c = static_cast<std::size_t>(w); c < n_cells;
                     c += static_cast<std::size_t>(workers))
                    run_cell(c);
            });
        for (std::thread& t : pool) t.join();
    }

    // trend flags
    const std::size_t nN = sc.N_list.size();
    rep.energy_gap_decreasing_in_N = true;
    rep.marginal_decreasing_in_N = true;
    for (std::size_t bi = 0; bi < sc.beta_list.size(); ++bi)
        for (std::size_t j = 1; j < nN; ++j) {
            const ScalingCell& prev = rep.cells[bi * nN + j - 1];
            const ScalingCell& cur = rep.cells[bi * nN + j];
            if (cur.energy_gap > prev.energy_gap + kTrendSlack)
                rep.energy_gap_decreasing_in_N = false;
            if (cur.marginal_L1 > prev.marginal_L1 + kTrendSlack)
                rep.marginal_decreasing_in_N = false;
        }
    rep.anchor_monotone_in_beta = true;
    for (std::size_t j = 0; j < nN; ++j)
        for (std::size_t bi = 1; bi < sc.beta_list.size(); ++bi) {
            const ScalingCell& prev = rep.cells[(bi - 1) * nN + j];
            const ScalingCell& cur = rep.cells[bi * nN + j];
            if (prev.anchor_gap > cur.anchor_gap + kBetaTrendSlack)
                rep.anchor_monotone_in_beta = false;
        }
    rep.upper_bound_ok = true;
    for (const ScalingCell& cell : rep.cells)
        if (cell.energy_gap < -kUpperBoundSlack) rep.upper_bound_ok = false;
    return rep;
}

std::string ScalingReport::to_csv() const {
    std::string out =
        "beta,N,E_N,mu_N,energy_gap,marginal_L1,kernel_mass,anchor_gap\n";
    for (const ScalingCell& c : cells) {
        out += format_double(c.beta);
        out += ',';
        out += std::to_string(c.N);
        out += ',';
        out += format_double(c.E_N);
        out += ',';
        out += format_double(c.mu_N);
        out += ',';
        out += format_double(c.energy_gap);
        out += ',';
        out += format_double(c.marginal_L1);
        out += ',';
        out += format_double(c.kernel_mass);
        out += ',';
        out += format_double(c.anchor_gap);
        out += '\n';
    }
    return out;
}

}  // namespace mkv
