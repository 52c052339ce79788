#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/grid.hpp"
#include "mkv/meanfield.hpp"
#include "mkv/potentials.hpp"

using namespace mkv;

namespace {

UniformGrid box1d(int points, double half_width = 8.0) {
    return UniformGrid({{-half_width, half_width, points}});
}


MeanFieldPotential harmonic(const UniformGrid& g) {
    return MeanFieldPotential::make(poly_potential(g, 0.0, 1.0, 0.0), zero_field(g),
                                    zero_field(g), 0.0);
}

MeanFieldPotential interacting(const UniformGrid& g, double g_coupling) {
    return MeanFieldPotential::make(poly_potential(g, 0.0, 1.0, 0.0),
                                    poly_potential(g, 0.0, 0.1, 0.0),
                                    gaussian_kernel(g, 1.0), g_coupling);
}

double cell_norm(const UniformGrid& g, const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s * g.cell_volume());
}

// ---------------------------------------------------------------------------
// Independent reference solver: Thomas-algorithm inverse iteration for the
// frozen-field eigenproblem plus an unmixed trapezoid bookkeeping path.
// ---------------------------------------------------------------------------

std::vector<double> thomas_solve(const std::vector<double>& diag, double off,
                                 std::vector<double> b) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), x(n);
    c[0] = off / diag[0];
    b[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = 1.0 / (diag[i] - off * c[i - 1]);
        c[i] = off * m;
        b[i] = (b[i] - off * b[i - 1]) * m;
    }
    x[n - 1] = b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = b[i] - c[i] * x[i + 1];
    return x;
}

struct RefEigen {
    std::vector<double> phi;
    double mu;
};

RefEigen reference_eigen(const UniformGrid& g, const std::vector<double>& W,
                         std::vector<double> phi) {
    const std::size_t n = g.size();
    const double h = g.spacing(0);
    double w_min = W[0];
    for (double w : W) w_min = std::min(w_min, w);
    const double shift = std::max(0.0, -2.0 * w_min) + 1.0;
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = 8.0 / (h * h) + 2.0 * W[i] + shift;
    const double off = -4.0 / (h * h);

    auto rayleigh = [&](const std::vector<double>& p, double* res) {
        double mu = 0.0, num = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double left = i > 0 ? p[i - 1] : 0.0;
            const double right = i + 1 < n ? p[i + 1] : 0.0;
            const double Hp = 4.0 * (2.0 * p[i] - left - right) / (h * h) + 2.0 * W[i] * p[i];
            mu += p[i] * Hp * h;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double left = i > 0 ? p[i - 1] : 0.0;
            const double right = i + 1 < n ? p[i + 1] : 0.0;
            const double Hp = 4.0 * (2.0 * p[i] - left - right) / (h * h) + 2.0 * W[i] * p[i];
            const double d = Hp - mu * p[i];
            num += d * d * h;
        }
        if (res) *res = std::sqrt(num) / std::max(1.0, std::abs(mu));
        return mu;
    };

    double inv = 1.0 / cell_norm(g, phi);
    for (double& v : phi) v *= inv;
    double mu = 0.0;
    for (int it = 0; it < 5000; ++it) {
        phi = thomas_solve(diag, off, phi);
        inv = 1.0 / cell_norm(g, phi);
        for (double& v : phi) v *= inv;
        double res = 0.0;
        mu = rayleigh(phi, &res);
        if (res < 1e-13) break;
    }
    double mass = 0.0;
    for (double v : phi) mass += v;
    if (mass < 0.0)
        for (double& v : phi) v = -v;
    return {phi, mu};
}

struct RefState {
    std::vector<double> rho;  // trapezoid-normalized
    double mu;
};

RefState reference_selfconsistent(const MeanFieldPotential& P, double kernel_sigma) {
    const UniformGrid& g = P.grid();
    const std::size_t n = g.size();
    const double h = g.spacing(0);

    std::vector<double> w(n, h);
    w.front() = 0.5 * h;
    w.back() = 0.5 * h;

    auto normalize_trap = [&](std::vector<double>& r) {
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) mass += w[i] * r[i];
        for (double& v : r) v /= mass;
    };

    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = g.coord(0, static_cast<int>(i));
        rho[i] = std::exp(-x * x);
    }
    normalize_trap(rho);

    std::vector<double> phi(n, 1.0);
    double mu = 0.0;
    for (int outer = 0; outer < 4000; ++outer) {
        // analytic kernel, direct O(n^2) convolution, trapezoid mean of v0
        double v0_mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) v0_mean += w[i] * P.v0.values[i] * rho[i];
        std::vector<double> field(n);
        for (std::size_t i = 0; i < n; ++i) {
            double conv = 0.0;
            if (P.g > 0.0) {
                const double xi = g.coord(0, static_cast<int>(i));
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = xi - g.coord(0, static_cast<int>(j));
                    conv += std::exp(-d * d / (2.0 * kernel_sigma * kernel_sigma)) * rho[j];
                }
                conv *= h;
            }
            field[i] = P.V0.values[i] + P.v0.values[i] + v0_mean + 2.0 * P.g * conv;
        }
        const RefEigen eig = reference_eigen(g, field, phi);
        phi = eig.phi;
        mu = eig.mu;
        std::vector<double> rho_new(n);
        for (std::size_t i = 0; i < n; ++i) rho_new[i] = phi[i] * phi[i];
        normalize_trap(rho_new);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            change = std::max(change, std::abs(rho_new[i] - rho[i]));
        std::vector<double> mixed(n);
        for (std::size_t i = 0; i < n; ++i)
            mixed[i] = 0.5 * rho[i] + 0.5 * rho_new[i];
        normalize_trap(mixed);
        rho = P.g > 0.0 ? mixed : rho_new;
        for (std::size_t i = 0; i < n; ++i) phi[i] = std::sqrt(rho[i]);
        if (change < 1e-12) break;
    }
    return {rho, mu};
}

}  // namespace

TEST_CASE("harmonic confinement reproduces the closed-form ground state") {
    const UniformGrid g = box1d(1025);
    const MeanFieldPotential P = harmonic(g);
    const MeanFieldGroundState st = solve_ground_state(P);

    const double mu_exact = 2.0 * std::sqrt(2.0);  // 2 sqrt(2) for -4 Lap + 2 x^2
    const double sigma2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(st.mu0 - mu_exact) <= 1e-3);
    CHECK(std::abs(st.E - std::sqrt(2.0)) <= 1e-3);
    CHECK(std::abs(st.E_K - 0.5 * std::sqrt(2.0)) <= 1e-3);
    CHECK(std::abs(st.E_P - 0.5 * std::sqrt(2.0)) <= 1e-3);
    CHECK(st.residual_norm <= 1e-5);
    CHECK(st.iterations == 1);
    CHECK_FALSE(st.uniqueness_warning);

    // density against the Gaussian with variance 1/sqrt(2)
    std::vector<double> diff(g.size());
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * sigma2);
    for (int i = 0; i < g.axis(0).points; ++i) {
        const double x = g.coord(0, i);
        diff[i] = std::abs(st.rho0[i] - norm * std::exp(-x * x / (2.0 * sigma2)));
    }
    CHECK(integrate(ScalarField{g, diff}) < 1e-3);

    ScalarField x2 = poly_potential(g, 0.0, 1.0, 0.0);
    const double variance = integrate(st.rho0.field(), x2);
    CHECK(std::abs(variance - sigma2) <= 1e-3);

    for (int i = 0; i < g.axis(0).points; ++i) {
        const double x = g.coord(0, i);
        if (std::abs(x) > 4.0) continue;
        CHECK(std::abs(st.drift.values[i] + std::sqrt(2.0) * x) <= 1e-3);
    }
}

TEST_CASE("chemical potential identity holds for free and interacting runs") {
    const UniformGrid g = box1d(513);

    const MeanFieldGroundState free_st = solve_ground_state(harmonic(g));
    CHECK(std::abs(free_st.mu0 - chemical_potential(free_st, harmonic(g))) <= 1e-6);

    const MeanFieldPotential P = interacting(g, 0.5);
    const MeanFieldGroundState st = solve_ground_state(P);
    CHECK(std::abs(st.mu0 - chemical_potential(st, P)) <= 1e-6);
    CHECK(st.iterations > 1);
    CHECK_FALSE(st.uniqueness_warning);
}

TEST_CASE("interacting solve matches a direct tridiagonal reference") {
    const UniformGrid g = box1d(513);
    const MeanFieldPotential P = interacting(g, 0.5);

    SolverOptions opts;
    opts.tol = 1e-11;
    const MeanFieldGroundState st = solve_ground_state(P, opts);
    const RefState ref = reference_selfconsistent(P, 1.0);

    double sup = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        sup = std::max(sup, std::abs(st.rho0[i] - ref.rho[i]));
    CHECK(sup <= 1e-8);
    CHECK(std::abs(st.mu0 - ref.mu) <= 1e-8);
}

TEST_CASE("energy decreases toward the continuum value under refinement") {
    const MeanFieldPotential coarse = interacting(box1d(257), 0.5);
    const MeanFieldPotential fine = interacting(box1d(513), 0.5);
    const double e_coarse = solve_ground_state(coarse).E;
    const double e_fine = solve_ground_state(fine).E;
    CHECK(std::abs(e_coarse - e_fine) <= 1e-3 * (1.0 + std::abs(e_fine)));
}

TEST_CASE("solution depends continuously on the coupling strength") {
    const UniformGrid g = box1d(257);
    const MeanFieldGroundState base = solve_ground_state(harmonic(g));

    auto l1_gap = [&](double coupling) {
        MeanFieldPotential P = MeanFieldPotential::make(
            poly_potential(g, 0.0, 1.0, 0.0), zero_field(g), gaussian_kernel(g, 1.0),
            coupling);
        const MeanFieldGroundState st = solve_ground_state(P);
        std::vector<double> diff(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            diff[i] = std::abs(st.rho0[i] - base.rho0[i]);
        return integrate(ScalarField{g, diff});
    };

    const double d4 = l1_gap(0.4);
    const double d2 = l1_gap(0.2);
    const double d1 = l1_gap(0.1);
    CHECK(d4 > d2);
    CHECK(d2 > d1);
    CHECK(d2 / d4 > 0.3);
    CHECK(d2 / d4 < 0.7);
    CHECK(d1 / d2 > 0.3);
    CHECK(d1 / d2 < 0.7);
}

TEST_CASE("ground state minimizes the energy over perturbed profiles") {
    const UniformGrid g = box1d(257);
    std::mt19937 rng(81321);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_real_distribution<double> center(-3.0, 3.0);

    auto perturb = [&](const std::vector<double>& phi0, double t) {
        std::vector<double> p(phi0);
        for (int mode = 0; mode < 3; ++mode) {
            const double a = amp(rng), c = center(rng);
            for (int i = 0; i < g.axis(0).points; ++i) {
                const double x = g.coord(0, i);
                p[static_cast<std::size_t>(i)] += t * a * std::exp(-(x - c) * (x - c) / 2.0);
            }
        }
        const double inv = 1.0 / cell_norm(g, p);
        for (double& v : p) v *= inv;
        return ScalarField{g, std::move(p)};
    };

    SUBCASE("free case, exact Rayleigh bound") {
        const MeanFieldPotential P = harmonic(g);
        const MeanFieldGroundState st = solve_ground_state(P);
        for (int k = 0; k < 50; ++k) {
            const ScalarField cand = perturb(st.phi0.values, 1e-2);
            CHECK(energy(cand, P).E >= st.E - 1e-12 * (1.0 + std::abs(st.E)));
        }
    }

    SUBCASE("interacting case with stationarity of the first variation") {
        const MeanFieldPotential P = interacting(g, 0.5);
        const MeanFieldGroundState st = solve_ground_state(P);
        for (int k = 0; k < 50; ++k) {
            const ScalarField cand = perturb(st.phi0.values, 1e-2);
            CHECK(energy(cand, P).E >= st.E - 1e-8);
        }
        // central difference of E along a fixed perturbation direction
        std::vector<double> delta(g.size());
        for (int i = 0; i < g.axis(0).points; ++i) {
            const double x = g.coord(0, i);
            delta[static_cast<std::size_t>(i)] =
                std::exp(-(x - 1.0) * (x - 1.0) / 2.0) -
                0.5 * std::exp(-(x + 0.5) * (x + 0.5) / 2.0);
        }
        const double t = 1e-3;
        auto shifted = [&](double tt) {
            std::vector<double> p(st.phi0.values);
            for (std::size_t i = 0; i < p.size(); ++i) p[i] += tt * delta[i];
            const double inv = 1.0 / cell_norm(g, p);
            for (double& v : p) v *= inv;
            return energy(ScalarField{g, std::move(p)}, P).E;
        };
        const double deriv = (shifted(t) - shifted(-t)) / (2.0 * t);
        CHECK(std::abs(deriv) <= 1e-4);
    }
}

TEST_CASE("control cost of the optimal drift reproduces the energy") {
    const UniformGrid g = box1d(513);

    SUBCASE("free") {
        const MeanFieldPotential P = harmonic(g);
        const MeanFieldGroundState st = solve_ground_state(P);
        const std::vector<double> bonds = optimal_drift_bonds(st.rho0);
        const double J = stationary_control_cost(st.rho0, bonds, P);
        CHECK(std::abs(J - st.E) <= 1e-8 * (1.0 + std::abs(st.E)));
    }

    SUBCASE("interacting") {
        const MeanFieldPotential P = interacting(g, 0.5);
        const MeanFieldGroundState st = solve_ground_state(P);
        const std::vector<double> bonds = optimal_drift_bonds(st.rho0);
        const double J = stationary_control_cost(st.rho0, bonds, P);
        CHECK(std::abs(J - st.E) <= 1e-8 * (1.0 + std::abs(st.E)));
    }
}

TEST_CASE("residual scales with an explicit eigenvalue perturbation") {
    const UniformGrid g = box1d(257);
    const MeanFieldPotential P = harmonic(g);
    MeanFieldGroundState st = solve_ground_state(P);
    const double base = residual(st, P);
    CHECK(base <= 1e-9);
    st.mu0 += 0.1;
    const double shifted = residual(st, P);
    CHECK(std::abs(shifted - 0.1 / std::max(1.0, st.mu0)) <= 1e-3);
}

TEST_CASE("drift floors and clamps where the density underflows") {
    const UniformGrid g = box1d(257);
    std::vector<double> v(g.size());
    const double s2 = 0.25;
    for (int i = 0; i < g.axis(0).points; ++i) {
        const double x = g.coord(0, i);
        v[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * s2));
    }
    const DensityField rho(ScalarField{g, std::move(v)});
    const ScalarField alpha = optimal_drift(rho);

    auto at = [&](double x) {
        const int i = static_cast<int>(std::lround((x - g.axis(0).lo) / g.spacing(0)));
        return alpha.values[static_cast<std::size_t>(i)];
    };
    CHECK(at(1.0) == doctest::Approx(-4.0).epsilon(1e-9));
    CHECK(at(-2.0) == doctest::Approx(8.0).epsilon(1e-9));

    // beyond the 1e-12 floor (|x| ~ 3.72) the drift saturates
    const double edge = at(6.0);
    CHECK(edge == at(7.5));
    CHECK(std::abs(edge) < 16.0);
}

TEST_CASE("initialization profile does not change the fixed point") {
    const UniformGrid g = box1d(257);
    const MeanFieldPotential P = interacting(g, 0.3);
    SolverOptions gauss, flat;
    flat.init = InitProfile::uniform;
    const MeanFieldGroundState a = solve_ground_state(P, gauss);
    const MeanFieldGroundState b = solve_ground_state(P, flat);
    CHECK(std::abs(a.mu0 - b.mu0) <= 1e-8);
    double sup = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        sup = std::max(sup, std::abs(a.rho0[i] - b.rho0[i]));
    CHECK(sup <= 1e-7);
}

TEST_CASE("repeated solves are bit-identical") {
    const UniformGrid g = box1d(257);
    const MeanFieldPotential P = interacting(g, 0.5);
    const MeanFieldGroundState a = solve_ground_state(P);
    const MeanFieldGroundState b = solve_ground_state(P);
    CHECK(a.mu0 == b.mu0);
    CHECK(a.E == b.E);
    bool same = true;
    for (std::size_t i = 0; i < g.size(); ++i)
        same = same && a.phi0.values[i] == b.phi0.values[i];
    CHECK(same);
}

TEST_CASE("tail envelopes certify Gaussian decay and reject fat tails") {
    const UniformGrid g = box1d(1025);
    const MeanFieldPotential P = harmonic(g);
    const MeanFieldGroundState st = solve_ground_state(P);

    const TailBoundReport rep = tail_bound_check(st.rho0, P);
    CHECK(rep.pass);
    CHECK(rep.upper_pass);
    CHECK(rep.lower_pass);
    CHECK(rep.a2 == doctest::Approx(std::sqrt(0.5)).epsilon(0.08));
    CHECK(rep.a1 == doctest::Approx(std::sqrt(2.0)).epsilon(0.08));
    CHECK(rep.samples > 100);

    std::vector<double> fat(g.size());
    for (int i = 0; i < g.axis(0).points; ++i) {
        const double x = g.coord(0, i);
        fat[static_cast<std::size_t>(i)] = 1.0 / (1.0 + x * x);
    }
    const TailBoundReport bad = tail_bound_check(DensityField(ScalarField{g, std::move(fat)}), P);
    CHECK_FALSE(bad.pass);
    CHECK_FALSE(bad.upper_pass);
}

TEST_CASE("solver and energy reject malformed inputs") {
    const UniformGrid g = box1d(257);
    const MeanFieldPotential P = harmonic(g);

    ScalarField unnormalized{g, std::vector<double>(g.size(), 1.0)};
    CHECK_THROWS_AS(energy(unnormalized, P), NormalizationError);

    SolverOptions bad_mix;
    bad_mix.mixing = 0.0;
    CHECK_THROWS_AS(solve_ground_state(P, bad_mix), ConsistencyError);

    SolverOptions starved;
    starved.max_outer = 1;
    starved.tol = 1e-14;
    const MeanFieldPotential coupled = interacting(g, 0.5);
    CHECK_THROWS_AS(solve_ground_state(coupled, starved), ConvergenceError);

    const UniformGrid g2 = UniformGrid::tensor({-2.0, 2.0, 16}, 2);
    std::vector<double> flat2(g2.size(), 1.0);
    CHECK_THROWS_AS(optimal_drift(DensityField(ScalarField{g2, std::move(flat2)})), InvalidAxesError);

    std::vector<double> r = {0.0, 1.0};
    std::vector<double> vb = {0.0, 1.0, 2.0};
    const MeanFieldGroundState st = solve_ground_state(P);
    CHECK_THROWS_AS(
        tail_bound_check(st.rho0, std::span<const double>(r), std::span<const double>(vb)),
        ConsistencyError);
}
