#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mkv/grid.hpp"
#include "mkv/potentials.hpp"

using namespace mkv;

namespace {

UniformGrid box1d(double half, int pts) { return UniformGrid({{-half, half, pts}}); }

DensityField gaussian_density(const UniformGrid& g, double sigma, double center = 0.0) {
    ScalarField f(g);
    for (int i = 0; i < g.axis(0).points; ++i) {
        const double x = g.coord(0, i) - center;
        f.values[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    }
    return DensityField(std::move(f));
}

MeanFieldPotential harmonic_gaussian(const UniformGrid& g, double gcoup, double sigma = 1.0) {
    return MeanFieldPotential::make(poly_potential(g, 0.0, 1.0, 0.0), zero_field(g),
                                    gaussian_kernel(g, sigma), gcoup);
}

}  // namespace

TEST_CASE("potential construction rejects broken structure") {
    UniformGrid g = box1d(8.0, 129);
    // inverted confinement: max in the middle
    ScalarField bad(g);
    for (int i = 0; i < 129; ++i) {
        const double x = g.coord(0, i);
        bad.values[static_cast<size_t>(i)] = -x * x;
    }
    CHECK_THROWS_AS(
        MeanFieldPotential::make(std::move(bad), zero_field(g), zero_field(g), 0.0),
        InvalidProfileError);

    // odd kernel
    ScalarField oddk(g);
    for (int i = 0; i < 129; ++i) oddk.values[static_cast<size_t>(i)] = g.coord(0, i);
    CHECK_THROWS_AS(MeanFieldPotential::make(poly_potential(g, 0, 1, 0), zero_field(g),
                                             std::move(oddk), 1.0),
                    InvalidProfileError);

    CHECK_THROWS_AS(MeanFieldPotential::make(poly_potential(g, 0, 1, 0), zero_field(g),
                                             gaussian_kernel(g, 1.0), -0.5),
                    InvalidProfileError);
}

TEST_CASE("evaluate: affine in the measure") {
    UniformGrid g = box1d(8.0, 257);
    MeanFieldPotential P = harmonic_gaussian(g, 0.7);
    // put a nonzero mean drive in as well
    P.v0 = gaussian_kernel(g, 2.0);

    DensityField mu1 = gaussian_density(g, 1.0, 0.5);
    DensityField mu2 = gaussian_density(g, 0.8, -1.0);
    ScalarField mix(g);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.values[i] = 0.5 * (mu1[i] + mu2[i]);
    DensityField mu_mix(std::move(mix));

    ScalarField a = evaluate(P, mu1);
    ScalarField b = evaluate(P, mu2);
    ScalarField c = evaluate(P, mu_mix);
    double linf = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        linf = std::max(linf, std::abs(c[i] - 0.5 * (a[i] + b[i])));
    CHECK(linf < 1e-10);
}

TEST_CASE("effective_field matches a direct quadrature oracle") {
    UniformGrid g = box1d(8.0, 257);
    MeanFieldPotential P = harmonic_gaussian(g, 0.5);
    P.v0 = gaussian_kernel(g, 2.0);
    DensityField mu = gaussian_density(g, 1.0, 0.3);

    ScalarField W = effective_field(P, mu);

    // oracle: W(x) = V0 + v0(x) + int v0 dmu + 2g sum_j v1(x - x_j) mu_j w_j
    // with the interaction evaluated as a plain O(M^2) trapezoid sum
    const double h = g.spacing(0);
    double v0_mean = 0.0;
    for (int j = 0; j < 257; ++j) {
        const double w = (j == 0 || j == 256) ? 0.5 * h : h;
        v0_mean += P.v0.values[static_cast<size_t>(j)] * mu[static_cast<size_t>(j)] * w;
    }
    for (int i = 0; i < 257; i += 17) {
        double conv = 0.0;
        for (int j = 0; j < 257; ++j)
            conv += kernel_at_offset(P.v1, i - j) * mu[static_cast<size_t>(j)] * h;
        const double x = g.coord(0, i);
        const double want = x * x + P.v0.values[static_cast<size_t>(i)] + v0_mean +
                            2.0 * P.g * conv;
        CHECK(std::abs(W.values[static_cast<size_t>(i)] - want) < 1e-10);
    }
}

TEST_CASE("assemble_VN: pair expansion at specific nodes") {
    UniformGrid g = box1d(4.0, 65);
    MeanFieldPotential P = harmonic_gaussian(g, 0.5);
    P.v0 = gaussian_kernel(g, 3.0);

    SUBCASE("N = 2") {
        ScalarField V2 = assemble_VN(P, 2);
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<int> pick(0, 64);
        for (int t = 0; t < 32; ++t) {
            const int i = pick(rng), j = pick(rng);
            const double want =
                P.V0.values[static_cast<size_t>(i)] + P.V0.values[static_cast<size_t>(j)] +
                P.v0.values[static_cast<size_t>(i)] + P.v0.values[static_cast<size_t>(j)] +
                2.0 * P.g * kernel_at_offset(P.v1, i - j);
            CHECK(std::abs(V2.values[static_cast<size_t>(i) * 65 + j] - want) < 1e-12);
        }
    }

    SUBCASE("N = 3 against the per-point empirical-measure formula") {
        ScalarField V3 = assemble_VN(P, 3);
        std::mt19937_64 rng(13);
        std::uniform_int_distribution<int> pick(0, 64);
        for (int t = 0; t < 16; ++t) {
            const int idx[3] = {pick(rng), pick(rng), pick(rng)};
            // direct: sum_i V(x_i, mean of deltas at the other two); the v0
            // means collected across particles total sum_k v0(x_k)
            double want = 0.0;
            for (int i = 0; i < 3; ++i) {
                double vbar = 0.0, conv = 0.0;
                for (int k = 0; k < 3; ++k) {
                    if (k == i) continue;
                    vbar += 0.5 * P.v0.values[static_cast<size_t>(idx[k])];
                    conv += 0.5 * kernel_at_offset(P.v1, idx[i] - idx[k]);
                }
                want += P.V0.values[static_cast<size_t>(idx[i])] + vbar + P.g * conv;
            }
            const std::size_t lin = static_cast<std::size_t>(idx[0]) * 65 * 65 +
                                    static_cast<std::size_t>(idx[1]) * 65 +
                                    static_cast<std::size_t>(idx[2]);
            CHECK(std::abs(V3.values[lin] - want) < 1e-12);
        }
    }

    SUBCASE("permutation invariance") {
        ScalarField V3 = assemble_VN(P, 3);
        std::mt19937_64 rng(17);
        std::uniform_int_distribution<int> pick(0, 64);
        for (int t = 0; t < 20; ++t) {
            const std::size_t a = static_cast<std::size_t>(pick(rng));
            const std::size_t b = static_cast<std::size_t>(pick(rng));
            const std::size_t c = static_cast<std::size_t>(pick(rng));
            const double v = V3.values[a * 65 * 65 + b * 65 + c];
            CHECK(std::abs(V3.values[b * 65 * 65 + a * 65 + c] - v) < 1e-12);
            CHECK(std::abs(V3.values[c * 65 * 65 + b * 65 + a] - v) < 1e-12);
        }
    }
}

TEST_CASE("bochner: gaussian passes, commensurate cosine passes, truncated parabola fails") {
    SUBCASE("gaussian") {
        UniformGrid g = box1d(8.0, 257);
        HypothesisReport rep = bochner_check(gaussian_kernel(g, 1.0));
        CHECK(rep.bochner_pass);
        CHECK(rep.bochner_min_spectrum >= -1e-10 * rep.bochner_max_spectrum);
        CHECK(rep.bochner_max_spectrum > 0.0);
    }
    SUBCASE("cosine on a period-commensurate grid") {
        // box [-4pi, 4pi], 256 intervals: cos(x) sits exactly on DFT bin 4
        UniformGrid g = box1d(4.0 * M_PI, 257);
        HypothesisReport rep = bochner_check(cosine_kernel(g, 1.0));
        CHECK(rep.bochner_pass);
        // two-spike spectrum: max is (M-1)/2 = 128
        CHECK(rep.bochner_max_spectrum == doctest::Approx(128.0).epsilon(1e-10));
    }
    SUBCASE("truncated parabola fails") {
        UniformGrid g = box1d(8.0, 257);
        ScalarField k(g);
        for (int i = 0; i < 257; ++i) {
            const double x = g.coord(0, i);
            k.values[static_cast<size_t>(i)] = std::abs(x) <= 1.0 ? 1.0 - x * x : 0.0;
        }
        HypothesisReport rep = bochner_check(k);
        CHECK_FALSE(rep.bochner_pass);
        CHECK(rep.bochner_min_spectrum < -1e-10 * rep.bochner_max_spectrum);
    }
    SUBCASE("asymmetric grid rejected") {
        UniformGrid g({{-3.0, 5.0, 65}});
        CHECK_THROWS_AS(bochner_check(ScalarField(g)), InvalidGridError);
    }
}

TEST_CASE("bochner pass implies nonnegative quadratic forms on sampled points") {
    UniformGrid g = box1d(8.0, 257);
    std::vector<ScalarField> kernels;
    kernels.push_back(gaussian_kernel(g, 1.0));
    kernels.push_back(cosine_kernel(box1d(4.0 * M_PI, 257), 1.0));

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    for (const ScalarField& k : kernels) {
        REQUIRE(bochner_check(k).bochner_pass);
        const int n = k.grid.axis(0).points;
        // node indices from the central half so pairwise offsets stay sampled
        std::uniform_int_distribution<int> pick(n / 4, 3 * n / 4);
        for (int draw = 0; draw < 100; ++draw) {
            int idx[8];
            double c[8];
            for (int i = 0; i < 8; ++i) {
                idx[i] = pick(rng);
                c[i] = coeff(rng);
            }
            double form = 0.0;
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    form += c[i] * c[j] * kernel_at_offset(k, idx[i] - idx[j]);
            CHECK(form >= -1e-8);
        }
    }
}

TEST_CASE("qv_check: quartic passes, quadratic fails, logarithmic correction decided by fit") {
    std::vector<double> r(64), v(64);
    for (int i = 0; i < 64; ++i) r[static_cast<size_t>(i)] = 0.1 * (i + 1);

    SUBCASE("r^4 passes with eps ~ 2") {
        for (int i = 0; i < 64; ++i) v[static_cast<size_t>(i)] = std::pow(r[static_cast<size_t>(i)], 4);
        HypothesisReport rep = qv_check(r, v);
        CHECK(rep.qv_pass);
        CHECK(rep.growth_exponent == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(rep.epsilon > 1.5);
        CHECK(rep.e1 > 0.0);
        CHECK(std::isfinite(rep.e3));
    }
    SUBCASE("r^2 fails: no margin above quadratic growth") {
        for (int i = 0; i < 64; ++i) v[static_cast<size_t>(i)] = r[static_cast<size_t>(i)] * r[static_cast<size_t>(i)];
        HypothesisReport rep = qv_check(r, v);
        CHECK_FALSE(rep.qv_pass);
        CHECK(rep.growth_exponent == doctest::Approx(2.0).epsilon(1e-6));
    }
    SUBCASE("r^2 (1 + log(1 + r^2)): slow extra growth, fit decides") {
        for (int i = 0; i < 64; ++i) {
            const double rr = r[static_cast<size_t>(i)] * r[static_cast<size_t>(i)];
            v[static_cast<size_t>(i)] = rr * (1.0 + std::log1p(rr));
        }
        HypothesisReport rep = qv_check(r, v);
        // the log factor adds ~0.3 to the effective slope on this sample range
        CHECK(rep.growth_exponent > 2.0 + 0.05);
        CHECK(rep.qv_pass);
    }
    SUBCASE("decreasing profile is invalid") {
        for (int i = 0; i < 64; ++i) v[static_cast<size_t>(i)] = 1.0 / (1.0 + r[static_cast<size_t>(i)]);
        CHECK_THROWS_AS(qv_check(r, v), InvalidProfileError);
    }
}

TEST_CASE("validate_hypotheses wires both certificates") {
    UniformGrid g = box1d(8.0, 1025);
    SUBCASE("quartic confinement with gaussian kernel passes everything") {
        MeanFieldPotential P = MeanFieldPotential::make(
            poly_potential(g, 0.0, 0.0, 1.0), zero_field(g), gaussian_kernel(g, 1.0), 0.5);
        HypothesisReport rep = validate_hypotheses(P);
        CHECK(rep.bochner_pass);
        CHECK(rep.qv_pass);
        CHECK(rep.c2 == 1.0);
        CHECK(rep.c1 == doctest::Approx(0.5).epsilon(1e-12));  // g * max v1
    }
    SUBCASE("harmonic confinement fails the growth margin") {
        MeanFieldPotential P = harmonic_gaussian(g, 0.5);
        HypothesisReport rep = validate_hypotheses(P);
        CHECK(rep.bochner_pass);
        CHECK_FALSE(rep.qv_pass);
    }
}

TEST_CASE("scaled_kernel: identity, peak scaling, exact mass, resolution guard") {
    UniformGrid fine = box1d(8.0, 1025);
    ScalarField base = bump_kernel(fine, 4.0);
    const double base_mass = integrate(base);
    CHECK(base_mass == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("N = 1 returns the kernel unchanged") {
        ScalarField same = scaled_kernel(base, 0.5, 1, fine);
        double linf = 0.0;
        for (std::size_t i = 0; i < same.size(); ++i)
            linf = std::max(linf, std::abs(same[i] - base[i]));
        CHECK(linf < 1e-13);
    }

    SUBCASE("peak value scales by N^beta on a fine grid") {
        ScalarField s = scaled_kernel(base, 0.5, 4, fine);  // N^beta = 2
        CHECK(std::abs(s.values[512] - 2.0 * base.values[512]) < 1e-8);
        CHECK(std::abs(integrate(s) - base_mass) < 1e-9);
    }

    SUBCASE("coarse resample keeps the exact base mass") {
        UniformGrid coarse = box1d(8.0, 65);  // h = 0.25, scaled width 2 -> 8 nodes
        ScalarField s = scaled_kernel(base, 0.5, 4, coarse);
        CHECK(std::abs(integrate(s) - base_mass) < 1e-12);
    }

    SUBCASE("under-resolved kernel raises with a workable suggestion") {
        UniformGrid coarse = box1d(8.0, 17);  // h = 1.0, scaled width 2 -> 2 nodes
        try {
            scaled_kernel(base, 0.5, 4, coarse);
            FAIL("expected ResolutionError");
        } catch (const ResolutionError& e) {
            CHECK(e.suggested_points_per_axis >= 49);
        }
    }

    SUBCASE("beta outside (0, 1] rejected") {
        CHECK_THROWS_AS(scaled_kernel(base, 0.0, 2, fine), InvalidProfileError);
        CHECK_THROWS_AS(scaled_kernel(base, 1.5, 2, fine), InvalidProfileError);
    }
}
