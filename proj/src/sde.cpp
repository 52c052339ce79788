#include "mkv/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <thread>
#include <vector>

#include "mkv/errors.hpp"

namespace mkv {

namespace {

constexpr int kErrorBlocks = 16;
constexpr double kDiscardBudget = 0.01;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Small counter-style generator: 64-bit state stepped through splitmix64,
/// turned into Gaussians by Box-Muller. Each path owns one, so the stream
/// depends only on (seed, path index), never on the thread layout.
class PathRng {
public:
    explicit PathRng(std::uint64_t s) : state_(s) {}

    double uniform() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return ((z >> 11) + 1.0) * 0x1.0p-53;  // in (0, 1]
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Multilinear interpolation with precomputed strides; clamps the query to
/// the box so trajectories pinned at the wall still read boundary values.
class FieldProbe {
public:
    explicit FieldProbe(const ScalarField& f) : f_(&f) {
        const UniformGrid& g = f.grid;
        d_ = g.dims();
        for (int a = 0; a < d_; ++a) {
            lo_[a] = g.axis(a).lo;
            hi_[a] = g.axis(a).hi;
            inv_h_[a] = 1.0 / g.spacing(a);
            pts_[a] = g.axis(a).points;
            stride_[a] = g.stride(a);
        }
    }

    double at(const double* x) const {
        std::size_t base = 0;
        double frac[kMaxDims];
        for (int a = 0; a < d_; ++a) {
            double t = (std::clamp(x[a], lo_[a], hi_[a]) - lo_[a]) * inv_h_[a];
            int i = static_cast<int>(t);
            i = std::min(i, pts_[a] - 2);
            frac[a] = t - i;
            base += static_cast<std::size_t>(i) * stride_[a];
        }
        const std::vector<double>& v = f_->values;
        double acc = 0.0;
        for (int corner = 0; corner < (1 << d_); ++corner) {
            double w = 1.0;
            std::size_t idx = base;
            for (int a = 0; a < d_; ++a) {
                if (corner & (1 << a)) {
                    w *= frac[a];
                    idx += stride_[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            acc += w * v[idx];
        }
        return acc;
    }

private:
    const ScalarField* f_;
    int d_ = 1;
    double lo_[kMaxDims], hi_[kMaxDims], inv_h_[kMaxDims];
    int pts_[kMaxDims];
    std::size_t stride_[kMaxDims];
};

/// Inverse-CDF sampler over a 1D density (cumulative trapezoid, linear
/// interpolation inside cells).
class DensitySampler {
public:
    explicit DensitySampler(const DensityField& rho)
        : lo_(rho.grid().axis(0).lo), h_(rho.grid().spacing(0)) {
        const std::vector<double>& v = rho.values();
        F_.assign(v.size(), 0.0);
        for (std::size_t i = 1; i < v.size(); ++i)
            F_[i] = F_[i - 1] + 0.5 * h_ * (v[i - 1] + v[i]);
        const double total = F_.back();
        for (double& f : F_) f /= total;
    }

    double draw(PathRng& rng) const {
        const double u = rng.uniform();
        const auto it = std::lower_bound(F_.begin(), F_.end(), u);
        if (it == F_.begin()) return lo_;
        const std::size_t i = static_cast<std::size_t>(it - F_.begin());
        if (i >= F_.size()) return lo_ + h_ * (F_.size() - 1);
        const double denom = F_[i] - F_[i - 1];
        const double frac = denom > 0.0 ? (u - F_[i - 1]) / denom : 0.0;
        return lo_ + h_ * (static_cast<double>(i - 1) + frac);
    }

private:
    double lo_, h_;
    std::vector<double> F_;
};

void validate_config(const SimConfig& cfg, const UniformGrid& g, int coords) {
    if (!(cfg.dt > 0.0)) throw ConsistencyError("dt must be positive");
    const double width = g.axis(0).hi - g.axis(0).lo;
    if (cfg.dt > 1e-2 * width)
        throw ConsistencyError("dt too large for the box width");
    if (!(cfg.T > 0.0)) throw ConsistencyError("horizon must be positive");
    if (cfg.burn_in < 0.0 || cfg.burn_in >= cfg.T)
        throw ConsistencyError("burn-in must lie in [0, T)");
    if (cfg.n_paths < kErrorBlocks)
        throw ConsistencyError("need at least 16 paths for the block error estimate");
    if (cfg.bins < kMinPointsPerAxis)
        throw ConsistencyError("need at least " + std::to_string(kMinPointsPerAxis) +
                               " histogram bins");
    if (cfg.initial == InitialCondition::point) {
        if (cfg.start.size() != static_cast<std::size_t>(coords))
            throw ConsistencyError("point initialization needs one coordinate per particle");
        for (double s : cfg.start)
            if (s < g.axis(0).lo || s > g.axis(0).hi)
                throw OutOfDomainError("starting point outside the box");
    }
}

struct PathOutcome {
    double mean_cost = 0.0;
    bool ok = false;
};

struct SimProblem {
    int coords = 1;                         // particles moving jointly
    const FieldProbe* drift = nullptr;      // one probe per coordinate
    const FieldProbe* cost = nullptr;       // potential part of the running cost
    double cost_scale = 1.0;                // 1/N for the particle system
    const DensitySampler* sampler = nullptr;
    double lo = 0.0, hi = 0.0;
};

PathOutcome run_path(const SimProblem& prob, const SimConfig& cfg,
                     std::uint64_t path_index, std::vector<std::uint64_t>& bins) {
    PathRng rng(mix_seed(cfg.seed, path_index));
    const int d = prob.coords;
    double x[kMaxDims];
    if (cfg.initial == InitialCondition::point) {
        for (int a = 0; a < d; ++a) x[a] = cfg.start[static_cast<std::size_t>(a)];
    } else {
        for (int a = 0; a < d; ++a) x[a] = prob.sampler->draw(rng);
    }

    const long total_steps = std::lround(cfg.T / cfg.dt);
    const long burn_steps = std::lround(cfg.burn_in / cfg.dt);
    const double root_2dt = std::sqrt(2.0 * cfg.dt);
    const double bin_width = (prob.hi - prob.lo) / cfg.bins;
    const double inv_bin = 1.0 / bin_width;

    double cost_acc = 0.0;
    long cost_n = 0;
    std::fill(bins.begin(), bins.end(), std::uint64_t{0});

    for (long step = 0; step < total_steps; ++step) {
        double a[kMaxDims];
        double drift2 = 0.0;
        for (int c = 0; c < d; ++c) {
            a[c] = prob.drift[c].at(x);
            drift2 += a[c] * a[c];
        }
        if (step >= burn_steps) {
            const double running =
                prob.cost_scale * (0.5 * drift2 + prob.cost->at(x));
            cost_acc += running;
            ++cost_n;
            for (int c = 0; c < d; ++c) {
                int b = static_cast<int>((x[c] - prob.lo) * inv_bin);
                b = std::clamp(b, 0, cfg.bins - 1);
                ++bins[static_cast<std::size_t>(b)];
            }
        }
        bool finite = true;
        for (int c = 0; c < d; ++c) {
            x[c] += a[c] * cfg.dt + root_2dt * rng.gaussian();
            if (!std::isfinite(x[c])) finite = false;
        }
        if (!finite) return {};
        for (int c = 0; c < d; ++c) x[c] = std::clamp(x[c], prob.lo, prob.hi);
    }
    if (cost_n == 0) return {};
    return {cost_acc / static_cast<double>(cost_n), true};
}

TrajectoryStats run_simulation(const SimProblem& prob, const SimConfig& cfg,
                               const DensityField& rho_ref) {
    std::vector<PathOutcome> outcomes(static_cast<std::size_t>(cfg.n_paths));
    int n_threads = cfg.threads > 0
                        ? cfg.threads
                        : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::clamp(n_threads, 1, cfg.n_paths);

    std::vector<std::vector<std::uint64_t>> worker_bins(
        static_cast<std::size_t>(n_threads),
        std::vector<std::uint64_t>(static_cast<std::size_t>(cfg.bins), 0));

    auto worker = [&](int w) {
        std::vector<std::uint64_t> path_bins(static_cast<std::size_t>(cfg.bins));
        for (int p = w; p < cfg.n_paths; p += n_threads) {
            const PathOutcome out =
                run_path(prob, cfg, static_cast<std::uint64_t>(p), path_bins);
            outcomes[static_cast<std::size_t>(p)] = out;
            if (out.ok) {
                std::vector<std::uint64_t>& acc = worker_bins[static_cast<std::size_t>(w)];
                for (int b = 0; b < cfg.bins; ++b)
                    acc[static_cast<std::size_t>(b)] += path_bins[static_cast<std::size_t>(b)];
            }
        }
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
        for (std::thread& t : pool) t.join();
    }

    int discarded = 0;
    for (const PathOutcome& o : outcomes)
        if (!o.ok) ++discarded;
    if (discarded > kDiscardBudget * cfg.n_paths)
        throw InstabilityError(
            "more than 1% of paths left the finite range; reduce dt (discarded " +
            std::to_string(discarded) + " of " + std::to_string(cfg.n_paths) + ")");

    // path means merged in index order, block error over 16 interleaved blocks
    double mean = 0.0;
    long kept = 0;
    for (const PathOutcome& o : outcomes)
        if (o.ok) {
            mean += o.mean_cost;
            ++kept;
        }
    mean /= static_cast<double>(kept);

    double block_sum[kErrorBlocks] = {};
    long block_n[kErrorBlocks] = {};
    for (int p = 0; p < cfg.n_paths; ++p) {
        if (!outcomes[static_cast<std::size_t>(p)].ok) continue;
        block_sum[p % kErrorBlocks] += outcomes[static_cast<std::size_t>(p)].mean_cost;
        ++block_n[p % kErrorBlocks];
    }
    double var = 0.0;
    int blocks = 0;
    for (int b = 0; b < kErrorBlocks; ++b) {
        if (block_n[b] == 0) continue;
        const double m = block_sum[b] / static_cast<double>(block_n[b]);
        var += (m - mean) * (m - mean);
        ++blocks;
    }
    if (blocks < 2) throw ConsistencyError("too few surviving path blocks");
    var /= static_cast<double>(blocks - 1);

    TrajectoryStats stats;
    stats.J_hat = mean;
    stats.standard_error = std::sqrt(var / blocks);
    stats.discarded_paths = discarded;

    std::vector<std::uint64_t> counts(static_cast<std::size_t>(cfg.bins), 0);
    for (const std::vector<std::uint64_t>& wb : worker_bins)
        for (int b = 0; b < cfg.bins; ++b)
            counts[static_cast<std::size_t>(b)] += wb[static_cast<std::size_t>(b)];
    std::uint64_t total = 0;
    for (std::uint64_t c : counts) total += c;
    stats.n_samples = total;

    const double bin_width = (prob.hi - prob.lo) / cfg.bins;
    UniformGrid bin_grid({{prob.lo + 0.5 * bin_width, prob.hi - 0.5 * bin_width,
                           cfg.bins}});
    std::vector<double> density(static_cast<std::size_t>(cfg.bins));
    for (int b = 0; b < cfg.bins; ++b)
        density[static_cast<std::size_t>(b)] =
            static_cast<double>(counts[static_cast<std::size_t>(b)]) /
            (static_cast<double>(total) * bin_width);
    stats.histogram = DensityField(ScalarField{bin_grid, std::move(density)});
    stats.histogram_tv = stationarity_check(stats, rho_ref);
    return stats;
}

}  // namespace

TrajectoryStats simulate_meanfield(const ScalarField& drift,
                                   const MeanFieldPotential& P,
                                   const DensityField& rho_ref,
                                   const SimConfig& cfg) {
    const UniformGrid& g = P.grid();
    if (!drift.grid.same_layout(g) || !rho_ref.grid().same_layout(g))
        throw IncompatibleGridsError(
            "simulate_meanfield: drift, potential, and reference must share a grid");
    validate_config(cfg, g, 1);

    ScalarField cost(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        cost.values[i] = P.V0.values[i] + P.v0.values[i];
    if (P.has_interaction()) {
        const ScalarField conv = convolve(rho_ref.field(), P.v1);
        for (std::size_t i = 0; i < g.size(); ++i)
            cost.values[i] += P.g * conv.values[i];
    }

    const FieldProbe drift_probe(drift);
    const FieldProbe cost_probe(cost);
    const DensitySampler sampler(rho_ref);

    SimProblem prob;
    prob.coords = 1;
    prob.drift = &drift_probe;
    prob.cost = &cost_probe;
    prob.cost_scale = 1.0;
    prob.sampler = &sampler;
    prob.lo = g.axis(0).lo;
    prob.hi = g.axis(0).hi;
    return run_simulation(prob, cfg, rho_ref);
}

TrajectoryStats simulate_nparticle(const NParticleGroundState& stateN,
                                   const MeanFieldPotential& P,
                                   const SimConfig& cfg) {
    const UniformGrid& gN = stateN.rhoN.grid();
    const int N = stateN.N;
    validate_config(cfg, gN, N);

    const std::vector<ScalarField> drifts = optimal_drift_n(stateN.rhoN);
    const ScalarField VN = assemble_VN(P, N);

    std::vector<FieldProbe> drift_probes;
    drift_probes.reserve(drifts.size());
    for (const ScalarField& f : drifts) drift_probes.emplace_back(f);
    const FieldProbe cost_probe(VN);
    const DensitySampler sampler(stateN.marginal1);

    SimProblem prob;
    prob.coords = N;
    prob.drift = drift_probes.data();
    prob.cost = &cost_probe;
    prob.cost_scale = 1.0 / N;
    prob.sampler = &sampler;
    prob.lo = gN.axis(0).lo;
    prob.hi = gN.axis(0).hi;
    return run_simulation(prob, cfg, stateN.marginal1);
}

double stationarity_check(const TrajectoryStats& stats, const DensityField& rho_ref) {
    if (stats.n_samples == 0)
        throw ConsistencyError("stationarity check on an empty histogram");
    if (rho_ref.grid().dims() != 1)
        throw InvalidAxesError("stationarity reference must be one-dimensional");
    const UniformGrid& bg = stats.histogram.grid();
    const int bins = bg.axis(0).points;
    const double w = bg.spacing(0);

    // empirical bin masses from the stored bin-center density
    std::vector<double> emp(static_cast<std::size_t>(bins));
    double emp_total = 0.0;
    for (int b = 0; b < bins; ++b) {
        emp[static_cast<std::size_t>(b)] = stats.histogram[static_cast<std::size_t>(b)];
        emp_total += emp[static_cast<std::size_t>(b)];
    }
    for (double& e : emp) e /= emp_total;

    // reference masses through the cumulative trapezoid CDF of rho_ref
    const UniformGrid& rg = rho_ref.grid();
    const std::vector<double>& rv = rho_ref.values();
    const double rlo = rg.axis(0).lo;
    const double rh = rg.spacing(0);
    std::vector<double> F(rv.size(), 0.0);
    for (std::size_t i = 1; i < rv.size(); ++i)
        F[i] = F[i - 1] + 0.5 * rh * (rv[i - 1] + rv[i]);
    const double total = F.back();
    auto cdf_at = [&](double x) {
        const double t = std::clamp((x - rlo) / rh, 0.0, double(rv.size() - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(t), rv.size() - 2);
        const double frac = t - static_cast<double>(i);
        const double vx = rv[i] + (rv[i + 1] - rv[i]) * frac;
        return (F[i] + 0.5 * frac * rh * (rv[i] + vx)) / total;
    };

    double tv = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double left = bg.coord(0, b) - 0.5 * w;
        const double right = bg.coord(0, b) + 0.5 * w;
        const double ref_mass = cdf_at(right) - cdf_at(left);
        tv += std::abs(emp[static_cast<std::size_t>(b)] - ref_mass);
    }
    return 0.5 * tv;
}

}  // namespace mkv
