#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkv/meanfield.hpp"
#include "mkv/sde.hpp"

namespace mkv {

/// Interaction kernel constructors accepted in scenario files.
enum class KernelKind { none, gaussian, cosine, bump, table };

struct KernelSpec {
    KernelKind kind = KernelKind::none;
    double param = 0.0;  // sigma, wavenumber, or support width
    std::string path;    // table(path): field file in the binary layout
};

/// Fully parsed experiment description. The defaults describe the harmonic
/// reference problem on [-8, 8] with no interaction, no simulation and no
/// kernel sweep.
struct Scenario {
    // [grid]
    double extent = 8.0;
    int points = 257;

    // [potential]
    std::vector<double> V0_coeffs{0.0, 1.0, 0.0};  // poly [c0, c2, c4]
    std::vector<double> v0_coeffs{0.0, 0.0, 0.0};
    KernelSpec kernel;
    double g = 0.0;

    // [meanfield]
    SolverOptions meanfield;

    // [nparticle]
    std::vector<int> N_list;           // empty: reference row only
    std::vector<int> points_per_axis;  // empty: node-budget defaults per N
    double tol_N = 1e-9;

    // [sde]
    bool sde_enabled = false;
    SimConfig sde;

    // [scaling]
    bool scaling_enabled = false;
    std::vector<double> beta_list;
    std::vector<int> scaling_N_list;
    double bump_width = 4.0;
    int scaling_points = 0;  // 0: node-budget default for the largest N

    // [output]
    std::string out_dir;
    bool write_csv = true;
    bool write_json = true;

    std::uint64_t source_hash = 0;  // FNV-1a of the raw scenario text
};

/// Strict line-oriented parser: '[section]' headers, 'key = value' entries,
/// '#' comments. Unknown sections or keys, duplicate keys and malformed
/// values are rejected with the offending line number; semantic constraints
/// are checked before returning, so a parsed Scenario is runnable as far as
/// static validation can tell. Throws ScenarioError.
Scenario parse_scenario(const std::string& text);

/// Reads the file and delegates to parse_scenario. Throws IoError when the
/// file cannot be read.
Scenario parse_scenario_file(const std::string& path);

/// Default per-axis node count for an N-particle solve, sized against the
/// tensor-grid budget (odd counts so convolution kernels stay centered).
int default_axis_points(int N);

}  // namespace mkv
