#include "mkv/scenario.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/grid.hpp"

namespace mkv {

namespace {

struct RawEntry {
    std::string value;
    int line = -1;
};

using EntryMap = std::map<std::string, RawEntry>;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"grid", {"extent", "points"}},
        {"potential", {"V0", "v0", "v1", "g"}},
        {"meanfield", {"tol", "max_outer", "mixing", "init"}},
        {"nparticle", {"N_list", "points_per_axis", "tol_N"}},
        {"sde", {"dt", "T", "burn_in", "n_paths", "seed", "bins"}},
        {"scaling", {"beta_list", "N_list", "kernel", "points"}},
        {"output", {"directory", "formats"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

double to_real(const std::string& text, const std::string& key, int line) {
    const std::string v = trim(text);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
        throw ScenarioError("expected a real number for '" + key + "', got '" + v + "'", line);
    return x;
}

int to_int(const std::string& text, const std::string& key, int line) {
    const std::string v = trim(text);
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || x < INT_MIN || x > INT_MAX)
        throw ScenarioError("expected an integer for '" + key + "', got '" + v + "'", line);
    return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& text, const std::string& key, int line) {
    const std::string v = trim(text);
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || v.front() == '-' || end != v.c_str() + v.size())
        throw ScenarioError("expected an unsigned integer for '" + key + "', got '" + v + "'", line);
    return static_cast<std::uint64_t>(x);
}

std::vector<std::string> split_list(const std::string& text) {
    std::string v = text;
    for (char& c : v)
        if (c == ',') c = ' ';
    std::istringstream in(v);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<double> to_real_list(const std::string& text, const std::string& key, int line) {
    std::vector<double> out;
    for (const std::string& tok : split_list(text)) out.push_back(to_real(tok, key, line));
    if (out.empty()) throw ScenarioError("'" + key + "' needs at least one value", line);
    return out;
}

std::vector<int> to_int_list(const std::string& text, const std::string& key, int line) {
    std::vector<int> out;
    for (const std::string& tok : split_list(text)) out.push_back(to_int(tok, key, line));
    if (out.empty()) throw ScenarioError("'" + key + "' needs at least one value", line);
    return out;
}

// 'poly [c0, c2, c4]' or 'zero'.
std::vector<double> to_poly(const std::string& text, const std::string& key, int line) {
    const std::string v = trim(text);
    if (v == "zero") return {0.0, 0.0, 0.0};
    if (v.rfind("poly", 0) != 0)
        throw ScenarioError("'" + key + "' must be 'poly [c0, c2, c4]' or 'zero'", line);
    const std::string rest = trim(v.substr(4));
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
        throw ScenarioError("'" + key + "' needs bracketed coefficients: poly [c0, c2, c4]", line);
    std::vector<double> c = to_real_list(rest.substr(1, rest.size() - 2), key, line);
    if (c.size() != 3)
        throw ScenarioError("'" + key + "' needs exactly three coefficients [c0, c2, c4]", line);
    return c;
}

KernelSpec to_kernel(const std::string& text, const std::string& key, int line) {
    const std::string v = trim(text);
    if (v == "none" || v == "zero") return {};
    const std::size_t open = v.find('(');
    if (open == std::string::npos || v.back() != ')')
        throw ScenarioError("'" + key + "' must be gaussian(sigma), cosine(k), bump(width) or table(path)",
                            line);
    const std::string name = trim(v.substr(0, open));
    std::string arg = trim(v.substr(open + 1, v.size() - open - 2));
    KernelSpec k;
    if (name == "gaussian") {
        k.kind = KernelKind::gaussian;
        k.param = to_real(arg, key, line);
    } else if (name == "cosine") {
        k.kind = KernelKind::cosine;
        k.param = to_real(arg, key, line);
    } else if (name == "bump") {
        k.kind = KernelKind::bump;
        k.param = to_real(arg, key, line);
    } else if (name == "table") {
        arg = unquote(arg);
        if (arg.empty()) throw ScenarioError("table(path) needs a file path", line);
        k.kind = KernelKind::table;
        k.path = arg;
    } else {
        throw ScenarioError("unknown kernel family '" + name + "' for '" + key + "'", line);
    }
    return k;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

EntryMap scan_lines(const std::string& text, std::set<std::string>& sections) {
    EntryMap entries;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ScenarioError("unterminated section header", line);
            section = trim(s.substr(1, s.size() - 2));
            if (schema().count(section) == 0)
                throw ScenarioError("unknown section [" + section + "]", line);
            sections.insert(section);
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("expected 'key = value' or '[section]'", line);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw ScenarioError("expected 'key = value'", line);
        if (section.empty())
            throw ScenarioError("'" + key + "' appears before any [section]", line);
        if (schema().at(section).count(key) == 0)
            throw ScenarioError("unknown key '" + key + "' in [" + section + "]", line);
        if (value.empty())
            throw ScenarioError("'" + key + "' has no value", line);
        const std::string id = section + "." + key;
        const auto it = entries.find(id);
        if (it != entries.end())
            throw ScenarioError("duplicate key '" + key + "' in [" + section + "]: first set at line " +
                                    std::to_string(it->second.line),
                                line);
        entries.emplace(id, RawEntry{value, line});
    }
    return entries;
}

void check(bool ok, const std::string& msg, int line) {
    if (!ok) throw ScenarioError(msg, line);
}

constexpr double kNodeBudget = 2.0e6;  // matches the N-particle solver default

void validate_semantics(const Scenario& sc, const EntryMap& entries) {
    const auto line_of = [&](const char* id) {
        const auto it = entries.find(id);
        return it == entries.end() ? -1 : it->second.line;
    };
    const bool has_kernel = sc.kernel.kind != KernelKind::none;

    check(sc.extent > 0.0, "grid extent must be positive", line_of("grid.extent"));
    check(sc.points >= kMinPointsPerAxis, "grid needs at least 8 points", line_of("grid.points"));
    if (has_kernel)
        check(sc.points % 2 == 1, "a convolution kernel needs an odd grid point count",
              line_of("grid.points"));

    check(sc.g >= 0.0, "the coupling g must be nonnegative", line_of("potential.g"));
    if (sc.g > 0.0)
        check(has_kernel, "g > 0 needs an interaction kernel v1", line_of("potential.g"));
    if (sc.kernel.kind == KernelKind::gaussian)
        check(sc.kernel.param > 0.0, "gaussian(sigma) needs sigma > 0", line_of("potential.v1"));
    if (sc.kernel.kind == KernelKind::bump)
        check(sc.kernel.param > 0.0, "bump(width) needs width > 0", line_of("potential.v1"));

    check(sc.meanfield.tol > 0.0, "meanfield tol must be positive", line_of("meanfield.tol"));
    check(sc.meanfield.max_outer >= 1, "max_outer must be at least 1", line_of("meanfield.max_outer"));
    check(sc.meanfield.mixing > 0.0 && sc.meanfield.mixing <= 1.0, "mixing must lie in (0, 1]",
          line_of("meanfield.mixing"));

    for (const int N : sc.N_list)
        check(N >= 2 && N <= kMaxDims, "N_list entries must lie in [2, 4]",
              line_of("nparticle.N_list"));
    check(sc.points_per_axis.empty() || sc.points_per_axis.size() == sc.N_list.size(),
          "points_per_axis needs one entry per N", line_of("nparticle.points_per_axis"));
    for (std::size_t i = 0; i < sc.points_per_axis.size(); ++i) {
        const int p = sc.points_per_axis[i];
        const int l = line_of("nparticle.points_per_axis");
        check(p >= kMinPointsPerAxis, "points_per_axis entries must be at least 8", l);
        if (has_kernel)
            check(p % 2 == 1, "a convolution kernel needs odd per-axis point counts", l);
        check(std::pow(static_cast<double>(p), sc.N_list[i]) <= kNodeBudget,
              "N = " + std::to_string(sc.N_list[i]) + " at " + std::to_string(p) +
                  " points per axis exceeds the tensor-grid node budget",
              l);
    }
    check(sc.tol_N > 0.0, "tol_N must be positive", line_of("nparticle.tol_N"));

    if (sc.sde_enabled) {
        check(sc.sde.dt > 0.0, "dt must be positive", line_of("sde.dt"));
        check(sc.sde.T > 0.0, "T must be positive", line_of("sde.T"));
        check(sc.sde.burn_in >= 0.0 && sc.sde.burn_in < sc.sde.T, "burn_in must lie in [0, T)",
              line_of("sde.burn_in"));
        check(sc.sde.n_paths >= 16, "n_paths must be at least 16 for the block error estimate",
              line_of("sde.n_paths"));
        check(sc.sde.bins >= kMinPointsPerAxis, "bins must be at least 8", line_of("sde.bins"));
    }

    if (sc.scaling_enabled) {
        check(!sc.beta_list.empty(), "scaling needs a beta_list", line_of("scaling.beta_list"));
        for (const double b : sc.beta_list)
            check(b > 0.0 && b < 1.0, "beta must lie strictly inside (0, 1)",
                  line_of("scaling.beta_list"));
        check(!sc.scaling_N_list.empty(), "scaling needs an N_list", line_of("scaling.N_list"));
        for (const int N : sc.scaling_N_list)
            check(N >= 2 && N <= kMaxDims, "scaling N_list entries must lie in [2, 4]",
                  line_of("scaling.N_list"));
        check(sc.bump_width > 0.0, "bump(width) needs width > 0", line_of("scaling.kernel"));
        if (sc.scaling_points != 0) {
            const int l = line_of("scaling.points");
            check(sc.scaling_points >= kMinPointsPerAxis, "scaling points must be at least 8", l);
            check(sc.scaling_points % 2 == 1, "the sweep kernel needs an odd point count", l);
            const int maxN = *std::max_element(sc.scaling_N_list.begin(), sc.scaling_N_list.end());
            check(std::pow(static_cast<double>(sc.scaling_points), maxN) <= kNodeBudget,
                  "the scaling sweep exceeds the tensor-grid node budget", l);
        }
    }
}

}  // namespace

int default_axis_points(int N) {
    switch (N) {
        case 2: return 129;  // 129^2 = 16641 nodes
        case 3: return 65;   //  65^3 = 274625
        default: return 33;  //  33^4 = 1185921, inside the default budget
    }
}

Scenario parse_scenario(const std::string& text) {
    std::set<std::string> sections;
    const EntryMap entries = scan_lines(text, sections);

    Scenario sc;
    sc.source_hash = fnv1a(text);

    const auto get = [&](const char* id) -> const RawEntry* {
        const auto it = entries.find(id);
        return it == entries.end() ? nullptr : &it->second;
    };

    if (const RawEntry* e = get("grid.extent")) sc.extent = to_real(e->value, "extent", e->line);
    if (const RawEntry* e = get("grid.points")) sc.points = to_int(e->value, "points", e->line);

    if (const RawEntry* e = get("potential.V0")) sc.V0_coeffs = to_poly(e->value, "V0", e->line);
    if (const RawEntry* e = get("potential.v0")) sc.v0_coeffs = to_poly(e->value, "v0", e->line);
    if (const RawEntry* e = get("potential.v1")) sc.kernel = to_kernel(e->value, "v1", e->line);
    if (const RawEntry* e = get("potential.g")) sc.g = to_real(e->value, "g", e->line);

    if (const RawEntry* e = get("meanfield.tol")) sc.meanfield.tol = to_real(e->value, "tol", e->line);
    if (const RawEntry* e = get("meanfield.max_outer"))
        sc.meanfield.max_outer = to_int(e->value, "max_outer", e->line);
    if (const RawEntry* e = get("meanfield.mixing"))
        sc.meanfield.mixing = to_real(e->value, "mixing", e->line);
    if (const RawEntry* e = get("meanfield.init")) {
        const std::string v = trim(e->value);
        if (v == "gaussian")
            sc.meanfield.init = InitProfile::gaussian;
        else if (v == "uniform")
            sc.meanfield.init = InitProfile::uniform;
        else
            throw ScenarioError("'init' must be gaussian or uniform", e->line);
    }

    if (const RawEntry* e = get("nparticle.N_list")) {
        sc.N_list = to_int_list(e->value, "N_list", e->line);
        std::vector<int> pts;
        if (const RawEntry* pe = get("nparticle.points_per_axis")) {
            pts = to_int_list(pe->value, "points_per_axis", pe->line);
            if (pts.size() != sc.N_list.size())
                throw ScenarioError("points_per_axis needs one entry per N", pe->line);
        }
        // joint sort by N so rows come out ascending
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t i = 0; i < sc.N_list.size(); ++i)
            pairs.emplace_back(sc.N_list[i], pts.empty() ? 0 : pts[i]);
        std::sort(pairs.begin(), pairs.end());
        for (std::size_t i = 1; i < pairs.size(); ++i)
            if (pairs[i].first == pairs[i - 1].first)
                throw ScenarioError("N_list entries must be distinct", e->line);
        sc.N_list.clear();
        sc.points_per_axis.clear();
        for (const auto& [N, p] : pairs) {
            sc.N_list.push_back(N);
            if (!pts.empty()) sc.points_per_axis.push_back(p);
        }
    } else if (get("nparticle.points_per_axis")) {
        throw ScenarioError("points_per_axis needs an N_list",
                            get("nparticle.points_per_axis")->line);
    }
    if (const RawEntry* e = get("nparticle.tol_N")) sc.tol_N = to_real(e->value, "tol_N", e->line);

    sc.sde_enabled = sections.count("sde") > 0;
    if (const RawEntry* e = get("sde.dt")) sc.sde.dt = to_real(e->value, "dt", e->line);
    if (const RawEntry* e = get("sde.T")) sc.sde.T = to_real(e->value, "T", e->line);
    if (const RawEntry* e = get("sde.burn_in")) sc.sde.burn_in = to_real(e->value, "burn_in", e->line);
    if (const RawEntry* e = get("sde.n_paths")) sc.sde.n_paths = to_int(e->value, "n_paths", e->line);
    if (const RawEntry* e = get("sde.seed")) sc.sde.seed = to_u64(e->value, "seed", e->line);
    if (const RawEntry* e = get("sde.bins")) sc.sde.bins = to_int(e->value, "bins", e->line);

    sc.scaling_enabled = sections.count("scaling") > 0;
    if (const RawEntry* e = get("scaling.beta_list")) {
        sc.beta_list = to_real_list(e->value, "beta_list", e->line);
        std::sort(sc.beta_list.begin(), sc.beta_list.end());
        sc.beta_list.erase(std::unique(sc.beta_list.begin(), sc.beta_list.end()),
                           sc.beta_list.end());
    }
    if (const RawEntry* e = get("scaling.N_list")) {
        sc.scaling_N_list = to_int_list(e->value, "N_list", e->line);
        std::sort(sc.scaling_N_list.begin(), sc.scaling_N_list.end());
        sc.scaling_N_list.erase(
            std::unique(sc.scaling_N_list.begin(), sc.scaling_N_list.end()),
            sc.scaling_N_list.end());
    }
    if (const RawEntry* e = get("scaling.kernel")) {
        const KernelSpec k = to_kernel(e->value, "kernel", e->line);
        if (k.kind != KernelKind::bump)
            throw ScenarioError("the sweep kernel must be bump(width)", e->line);
        sc.bump_width = k.param;
    }
    if (const RawEntry* e = get("scaling.points"))
        sc.scaling_points = to_int(e->value, "points", e->line);

    if (const RawEntry* e = get("output.directory")) sc.out_dir = unquote(trim(e->value));
    if (const RawEntry* e = get("output.formats")) {
        sc.write_csv = false;
        sc.write_json = false;
        for (const std::string& tok : split_list(e->value)) {
            if (tok == "csv")
                sc.write_csv = true;
            else if (tok == "json")
                sc.write_json = true;
            else
                throw ScenarioError("formats must be a subset of {csv, json}, got '" + tok + "'",
                                    e->line);
        }
        if (!sc.write_csv && !sc.write_json)
            throw ScenarioError("formats needs at least one of csv, json", e->line);
    }

    validate_semantics(sc, entries);
    return sc;
}

Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read scenario file: " + path);
    return parse_scenario(buf.str());
}

}  // namespace mkv
