#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "finkey/keyrate.hpp"

namespace finkey {

using Json = nlohmann::ordered_json;

// Bad config: message names the offending key path, or line:column for syntax errors.
struct ConfigError : InvalidInput {
    using InvalidInput::InvalidInput;
};

Json parse_config(const std::string& text, const std::string& origin = "<config>");
Json load_config(const std::string& path);

// dotted paths, e.g. "channel.q"
const Json* get_path(const Json& cfg, const std::string& dotted);
void set_path(Json& cfg, const std::string& dotted, const Json& value);

struct GridAxis {
    std::string key;
    std::vector<Json> values;
};

// Axes in canonical order: the "grid" block as written, then N innermost.
std::vector<GridAxis> grid_axes(const Json& cfg);
// Replace an axis with the same key, or add it just before N.
void override_axis(std::vector<GridAxis>& axes, GridAxis axis);
// Cartesian product, first axis slowest; each point has grid, N and optimize resolved
// into plain values (optimize stays, it is consumed by the runner).
std::vector<Json> grid_points(const Json& cfg, const std::vector<GridAxis>& axes);

// What a row echoes about its inputs.
struct PointInputs {
    std::string preset;
    std::string povm;
    std::string coarse_grainings;  // joined with '+'
    std::string mode;
    std::string acceptance;
    double N = 0.0;
    double m = 0.0;
    double p_z = 0.0;
    double f_ec = 0.0;
    double q = 0.0;
    double theta_deg = 0.0;
    double L = 0.0;
    double nu = 0.0;
    int c = 1;
    std::uint64_t seed = 0;
    int trials = 1;
};

struct PointSetup {
    PointInputs in;
    std::vector<Scenario> trials;  // one per sampled frequency distribution; a single one for exact statistics
};

// Validate one resolved point (no grid, no optimize) and build its scenarios.
PointSetup build_point(const Json& point, std::uint64_t seed);

// Full check of a config: schema, every grid point, every optimize candidate bound.
// Returns the number of grid points.
std::size_t validate_config(const Json& cfg, const std::vector<GridAxis>& axes);

std::uint64_t point_seed(std::uint64_t base, std::size_t point, int trial);

}  // namespace finkey
