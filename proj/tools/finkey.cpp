// finkey: run, sweep and validate scenario configs.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "finkey/runner.hpp"

using namespace finkey;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;
    bool verbose = false;
    std::vector<std::string> sets;
};

GridAxis parse_set(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=v1,v2,...; got '" + s + "'");
    GridAxis ax;
    ax.key = s.substr(0, eq);
    // split on commas outside brackets so list values like ["fine","phase"] survive
    std::vector<std::string> toks(1);
    int depth = 0;
    for (char ch : s.substr(eq + 1)) {
        if (ch == '[' || ch == '{') ++depth;
        if (ch == ']' || ch == '}') --depth;
        if (ch == ',' && depth == 0)
            toks.emplace_back();
        else
            toks.back() += ch;
    }
    for (const auto& tok : toks) {
        if (tok.empty()) throw ConfigError("--set " + ax.key + ": empty value");
        // numbers, true/false and JSON literals pass through; anything else is a string
        try {
            ax.values.push_back(Json::parse(tok));
        } catch (const Json::parse_error&) {
            ax.values.push_back(tok);
        }
    }
    return ax;
}

int run(const Common& c) {
    const Json cfg = load_config(c.config);
    auto axes = grid_axes(cfg);
    for (const auto& s : c.sets) override_axis(axes, parse_set(s));
    const std::size_t npts = validate_config(cfg, axes);

    RunOptions opt;
    opt.workers = c.workers;
    opt.verbose = c.verbose;
    opt.seed = c.seed_set ? c.seed : (cfg.contains("seed") ? cfg["seed"].get<std::uint64_t>() : 1);

    std::string out = c.out;
    if (out.empty() && cfg.contains("output")) out = cfg["output"].get<std::string>();
    if (out.empty()) out = c.format == "json" ? "results.json" : "results.csv";

    if (c.verbose) std::fprintf(stderr, "%zu grid points, %d workers\n", npts, opt.workers);
    const auto rows = run_points(grid_points(cfg, axes), opt);

    std::ofstream os(out);
    if (!os) throw ConfigError("cannot write '" + out + "'");
    if (c.format == "json")
        write_json(os, rows);
    else
        write_csv(os, rows);
    os.close();

    int bad = 0;
    for (const auto& r : rows)
        if (r.status != "ok") {
            ++bad;
            std::fprintf(stderr, "point %zu (N=%g): %s\n", r.point, r.in.N, r.status.c_str());
        }
    std::printf("%s\n", out.c_str());
    return bad ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-size key rates with certified lower bounds"};
    app.require_subcommand(1);
    Common c;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", c.config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out,-o", c.out, "output file (default: config 'output', else results.csv)");
        sub->add_option("--seed", c.seed, "base seed for sampled statistics")->each([&](const std::string&) {
            c.seed_set = true;
        });
        sub->add_option("--workers,-w", c.workers, "grid points solved concurrently")->check(CLI::PositiveNumber);
        sub->add_flag("--verbose,-v", c.verbose, "solver diagnostics on stderr");
        sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    };
    auto* run_cmd = app.add_subcommand("run", "solve every grid point of a config");
    add_common(run_cmd);
    auto* sweep_cmd = app.add_subcommand("sweep", "run with grid axes replaced or added from the command line");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--set", c.sets, "key=v1,v2,... (dotted config key)")->required();
    auto* val_cmd = app.add_subcommand("validate", "check a config without solving");
    val_cmd->add_option("config", c.config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (val_cmd->parsed()) {
            const Json cfg = load_config(c.config);
            const auto n = validate_config(cfg, grid_axes(cfg));
            std::printf("%s: ok, %zu grid points\n", c.config.c_str(), n);
            return 0;
        }
        return run(c);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
