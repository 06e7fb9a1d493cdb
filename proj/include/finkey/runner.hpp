#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "finkey/scenario.hpp"

namespace finkey {

struct RunOptions {
    std::uint64_t seed = 1;
    int workers = 1;
    bool verbose = false;
};

struct ResultRow {
    std::size_t point = 0;
    PointInputs in;
    std::string status = "ok";
    KeyRateResult detail;   // first trial of the chosen point
    double n = 0.0;
    double rate = 0.0;      // mean over trials
    double rate_std = 0.0;  // sample standard deviation, 0 for one trial
    double ell = 0.0;       // mean over trials
};

// One resolved grid point, including its optimize block and trials.
ResultRow evaluate_point(const Json& point, std::size_t index, const RunOptions& opt);

// Rows come back in grid order whatever the number of workers.
std::vector<ResultRow> run_points(const std::vector<Json>& points, const RunOptions& opt);

const std::vector<std::string>& csv_columns();
void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_json(std::ostream& os, const std::vector<ResultRow>& rows);

// Parse a file written by write_csv back into header + string cells.
std::vector<std::vector<std::string>> read_csv(std::istream& is);

}  // namespace finkey
