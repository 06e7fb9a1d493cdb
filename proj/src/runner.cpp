#include "finkey/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <thread>

namespace finkey {

namespace {

ResultRow evaluate_plain(const Json& point, std::size_t index, const RunOptions& opt) {
    ResultRow row;
    row.point = index;
    PointSetup setup;
    try {
        setup = build_point(point, point_seed(opt.seed, index, 0));
    } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        return row;
    }
    row.in = setup.in;
    std::vector<double> rates, ells;
    for (size_t t = 0; t < setup.trials.size(); ++t) {
        Scenario& sc = setup.trials[t];
        if (opt.verbose) sc.knobs.verbose = true;
        KeyRateResult r;
        try {
            r = finite_key_rate(sc);
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
        }
        if (t == 0) {
            row.detail = r;
            row.n = r.terms.n;
        }
        if (r.status != "ok" && row.status == "ok") row.status = r.status;
        rates.push_back(r.rate);
        ells.push_back(r.ell);
    }
    const double k = static_cast<double>(rates.size());
    double mean = 0.0, ell = 0.0;
    for (size_t i = 0; i < rates.size(); ++i) {
        mean += rates[i] / k;
        ell += ells[i] / k;
    }
    double var = 0.0;
    for (double r : rates) var += (r - mean) * (r - mean);
    row.rate = mean;
    row.ell = ell;
    row.rate_std = rates.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
    return row;
}

struct OptAxis {
    std::string key;
    std::vector<double> values;  // exhaustive when nonempty
    double lo = 0.0, hi = 0.0;
    int grid = 10;
    int refine = 8;
};

bool better(const ResultRow& a, const ResultRow& b) {
    if ((a.status == "ok") != (b.status == "ok")) return a.status == "ok";
    return a.rate > b.rate;
}

ResultRow optimize(const Json& point, const std::vector<OptAxis>& axes, size_t i, std::size_t index,
                   const RunOptions& opt) {
    if (i == axes.size()) return evaluate_plain(point, index, opt);
    const OptAxis& ax = axes[i];
    auto at = [&](double v) {
        Json p = point;
        set_path(p, ax.key, v);
        return optimize(p, axes, i + 1, index, opt);
    };
    if (!ax.values.empty()) {
        ResultRow best = at(ax.values.front());
        for (size_t j = 1; j < ax.values.size(); ++j) {
            ResultRow r = at(ax.values[j]);
            if (better(r, best)) best = std::move(r);
        }
        return best;
    }
    // coarse grid, then golden section inside the cell pair around the best grid point
    const double h = (ax.hi - ax.lo) / (ax.grid - 1);
    ResultRow best;
    double xbest = ax.lo;
    for (int j = 0; j < ax.grid; ++j) {
        const double x = ax.lo + h * j;
        ResultRow r = at(x);
        if (j == 0 || better(r, best)) {
            best = std::move(r);
            xbest = x;
        }
    }
    if (ax.refine < 2) return best;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::max(ax.lo, xbest - h), b = std::min(ax.hi, xbest + h);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    ResultRow r1 = at(x1), r2 = at(x2);
    for (int e = 2; e < ax.refine; ++e) {
        if (better(r2, r1)) {
            a = x1;
            x1 = x2;
            r1 = std::move(r2);
            x2 = a + g * (b - a);
            r2 = at(x2);
        } else {
            b = x2;
            x2 = x1;
            r2 = std::move(r1);
            x1 = b - g * (b - a);
            r1 = at(x1);
        }
    }
    if (better(r1, best)) best = std::move(r1);
    if (better(r2, best)) best = std::move(r2);
    return best;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string mu_list(const std::vector<double>& mu) {
    std::string s;
    for (size_t i = 0; i < mu.size(); ++i) s += (i ? ";" : "") + fmt(mu[i]);
    return s;
}

Json row_json(const ResultRow& r) {
    const auto& d = r.detail;
    Json j;
    j["point"] = r.point;
    j["preset"] = r.in.preset;
    j["povm"] = r.in.povm;
    j["coarse_grainings"] = r.in.coarse_grainings;
    j["mode"] = r.in.mode;
    j["acceptance"] = r.in.acceptance;
    j["N"] = r.in.N;
    j["m"] = r.in.m;
    j["n"] = r.n;
    j["p_z"] = r.in.p_z;
    j["f_ec"] = r.in.f_ec;
    j["q"] = r.in.q;
    j["theta_deg"] = r.in.theta_deg;
    j["L"] = r.in.L;
    j["nu"] = r.in.nu;
    j["c"] = r.in.c;
    j["seed"] = r.in.seed;
    j["trials"] = r.in.trials;
    j["status"] = r.status;
    j["alpha_hat"] = d.alpha_hat;
    j["beta"] = d.beta;
    j["gap"] = d.alpha_hat - d.beta;
    j["eps"] = d.eps;
    j["eps_prime"] = d.expansion.eps_prime;
    j["zeta"] = d.zeta;
    j["mu"] = d.mu;
    j["p_pass"] = d.p_pass;
    j["h_xy"] = d.h_xy;
    j["H_mu"] = d.terms.H_mu;
    j["delta"] = d.terms.delta;
    j["leak"] = d.terms.leak;
    j["pa_term"] = d.terms.pa_term;
    j["penalty"] = d.terms.penalty;
    j["r"] = d.r;
    j["ell"] = r.ell;
    j["rate"] = r.rate;
    j["rate_std"] = r.rate_std;
    j["iterations"] = d.iterations;
    return j;
}

}  // namespace

ResultRow evaluate_point(const Json& point, std::size_t index, const RunOptions& opt) {
    Json p = point;
    std::vector<OptAxis> axes;
    if (auto it = p.find("optimize"); it != p.end()) {
        for (auto a = it->begin(); a != it->end(); ++a) {
            OptAxis ax;
            ax.key = a.key();
            if (a->contains("values"))
                for (const auto& v : (*a)["values"]) ax.values.push_back(v.get<double>());
            else {
                ax.lo = (*a)["min"].get<double>();
                ax.hi = (*a)["max"].get<double>();
                ax.grid = a->contains("grid") ? (*a)["grid"].get<int>() : 10;
                ax.refine = a->contains("refine") ? (*a)["refine"].get<int>() : 8;
            }
            axes.push_back(std::move(ax));
        }
        p.erase("optimize");
    }
    return optimize(p, axes, 0, index, opt);
}

std::vector<ResultRow> run_points(const std::vector<Json>& points, const RunOptions& opt) {
    std::vector<ResultRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) rows[i] = evaluate_point(points[i], i, opt);
    };
    const int w = std::max(1, std::min<int>(opt.workers, static_cast<int>(points.size())));
    if (w == 1) {
        work();
        return rows;
    }
    std::vector<std::thread> pool;
    for (int i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return rows;
}

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "point",  "preset",  "povm",  "coarse_grainings", "mode",      "acceptance", "N",      "m",
        "n",      "p_z",     "f_ec",  "q",                "theta_deg", "L",          "nu",     "c",
        "seed",   "trials",  "status", "alpha_hat",       "beta",      "gap",        "eps",    "eps_prime",
        "zeta",   "mu",      "p_pass", "h_xy",            "H_mu",      "delta",      "leak",   "pa_term",
        "penalty", "r",      "ell",   "rate",             "rate_std",  "iterations"};
    return cols;
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    const auto& cols = csv_columns();
    for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const auto& r : rows) {
        const Json j = row_json(r);
        for (size_t i = 0; i < cols.size(); ++i) {
            if (i) os << ",";
            const Json& v = j[cols[i]];
            if (cols[i] == "mu")
                os << mu_list(r.detail.mu);
            else if (v.is_string())
                os << quote(v.get<std::string>());
            else if (v.is_number_float())
                os << fmt(v.get<double>());
            else
                os << v.dump();
        }
        os << "\n";
    }
}

void write_json(std::ostream& os, const std::vector<ResultRow>& rows) {
    Json arr = Json::array();
    for (const auto& r : rows) arr.push_back(row_json(r));
    os << arr.dump(2) << "\n";
}

std::vector<std::vector<std::string>> read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::string cur;
        bool q = false;
        for (size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (q) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (ch == '"') {
                    q = false;
                } else {
                    cur += ch;
                }
            } else if (ch == '"') {
                q = true;
            } else if (ch == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        cells.push_back(cur);
        out.push_back(std::move(cells));
    }
    return out;
}

}  // namespace finkey
