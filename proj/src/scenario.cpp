#include "finkey/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "finkey/channel.hpp"

namespace finkey {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where.empty() ? what : where + ": " + what);
}

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

void check_keys(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) fail(join(where, it.key()), "unknown key");
}

const Json* field(const Json& obj, const char* key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double num(const Json& obj, const std::string& where, const char* key, double def) {
    const Json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_number()) fail(join(where, key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(join(where, key), "not finite");
    return x;
}

int integer(const Json& obj, const std::string& where, const char* key, int def) {
    const Json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_number_integer() && !(v->is_number() && std::floor(v->get<double>()) == v->get<double>()))
        fail(join(where, key), "expected an integer");
    return static_cast<int>(v->get<double>());
}

bool boolean(const Json& obj, const std::string& where, const char* key, bool def) {
    const Json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_boolean()) fail(join(where, key), "expected true or false");
    return v->get<bool>();
}

std::string str(const Json& obj, const std::string& where, const char* key, const std::string& def) {
    const Json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_string()) fail(join(where, key), "expected a string");
    return v->get<std::string>();
}

void in_range(double x, double lo, double hi, const std::string& where) {
    if (!(x >= lo && x <= hi)) {
        std::ostringstream os;
        os << "must lie in [" << lo << ", " << hi << "], got " << x;
        fail(where, os.str());
    }
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

const std::set<std::string> kTop{"name",  "description", "protocol", "channel",  "statistics", "epsilon",
                                 "mode",  "N",           "m",        "n",        "f_ec",       "h_xy",
                                 "acceptance", "coherent", "optimize", "solver", "seed",       "output",
                                 "grid"};

std::vector<Json> n_values(const Json& v) {
    if (v.is_number()) return {v};
    if (v.is_array()) {
        if (v.empty()) fail("N", "empty list");
        for (const auto& x : v)
            if (!x.is_number()) fail("N", "expected numbers");
        return std::vector<Json>(v.begin(), v.end());
    }
    if (v.is_object()) {
        check_keys(v, "N", {"from", "to", "per_decade"});
        const double from = num(v, "N", "from", 0.0), to = num(v, "N", "to", 0.0);
        const int per = integer(v, "N", "per_decade", 1);
        if (!(from > 0.0 && to >= from) || per < 1) fail("N", "need 0 < from <= to and per_decade >= 1");
        std::vector<Json> out;
        const double a = std::log10(from), b = std::log10(to);
        const int steps = static_cast<int>(std::round((b - a) * per));
        for (int i = 0; i <= steps; ++i) out.push_back(std::pow(10.0, a + static_cast<double>(i) / per));
        return out;
    }
    fail("N", "expected a number, a list or {from, to, per_decade}");
}

// Bell-state-based presets give a state; DPR only a distribution.
struct ExactStats {
    Distribution dist;
    std::optional<CMat> state;
};

ExactStats channel_statistics(const ProtocolSpec& ps, const ProtocolModel& model, const ChannelParams& ch) {
    ExactStats s;
    if (ps.preset == "bb84" || ps.preset == "bb84-rotated") {
        s.state = bb84_channel_state(ch.q, ch.theta);
    } else if (ps.preset == "mdi-bb84") {
        s.state = mdi_channel_state(ch.q);
    } else if (ps.preset == "dpr-bb84") {
        s.dist = simulate_dpr_statistics(ch, ps.p_z);
        return s;
    } else {
        fail("protocol.preset", "no channel model for '" + ps.preset + "'; use statistics.source = csv");
    }
    s.dist = probability_map(*s.state, model.fine_povm);
    const double tot = s.dist.sum();
    if (tot > 0.0) s.dist /= tot;
    return s;
}

// H(X|Y) of a BB84 state read through the fine POVM, for the two-outcome phase model.
double bb84_hxy_from_state(const CMat& rho, double p_z) {
    ProtocolSpec fine;
    fine.p_z = p_z;
    const ProtocolModel m = build_protocol(fine);
    return conditional_entropy_xy(probability_map(rho, m.fine_povm), m.key_rounds);
}

Distribution read_csv_statistics(const std::string& path, const Povm& povm) {
    const FrequencyDistribution f = load_frequency_csv(path);
    if (static_cast<int>(f.freq.size()) != povm.size())
        fail("statistics.path", "file has " + std::to_string(f.freq.size()) + " outcomes, the POVM has " +
                                    std::to_string(povm.size()));
    Distribution d = Distribution::Zero(povm.size());
    for (size_t i = 0; i < f.alphabet.size(); ++i) {
        int j = -1;
        for (int k = 0; k < povm.size(); ++k)
            if (povm.labels[k] == f.alphabet[i]) j = k;
        if (j < 0) fail("statistics.path", "unknown outcome label '" + f.alphabet[i] + "'");
        d(j) = f.freq(static_cast<int>(i));
    }
    return d;
}

}  // namespace

Json parse_config(const std::string& text, const std::string& origin) {
    try {
        return Json::parse(text, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        // byte offset to line:column
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        const auto p = what.find("syntax error");
        if (p != std::string::npos) what = what.substr(p);
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
    }
}

Json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

const Json* get_path(const Json& cfg, const std::string& dotted) {
    const Json* cur = &cfg;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(part);
        if (it == cur->end()) return nullptr;
        cur = &*it;
    }
    return cur;
}

void set_path(Json& cfg, const std::string& dotted, const Json& value) {
    Json* cur = &cfg;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) fail(dotted, "empty key");
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!cur->is_object()) fail(dotted, "'" + parts[i] + "' is not an object");
        if (!cur->contains(parts[i])) (*cur)[parts[i]] = Json::object();
        cur = &(*cur)[parts[i]];
    }
    if (!cur->is_object()) fail(dotted, "parent is not an object");
    (*cur)[parts.back()] = value;
}

std::vector<GridAxis> grid_axes(const Json& cfg) {
    if (!cfg.is_object()) fail("", "config must be a JSON object");
    check_keys(cfg, "", kTop);
    std::vector<GridAxis> axes;
    if (const Json* g = field(cfg, "grid")) {
        if (!g->is_object()) fail("grid", "expected an object of key: [values]");
        for (auto it = g->begin(); it != g->end(); ++it) {
            if (it.key() == "N") fail("grid.N", "give N at the top level");
            if (!it->is_array() || it->empty()) fail("grid." + it.key(), "expected a nonempty list");
            axes.push_back({it.key(), std::vector<Json>(it->begin(), it->end())});
        }
    }
    if (const Json* n = field(cfg, "N")) axes.push_back({"N", n_values(*n)});
    return axes;
}

void override_axis(std::vector<GridAxis>& axes, GridAxis axis) {
    if (axis.values.empty()) fail(axis.key, "empty value list");
    if (axis.key == "N") {
        std::vector<Json> vals;
        for (const auto& v : axis.values) {
            if (!v.is_number()) fail("N", "expected numbers");
            vals.push_back(v);
        }
        axis.values = vals;
    }
    for (auto& a : axes)
        if (a.key == axis.key) {
            a.values = std::move(axis.values);
            return;
        }
    auto pos = axes.end();
    if (!axes.empty() && axes.back().key == "N") --pos;
    axes.insert(axis.key == "N" ? axes.end() : pos, std::move(axis));
}

std::vector<Json> grid_points(const Json& cfg, const std::vector<GridAxis>& axes) {
    Json base = cfg;
    base.erase("grid");
    std::vector<Json> out;
    std::vector<size_t> idx(axes.size(), 0);
    while (true) {
        Json p = base;
        for (size_t a = 0; a < axes.size(); ++a) set_path(p, axes[a].key, axes[a].values[idx[a]]);
        out.push_back(std::move(p));
        int a = static_cast<int>(axes.size()) - 1;
        while (a >= 0 && ++idx[a] == axes[a].values.size()) idx[a--] = 0;
        if (a < 0) break;
    }
    return out;
}

std::uint64_t point_seed(std::uint64_t base, std::size_t point, int trial) {
    return splitmix(splitmix(base ^ splitmix(point + 1)) + static_cast<std::uint64_t>(trial));
}

PointSetup build_point(const Json& p, std::uint64_t seed) {
    check_keys(p, "", kTop);
    if (field(p, "grid")) fail("grid", "unresolved grid in a single point");
    if (const Json* s = field(p, "seed"); s && !s->is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    for (const char* k : {"name", "description", "output"}) str(p, "", k, "");
    PointSetup out;
    PointInputs& in = out.in;

    // protocol
    const Json empty = Json::object();
    const Json& jp = field(p, "protocol") ? p["protocol"] : empty;
    if (!field(p, "protocol")) fail("protocol", "missing");
    check_keys(jp, "protocol", {"preset", "p_z", "povm", "coarse_grainings", "c", "nu"});
    ProtocolSpec ps;
    ps.preset = str(jp, "protocol", "preset", "");
    if (ps.preset.empty()) fail("protocol.preset", "missing");
    if (ps.preset == "custom") fail("protocol.preset", "custom models cannot be described in a config");
    ps.p_z = num(jp, "protocol", "p_z", 0.5);
    in_range(ps.p_z, 0.0, 1.0, "protocol.p_z");
    ps.povm = str(jp, "protocol", "povm", "fine");
    if (const Json* cg = field(jp, "coarse_grainings")) {
        ps.coarse_grainings.clear();
        if (cg->is_string()) {
            ps.coarse_grainings.push_back(cg->get<std::string>());
        } else if (cg->is_array() && !cg->empty()) {
            for (const auto& x : *cg) {
                if (!x.is_string()) fail("protocol.coarse_grainings", "expected names");
                ps.coarse_grainings.push_back(x.get<std::string>());
            }
        } else {
            fail("protocol.coarse_grainings", "expected a name or a nonempty list of names");
        }
    }
    ps.c = integer(jp, "protocol", "c", 1);
    ps.nu = num(jp, "protocol", "nu", 0.1);

    // channel
    const Json& jc = field(p, "channel") ? p["channel"] : empty;
    check_keys(jc, "channel",
               {"q", "qber", "theta_deg", "L", "alpha_att", "eta_d", "p_d", "zeta_deg", "double_click_to_first"});
    ChannelParams ch;
    if (field(jc, "q") && field(jc, "qber")) fail("channel", "give q or qber, not both");
    ch.q = field(jc, "qber") ? 2.0 * num(jc, "channel", "qber", 0.0) : num(jc, "channel", "q", 0.0);
    ch.theta = num(jc, "channel", "theta_deg", 0.0) * M_PI / 180.0;
    ch.L = num(jc, "channel", "L", 0.0);
    ch.alpha_att = num(jc, "channel", "alpha_att", 0.2);
    ch.eta_d = num(jc, "channel", "eta_d", 1.0);
    ch.p_d = num(jc, "channel", "p_d", 0.0);
    ch.zeta = num(jc, "channel", "zeta_deg", 0.0) * M_PI / 180.0;
    ch.double_click_to_first = num(jc, "channel", "double_click_to_first", 0.5);
    ch.nu = ps.nu;
    ch.c = ps.c;
    try {
        ch.validate();
    } catch (const InvalidInput& e) {
        fail("channel", e.what());
    }

    Scenario sc;
    try {
        sc.protocol = build_protocol(ps);
    } catch (const InvalidInput& e) {
        fail("protocol", e.what());
    }

    // mode and budget
    const std::string mode = str(p, "", "mode", "collective");
    try {
        sc.mode = mode_from_string(mode);
    } catch (const InvalidInput& e) {
        fail("mode", e.what());
    }
    if (const Json* je = field(p, "epsilon")) {
        check_keys(*je, "epsilon", {"all", "pe", "bar", "ec", "pa", "qdf"});
        const double all = num(*je, "epsilon", "all", 0.25e-8);
        sc.budget.pe = num(*je, "epsilon", "pe", all);
        sc.budget.bar = num(*je, "epsilon", "bar", all);
        sc.budget.ec = num(*je, "epsilon", "ec", all);
        sc.budget.pa = num(*je, "epsilon", "pa", all);
        sc.budget.qdf = num(*je, "epsilon", "qdf", 0.0);
    }
    try {
        sc.budget.validate(sc.mode == Mode::Coherent);
    } catch (const InvalidInput& e) {
        fail("epsilon", e.what());
    }

    // signal accounting
    const bool asym = sc.mode == Mode::Asymptotic;
    const Json* jn = field(p, "N");
    if (jn && !jn->is_number()) fail("N", "unresolved N list in a single point");
    sc.finite.N = jn ? jn->get<double>() : 0.0;
    if (!asym && !(sc.finite.N >= 1.0)) fail("N", "a positive N is required outside asymptotic mode");
    sc.finite.f_ec = num(p, "", "f_ec", 1.2);
    if (!(sc.finite.f_ec >= 1.0)) fail("f_ec", "must be at least 1");
    sc.finite.d = sc.protocol.key_alphabet_size;
    if (!asym) {
        const Json& jm = field(p, "m") ? p["m"] : empty;
        check_keys(jm, "m", {"rule", "fraction", "value", "schedule"});
        const std::string rule = str(jm, "m", "rule", "basis");
        const double N = sc.finite.N;
        if (rule == "basis") {
            sc.finite.m = (1.0 - ps.p_z) * (1.0 - ps.p_z) * N;
        } else if (rule == "fraction") {
            const double f = num(jm, "m", "fraction", -1.0);
            if (!(f > 0.0 && f < 1.0)) fail("m.fraction", "must lie in (0, 1)");
            sc.finite.m = f * N;
        } else if (rule == "explicit") {
            sc.finite.m = num(jm, "m", "value", -1.0);
        } else if (rule == "g_pe") {
            try {
                sc.finite.m = g_pe_schedule(str(jm, "m", "schedule", ""), N) * N;
            } catch (const InvalidInput& e) {
                fail("m.schedule", e.what());
            }
        } else {
            fail("m.rule", "expected basis, fraction, explicit or g_pe");
        }
        sc.finite.m = std::floor(sc.finite.m);
        if (!(sc.finite.m >= 1.0 && sc.finite.m < N)) fail("m", "resolves outside [1, N)");
        if (field(p, "n")) {
            sc.finite.n = num(p, "", "n", -1.0);
            if (!(sc.finite.n > 0.0 && sc.finite.n <= N - sc.finite.m)) fail("n", "must lie in (0, N - m]");
        }
    }
    if (const Json* jk = field(p, "coherent")) {
        check_keys(*jk, "coherent", {"k", "b"});
        sc.finite.k = num(*jk, "coherent", "k", 0.0);
        sc.finite.b = num(*jk, "coherent", "b", 1.0);
        if (sc.finite.k < 0.0 || !(sc.finite.b >= 1.0)) fail("coherent", "need k >= 0 and b >= 1");
    }

    // solver knobs
    if (const Json* js = field(p, "solver")) {
        check_keys(*js, "solver",
                   {"max_iter", "eps_tol", "line_search_evals", "polish", "polish_gap", "eps_rep", "eps_start",
                    "sdp_gap", "sdp_feas", "sdp_max_iter", "verbose"});
        auto& k = sc.knobs;
        k.max_iter = integer(*js, "solver", "max_iter", k.max_iter);
        k.eps_tol = num(*js, "solver", "eps_tol", k.eps_tol);
        k.line_search_evals = integer(*js, "solver", "line_search_evals", k.line_search_evals);
        k.polish = boolean(*js, "solver", "polish", k.polish);
        k.polish_gap = num(*js, "solver", "polish_gap", k.polish_gap);
        k.eps_rep = num(*js, "solver", "eps_rep", k.eps_rep);
        k.eps_start = num(*js, "solver", "eps_start", k.eps_start);
        k.sdp.gap = num(*js, "solver", "sdp_gap", k.sdp.gap);
        k.sdp.feasibility = num(*js, "solver", "sdp_feas", k.sdp.feasibility);
        k.sdp.max_iter = integer(*js, "solver", "sdp_max_iter", k.sdp.max_iter);
        k.verbose = boolean(*js, "solver", "verbose", k.verbose);
        if (k.max_iter < 1 || !(k.eps_tol > 0.0) || k.line_search_evals < 3 || !(k.eps_rep > 0.0) ||
            !(k.eps_start > 0.0) || !(k.sdp.gap > 0.0) || !(k.sdp.feasibility > 0.0) || k.sdp.max_iter < 1)
            fail("solver", "knobs out of range");
    }

    // statistics
    const Json& jst = field(p, "statistics") ? p["statistics"] : empty;
    check_keys(jst, "statistics", {"source", "path", "sampling", "sample_below", "trials"});
    const std::string source = str(jst, "statistics", "source", "channel");
    const std::string sampling = str(jst, "statistics", "sampling", "exact");
    const double sample_below = num(jst, "statistics", "sample_below", INFINITY);
    const int trials = integer(jst, "statistics", "trials", 1);
    if (trials < 1) fail("statistics.trials", "must be at least 1");
    if (sampling != "exact" && sampling != "sampled") fail("statistics.sampling", "expected exact or sampled");

    ExactStats exact;
    if (source == "channel") {
        exact = channel_statistics(ps, sc.protocol, ch);
    } else if (source == "csv") {
        const std::string path = str(jst, "statistics", "path", "");
        if (path.empty()) fail("statistics.path", "missing");
        try {
            exact.dist = read_csv_statistics(path, sc.protocol.fine_povm);
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidInput& e) {
            fail("statistics.path", e.what());
        }
    } else {
        fail("statistics.source", "expected channel or csv");
    }

    // error-correction entropy
    std::optional<double> hxy;
    bool hxy_from_observed = false;
    if (const Json* jh = field(p, "h_xy")) {
        if (jh->is_number()) {
            hxy = jh->get<double>();
        } else if (jh->is_object()) {
            check_keys(*jh, "h_xy", {"qber"});
            const double e = num(*jh, "h_xy", "qber", -1.0);
            in_range(e, 0.0, 1.0, "h_xy.qber");
            hxy = binary_entropy(e);
        } else if (!(jh->is_string() && jh->get<std::string>() == "auto")) {
            fail("h_xy", "expected \"auto\", a number or {qber}");
        }
        if (hxy) in_range(*hxy, 0.0, std::log2(sc.finite.d), "h_xy");
    }
    if (!hxy) {
        if (sc.protocol.key_rounds.empty()) {
            if (!exact.state || (ps.preset != "bb84" && ps.preset != "bb84-rotated"))
                fail("h_xy", "this model has no key-round table; give h_xy explicitly");
            hxy = bb84_hxy_from_state(*exact.state, ps.p_z);
        } else {
            hxy_from_observed = true;
        }
    }

    // acceptance
    in.acceptance = "unique";
    if (const Json* ja = field(p, "acceptance")) {
        check_keys(*ja, "acceptance", {"type", "set", "e_bar", "t", "reference"});
        const std::string type = str(*ja, "acceptance", "type", "unique");
        if (type == "threshold") {
            if ((ps.preset != "bb84" && ps.preset != "bb84-rotated") || ps.povm != "fine")
                fail("acceptance", "threshold acceptance is available for bb84 with the fine POVM");
            if (source != "channel") fail("acceptance", "threshold acceptance needs channel statistics");
            const std::string set = str(*ja, "acceptance", "set", "fine");
            AcceptanceSet acc;
            if (set == "phase") {
                std::vector<int> g(16, 1);
                g[4 * 2 + 3] = 0;
                g[4 * 3 + 2] = 0;
                acc.abort_map = CoarseGraining::grouping("phase", {"err", "ok"}, g);
            } else if (set == "fine") {
                acc.abort_map = CoarseGraining::identity(sc.protocol.fine_povm.labels);
            } else {
                fail("acceptance.set", "expected phase or fine");
            }
            ChannelParams ref = ch;
            if (const Json* jr = field(*ja, "reference")) {
                check_keys(*jr, "acceptance.reference", {"q", "theta_deg"});
                ref.q = num(*jr, "acceptance.reference", "q", ch.q);
                ref.theta = num(*jr, "acceptance.reference", "theta_deg", ch.theta * 180.0 / M_PI) * M_PI / 180.0;
            }
            acc.reference = channel_statistics(ps, sc.protocol, ref).dist;
            if (field(*ja, "t")) {
                acc.threshold = num(*ja, "acceptance", "t", 0.0);
            } else {
                const double e_bar = num(*ja, "acceptance", "e_bar", -1.0);
                in_range(e_bar, 0.0, 0.5, "acceptance.e_bar");
                acc.threshold = 2.0 * (1.0 - ps.p_z) * (1.0 - ps.p_z) * e_bar;
            }
            if (!(acc.threshold >= 0.0)) fail("acceptance.t", "must be nonnegative");
            sc.protocol.acceptance = acc;
            exact.dist = acc.reference;
            in.acceptance = "threshold-" + set;
        } else if (type != "unique") {
            fail("acceptance.type", "expected unique or threshold");
        }
    }

    // echo
    in.preset = ps.preset;
    in.povm = ps.povm;
    for (size_t i = 0; i < ps.coarse_grainings.size(); ++i)
        in.coarse_grainings += (i ? "+" : "") + ps.coarse_grainings[i];
    in.mode = to_string(sc.mode);
    in.N = sc.finite.N;
    in.m = asym ? 0.0 : sc.finite.m;
    in.p_z = ps.p_z;
    in.f_ec = sc.finite.f_ec;
    in.q = ch.q;
    in.theta_deg = ch.theta * 180.0 / M_PI;
    in.L = ch.L;
    in.nu = ps.nu;
    in.c = ps.c;
    in.seed = seed;

    // scenarios
    const bool sample = sampling == "sampled" && !asym && sc.finite.m < sample_below && !sc.protocol.acceptance;
    auto finish = [&](Scenario s, const Distribution& obs) {
        s.observed = obs;
        s.expected = exact.dist;
        if (hxy)
            s.h_xy = *hxy;
        else if (hxy_from_observed)
            s.h_xy = conditional_entropy_xy(obs, s.protocol.key_rounds);
        out.trials.push_back(std::move(s));
    };
    if (sample) {
        const auto m = static_cast<std::uint64_t>(sc.finite.m);
        for (int t = 0; t < trials; ++t)
            finish(sc, sample_frequency(exact.dist, m, point_seed(seed, 0, t), sc.protocol.fine_povm.labels).freq);
    } else {
        finish(sc, exact.dist);
    }
    in.trials = static_cast<int>(out.trials.size());
    return out;
}

std::size_t validate_config(const Json& cfg, const std::vector<GridAxis>& axes) {
    const auto points = grid_points(cfg, axes);
    for (const auto& pt : points) {
        Json p = pt;
        std::vector<std::pair<std::string, std::vector<double>>> cands;
        if (const Json* o = field(p, "optimize")) {
            if (!o->is_object()) fail("optimize", "expected an object of key: {min, max, grid, refine} or {values}");
            for (auto it = o->begin(); it != o->end(); ++it) {
                const std::string w = "optimize." + it.key();
                check_keys(*it, w, {"min", "max", "grid", "refine", "values"});
                std::vector<double> c;
                if (const Json* v = field(*it, "values")) {
                    if (!v->is_array() || v->empty()) fail(w + ".values", "expected a nonempty list");
                    for (const auto& x : *v) {
                        if (!x.is_number()) fail(w + ".values", "expected numbers");
                        c.push_back(x.get<double>());
                    }
                } else {
                    const double lo = num(*it, w, "min", NAN), hi = num(*it, w, "max", NAN);
                    if (!(lo < hi)) fail(w, "need min < max");
                    if (integer(*it, w, "grid", 10) < 2) fail(w + ".grid", "must be at least 2");
                    if (integer(*it, w, "refine", 8) < 0) fail(w + ".refine", "must be nonnegative");
                    c = {lo, hi};
                }
                cands.push_back({it.key(), c});
            }
            p.erase("optimize");
        }
        build_point(p, 0);
        for (const auto& [key, vals] : cands)
            for (double v : vals) {
                Json q = p;
                set_path(q, key, v);
                build_point(q, 0);
            }
    }
    return points.size();
}

}  // namespace finkey
