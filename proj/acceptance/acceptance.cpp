// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "finkey/channel.hpp"
#include "finkey/runner.hpp"
#include "finkey/random.hpp"
#include "finkey/sdp.hpp"

using namespace finkey;

namespace {

// tolerances
constexpr double kFig3RateTol = 1e-4;
constexpr double kFig3Seconds = 10.0;
constexpr double kCertSlack = 1e-6;
constexpr double kTightTol = 1e-5;
constexpr double kB1MaxRate = 0.1;
constexpr double kB1Seconds = 60.0;
constexpr double kFig4Slack = 1e-6;
constexpr double kThetaTol = 1e-4;
constexpr double kAsymTol = 1e-4;
constexpr double kFiniteVsAsym = 1e-2;
constexpr double kMdiHTol = 1e-5;
constexpr double kMdiConvTol = 1e-3;
constexpr double kROracleRel = 1e-9;
constexpr double kGradRel = 1e-5;
constexpr double kSdpGap = 1e-7;

std::string g_configs = CONFIG_DIR;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string note;
};

double h2(double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

std::vector<Json> config_points(const std::string& file) {
    const Json cfg = load_config(g_configs + "/" + file);
    const auto axes = grid_axes(cfg);
    validate_config(cfg, axes);
    return grid_points(cfg, axes);
}

Scenario scenario_of(Json p) {
    p.erase("optimize");
    return build_point(p, 1).trials.at(0);
}

Json bb84_point(double q, double theta_deg, double N, double pz, const std::string& povm, Json cgs) {
    Json p = {{"protocol", {{"preset", "bb84"}, {"p_z", pz}, {"povm", povm}, {"coarse_grainings", cgs}}},
              {"channel", {{"q", q}, {"theta_deg", theta_deg}}},
              {"epsilon", {{"all", 0.25e-8}}},
              {"m", {{"rule", "basis"}}},
              {"f_ec", 1.2},
              {"N", N}};
    return p;
}

// analytic phase-error key length, written independently of the library
double analytic_rate(double e, double N, double m, double pz, double f, double eps) {
    const double n = pz * pz * (N - m);
    const double mu = std::sqrt(2.0) * std::sqrt((std::log(1.0 / eps) + 2.0 * std::log(m + 1.0)) / m);
    const double delta = 2.0 * std::log2(5.0) * std::sqrt(std::log2(2.0 / eps) / n);
    const double x = std::min(0.5, e + mu / 2.0);
    const double ell = n * (1.0 - h2(x) - f * h2(e) - delta) - std::log2(2.0 / eps) - 2.0 * std::log2(2.0 / eps);
    return std::max(0.0, std::floor(ell)) / N;
}

struct Fig3Row {
    double e, N, rate, oracle, alpha, beta, secs;
};
std::vector<Fig3Row> g_fig3;

Outcome fig3() {
    Outcome o;
    double worst = 0.0, slowest = 0.0;
    for (const auto& pt : config_points("bb84_fig3.json")) {
        const auto t0 = Clock::now();
        const Scenario sc = scenario_of(pt);
        const auto r = finite_key_rate(sc);
        const double secs = seconds_since(t0);
        const double e = pt["channel"]["qber"].get<double>();
        const double ref = analytic_rate(e, sc.finite.N, sc.finite.m, 0.9, 1.2, 0.25e-8);
        g_fig3.push_back({e, sc.finite.N, r.rate, ref, r.alpha_hat, r.beta, secs});
        worst = std::max(worst, std::abs(r.rate - ref));
        slowest = std::max(slowest, secs);
        if (r.status != "ok" || std::abs(r.rate - ref) > kFig3RateTol || secs > kFig3Seconds) o.pass = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu points, max |rate - analytic| = %.3g, slowest %.2f s", g_fig3.size(), worst,
                  slowest);
    o.note = buf;
    return o;
}

Outcome reliability() {
    Outcome o;
    int checked = 0, early = 0;
    double worst = -INFINITY;
    auto check = [&](const KeyRateResult& r, const std::string& what) {
        ++checked;
        if (r.status != "ok") {
            o.pass = false;
            std::fprintf(stderr, "reliability: %s status %s\n", what.c_str(), r.status.c_str());
            return;
        }
        worst = std::max(worst, r.beta - r.alpha_hat);
        if (r.beta > r.alpha_hat + kCertSlack) {
            o.pass = false;
            std::fprintf(stderr, "reliability: %s beta %.12g > alpha %.12g\n", what.c_str(), r.beta, r.alpha_hat);
        }
    };
    // shipped configs, at most four points each spread over the grid
    for (const char* f : {"bb84_fig3.json", "bb84_rotated_fig4.json", "mdi_fig5.json", "dpr_fig7.json",
                          "bb84_acceptance_fig8.json"}) {
        const auto pts = config_points(f);
        const size_t take = std::min<size_t>(4, pts.size());
        for (size_t i = 0; i < take; ++i) {
            Json p = pts[take == 1 ? 0 : i * (pts.size() - 1) / (take - 1)];
            if (get_path(p, "statistics.trials")) set_path(p, "statistics.trials", 1);
            check(finite_key_rate(scenario_of(p)), f);
        }
    }
    Rng rng(84);
    for (int t = 0; t < 50; ++t) {
        const double q = rng.uniform(0.0, 0.08);
        const double N = std::pow(10.0, rng.uniform(5.0, 12.0));
        const double pz = rng.uniform(0.5, 0.9);
        const Scenario sc = scenario_of(bb84_point(q, 0.0, N, pz, "fine", {"fine"}));
        const auto conv = finite_key_rate(sc);
        check(conv, "random bb84");
        if (t % 5 == 0) {
            Scenario one = sc;
            one.knobs.max_iter = 1;
            one.knobs.polish = false;
            const auto r1 = finite_key_rate(one);
            check(r1, "random bb84 maxIter=1");
            ++early;
            if (r1.status == "ok" && r1.beta > conv.alpha_hat + kCertSlack) {
                o.pass = false;
                std::fprintf(stderr, "reliability: early-stop beta %.12g above converged alpha %.12g\n", r1.beta,
                             conv.alpha_hat);
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d certificates (%d early-stopped), max beta - alpha = %.3g", checked, early, worst);
    o.note = buf;
    return o;
}

Outcome tightness() {
    Outcome o;
    double worst = 0.0;
    for (const auto& r : g_fig3) worst = std::max(worst, std::abs(r.alpha - r.beta));
    if (g_fig3.empty() || worst > kTightTol) o.pass = false;
    // singleton set: every Hermitian direction pinned
    Rng rng(5);
    double single = 0.0;
    for (int t = 0; t < 3; ++t) {
        const CMat rho = random_density(4, rng);
        FeasibleSetSpec spec;
        spec.dim = 4;
        spec.certainty = marginal_constraints(rho, 1);
        const auto b = certified_bound(spec, bb84_postproc(0.7), SolverKnobs{});
        single = std::max(single, std::abs(b.step1.value - b.step2.beta));
        if (!b.step2.ok) o.pass = false;
    }
    if (single > kTightTol) o.pass = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, "fig3 grid max gap %.3g, singleton max gap %.3g", worst, single);
    o.note = buf;
    return o;
}

Outcome theorem_b1() {
    Outcome o;
    const auto t0 = Clock::now();
    Rng rng(1234);
    Distribution P(4);
    for (int i = 0; i < 4; ++i) P(i) = -std::log(1.0 - rng.uniform());
    P /= P.sum();
    const std::uint64_t m = 2000;
    const double mu = variation_bound_mu(0.1, 4, double(m));
    const int trials = 10000;
    int bad = 0;
    for (int t = 0; t < trials; ++t) {
        const auto f = sample_frequency(P, m, rng.next());
        if ((f.freq - P).cwiseAbs().sum() > mu) ++bad;
    }
    const double rate = double(bad) / trials, secs = seconds_since(t0);
    o.pass = rate <= kB1MaxRate && secs < kB1Seconds;
    char buf[160];
    std::snprintf(buf, sizeof buf, "mu = %.4f, violations %d/%d (rate %.4g), %.2f s", mu, bad, trials, rate, secs);
    o.note = buf;
    return o;
}

Outcome fig4() {
    Outcome o;
    const double q = 0.02, th = 12.0, pz = 0.5;
    std::vector<double> diff;
    double worst = -INFINITY;
    for (double N = 1e5; N <= 1e12 * 1.01; N *= 10) {
        auto beta = [&](Json cgs) {
            const auto r = finite_key_rate(scenario_of(bb84_point(q, th, N, pz, "fine", cgs)));
            if (r.status != "ok") o.pass = false;
            return r.beta;
        };
        const double bf = beta({"fine"}), bp = beta({"phase"}), bb = beta({"fine", "phase"});
        worst = std::max(worst, std::max(bf, bp) - bb);
        if (bb < std::max(bf, bp) - kFig4Slack) o.pass = false;
        diff.push_back(bf - bp);
    }
    bool cross = false;
    for (size_t i = 1; i < diff.size(); ++i)
        if ((diff[i - 1] < 0.0) != (diff[i] < 0.0)) cross = true;
    if (!cross) o.pass = false;
    // asymptotic fine-grained entropy does not see the rotation
    std::vector<double> H;
    for (double deg : {0.0, 12.0, 30.0}) {
        Json p = bb84_point(q, deg, 1e10, pz, "fine", {"fine"});
        p["mode"] = "asymptotic";
        KeyRateResult d;
        asymptotic_key_rate(scenario_of(p), &d);
        if (d.status != "ok") o.pass = false;
        H.push_back(d.terms.H_mu);
    }
    const double spread = *std::max_element(H.begin(), H.end()) - *std::min_element(H.begin(), H.end());
    if (spread > kThetaTol) o.pass = false;
    char buf[200];
    std::snprintf(buf, sizeof buf, "(a) max(fine, phase) - combined = %.3g, (b) crossover %s, (c) H spread %.3g",
                  worst, cross ? "found" : "missing", spread);
    o.note = buf;
    return o;
}

Outcome asymptotic_bb84() {
    Outcome o;
    Json p = bb84_point(0.1, 0.0, 1e14, 0.5, "fine", {"fine"});
    p["f_ec"] = 1.0;
    Json pa = p;
    pa["mode"] = "asymptotic";
    KeyRateResult d;
    const double rate = asymptotic_key_rate(scenario_of(pa), &d);
    const double per_sifted = rate / d.p_pass;
    const double target = 1.0 - 2.0 * h2(0.05);
    const auto f = finite_key_rate(scenario_of(p));
    const double finite_per_sifted = f.ell / f.terms.n;
    o.pass = d.status == "ok" && f.status == "ok" && std::abs(per_sifted - target) <= kAsymTol &&
             std::abs(finite_per_sifted - per_sifted) <= kFiniteVsAsym;
    char buf[200];
    std::snprintf(buf, sizeof buf, "asymptotic %.6f vs 1-2h(0.05) = %.6f; finite at N=1e14 %.6f per sifted signal",
                  per_sifted, target, finite_per_sifted);
    o.note = buf;
    return o;
}

Outcome mdi() {
    Outcome o;
    const auto pts = config_points("mdi_fig5.json");
    Json p0 = pts.front();
    p0["channel"]["q"] = 0.0;
    p0["mode"] = "asymptotic";
    KeyRateResult d;
    asymptotic_key_rate(scenario_of(p0), &d);
    const double H0 = d.terms.H_mu;
    if (d.status != "ok" || std::abs(H0 - 1.0) > kMdiHTol) o.pass = false;
    double worst_conv = 0.0;
    bool mono = true;
    for (double q : {0.01, 0.03}) {
        double prev = -1.0, last = 0.0, m_last = 0.0, N_last = 0.0;
        for (const auto& pt : pts) {
            if (pt["channel"]["q"].get<double>() != q) continue;
            const Scenario sc = scenario_of(pt);
            const auto r = finite_key_rate(sc);
            if (r.status != "ok") o.pass = false;
            if (r.rate < prev) mono = false;
            prev = r.rate;
            last = r.ell;
            m_last = sc.finite.m;
            N_last = sc.finite.N;
        }
        Json pa = pts.front();
        pa["channel"]["q"] = q;
        pa["mode"] = "asymptotic";
        const double asym = asymptotic_key_rate(scenario_of(pa));
        if (N_last < 1e13) o.pass = false;
        worst_conv = std::max(worst_conv, std::abs(last / (N_last - m_last) - asym));
    }
    if (!mono || worst_conv > kMdiConvTol) o.pass = false;
    char buf[200];
    std::snprintf(buf, sizeof buf, "H(q=0) = %.7f, monotone %s, |l/(N-m) - asymptotic| at 1e13 = %.3g", H0,
                  mono ? "yes" : "no", worst_conv);
    o.note = buf;
    return o;
}

Outcome dpr() {
    Outcome o;
    RunOptions opt;
    opt.seed = 7;
    opt.workers = 4;
    const auto rows = run_points(config_points("dpr_fig7.json"), opt);
    // zero up to some N, positive from there on
    size_t first_pos = rows.size();
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].status != "ok") o.pass = false;
        if (rows[i].rate > 0.0 && first_pos == rows.size()) first_pos = i;
        if (first_pos < i && !(rows[i].rate > 0.0)) o.pass = false;
    }
    if (first_pos == 0 || first_pos == rows.size()) o.pass = false;
    const double threshold = first_pos < rows.size() ? rows[first_pos].in.N : NAN;

    // asymptotic limit, c = 1 against c = 2 at the same intensity
    double asym[2] = {0, 0};
    int dims_ok = 0;
    for (int c : {1, 2}) {
        Json p = config_points("dpr_fig7.json").front();
        p["protocol"]["c"] = c;
        p["mode"] = "asymptotic";
        const Scenario sc = scenario_of(p);
        KeyRateResult d;
        asym[c - 1] = asymptotic_key_rate(sc, &d);
        if (d.status != "ok" || d.beta > d.alpha_hat + kCertSlack) o.pass = false;
        // POVM and SDP invariants at this dimension
        const auto& m = sc.protocol;
        bool ok = m.dims[0] == 4 * c && m.dims[1] == 3 && m.fine_povm.dim() == 12 * c;
        CMat sum = CMat::Zero(m.fine_povm.dim(), m.fine_povm.dim());
        for (const auto& e : m.fine_povm.elements) {
            ok = ok && min_eigenvalue(e) >= -1e-9;
            sum += e;
        }
        ok = ok && (sum - identity(m.fine_povm.dim())).cwiseAbs().maxCoeff() < 1e-9;
        const auto spec = make_feasible_spec(sc, false, {variation_bound_mu(0.25e-8, m.fine_povm.size(), 1e10)});
        ok = ok && verify_adjoint(build_linear_set(spec).to_sdp(identity(m.dim())), 10);
        dims_ok += ok;
    }
    if (asym[1] < asym[0] || dims_ok != 2) o.pass = false;
    char buf[220];
    std::snprintf(buf, sizeof buf, "first positive N = %.3g, asymptotic c=1 %.4g vs c=2 %.4g, invariants %d/2",
                  threshold, asym[0], asym[1], dims_ok);
    o.note = buf;
    return o;
}

Outcome coherent() {
    Outcome o;
    int tested = 0;
    for (double e : {0.01, 0.05})
        for (double N : {1e8, 1e10, 1e12}) {
            Json p = bb84_point(2 * e, 0.0, N, 0.9, "phase", {"phase"});
            const Scenario col = scenario_of(p);
            p["mode"] = "coherent";
            p["epsilon"]["qdf"] = 1e-9;
            const Scenario coh = scenario_of(p);
            const auto a = finite_key_rate(col), b = finite_key_rate(coh);
            ++tested;
            if (a.status != "ok" || b.status != "ok" || b.ell > a.ell) o.pass = false;
        }
    const double N = 1e12, m = 1e10, k = 1e11, n = N - m - k;
    const double r = coherent_r(N, n, m, k, 1.0, 1e-8, 4);
    const long double ref = (((long double)n + m) / k + 1.0L) * (2.0L * std::log(2.0L / 1e-8L) + 16.0L * std::log((long double)k)) - 1.0L;
    const double rel = std::abs(r - double(ref)) / double(ref);
    if (rel > kROracleRel) o.pass = false;
    bool rejected = false;
    try {
        coherent_params(1e4, 1e4 - 101, 100, 1, 1.0, 1e-8, 1e-8, 1e-8, 4, 2);
    } catch (const InvalidInput&) {
        rejected = true;
    }
    if (!rejected) o.pass = false;
    char buf[200];
    std::snprintf(buf, sizeof buf, "l_coh <= l_coll on %d scenarios, r relative error %.3g, r > N %s", tested, rel,
                  rejected ? "rejected" : "accepted");
    o.note = buf;
    return o;
}

Outcome numerics() {
    Outcome o;
    // gradient against central differences over a full Hermitian basis
    Rng rng(20);
    double worst_grad = 0.0;
    for (int t = 0; t < 20; ++t) {
        PostProcessingMap map = bb84_postproc(rng.uniform(0.5, 0.95));
        map.perturbation_eps = 1e-9;
        const CMat rho = random_density(4, rng);
        const CMat g = grad_f_eps(rho, map);
        const auto basis = hermitian_basis(4);
        RVec an(basis.size()), fd(basis.size());
        // central differences need the step well inside the spectrum
        const double h = std::min(1e-5, 1e-2 * min_eigenvalue(rho));
        for (size_t i = 0; i < basis.size(); ++i) {
            an(i) = inner(g, basis[i]);
            fd(i) = (f_eps(CMat(rho + h * basis[i]), map) - f_eps(CMat(rho - h * basis[i]), map)) / (2 * h);
        }
        worst_grad = std::max(worst_grad, (an - fd).norm() / an.norm());
    }
    if (worst_grad > kGradRel) o.pass = false;

    // SDP fixtures
    double worst_gap = 0.0;
    {
        SdpProblem p;
        p.add_block(BlockKind::Hermitian, 2);
        CMat a = CMat::Zero(2, 2);
        a(0, 0) = 1.0;
        a(1, 1) = 2.0;
        p.objective = {a};
        p.add_row({identity(2)}, 1.0);
        const auto s = solve(p);
        if (s.status != SdpStatus::Optimal || std::abs(s.primal_value - 1.0) > 1e-6) o.pass = false;
        worst_gap = std::max(worst_gap, std::abs(s.primal_value - s.dual_value));
    }
    {
        CMat a = CMat::Zero(2, 2);
        a(0, 0) = 3.0;
        a(1, 1) = -4.0;
        SdpProblem p;
        p.add_block(BlockKind::Hermitian, 2);
        p.add_block(BlockKind::Hermitian, 2);
        p.objective = {identity(2), identity(2)};
        for (const CMat& b : hermitian_basis(2)) p.add_row({b, CMat(-b)}, inner(b, a));
        const auto s = solve(p);
        if (s.status != SdpStatus::Optimal || std::abs(s.primal_value - 7.0) > 1e-6) o.pass = false;
        worst_gap = std::max(worst_gap, std::abs(s.primal_value - s.dual_value));
    }
    if (worst_gap > kSdpGap) o.pass = false;

    // injected violation on the trace row
    const Scenario sc = scenario_of(bb84_point(0.1, 0.0, 1e6, 0.5, "phase", {"phase"}));
    const double mu = variation_bound_mu(sc.budget.pe, 2, sc.finite.m);
    const auto spec = make_feasible_spec(sc, false, {mu});
    const LinearSet set = build_linear_set(spec);
    const CMat rho = (1.0 + 1e-6) * bb84_channel_state(0.1, 0.0);
    const auto e = expand_imprecision(rho, RVec::Zero(set.nv), spec, set, 1e-12, false);
    double dist = 0.0;
    const Distribution target = coarse_grain(spec.observed, spec.entries[0].cg);
    for (int l = 0; l < 2; ++l) dist += std::abs(inner(spec.entries[0].effective.elements[l], rho) - target(l));
    const double expect_mu = std::max(mu + 2 * e.eps_prime, dist + 2 * e.eps_prime);
    const bool inj_ok = std::abs(e.eps_prime - 1e-6) <= 1e-15 && e.mu_prime.size() == 1 && e.mu_prime[0] == expect_mu;
    if (!inj_ok) o.pass = false;
    char buf[220];
    std::snprintf(buf, sizeof buf, "gradient rel err %.3g, SDP gap %.3g, injected eps' = %.6g mu' %s", worst_grad,
                  worst_gap, e.eps_prime, inj_ok ? "exact" : "mismatch");
    o.note = buf;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_configs = argv[1];
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"fig3-analytic", fig3},         {"reliability", reliability},   {"tightness", tightness},
        {"variation-bound-mc", theorem_b1}, {"fig4-orderings", fig4},    {"asymptotic-bb84", asymptotic_bb84},
        {"mdi-bb84", mdi},               {"dpr-bb84", dpr},              {"coherent", coherent},
        {"numerics", numerics},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note = std::string("exception: ") + e.what();
        }
        std::printf("%s %-20s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.note.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
