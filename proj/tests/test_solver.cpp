#include <gtest/gtest.h>

#include <cmath>

#include "finkey/channel.hpp"
#include "finkey/keyrate.hpp"
#include "finkey/random.hpp"

using namespace finkey;

namespace {

double h2(double p) { return p <= 0.0 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

Scenario bb84(double q, double theta, double N, double pz = 0.5, const std::string& povm = "fine",
              std::vector<std::string> cgs = {"fine"}) {
    ProtocolSpec ps;
    ps.preset = "bb84";
    ps.p_z = pz;
    ps.povm = povm;
    ps.coarse_grainings = std::move(cgs);
    Scenario sc;
    sc.protocol = build_protocol(ps);
    sc.observed = probability_map(bb84_channel_state(q, theta), sc.protocol.fine_povm);
    sc.finite.N = N;
    sc.finite.m = std::floor((1 - pz) * (1 - pz) * N);
    sc.finite.f_ec = 1.2;
    if (povm == "phase") sc.h_xy = h2(q / 2);
    return sc;
}

}  // namespace

TEST(Step1, SingletonSetReturnsTheState) {
    Rng rng(5);
    const CMat rho = random_density(4, rng);
    FeasibleSetSpec spec;
    spec.dim = 4;
    spec.certainty = marginal_constraints(rho, 1);  // every Hermitian direction fixed
    const auto map = bb84_postproc(0.7);
    const BoundResult b = certified_bound(spec, map, SolverKnobs{});
    PostProcessingMap me = map;
    me.perturbation_eps = b.eps;
    EXPECT_LE((b.step1.rho - rho).norm(), 1e-6);
    EXPECT_NEAR(b.step1.value, f_eps(rho, me), 1e-7);
    ASSERT_TRUE(b.step2.ok);
    EXPECT_LE(std::abs(b.step1.value - b.step2.beta), 1e-6);
    EXPECT_LE(b.step2.beta, b.step1.value + 1e-9);
}

TEST(Step1, MaxIterOneTakesOneStep) {
    Scenario sc = bb84(0.04, 0.0, 1e8, 0.5);
    sc.knobs.max_iter = 1;
    sc.knobs.polish = false;
    const auto one = finite_key_rate(sc);
    ASSERT_EQ(one.status, "ok");
    EXPECT_LE(one.iterations, 1);
    Scenario full = bb84(0.04, 0.0, 1e8, 0.5);
    const auto conv = finite_key_rate(full);
    ASSERT_EQ(conv.status, "ok");
    // early stop still certifies a valid lower bound
    EXPECT_LE(one.beta, conv.alpha_hat + 1e-6);
    EXPECT_LE(one.beta, one.alpha_hat + 1e-6);
    EXPECT_GE(one.alpha_hat, conv.alpha_hat - 1e-6);
}

TEST(Step1, IteratesAreMonotone) {
    Scenario sc = bb84(0.06, 0.1, 1e7, 0.6);
    sc.knobs.polish = false;
    const auto mu = std::vector<double>{variation_bound_mu(sc.budget.pe, 16, sc.finite.m)};
    const auto spec = make_feasible_spec(sc, false, mu);
    const auto b = certified_bound(spec, sc.protocol.postproc, sc.knobs);
    for (size_t i = 1; i < b.step1.trace.size(); ++i) EXPECT_LE(b.step1.trace[i], b.step1.trace[i - 1] + 1e-12);
}

TEST(Asymptotic, Bb84PerSiftedRate) {
    Scenario sc = bb84(0.1, 0.0, 1e10, 0.5);
    sc.mode = Mode::Asymptotic;
    sc.finite.f_ec = 1.0;
    KeyRateResult d;
    const double rate = asymptotic_key_rate(sc, &d);
    ASSERT_EQ(d.status, "ok");
    EXPECT_NEAR(d.p_pass, 0.25, 1e-12);
    EXPECT_NEAR(rate / d.p_pass, 1.0 - 2.0 * h2(0.05), 1e-4);
    EXPECT_NEAR(1.0 - 2.0 * h2(0.05), 0.42721, 1e-5);
    EXPECT_LE(std::abs(d.alpha_hat - d.beta), 1e-5);
}

TEST(Asymptotic, NoiselessGivesOneBit) {
    Scenario sc = bb84(0.0, 0.0, 1e10, 0.5);
    sc.mode = Mode::Asymptotic;
    KeyRateResult d;
    asymptotic_key_rate(sc, &d);
    ASSERT_EQ(d.status, "ok");
    EXPECT_NEAR(d.terms.H_mu, 1.0, 1e-5);
}

TEST(Expansion, InjectedViolationPropagates) {
    Scenario sc = bb84(0.1, 0.0, 1e6, 0.5, "phase", {"phase"});
    const double mu = variation_bound_mu(sc.budget.pe, 2, sc.finite.m);
    const auto spec = make_feasible_spec(sc, false, {mu});
    const LinearSet set = build_linear_set(spec);
    const CMat rho = bb84_channel_state(0.1, 0.0);
    const double inj = 1e-6;
    // the marginal rows vanish on this state, so only the trace row moves
    const CMat bad = (1.0 + inj) * rho;
    const auto e = expand_imprecision(bad, RVec::Zero(set.nv), spec, set, 1e-12, false);
    EXPECT_NEAR(e.eps_prime, inj, 1e-15);
    double dist = 0.0;
    const Distribution target = coarse_grain(spec.observed, spec.entries[0].cg);
    for (int l = 0; l < 2; ++l) dist += std::abs(inner(spec.entries[0].effective.elements[l], bad) - target(l));
    ASSERT_EQ(e.mu_prime.size(), 1u);
    EXPECT_EQ(e.mu_prime[0], std::max(mu + 2 * e.eps_prime, dist + 2 * e.eps_prime));
    EXPECT_NEAR(e.mu_prime[0], mu + 2 * inj, 1e-14);
}

TEST(Expansion, RepresentationFloor) {
    Scenario sc = bb84(0.1, 0.0, 1e6, 0.5, "phase", {"phase"});
    const double mu = variation_bound_mu(sc.budget.pe, 2, sc.finite.m);
    const auto spec = make_feasible_spec(sc, false, {mu});
    const LinearSet set = build_linear_set(spec);
    const auto e = expand_imprecision(bb84_channel_state(0.1, 0.0), RVec::Zero(set.nv), spec, set, 1e-10, false);
    EXPECT_EQ(e.eps_prime, 1e-10);
    EXPECT_EQ(e.mu_prime[0], mu + 2e-10);
}

TEST(Theorem1, AddingCoarseGrainingNeverHurts) {
    const double q = 0.02, th = 12.0 * M_PI / 180.0, N = 1e8;
    auto beta = [&](std::vector<std::string> cgs) {
        const auto r = finite_key_rate(bb84(q, th, N, 0.7, "fine", std::move(cgs)));
        EXPECT_EQ(r.status, "ok");
        return r.beta;
    };
    const double bf = beta({"fine"}), bp = beta({"phase"}), both = beta({"fine", "phase"});
    EXPECT_GE(both, bf - 1e-6);
    EXPECT_GE(both, bp - 1e-6);
}

TEST(Reliability, RandomBb84Scenarios) {
    Rng rng(2024);
    for (int t = 0; t < 8; ++t) {
        const double q = rng.uniform(0.0, 0.16);
        const double N = std::pow(10.0, rng.uniform(5.0, 12.0));
        const auto r = finite_key_rate(bb84(q, 0.0, N, rng.uniform(0.5, 0.9)));
        ASSERT_EQ(r.status, "ok") << "q=" << q << " N=" << N;
        EXPECT_LE(r.beta, r.alpha_hat + 1e-6) << "q=" << q << " N=" << N;
        EXPECT_GE(r.ell, 0.0);
    }
}

TEST(KeyRate, PhaseProtocolMatchesClosedForm) {
    const double e = 0.05, pz = 0.9, N = 1e8;
    Scenario sc = bb84(2 * e, 0.0, N, pz, "phase", {"phase"});
    const auto r = finite_key_rate(sc);
    ASSERT_EQ(r.status, "ok");
    const double m = std::floor((1 - pz) * (1 - pz) * N);
    const double n = pz * pz * (N - m);
    const double mu = std::sqrt(2.0) * std::sqrt((std::log(1 / 0.25e-8) + 2 * std::log(m + 1)) / m);
    const double delta = 2 * std::log2(5.0) * std::sqrt(std::log2(2 / 0.25e-8) / n);
    const double ell = n * (1 - h2(e + mu / 2) - 1.2 * h2(e) - delta) - std::log2(2 / 0.25e-8) - 2 * std::log2(2 / 0.25e-8);
    EXPECT_NEAR(r.rate, std::floor(ell) / N, 1e-4);
    EXPECT_NEAR(r.terms.n, n, 1e-3);
}

TEST(KeyRate, CoherentNeverExceedsCollective) {
    for (double N : {1e10, 1e12}) {
        Scenario col = bb84(0.02, 0.0, N, 0.9, "phase", {"phase"});
        Scenario coh = col;
        coh.mode = Mode::Coherent;
        coh.budget.qdf = 1e-9;
        const auto a = finite_key_rate(col);
        const auto b = finite_key_rate(coh);
        ASSERT_EQ(a.status, "ok");
        ASSERT_EQ(b.status, "ok");
        EXPECT_LE(b.ell, a.ell);
        EXPECT_GT(b.r, 0.0);
    }
}

TEST(KeyRate, CoherentRejectsRAboveN) {
    Scenario sc = bb84(0.02, 0.0, 1e5, 0.9, "phase", {"phase"});
    sc.mode = Mode::Coherent;
    sc.budget.qdf = 1e-9;
    sc.finite.k = 1;
    EXPECT_THROW(finite_key_rate(sc), InvalidInput);
}

TEST(KeyRate, RejectsBadInputs) {
    Scenario sc = bb84(0.02, 0.0, 1e6);
    sc.finite.m = 0;
    EXPECT_THROW(finite_key_rate(sc), InvalidInput);
    sc = bb84(0.02, 0.0, 1e6);
    sc.budget.pe = -1e-9;
    EXPECT_THROW(finite_key_rate(sc), InvalidInput);
    sc = bb84(0.02, 0.0, 1e6);
    sc.observed(0) += 0.1;
    EXPECT_THROW(finite_key_rate(sc), InvalidInput);
}
