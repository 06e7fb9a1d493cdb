#include <gtest/gtest.h>

#include "finkey/channel.hpp"
#include "finkey/protocol.hpp"
#include "finkey/random.hpp"

using namespace finkey;

namespace {

ProtocolModel preset(const std::string& name, double pz = 0.5, std::vector<std::string> cgs = {"fine"}, int c = 1) {
    ProtocolSpec s;
    s.preset = name;
    s.p_z = pz;
    s.coarse_grainings = std::move(cgs);
    s.c = c;
    s.nu = 0.05;
    return build_protocol(s);
}

void expect_complete(const Povm& p, double tol = 1e-9) {
    CMat sum = CMat::Zero(p.dim(), p.dim());
    for (const auto& e : p.elements) {
        EXPECT_GE(min_eigenvalue(e), -tol);
        sum += e;
    }
    EXPECT_LE((sum - identity(p.dim())).cwiseAbs().maxCoeff(), tol);
}

int index_of(const Povm& p, const std::string& label) {
    for (int i = 0; i < p.size(); ++i)
        if (p.labels[i] == label) return i;
    ADD_FAILURE() << "no label " << label;
    return -1;
}

Distribution random_distribution(int n, Rng& rng) {
    Distribution d(n);
    for (int i = 0; i < n; ++i) d(i) = -std::log(1.0 - rng.uniform());
    return d / d.sum();
}

}  // namespace

TEST(Protocol, Bb84FinePovmComplete) {
    const auto m = preset("bb84", 0.9);
    EXPECT_EQ(m.fine_povm.size(), 16);
    expect_complete(m.fine_povm);
}

TEST(Protocol, EveryPresetAndCoarseGrainingIsAPovm) {
    std::vector<ProtocolModel> models{preset("bb84", 0.7, {"fine", "phase", "agreement"}), preset("bb84-rotated", 0.6),
                                      preset("mdi-bb84"), preset("dpr-bb84", 0.5, {"fine"}, 1),
                                      preset("dpr-bb84", 0.5, {"fine"}, 2)};
    for (const auto& m : models) {
        expect_complete(m.fine_povm);
        for (const auto& cg : m.coarse_grainings) expect_complete(cg.effective(m.fine_povm));
    }
}

TEST(Protocol, PhaseCoarseGrainingEffectivePovm) {
    const double pz = 0.7;
    const auto m = preset("bb84", pz, {"phase"});
    const Povm eff = m.coarse_grainings[0].effective(m.fine_povm);
    // oracle: apply the grouping table by hand
    CMat err = m.fine_povm.elements[index_of(m.fine_povm, "+,-")] + m.fine_povm.elements[index_of(m.fine_povm, "-,+")];
    EXPECT_LE((eff.elements[0] - err).norm(), 1e-13);
    EXPECT_LE((eff.elements[1] - (identity(4) - err)).norm(), 1e-13);
    // both parties measure X with weight (1-pz)^2
    EXPECT_LE((eff.elements[0] - (1 - pz) * (1 - pz) * phase_error_projector()).norm(), 1e-12);
}

TEST(Protocol, DprDimensions) {
    const auto m = preset("dpr-bb84", 0.5, {"fine"}, 2);
    EXPECT_EQ(m.dims[0], 8);
    EXPECT_EQ(m.dims[1], 3);
    EXPECT_EQ(m.fine_povm.size(), 40);
    expect_complete(m.fine_povm);
}

TEST(Protocol, UnknownPresetAndBadParameters) {
    EXPECT_THROW(preset("b92"), InvalidInput);
    EXPECT_THROW(preset("bb84", 1.0), InvalidInput);
    EXPECT_THROW(preset("bb84", 0.5, {"nonsense"}), InvalidInput);
    EXPECT_THROW(preset("dpr-bb84", 0.5, {"fine"}, 0), InvalidInput);
    ProtocolSpec s;
    s.preset = "custom";
    EXPECT_THROW(build_protocol(s), InvalidInput);
}

TEST(ProbabilityMap, BellPhasePovmHasNoError) {
    const CMat pe = phase_error_projector();
    Povm p{{"err", "ok"}, {pe, CMat(identity(4) - pe)}};
    const Distribution d = probability_map(bell_phi_plus(), p);
    EXPECT_NEAR(d(0), 0.0, 1e-15);
    EXPECT_NEAR(d(1), 1.0, 1e-15);
}

TEST(ProbabilityMap, BellFinePovmBornRule) {
    const auto m = preset("bb84", 0.5);
    const Distribution d = probability_map(bell_phi_plus(), m.fine_povm);
    // Born rule by hand: local elements p/2 |s><s|, amplitude <s_a s_b|Phi+> = conj-free overlap
    const Povm loc = bb84_local_povm(0.5);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const CMat k = kron(loc.elements[a], loc.elements[b]);
            const double born = (bell_phi_plus() * k).trace().real();
            EXPECT_NEAR(d(4 * a + b), born, 1e-14);
        }
    EXPECT_NEAR(d(index_of(m.fine_povm, "0,0")), 1.0 / 8, 1e-14);
    EXPECT_NEAR(d(index_of(m.fine_povm, "1,1")), 1.0 / 8, 1e-14);
    EXPECT_NEAR(d(index_of(m.fine_povm, "+,+")), 1.0 / 8, 1e-14);
    EXPECT_NEAR(d(index_of(m.fine_povm, "-,-")), 1.0 / 8, 1e-14);
    EXPECT_NEAR(d(index_of(m.fine_povm, "0,+")), 1.0 / 16, 1e-14);
    EXPECT_NEAR(d(index_of(m.fine_povm, "-,1")), 1.0 / 16, 1e-14);
    EXPECT_NEAR(d.sum(), 1.0, 1e-12);
}

TEST(ProbabilityMap, MaximallyMixed) {
    const auto m = preset("bb84", 0.8);
    const Distribution d = probability_map(identity(4) / 4.0, m.fine_povm);
    for (int j = 0; j < d.size(); ++j) EXPECT_NEAR(d(j), real_trace(m.fine_povm.elements[j]) / 4.0, 1e-15);
    EXPECT_THROW(probability_map(identity(3) / 3.0, m.fine_povm), InvalidInput);
}

TEST(CoarseGrain, IdentityAndPhaseGrouping) {
    const auto m = preset("bb84", 0.7, {"fine", "phase"});
    Rng rng(6);
    const Distribution f = random_distribution(16, rng);
    EXPECT_LE((coarse_grain(f, m.coarse_grainings[0]) - f).norm(), 0.0);
    const Distribution c = coarse_grain(f, m.coarse_grainings[1]);
    const double err = f(index_of(m.fine_povm, "+,-")) + f(index_of(m.fine_povm, "-,+"));
    EXPECT_NEAR(c(0), err, 1e-15);
    EXPECT_NEAR(c(1), 1.0 - err, 1e-14);
    EXPECT_THROW(coarse_grain(Distribution::Ones(3) / 3.0, m.coarse_grainings[1]), InvalidInput);
}

TEST(CoarseGrain, CommutesWithProbabilityMap) {
    const auto m = preset("bb84", 0.6, {"fine", "phase", "agreement"});
    Rng rng(7);
    for (int t = 0; t < 5; ++t) {
        const CMat rho = random_density(4, rng);
        for (const auto& cg : m.coarse_grainings) {
            const Distribution a = coarse_grain(probability_map(rho, m.fine_povm), cg);
            const Distribution b = probability_map(rho, cg.effective(m.fine_povm));
            EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-13);
        }
    }
}

TEST(CoarseGrain, DataProcessingContractsL1) {
    std::vector<ProtocolModel> models{preset("bb84", 0.7, {"fine", "phase", "agreement"})};
    Rng rng(77);
    for (const auto& m : models)
        for (const auto& cg : m.coarse_grainings)
            for (int t = 0; t < 20; ++t) {
                const Distribution p = random_distribution(16, rng), q = random_distribution(16, rng);
                EXPECT_LE((coarse_grain(p, cg) - coarse_grain(q, cg)).cwiseAbs().sum(),
                          (p - q).cwiseAbs().sum() + 1e-14);
            }
}

TEST(SourceReplacement, Examples) {
    const auto two = source_replace({ket(2, 0).col(0), ket(2, 1).col(0)}, {0.5, 0.5});
    EXPECT_LE((two.rho_A - identity(2) / 2.0).norm(), 1e-14);

    CVec plus(2), minus(2);
    plus << 1.0, 1.0;
    minus << 1.0, -1.0;
    plus /= std::sqrt(2.0);
    minus /= std::sqrt(2.0);
    const auto bb = source_replace({ket(2, 0).col(0), ket(2, 1).col(0), plus, minus}, {0.25, 0.25, 0.25, 0.25});
    EXPECT_EQ(bb.alice_dim, 2);
    // Gram-matrix oracle: rho_A has the spectrum of sqrt(p) G sqrt(p)
    CMat gram(4, 4);
    std::vector<CVec> st{ket(2, 0).col(0), ket(2, 1).col(0), plus, minus};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) gram(i, j) = 0.25 * st[i].dot(st[j]);
    Eigen::SelfAdjointEigenSolver<CMat> eg(gram), ea(bb.rho_A);
    EXPECT_NEAR(ea.eigenvalues()(0), 0.5, 1e-12);
    EXPECT_NEAR(ea.eigenvalues()(1), 0.5, 1e-12);
    EXPECT_NEAR(eg.eigenvalues()(3), 0.5, 1e-12);
    EXPECT_NEAR(eg.eigenvalues()(2), 0.5, 1e-12);

    const auto one = source_replace({ket(2, 0).col(0)}, {1.0});
    EXPECT_EQ(one.alice_dim, 1);
    EXPECT_NEAR(one.rho_A(0, 0).real(), 1.0, 1e-14);

    CVec bad(2);
    bad << 1.0, 1.0;
    EXPECT_THROW(source_replace({bad}, {1.0}), InvalidInput);
}

TEST(Bb84Map, TraceEqualsBasisAgreement) {
    for (double pz : {0.5, 0.8}) {
        const auto m = preset("bb84", pz);
        EXPECT_NEAR(real_trace(apply_G(bell_phi_plus(), m.postproc)), pz * pz, 1e-12);
    }
}

TEST(MdiModel, AnnouncementRegisterIsClassical) {
    // Charlie's outcome is the last factor; every POVM element is block diagonal in it
    const auto m = preset("mdi-bb84");
    const int dc = 3, rest = 4;
    for (const auto& e : m.fine_povm.elements)
        for (int c1 = 0; c1 < dc; ++c1)
            for (int c2 = 0; c2 < dc; ++c2) {
                if (c1 == c2) continue;
                double off = 0.0;
                for (int i = 0; i < rest; ++i)
                    for (int j = 0; j < rest; ++j) off += std::abs(e(i * dc + c1, j * dc + c2));
                EXPECT_EQ(off, 0.0);
            }
    // and G keeps the state's classical register block structure
    const CMat rho = mdi_channel_state(0.02);
    const CMat g = apply_G(rho, m.postproc);
    EXPECT_LE((pinch_Z(g, m.postproc) - pinch_Z(pinch_Z(g, m.postproc), m.postproc)).norm(), 1e-14);
    EXPECT_GE(min_eigenvalue(g), -1e-12);
}

TEST(KeyRounds, Bb84ConditionalEntropy) {
    const auto m = preset("bb84", 0.9);
    const double e = 0.05;
    const Distribution d = probability_map(bb84_channel_state(2 * e, 0.0), m.fine_povm);
    const double h = -e * std::log2(e) - (1 - e) * std::log2(1 - e);
    EXPECT_NEAR(conditional_entropy_xy(d, m.key_rounds), h, 1e-12);
}
