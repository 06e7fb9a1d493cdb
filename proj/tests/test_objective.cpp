#include <gtest/gtest.h>

#include <cmath>

#include "finkey/channel.hpp"
#include "finkey/objective.hpp"
#include "finkey/protocol.hpp"
#include "finkey/random.hpp"

using namespace finkey;

namespace {

PostProcessingMap bb84_map(double pz, double eps) {
    PostProcessingMap m = bb84_postproc(pz);
    m.perturbation_eps = eps;
    return m;
}

// direct Kraus sum, independent of apply_G
CMat kraus_oracle(const CMat& rho, const PostProcessingMap& m) {
    CMat out = CMat::Zero(m.output_dim(), m.output_dim());
    for (const auto& k : m.kraus) out += k * rho * k.adjoint();
    return out;
}

double rel_ent_oracle(const CMat& s, const CMat& t) {
    Eigen::SelfAdjointEigenSolver<CMat> es(s), et(t);
    auto lg = [](const Eigen::SelfAdjointEigenSolver<CMat>& e) {
        RVec l = e.eigenvalues();
        for (int i = 0; i < l.size(); ++i) l(i) = l(i) > 1e-300 ? std::log2(l(i)) : 0.0;
        return CMat(e.eigenvectors() * l.cast<cplx>().asDiagonal() * e.eigenvectors().adjoint());
    };
    return (s * (lg(es) - lg(et))).trace().real();
}

CMat traceless(int d, Rng& rng) {
    CMat h = random_hermitian(d, rng);
    h -= h.trace().real() / d * identity(d);
    return h / h.norm();
}

}  // namespace

TEST(ApplyG, Bb84FullKeyBasisKeepsTrace) {
    const CMat g = apply_G(bell_phi_plus(), bb84_map(1.0, 0.0));
    EXPECT_NEAR(real_trace(g), 1.0, 1e-12);
}

TEST(ApplyG, Bb84TraceIsBasisAgreementProbability) {
    for (double pz : {0.5, 0.7, 0.9}) {
        const auto m = bb84_map(pz, 0.0);
        const CMat g = apply_G(bell_phi_plus(), m);
        EXPECT_NEAR(real_trace(g), pz * pz, 1e-12);
        EXPECT_LE((g - kraus_oracle(bell_phi_plus(), m)).norm(), 1e-13);
    }
}

TEST(ApplyG, ZeroAndLinearity) {
    const auto m = bb84_map(0.8, 0.0);
    EXPECT_LE(apply_G(CMat::Zero(4, 4), m).norm(), 0.0);
    Rng rng(3);
    const CMat r1 = random_density(4, rng), r2 = random_density(4, rng);
    const CMat lhs = apply_G(CMat(0.3 * r1 + 1.7 * r2), m);
    const CMat rhs = 0.3 * apply_G(r1, m) + 1.7 * apply_G(r2, m);
    EXPECT_LE((lhs - rhs).norm(), 1e-13);
    EXPECT_THROW(apply_G(identity(3), m), InvalidInput);
}

TEST(ApplyG, AdjointIdentity) {
    const auto m = bb84_map(0.6, 0.0);
    Rng rng(12);
    for (int t = 0; t < 5; ++t) {
        const CMat x = random_hermitian(4, rng), y = random_hermitian(m.output_dim(), rng);
        EXPECT_NEAR(inner(y, apply_G(x, m)), inner(apply_G_adjoint(y, m), x), 1e-12);
    }
}

TEST(PinchZ, Examples) {
    PostProcessingMap m;
    m.kraus = {identity(2)};
    m.pinching_blocks = {{0}, {1}};
    CMat plus = CMat::Constant(2, 2, 0.5);
    EXPECT_LE((pinch_Z(plus, m) - identity(2) / 2.0).norm(), 1e-15);
    const CMat bd = (RVec(2) << 0.3, 0.7).finished().cast<cplx>().asDiagonal();
    EXPECT_LE((pinch_Z(bd, m) - bd).norm(), 0.0);
}

TEST(PinchZ, TracePreservingIdempotent) {
    const auto m = bb84_map(0.7, 0.0);
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
        const CMat s = random_density(m.output_dim(), rng);
        const CMat z = pinch_Z(s, m);
        EXPECT_NEAR(real_trace(z), real_trace(s), 1e-13);
        EXPECT_LE((pinch_Z(z, m) - z).norm(), 1e-14);
    }
}

TEST(FEps, BellStateOneBit) {
    EXPECT_NEAR(f_eps(bell_phi_plus(), bb84_map(1.0, 0.0)), 1.0, 1e-10);
}

TEST(FEps, ScalesWithSiftingProbability) {
    const double f1 = f_eps(bell_phi_plus(), bb84_map(1.0, 0.0));
    for (double pz : {0.5, 0.9}) {
        const auto m = bb84_map(pz, 0.0);
        const CMat g = kraus_oracle(bell_phi_plus(), m);
        EXPECT_NEAR(f_eps(bell_phi_plus(), m), rel_ent_oracle(g, pinch_Z(g, m)), 1e-10);
        EXPECT_NEAR(f_eps(bell_phi_plus(), m) / f1, pz * pz, 1e-10);
    }
}

TEST(FEps, ClassicalInputIsZero) {
    // diag state: Z-invariant key register, no coherence to remove
    const CMat rho = (RVec(4) << 0.5, 0.0, 0.0, 0.5).finished().cast<cplx>().asDiagonal();
    EXPECT_NEAR(f_eps(rho, bb84_map(1.0, 1e-12)), 0.0, 1e-9);
}

TEST(FEps, Convexity) {
    const auto m = bb84_map(0.8, 1e-10);
    Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        const CMat a = random_density(4, rng), b = random_density(4, rng);
        for (double l : {0.25, 0.5, 0.75}) {
            const double mix = f_eps(CMat(l * a + (1 - l) * b), m);
            EXPECT_LE(mix, l * f_eps(a, m) + (1 - l) * f_eps(b, m) + 1e-9);
        }
    }
}

TEST(FEps, FirstOrderLowerBound) {
    const auto m = bb84_map(0.7, 1e-8);
    Rng rng(32);
    for (int t = 0; t < 10; ++t) {
        const CMat rho = random_density(4, rng), sigma = random_density(4, rng);
        const double lin = f_eps(rho, m) + inner(grad_f_eps(rho, m), CMat(sigma - rho));
        EXPECT_GE(f_eps(sigma, m), lin - 1e-8);
    }
}

TEST(FEps, PerturbationWithinContinuityPenalty) {
    Rng rng(40);
    for (double eps : {1e-4, 1e-6}) {
        for (int t = 0; t < 5; ++t) {
            const CMat rho = random_density(4, rng);
            const auto m0 = bb84_map(0.8, 0.0), me = bb84_map(0.8, eps);
            const double z = zeta_eps(eps, me.output_dim());
            EXPECT_GE(f_eps(rho, me), f_eps(rho, m0) - z);
        }
    }
}

TEST(GradFEps, HermitianAndMatchesFiniteDifferences) {
    const auto m = bb84_map(0.75, 1e-9);
    Rng rng(44);
    for (int t = 0; t < 10; ++t) {
        const CMat rho = random_density(4, rng);
        const CMat g = grad_f_eps(rho, m);
        EXPECT_TRUE(is_hermitian(g, 1e-10));
        const CMat dir = traceless(4, rng);
        const double h = 1e-5;
        const double fd = (f_eps(CMat(rho + h * dir), m) - f_eps(CMat(rho - h * dir), m)) / (2 * h);
        const double an = inner(g, dir);
        EXPECT_LE(std::abs(fd - an), 1e-5 * std::max(1.0, std::abs(an)));
    }
}

TEST(GradFEps, ZeroAlongStateAtClassicalPoint) {
    const CMat rho = (RVec(4) << 0.5, 0.0, 0.0, 0.5).finished().cast<cplx>().asDiagonal();
    const auto m = bb84_map(1.0, 1e-12);
    EXPECT_NEAR(inner(grad_f_eps(rho, m), rho), 0.0, 1e-6);
}

TEST(ZetaEps, Values) {
    EXPECT_NEAR(zeta_eps(1e-6, 2), 2e-6 * std::log2(2e6), 1e-15);
    EXPECT_NEAR(zeta_eps(1e-6, 2), 4.187e-5, 1e-8);
    EXPECT_NEAR(zeta_eps(1e-8, 4), 6e-8 * std::log2(4.0 / 3e-8), 1e-17);
    EXPECT_NEAR(zeta_eps(1e-8, 4), 1.6194e-6, 1e-10);
    EXPECT_LT(zeta_eps(1e-15, 4), 1e-12);
    EXPECT_THROW(zeta_eps(1.0, 4), InvalidInput);
    EXPECT_THROW(zeta_eps(0.1, 1), InvalidInput);
}

TEST(ZetaEps, IncreasingOnValidRange) {
    for (int d : {2, 4, 16}) {
        const double top = 1.0 / (std::exp(1.0) * (d - 1));
        double prev = 0.0;
        for (double e = 1e-12; e <= top; e *= 3.0) {
            const double z = zeta_eps(e, d);
            EXPECT_GT(z, prev);
            prev = z;
        }
    }
}

TEST(Perturbation, RaisedUntilOutputIsPositive) {
    const auto m = bb84_map(0.9, 0.0);
    const double e = choose_perturbation(bell_phi_plus(), m);
    PostProcessingMap me = m;
    me.perturbation_eps = e;
    EXPECT_GT(min_eigenvalue(apply_G_eps(bell_phi_plus(), me)), 1e-10);
    EXPECT_GE(e, 1e-12);
}

TEST(CompressOutput, KeepsRelativeEntropy) {
    const auto full = bb84_postproc(0.8, false);
    const auto small = bb84_postproc(0.8, true);
    EXPECT_LE(small.output_dim(), full.output_dim());
    Rng rng(50);
    for (int t = 0; t < 5; ++t) {
        const CMat rho = random_density(4, rng);
        const CMat gf = apply_G(rho, full), gs = apply_G(rho, small);
        EXPECT_NEAR(relative_entropy(gf, pinch_Z(gf, full)), relative_entropy(gs, pinch_Z(gs, small)), 1e-10);
    }
}
