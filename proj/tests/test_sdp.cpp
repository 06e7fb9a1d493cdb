#include <gtest/gtest.h>

#include "finkey/random.hpp"
#include "finkey/sdp.hpp"

using namespace finkey;

namespace {

SdpProblem min_eig_problem(const CMat& a) {
    SdpProblem p;
    const int d = static_cast<int>(a.rows());
    p.add_block(BlockKind::Hermitian, d);
    p.objective = {a};
    p.add_row({identity(d)}, 1.0);
    return p;
}

// ||A||_1 = min Tr P + Tr Q  s.t.  P - Q = A
SdpProblem trace_norm_problem(const CMat& a) {
    SdpProblem p;
    const int d = static_cast<int>(a.rows());
    p.add_block(BlockKind::Hermitian, d);
    p.add_block(BlockKind::Hermitian, d);
    p.objective = {identity(d), identity(d)};
    for (const CMat& b : hermitian_basis(d)) p.add_row({b, CMat(-b)}, inner(b, a));
    return p;
}

SdpProblem random_problem(int d, int rows, Rng& rng) {
    SdpProblem p;
    p.add_block(BlockKind::Hermitian, d);
    p.add_block(BlockKind::Diagonal, 3);
    const CMat c0 = random_hermitian(d, rng);
    p.objective = {CMat(c0 * c0.adjoint() + identity(d)), CMat(RVec::Ones(3).cast<cplx>())};
    const CMat x0 = random_density(d, rng);
    const RVec v0 = RVec::Constant(3, 0.5);
    p.add_row({identity(d), CMat(CMat::Zero(3, 1))}, 1.0);
    for (int i = 1; i < rows; ++i) {
        const CMat g = random_hermitian(d, rng);
        CMat a(3, 1);
        for (int j = 0; j < 3; ++j) a(j) = rng.normal();
        p.add_row({g, a}, inner(g, x0) + a.real().col(0).dot(v0));
    }
    return p;
}

}  // namespace

TEST(Sdp, MinEigenvalueFixture) {
    RVec dg(2);
    dg << 1.0, 2.0;
    const auto sol = solve(min_eig_problem(dg.cast<cplx>().asDiagonal()));
    ASSERT_EQ(sol.status, SdpStatus::Optimal);
    EXPECT_NEAR(sol.primal_value, 1.0, 1e-7);
    EXPECT_NEAR(sol.dual_value, 1.0, 1e-7);
    EXPECT_LE(std::abs(sol.primal_value - sol.dual_value), 1e-7);
    EXPECT_NEAR(sol.primal[0](0, 0).real(), 1.0, 1e-6);
    EXPECT_NEAR(sol.primal[0](1, 1).real(), 0.0, 1e-6);
}

TEST(Sdp, TraceNormFixture) {
    RVec dg(2);
    dg << 3.0, -4.0;
    const auto sol = solve(trace_norm_problem(dg.cast<cplx>().asDiagonal()));
    ASSERT_EQ(sol.status, SdpStatus::Optimal);
    EXPECT_NEAR(sol.primal_value, 7.0, 1e-6);
    EXPECT_LE(std::abs(sol.primal_value - sol.dual_value), 1e-7);
}

TEST(Sdp, TraceNormMatchesEigenvalues) {
    Rng rng(17);
    for (int t = 0; t < 5; ++t) {
        const CMat a = random_hermitian(3, rng);
        const auto sol = solve(trace_norm_problem(a));
        ASSERT_EQ(sol.status, SdpStatus::Optimal);
        EXPECT_NEAR(sol.dual_value, trace_norm(a), 1e-6 * (1.0 + trace_norm(a)));
    }
}

TEST(Sdp, ContradictoryConstraintsInfeasible) {
    SdpProblem p;
    p.add_block(BlockKind::Hermitian, 2);
    p.objective = {identity(2)};
    p.add_row({identity(2)}, 1.0);
    p.add_row({identity(2)}, 2.0);
    EXPECT_EQ(solve(p).status, SdpStatus::Infeasible);
}

TEST(Sdp, UnboundedDetected) {
    // min -Tr X with no upper bound on X
    SdpProblem p;
    p.add_block(BlockKind::Hermitian, 2);
    p.objective = {CMat(-identity(2))};
    CMat off = CMat::Zero(2, 2);
    off(0, 1) = off(1, 0) = 1.0;
    p.add_row({off}, 0.0);
    EXPECT_EQ(solve(p).status, SdpStatus::Unbounded);
}

TEST(Sdp, WeakDualityAndGapOnRandomInstances) {
    Rng rng(101);
    for (int t = 0; t < 10; ++t) {
        const SdpProblem p = random_problem(3, 5, rng);
        const auto sol = solve(p);
        ASSERT_EQ(sol.status, SdpStatus::Optimal) << "instance " << t;
        EXPECT_LE(sol.dual_value, sol.primal_value + 1e-7 * (1.0 + std::abs(sol.primal_value)));
        EXPECT_LE(std::abs(sol.primal_value - sol.dual_value), 1e-7 * (1.0 + std::abs(sol.primal_value)));
        EXPECT_LE(sol.primal_residual, 1e-8);
        EXPECT_LE(sol.dual_residual, 1e-8);
        // slack recomputed from y is PSD up to the interior-point tolerance;
        // the certificate corrects for what is left
        for (size_t b = 0; b < p.blocks.size(); ++b)
            EXPECT_GE(block_min_eig(p.blocks[b], sol.dual_slack[b]), -1e-6);
    }
}

TEST(Sdp, ObjectiveScaling) {
    Rng rng(55);
    const SdpProblem p = random_problem(3, 4, rng);
    SdpProblem q = p;
    for (auto& c : q.objective) c *= 2.5;
    const auto a = solve(p), b = solve(q);
    ASSERT_EQ(a.status, SdpStatus::Optimal);
    ASSERT_EQ(b.status, SdpStatus::Optimal);
    EXPECT_NEAR(b.primal_value, 2.5 * a.primal_value, 1e-6 * (1.0 + std::abs(b.primal_value)));
}

TEST(SdpAdjoint, ConsistentProblemPasses) {
    Rng rng(1);
    EXPECT_TRUE(verify_adjoint(random_problem(3, 5, rng), 10));
    RVec dg(2);
    dg << 3.0, -4.0;
    EXPECT_TRUE(verify_adjoint(trace_norm_problem(dg.cast<cplx>().asDiagonal()), 10));
}

TEST(SdpAdjoint, IdentityMap) {
    SdpProblem p;
    p.add_block(BlockKind::Hermitian, 3);
    p.objective = {identity(3)};
    for (const CMat& b : hermitian_basis(3)) p.add_row({b}, 0.0);
    EXPECT_TRUE(verify_adjoint(p, 10));
}

TEST(SdpAdjoint, TransposedBlockIsCaught) {
    Rng rng(2);
    SdpProblem p = random_problem(3, 4, rng);
    p.adjoint_rows = p.rows;
    p.adjoint_rows[2][0] = p.rows[2][0].transpose().eval();
    EXPECT_FALSE(verify_adjoint(p, 10));
}
