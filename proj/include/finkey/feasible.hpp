#pragma once

#include <optional>
#include <vector>

#include "finkey/protocol.hpp"
#include "finkey/sdp.hpp"

namespace finkey {

// One coarse-graining k with its own variation bound and free distribution F_k.
struct CgEntry {
    CoarseGraining cg;
    Povm effective;
    double mu = 0.0;
};

struct FeasibleSetSpec {
    int dim = 0;
    std::vector<ObservableConstraint> certainty;
    std::vector<CgEntry> entries;
    Distribution observed;                 // F-bar over the fine alphabet
    std::optional<AcceptanceSet> acceptance;  // threshold > 0 frees F_k
    bool asymptotic = false;               // exact equality on every coarse-grained outcome
    std::vector<double> t_per_entry;       // acceptance thresholds (defaults to acceptance->threshold)
    int marginal_dim = 0;                  // certainty rows are X (x) I on this leading factor; 0 if not

    bool free_distributions() const { return acceptance && acceptance->threshold > 0.0 && !asymptotic; }
    void validate() const;
};

// Rows <G_i, sigma> + a_i . v = b_i over a Hermitian sigma and a nonnegative vector v.
struct LinearSet {
    int d = 0;
    int nv = 0;
    std::vector<CMat> G;
    RMat A;  // rows x nv
    RVec b;
    std::vector<char> certainty;  // rows that are relaxed by eps' in the certificate
    RVec upper;                   // bound on each entry of v over the set
    std::vector<int> f_offset;    // start of F_k inside v, -1 when F_k is fixed
    int marginal_dim = 0;
    CMat marginal;                // fixed reduced state on the leading factor, when marginal_dim > 0

    int rows() const { return static_cast<int>(G.size()); }
    int real_dim() const { return d * d + nv; }
    RVec residual(const CMat& sigma, const RVec& v) const;
    // rows as real vectors over (herm_to_real(sigma), v)
    RMat real_matrix() const;
    SdpProblem to_sdp(const CMat& objective) const;
};

LinearSet build_linear_set(const FeasibleSetSpec& spec);

// Largest proper factor dA of dim with every operator of the form X (x) I; 0 if none.
int detect_marginal_dim(const std::vector<ObservableConstraint>& certainty, int dim);

// (m^{1/2} s_A^{-1/2} (x) I) sigma (...)^dag, which has reduced state m exactly.
std::optional<CMat> fix_marginal(const CMat& sigma, const CMat& m);

// Drop rows that are linear combinations of earlier ones; throws DomainError
// when a dropped row is inconsistent beyond tol.
LinearSet prune_dependent_rows(const LinearSet& set, double tol = 1e-9);

struct FeasiblePoint {
    CMat sigma;
    RVec v;
    double margin = 0.0;  // lambda of the max-margin problem; > 0 means strictly interior
};

// Max-margin point: sigma = P + a I, v = u + c 1, maximise a + c.
std::optional<FeasiblePoint> find_feasible_point(const LinearSet& set, const SdpTolerances& tol);

// Least-norm correction onto the affine hull of the rows.
FeasiblePoint project_affine(const LinearSet& set, const FeasiblePoint& x);

}  // namespace finkey
