#pragma once

#include <string>
#include <vector>

#include "finkey/linalg.hpp"

namespace finkey {

// Variable block kinds. Hermitian blocks are complex; Diagonal blocks are
// nonnegative vectors (a linear-programming cone) stored as n x 1 columns.
enum class BlockKind { Hermitian, Symmetric, Diagonal };

struct BlockSpec {
    BlockKind kind = BlockKind::Hermitian;
    int dim = 1;
};

using BlockVec = std::vector<CMat>;  // one entry per block; empty matrix means zero

// Standard form
//   primal:  min  sum_b <C_b, X_b>   s.t.  sum_b <A_ib, X_b> = b_i,  X_b >= 0
//   dual:    max  b.y                s.t.  C - sum_i y_i A_i = S >= 0
struct SdpProblem {
    std::vector<BlockSpec> blocks;
    BlockVec objective;
    std::vector<BlockVec> rows;
    std::vector<double> rhs;
    // Coefficients used by apply_adjoint; mirrors `rows` unless set explicitly.
    std::vector<BlockVec> adjoint_rows;

    int add_block(BlockKind kind, int dim);
    int add_row(BlockVec coef, double b);
    BlockVec zero_blocks() const;

    int num_rows() const { return static_cast<int>(rows.size()); }
    RVec apply(const BlockVec& x) const;
    BlockVec apply_adjoint(const RVec& y) const;
    double objective_value(const BlockVec& x) const;
    void validate() const;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIter };

const char* to_string(SdpStatus s);

struct SdpTolerances {
    double feasibility = 1e-8;
    double gap = 1e-7;
    int max_iter = 120;
    bool verbose = false;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::MaxIter;
    BlockVec primal;
    RVec dual;
    BlockVec dual_slack;  // C - A^*(y), recomputed from `dual`
    double primal_value = 0.0;
    double dual_value = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double rel_gap = 0.0;
    int iterations = 0;
};

SdpSolution solve(const SdpProblem& problem, const SdpTolerances& tol = {});

bool verify_adjoint(const SdpProblem& problem, int trials, unsigned long seed = 7);

// Human-readable dump for cross-checking with external solvers.
void dump_problem(const SdpProblem& problem, const std::string& path);

// Inner product over all blocks.
double block_inner(const std::vector<BlockSpec>& blocks, const BlockVec& a, const BlockVec& b);

// Smallest eigenvalue (or entry, for diagonal blocks) of one block.
double block_min_eig(const BlockSpec& spec, const CMat& m);

}  // namespace finkey
