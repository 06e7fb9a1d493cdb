#include "finkey/sdp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "finkey/random.hpp"

namespace finkey {

const char* to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "optimal";
        case SdpStatus::Infeasible: return "infeasible";
        case SdpStatus::Unbounded: return "unbounded";
        case SdpStatus::MaxIter: return "max-iter";
    }
    return "?";
}

int SdpProblem::add_block(BlockKind kind, int dim) {
    if (dim < 1) throw InvalidInput("SdpProblem: block dimension must be positive");
    blocks.push_back({kind, dim});
    objective.emplace_back();
    for (auto& r : rows) r.emplace_back();
    for (auto& r : adjoint_rows) r.emplace_back();
    return static_cast<int>(blocks.size()) - 1;
}

BlockVec SdpProblem::zero_blocks() const { return BlockVec(blocks.size()); }

int SdpProblem::add_row(BlockVec coef, double b) {
    coef.resize(blocks.size());
    rows.push_back(std::move(coef));
    rhs.push_back(b);
    if (!adjoint_rows.empty()) adjoint_rows.push_back(rows.back());
    return static_cast<int>(rows.size()) - 1;
}

static double coef_inner(const BlockSpec& s, const CMat& a, const CMat& x) {
    if (a.size() == 0 || x.size() == 0) return 0.0;
    if (s.kind == BlockKind::Diagonal) return (a.real().cwiseProduct(x.real())).sum();
    if (s.kind == BlockKind::Symmetric) return (a.real().cwiseProduct(x.real())).sum();
    return inner(a, x);
}

double block_inner(const std::vector<BlockSpec>& blocks, const BlockVec& a, const BlockVec& b) {
    double s = 0.0;
    for (size_t k = 0; k < blocks.size(); ++k) s += coef_inner(blocks[k], a[k], b[k]);
    return s;
}

double block_min_eig(const BlockSpec& spec, const CMat& m) {
    if (m.size() == 0) return 0.0;
    if (spec.kind == BlockKind::Diagonal) return m.real().minCoeff();
    if (spec.kind == BlockKind::Symmetric) {
        Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (m.real() + m.real().transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }
    return min_eigenvalue(m);
}

RVec SdpProblem::apply(const BlockVec& x) const {
    RVec out(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) out(i) = block_inner(blocks, rows[i], x);
    return out;
}

BlockVec SdpProblem::apply_adjoint(const RVec& y) const {
    const auto& src = adjoint_rows.empty() ? rows : adjoint_rows;
    BlockVec out(blocks.size());
    for (size_t k = 0; k < blocks.size(); ++k) {
        const int n = blocks[k].dim;
        out[k] = CMat::Zero(n, blocks[k].kind == BlockKind::Diagonal ? 1 : n);
    }
    for (size_t i = 0; i < src.size(); ++i) {
        if (y(i) == 0.0) continue;
        for (size_t k = 0; k < blocks.size(); ++k)
            if (src[i][k].size() != 0) out[k] += y(i) * src[i][k];
    }
    return out;
}

double SdpProblem::objective_value(const BlockVec& x) const { return block_inner(blocks, objective, x); }

void SdpProblem::validate() const {
    if (rows.size() != rhs.size()) throw InvalidInput("SdpProblem: rows/rhs size mismatch");
    auto check = [&](const CMat& m, size_t k, const char* what) {
        if (m.size() == 0) return;
        const auto& s = blocks[k];
        const int c = s.kind == BlockKind::Diagonal ? 1 : s.dim;
        if (m.rows() != s.dim || m.cols() != c)
            throw InvalidInput(std::string("SdpProblem: ") + what + " coefficient has wrong shape");
        if (s.kind == BlockKind::Hermitian && !is_hermitian(m, 1e-10))
            throw InvalidInput(std::string("SdpProblem: ") + what + " coefficient is not Hermitian");
    };
    if (objective.size() != blocks.size()) throw InvalidInput("SdpProblem: objective block count");
    for (size_t k = 0; k < blocks.size(); ++k) check(objective[k], k, "objective");
    for (const auto& r : rows) {
        if (r.size() != blocks.size()) throw InvalidInput("SdpProblem: row block count");
        for (size_t k = 0; k < blocks.size(); ++k) check(r[k], k, "constraint");
    }
}

namespace {

RMat embed(const CMat& h) {
    const int n = static_cast<int>(h.rows());
    RMat r(2 * n, 2 * n);
    r.topLeftCorner(n, n) = h.real();
    r.topRightCorner(n, n) = -h.imag();
    r.bottomLeftCorner(n, n) = h.imag();
    r.bottomRightCorner(n, n) = h.real();
    return r;
}

CMat unembed(const RMat& r) {
    const int n = static_cast<int>(r.rows()) / 2;
    CMat h(n, n);
    h.real() = 0.5 * (r.topLeftCorner(n, n) + r.bottomRightCorner(n, n));
    h.imag() = 0.5 * (r.bottomLeftCorner(n, n) - r.topRightCorner(n, n));
    return hermitian_part(h);
}

RMat sym(const RMat& m) { return 0.5 * (m + m.transpose()); }

// Real symmetric lowering of the problem. All LP entries share one vector.
struct RealForm {
    std::vector<int> dims;        // symmetric cone blocks
    std::vector<int> block_of;    // original block -> symmetric index or -1
    std::vector<int> lp_offset;   // original block -> LP offset or -1
    int q = 0;
    std::vector<RMat> C;
    RVec cl;
    int m = 0;
    std::vector<std::vector<RMat>> A;  // A[i][k], empty if zero
    RMat Al;                            // m x q
    RVec b;
};

struct Iterate {
    std::vector<RMat> X, S;
    RVec xl, sl, y;
    double tau = 1.0, kappa = 1.0;
};

double sym_inner(const std::vector<RMat>& a, const std::vector<RMat>& b) {
    double s = 0;
    for (size_t k = 0; k < a.size(); ++k) s += (a[k].cwiseProduct(b[k])).sum();
    return s;
}

class HsdSolver {
public:
    HsdSolver(RealForm f, const SdpTolerances& tol) : f_(std::move(f)), tol_(tol) {}

    SdpStatus run(Iterate& it, int& iters, double& pres, double& dres, double& gap);

private:
    RVec op(const std::vector<RMat>& X, const RVec& xl) const {
        RVec r = RVec::Zero(f_.m);
        for (int i = 0; i < f_.m; ++i) {
            double s = 0;
            for (size_t k = 0; k < f_.dims.size(); ++k)
                if (f_.A[i][k].size()) s += (f_.A[i][k].cwiseProduct(X[k])).sum();
            r(i) = s;
        }
        if (f_.q) r += f_.Al * xl;
        return r;
    }

    void adj(const RVec& y, std::vector<RMat>& S, RVec& sl) const {
        S.resize(f_.dims.size());
        for (size_t k = 0; k < f_.dims.size(); ++k) {
            S[k] = RMat::Zero(f_.dims[k], f_.dims[k]);
            for (int i = 0; i < f_.m; ++i)
                if (f_.A[i][k].size() && y(i) != 0.0) S[k] += y(i) * f_.A[i][k];
        }
        sl = f_.q ? RVec(f_.Al.transpose() * y) : RVec();
    }

    static double max_step_sym(const Eigen::LLT<RMat>& llt, const RMat& d) {
        RMat t = llt.matrixL().solve(d);
        t = llt.matrixL().solve(t.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<RMat> es(sym(t), Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()(0);
        return lmin >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
    }

    RealForm f_;
    SdpTolerances tol_;
};

SdpStatus HsdSolver::run(Iterate& it, int& iters, double& pres, double& dres, double& gap) {
    const int K = static_cast<int>(f_.dims.size());
    const int m = f_.m, q = f_.q;
    double nu = q;
    for (int d : f_.dims) nu += d;
    const double bnorm = f_.b.norm();
    double cnorm = f_.cl.size() ? f_.cl.squaredNorm() : 0.0;
    for (auto& c : f_.C) cnorm += c.squaredNorm();
    cnorm = std::sqrt(cnorm);

    it.X.clear();
    it.S.clear();
    for (int d : f_.dims) {
        it.X.push_back(RMat::Identity(d, d));
        it.S.push_back(RMat::Identity(d, d));
    }
    it.xl = RVec::Ones(q);
    it.sl = RVec::Ones(q);
    it.y = RVec::Zero(m);
    it.tau = it.kappa = 1.0;

    std::vector<RMat> G(K), W(K), Ginv(K);
    std::vector<RVec> lam(K);
    std::vector<Eigen::LLT<RMat>> lx(K), ls(K);
    std::vector<RMat> WCW(K);
    // late iterations can lose feasibility to rounding; keep the best point seen
    Iterate best = it;
    double best_score = std::numeric_limits<double>::infinity();
    std::array<double, 3> best_res{0.0, 0.0, 0.0};

    for (iters = 0; iters < tol_.max_iter; ++iters) {
        // residuals
        std::vector<RMat> Rd(K);
        RVec rdl;
        {
            std::vector<RMat> AtY;
            RVec atyl;
            adj(it.y, AtY, atyl);
            for (int k = 0; k < K; ++k) Rd[k] = it.tau * f_.C[k] - AtY[k] - it.S[k];
            if (q) rdl = it.tau * f_.cl - atyl - it.sl;
        }
        const RVec AX = op(it.X, it.xl);
        const RVec Rp = it.tau * f_.b - AX;
        const double cx = sym_inner(f_.C, it.X) + (q ? f_.cl.dot(it.xl) : 0.0);
        const double by = f_.b.dot(it.y);
        const double g = cx - by + it.kappa;
        const double xs = sym_inner(it.X, it.S) + (q ? it.xl.dot(it.sl) : 0.0);
        const double mu = (xs + it.tau * it.kappa) / (nu + 1.0);

        double rdn = (q ? rdl.squaredNorm() : 0.0);
        for (auto& r : Rd) rdn += r.squaredNorm();
        rdn = std::sqrt(rdn);
        pres = Rp.norm() / it.tau / (1.0 + bnorm);
        dres = rdn / it.tau / (1.0 + cnorm);
        const double pobj = cx / it.tau, dobj = by / it.tau;
        gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        if (tol_.verbose)
            std::fprintf(stderr, "  it %3d  pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e\n",
                         iters, pobj, dobj, pres, dres, gap, it.tau, it.kappa);
        if (pres <= tol_.feasibility && dres <= tol_.feasibility && gap <= tol_.gap) return SdpStatus::Optimal;
        {
            const double score = std::max({pres / tol_.feasibility, dres / tol_.feasibility, gap / tol_.gap});
            if (score < best_score) {
                best_score = score;
                best = it;
                best_res = {pres, dres, gap};
            }
        }

        // certificates of infeasibility
        if (by > 0) {
            std::vector<RMat> AtY;
            RVec atyl;
            adj(it.y, AtY, atyl);
            double r = 0;
            for (int k = 0; k < K; ++k) r += (AtY[k] + it.S[k]).squaredNorm();
            if (q) r += (atyl + it.sl).squaredNorm();
            if (std::sqrt(r) / by <= tol_.feasibility * 10 && it.tau < 1e-3 * it.kappa) return SdpStatus::Infeasible;
        }
        if (cx < 0) {
            if (AX.norm() / (-cx) <= tol_.feasibility * 10 && it.tau < 1e-3 * it.kappa) return SdpStatus::Unbounded;
        }
        if (mu < 1e-300) break;

        // Nesterov-Todd scaling
        bool ok = true;
        for (int k = 0; k < K; ++k) {
            lx[k].compute(sym(it.X[k]));
            ls[k].compute(sym(it.S[k]));
            if (lx[k].info() != Eigen::Success || ls[k].info() != Eigen::Success) {
                ok = false;
                break;
            }
            const RMat Lx = lx[k].matrixL();
            const RMat Ls = ls[k].matrixL();
            Eigen::JacobiSVD<RMat> svd(Ls.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
            lam[k] = svd.singularValues();
            const RVec isq = lam[k].cwiseSqrt().cwiseInverse();
            G[k] = Lx * svd.matrixV() * isq.asDiagonal();
            W[k] = sym(G[k] * G[k].transpose());
            // G^{-1} = Lam^{1/2} V^T Lx^{-1}
            RMat li = Lx.triangularView<Eigen::Lower>().solve(RMat::Identity(f_.dims[k], f_.dims[k]));
            Ginv[k] = lam[k].cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * li;
            WCW[k] = sym(W[k] * f_.C[k] * W[k]);
        }
        if (!ok) break;
        RVec wl2;
        if (q) wl2 = it.xl.cwiseQuotient(it.sl);

        // Schur complement
        RMat M = RMat::Zero(m, m);
        for (int k = 0; k < K; ++k) {
            std::vector<int> nz;
            for (int i = 0; i < m; ++i)
                if (f_.A[i][k].size()) nz.push_back(i);
            for (size_t jj = 0; jj < nz.size(); ++jj) {
                const int j = nz[jj];
                const RMat T = W[k] * f_.A[j][k] * W[k];
                for (size_t ii = 0; ii <= jj; ++ii) {
                    const int i = nz[ii];
                    const double v = (f_.A[i][k].cwiseProduct(T)).sum();
                    M(i, j) += v;
                    if (i != j) M(j, i) += v;
                }
            }
        }
        if (q) M += f_.Al * wl2.asDiagonal() * f_.Al.transpose();
        Eigen::LDLT<RMat> ldlt(M);
        if (ldlt.info() != Eigen::Success) break;
        // a couple of refinement sweeps; M gets badly conditioned near the end
        auto msolve = [&](const RVec& r) {
            RVec x = ldlt.solve(r);
            for (int k = 0; k < 3; ++k) {
                const RVec res = r - M * x;
                if (!(res.norm() > 1e-15 * r.norm())) break;
                x += ldlt.solve(res);
            }
            return x;
        };

        // for the LP part W c W = (x/s) c
        const RVec AWCWfix = op(WCW, q ? RVec(wl2.cwiseProduct(f_.cl)) : RVec());
        const double cWc = sym_inner(f_.C, WCW) + (q ? f_.cl.dot(wl2.cwiseProduct(f_.cl)) : 0.0);
        const RVec u = AWCWfix + f_.b;
        const RVec v = AWCWfix - f_.b;
        const RVec qv = msolve(u);

        std::vector<RMat> WRdW(K);
        for (int k = 0; k < K; ++k) WRdW[k] = sym(W[k] * Rd[k] * W[k]);
        RVec wrdwl = q ? RVec(wl2.cwiseProduct(rdl)) : RVec();
        const RVec AWRdW = op(WRdW, wrdwl);
        const double cWRdW = sym_inner(f_.C, WRdW) + (q ? f_.cl.dot(wrdwl) : 0.0);

        struct Dir {
            std::vector<RMat> dX, dS;
            RVec dxl, dsl, dy;
            double dtau = 0, dkappa = 0;
        };
        auto solve_dir = [&](const std::vector<RMat>& Rc, const RVec& rcl, double rtk, double eta, Dir& d) {
            const RVec ARc = op(Rc, rcl);
            const double cRc = sym_inner(f_.C, Rc) + (q ? f_.cl.dot(rcl) : 0.0);
            const RVec r1 = eta * Rp - ARc + eta * AWRdW;
            const double r2 = -eta * g - cRc + eta * cWRdW - rtk / it.tau;
            const RVec p = msolve(r1);
            const double a0 = cWc + it.kappa / it.tau;
            const double den = v.dot(qv) - a0;
            d.dtau = (r2 - v.dot(p)) / den;
            d.dy = p + qv * d.dtau;
            std::vector<RMat> AtdY;
            RVec atdyl;
            adj(d.dy, AtdY, atdyl);
            d.dS.resize(K);
            d.dX.resize(K);
            for (int k = 0; k < K; ++k) {
                d.dS[k] = sym(eta * Rd[k] - AtdY[k] + f_.C[k] * d.dtau);
                d.dX[k] = sym(Rc[k] - W[k] * d.dS[k] * W[k]);
            }
            if (q) {
                d.dsl = eta * rdl - atdyl + f_.cl * d.dtau;
                d.dxl = rcl - wl2.cwiseProduct(d.dsl);
            }
            d.dkappa = (rtk - it.kappa * d.dtau) / it.tau;
        };
        auto max_step = [&](const Dir& d) {
            double a = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                a = std::min(a, max_step_sym(lx[k], d.dX[k]));
                a = std::min(a, max_step_sym(ls[k], d.dS[k]));
            }
            for (int l = 0; l < q; ++l) {
                if (d.dxl(l) < 0) a = std::min(a, -it.xl(l) / d.dxl(l));
                if (d.dsl(l) < 0) a = std::min(a, -it.sl(l) / d.dsl(l));
            }
            if (d.dtau < 0) a = std::min(a, -it.tau / d.dtau);
            if (d.dkappa < 0) a = std::min(a, -it.kappa / d.dkappa);
            return a;
        };

        // predictor
        std::vector<RMat> Rc(K);
        for (int k = 0; k < K; ++k) Rc[k] = -it.X[k];
        RVec rcl = q ? RVec(-it.xl) : RVec();
        Dir aff;
        solve_dir(Rc, rcl, -it.tau * it.kappa, 1.0, aff);
        const double aa = std::min(1.0, max_step(aff));
        double xs_aff = (it.tau + aa * aff.dtau) * (it.kappa + aa * aff.dkappa);
        for (int k = 0; k < K; ++k)
            xs_aff += ((it.X[k] + aa * aff.dX[k]).cwiseProduct(it.S[k] + aa * aff.dS[k])).sum();
        if (q) xs_aff += (it.xl + aa * aff.dxl).dot(it.sl + aa * aff.dsl);
        const double mu_aff = xs_aff / (nu + 1.0);
        double sigma = std::pow(std::max(0.0, mu_aff / mu), 3);
        sigma = std::min(1.0, std::max(sigma, 1e-8));

        // corrector with second-order term
        for (int k = 0; k < K; ++k) {
            const RMat dXt = Ginv[k] * aff.dX[k] * Ginv[k].transpose();
            const RMat dSt = G[k].transpose() * aff.dS[k] * G[k];
            RMat R = -(dXt * dSt + dSt * dXt);
            const int n = f_.dims[k];
            for (int i = 0; i < n; ++i) R(i, i) += 2.0 * sigma * mu - 2.0 * lam[k](i) * lam[k](i);
            RMat Z(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) Z(i, j) = R(i, j) / (lam[k](i) + lam[k](j));
            Rc[k] = sym(G[k] * Z * G[k].transpose());
        }
        if (q) rcl = (RVec::Constant(q, sigma * mu) - it.xl.cwiseProduct(it.sl) - aff.dxl.cwiseProduct(aff.dsl)).cwiseQuotient(it.sl);
        const double rtk = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        Dir d;
        solve_dir(Rc, rcl, rtk, 1.0 - sigma, d);
        if (!d.dy.allFinite() || !std::isfinite(d.dtau) || !std::isfinite(d.dkappa)) break;
        const double amax = max_step(d);
        const double alpha = std::min(1.0, 0.95 * amax);
        if (!(alpha > 1e-12) || !std::isfinite(alpha)) break;
        for (int k = 0; k < K; ++k) {
            it.X[k] = sym(it.X[k] + alpha * d.dX[k]);
            it.S[k] = sym(it.S[k] + alpha * d.dS[k]);
        }
        if (q) {
            it.xl += alpha * d.dxl;
            it.sl += alpha * d.dsl;
        }
        it.y += alpha * d.dy;
        it.tau += alpha * d.dtau;
        it.kappa += alpha * d.dkappa;
    }
    if (std::isfinite(best_score)) {
        it = best;
        pres = best_res[0];
        dres = best_res[1];
        gap = best_res[2];
    }
    return SdpStatus::MaxIter;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SdpTolerances& tol) {
    problem.validate();
    const int nb = static_cast<int>(problem.blocks.size());
    RealForm f;
    f.block_of.assign(nb, -1);
    f.lp_offset.assign(nb, -1);
    for (int k = 0; k < nb; ++k) {
        const auto& s = problem.blocks[k];
        if (s.kind == BlockKind::Diagonal) {
            f.lp_offset[k] = f.q;
            f.q += s.dim;
        } else {
            f.block_of[k] = static_cast<int>(f.dims.size());
            f.dims.push_back(s.kind == BlockKind::Hermitian ? 2 * s.dim : s.dim);
        }
    }
    auto lower = [&](const BlockVec& coef, std::vector<RMat>& sblk, RVec& lvec) {
        sblk.assign(f.dims.size(), RMat());
        lvec = RVec::Zero(f.q);
        for (int k = 0; k < nb; ++k) {
            const CMat& c = coef[k];
            if (c.size() == 0) continue;
            const auto& s = problem.blocks[k];
            if (s.kind == BlockKind::Diagonal)
                lvec.segment(f.lp_offset[k], s.dim) = c.col(0).real();
            else if (s.kind == BlockKind::Symmetric)
                sblk[f.block_of[k]] = sym(c.real());
            else
                sblk[f.block_of[k]] = 0.5 * embed(hermitian_part(c));
        }
    };

    // row scaling, dropping zero rows
    std::vector<int> kept;
    std::vector<double> rscale;
    for (int i = 0; i < problem.num_rows(); ++i) {
        std::vector<RMat> sb;
        RVec lv;
        lower(problem.rows[i], sb, lv);
        double nrm = lv.squaredNorm();
        for (auto& b : sb)
            if (b.size()) nrm += b.squaredNorm();
        nrm = std::sqrt(nrm);
        if (nrm < 1e-300) {
            if (std::abs(problem.rhs[i]) > tol.feasibility) {
                SdpSolution s;
                s.status = SdpStatus::Infeasible;
                return s;
            }
            continue;
        }
        kept.push_back(i);
        rscale.push_back(nrm);
        for (auto& b : sb)
            if (b.size()) b /= nrm;
        f.A.push_back(std::move(sb));
        if (f.q) {
            f.Al.conservativeResize(f.A.size(), f.q);
            f.Al.row(f.A.size() - 1) = lv.transpose() / nrm;
        }
    }
    f.m = static_cast<int>(kept.size());
    if (f.q && f.m == 0) f.Al.resize(0, f.q);
    f.b.resize(f.m);
    for (int i = 0; i < f.m; ++i) f.b(i) = problem.rhs[kept[i]] / rscale[i];
    {
        std::vector<RMat> sb;
        RVec lv;
        lower(problem.objective, sb, lv);
        for (size_t k = 0; k < f.dims.size(); ++k)
            if (sb[k].size() == 0) sb[k] = RMat::Zero(f.dims[k], f.dims[k]);
        f.C = std::move(sb);
        f.cl = lv;
    }
    double cs = f.cl.squaredNorm();
    for (auto& c : f.C) cs += c.squaredNorm();
    cs = std::max(1.0, std::sqrt(cs));
    for (auto& c : f.C) c /= cs;
    f.cl /= cs;

    // Linearly dependent rows make the Schur complement singular and hide
    // infeasibility rays from the embedding, so resolve them up front.
    if (f.m > 0) {
        long P = f.q;
        for (int d : f.dims) P += long(d) * d;
        RMat R = RMat::Zero(P, f.m);
        for (int i = 0; i < f.m; ++i) {
            long o = 0;
            for (size_t k = 0; k < f.dims.size(); ++k) {
                const long n2 = long(f.dims[k]) * f.dims[k];
                if (f.A[i][k].size()) R.col(i).segment(o, n2) = Eigen::Map<const RVec>(f.A[i][k].data(), n2);
                o += n2;
            }
            if (f.q) R.col(i).segment(o, f.q) = f.Al.row(i).transpose();
        }
        Eigen::ColPivHouseholderQR<RMat> qr(R);
        qr.setThreshold(1e-10);
        const int r = static_cast<int>(qr.rank());
        if (r < f.m) {
            std::vector<int> ind, dep;
            for (int j = 0; j < f.m; ++j) (j < r ? ind : dep).push_back(qr.colsPermutation().indices()(j));
            std::sort(ind.begin(), ind.end());
            RMat Ri(P, r);
            RVec bi(r);
            for (int j = 0; j < r; ++j) {
                Ri.col(j) = R.col(ind[j]);
                bi(j) = f.b(ind[j]);
            }
            Eigen::ColPivHouseholderQR<RMat> qri(Ri);
            for (int j : dep) {
                const RVec c = qri.solve(RVec(R.col(j)));
                const double mismatch = f.b(j) - c.dot(bi);
                if (std::abs(mismatch) > tol.feasibility * (1.0 + std::abs(f.b(j)))) {
                    // y = sign * (e_j - sum c e_ind): A^*y = 0 and b.y > 0
                    SdpSolution sol;
                    sol.status = SdpStatus::Infeasible;
                    sol.dual = RVec::Zero(problem.num_rows());
                    const double sg = mismatch > 0 ? 1.0 : -1.0;
                    sol.dual(kept[j]) = sg / rscale[j];
                    for (int t = 0; t < r; ++t) sol.dual(kept[ind[t]]) -= sg * c(t) / rscale[ind[t]];
                    sol.dual /= sol.dual.norm();
                    sol.dual_value = 0.0;
                    for (int t = 0; t < problem.num_rows(); ++t) sol.dual_value += problem.rhs[t] * sol.dual(t);
                    return sol;
                }
            }
            RealForm g;
            g.dims = f.dims;
            g.block_of = f.block_of;
            g.lp_offset = f.lp_offset;
            g.q = f.q;
            g.C = f.C;
            g.cl = f.cl;
            g.m = r;
            g.b = bi;
            if (g.q) g.Al.resize(r, g.q);
            std::vector<int> nk;
            std::vector<double> ns;
            for (int j = 0; j < r; ++j) {
                g.A.push_back(f.A[ind[j]]);
                if (g.q) g.Al.row(j) = f.Al.row(ind[j]);
                nk.push_back(kept[ind[j]]);
                ns.push_back(rscale[ind[j]]);
            }
            f = std::move(g);
            kept = std::move(nk);
            rscale = std::move(ns);
        }
    }
    const RealForm fcopy = f;

    HsdSolver hsd(std::move(f), tol);
    Iterate it;
    SdpSolution sol;
    double pres = 0, dres = 0, gap = 0;
    sol.status = hsd.run(it, sol.iterations, pres, dres, gap);
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.rel_gap = gap;

    const double tau = it.tau;
    const bool certificate = sol.status == SdpStatus::Infeasible || sol.status == SdpStatus::Unbounded;
    const double div = certificate ? 1.0 : tau;
    sol.primal.assign(nb, CMat());
    for (int k = 0; k < nb; ++k) {
        const auto& s = problem.blocks[k];
        if (s.kind == BlockKind::Diagonal) {
            sol.primal[k] = it.xl.segment(fcopy.lp_offset[k], s.dim).cast<cplx>() / div;
        } else if (s.kind == BlockKind::Symmetric) {
            sol.primal[k] = it.X[fcopy.block_of[k]].cast<cplx>() / div;
        } else {
            sol.primal[k] = unembed(it.X[fcopy.block_of[k]]) / div;
        }
    }
    sol.dual = RVec::Zero(problem.num_rows());
    for (int i = 0; i < fcopy.m; ++i) sol.dual(kept[i]) = cs * it.y(i) / rscale[i] / div;
    if (certificate) {
        // normalise the ray
        const double n = sol.dual.norm();
        if (n > 0) sol.dual /= n;
    }
    const BlockVec aty = problem.apply_adjoint(sol.dual);
    sol.dual_slack.resize(nb);
    for (int k = 0; k < nb; ++k) {
        CMat c = problem.objective[k].size() ? problem.objective[k] : CMat::Zero(aty[k].rows(), aty[k].cols());
        sol.dual_slack[k] = certificate ? CMat(-aty[k]) : CMat(c - aty[k]);
    }
    sol.primal_value = problem.objective_value(sol.primal);
    sol.dual_value = 0.0;
    for (int i = 0; i < problem.num_rows(); ++i) sol.dual_value += problem.rhs[i] * sol.dual(i);
    return sol;
}

bool verify_adjoint(const SdpProblem& problem, int trials, unsigned long seed) {
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        BlockVec x(problem.blocks.size());
        for (size_t k = 0; k < problem.blocks.size(); ++k) {
            const auto& s = problem.blocks[k];
            if (s.kind == BlockKind::Diagonal) {
                x[k] = CMat(s.dim, 1);
                for (int i = 0; i < s.dim; ++i) x[k](i, 0) = rng.normal();
            } else if (s.kind == BlockKind::Symmetric) {
                x[k] = random_hermitian(s.dim, rng).real().cast<cplx>();
            } else {
                x[k] = random_hermitian(s.dim, rng);
            }
        }
        RVec y(problem.num_rows());
        for (int i = 0; i < y.size(); ++i) y(i) = rng.normal();
        const double lhs = y.dot(problem.apply(x));
        const double rhs = block_inner(problem.blocks, problem.apply_adjoint(y), x);
        if (std::abs(lhs - rhs) > 1e-10 * std::max(1.0, std::abs(lhs))) return false;
    }
    return true;
}

void dump_problem(const SdpProblem& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("dump_problem: cannot open " + path);
    out.precision(17);
    out << "blocks " << p.blocks.size() << "\n";
    for (const auto& b : p.blocks) {
        const char* k = b.kind == BlockKind::Hermitian ? "hermitian" : b.kind == BlockKind::Symmetric ? "symmetric" : "diagonal";
        out << k << " " << b.dim << "\n";
    }
    auto dump = [&](const BlockVec& v) {
        for (size_t k = 0; k < v.size(); ++k) {
            if (v[k].size() == 0) continue;
            out << "  block " << k << "\n";
            for (Eigen::Index i = 0; i < v[k].rows(); ++i) {
                out << "   ";
                for (Eigen::Index j = 0; j < v[k].cols(); ++j) out << " " << v[k](i, j).real() << " " << v[k](i, j).imag();
                out << "\n";
            }
        }
    };
    out << "objective\n";
    dump(p.objective);
    out << "rows " << p.rows.size() << "\n";
    for (size_t i = 0; i < p.rows.size(); ++i) {
        out << "row " << i << " rhs " << p.rhs[i] << "\n";
        dump(p.rows[i]);
    }
}

}  // namespace finkey
