#include "finkey/feasible.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

namespace finkey {

void FeasibleSetSpec::validate() const {
    if (dim < 1) throw InvalidInput("feasible set: dimension must be positive");
    if (entries.empty() && certainty.empty()) throw InvalidInput("feasible set: no constraints");
    for (const auto& c : certainty)
        if (c.op.rows() != dim) throw InvalidInput("feasible set: certainty operator has wrong dimension");
    for (const auto& e : entries) {
        if (e.effective.dim() != dim) throw InvalidInput("feasible set: effective POVM has wrong dimension");
        if (e.cg.source_size() != observed.size())
            throw InvalidInput("feasible set: coarse-graining does not act on the observed alphabet");
        if (e.mu < 0.0) throw InvalidInput("feasible set: negative variation bound");
    }
    if (acceptance) acceptance->validate(static_cast<int>(observed.size()));
    if (!t_per_entry.empty() && t_per_entry.size() != entries.size())
        throw InvalidInput("feasible set: one threshold per coarse-graining is required");
}

RVec LinearSet::residual(const CMat& sigma, const RVec& v) const {
    RVec r(rows());
    for (int i = 0; i < rows(); ++i) {
        r(i) = inner(G[i], sigma) - b(i);
        if (nv > 0) r(i) += A.row(i).dot(v);
    }
    return r;
}

RMat LinearSet::real_matrix() const {
    RMat m(rows(), real_dim());
    for (int i = 0; i < rows(); ++i) {
        m.row(i).head(d * d) = herm_to_real(G[i]).transpose();
        if (nv > 0) m.row(i).tail(nv) = A.row(i);
    }
    return m;
}

SdpProblem LinearSet::to_sdp(const CMat& objective) const {
    SdpProblem p;
    p.add_block(BlockKind::Hermitian, d);
    if (nv > 0) p.add_block(BlockKind::Diagonal, nv);
    p.objective[0] = objective;
    if (nv > 0) p.objective[1] = CMat::Zero(nv, 1);
    for (int i = 0; i < rows(); ++i) {
        BlockVec coef(p.blocks.size());
        coef[0] = G[i];
        if (nv > 0) coef[1] = A.row(i).transpose().cast<cplx>();
        p.add_row(std::move(coef), b(i));
    }
    return p;
}

namespace {

struct RowBuilder {
    LinearSet& s;
    std::vector<RVec> a;
    std::vector<double> rhs;

    void add(const CMat& g, RVec coef, double bi, bool cert) {
        s.G.push_back(g);
        a.push_back(std::move(coef));
        rhs.push_back(bi);
        s.certainty.push_back(cert ? 1 : 0);
    }
};

}  // namespace

LinearSet build_linear_set(const FeasibleSetSpec& spec) {
    spec.validate();
    LinearSet s;
    s.d = spec.dim;
    const bool free_f = spec.free_distributions();
    const int nsig = static_cast<int>(spec.observed.size());
    const int nbar = free_f ? spec.acceptance->abort_map.target_size() : 0;

    // variable layout per entry: [F (nsig)] D+ D- (n_k each) s [E+ E- (nbar each) s_bar]
    std::vector<int> off;
    int nv = 0;
    for (const auto& e : spec.entries) {
        off.push_back(nv);
        if (spec.asymptotic) continue;
        const int nk = e.cg.target_size();
        if (free_f) nv += nsig;
        nv += 2 * nk + 1;
        if (free_f) nv += 2 * nbar + 1;
    }
    s.nv = nv;
    s.upper = RVec::Zero(nv);
    RowBuilder rb{s, {}, {}};
    const CMat zero = CMat::Zero(s.d, s.d);

    for (const auto& c : spec.certainty) rb.add(c.op, RVec::Zero(nv), c.value, true);

    for (size_t k = 0; k < spec.entries.size(); ++k) {
        const auto& e = spec.entries[k];
        const int nk = e.cg.target_size();
        const Distribution target = coarse_grain(spec.observed, e.cg);
        if (spec.asymptotic) {
            s.f_offset.push_back(-1);
            for (int l = 0; l < nk; ++l) rb.add(e.effective.elements[l], RVec::Zero(nv), target(l), true);
            continue;
        }
        int p = off[k];
        const int f0 = free_f ? p : -1;
        s.f_offset.push_back(f0);
        if (free_f) p += nsig;
        const int dp = p, dm = p + nk, sk = p + 2 * nk;
        const double mu = e.mu;
        for (int l = 0; l < nk; ++l) {
            RVec a = RVec::Zero(nv);
            a(dp + l) = -1.0;
            a(dm + l) = 1.0;
            double rhs = target(l);
            if (free_f) {
                for (int j = 0; j < nsig; ++j) a(f0 + j) = -e.cg.table(l, j);
                rhs = 0.0;
            }
            rb.add(e.effective.elements[l], a, rhs, false);
        }
        {
            RVec a = RVec::Zero(nv);
            a.segment(dp, 2 * nk).setOnes();
            a(sk) = 1.0;
            rb.add(zero, a, mu, false);
            s.upper.segment(dp, 2 * nk + 1).setConstant(mu);
        }
        if (free_f) {
            RVec a = RVec::Zero(nv);
            a.segment(f0, nsig).setOnes();
            rb.add(zero, a, 1.0, false);
            s.upper.segment(f0, nsig).setOnes();
            const auto& acc = *spec.acceptance;
            const double t = spec.t_per_entry.empty() ? acc.threshold : spec.t_per_entry[k];
            const Distribution ref = coarse_grain(acc.reference, acc.abort_map);
            const int ep = sk + 1, em = ep + nbar, sb = ep + 2 * nbar;
            for (int w = 0; w < nbar; ++w) {
                RVec a2 = RVec::Zero(nv);
                for (int j = 0; j < nsig; ++j) a2(f0 + j) = acc.abort_map.table(w, j);
                a2(ep + w) = -1.0;
                a2(em + w) = 1.0;
                rb.add(zero, a2, ref(w), false);
            }
            RVec a3 = RVec::Zero(nv);
            a3.segment(ep, 2 * nbar).setOnes();
            a3(sb) = 1.0;
            rb.add(zero, a3, t, false);
            s.upper.segment(ep, 2 * nbar + 1).setConstant(t);
        }
    }
    if (spec.marginal_dim > 0) {
        const int da = spec.marginal_dim, r = s.d / da;
        if (da * r != s.d) throw InvalidInput("feasible set: marginal dimension does not divide the space");
        RMat M(spec.certainty.size(), da * da);
        RVec rhs(spec.certainty.size());
        for (size_t i = 0; i < spec.certainty.size(); ++i) {
            M.row(i) = herm_to_real(partial_trace(spec.certainty[i].op, {da, r}, {1}) / double(r)).transpose();
            rhs(i) = spec.certainty[i].value;
        }
        s.marginal_dim = da;
        s.marginal = real_to_herm(M.completeOrthogonalDecomposition().solve(rhs), da);
    }
    const int m = static_cast<int>(rb.rhs.size());
    s.A = RMat::Zero(m, nv);
    s.b = RVec(m);
    for (int i = 0; i < m; ++i) {
        if (nv > 0) s.A.row(i) = rb.a[i].transpose();
        s.b(i) = rb.rhs[i];
    }
    return s;
}

int detect_marginal_dim(const std::vector<ObservableConstraint>& certainty, int dim) {
    if (certainty.empty()) return 0;
    for (int da = dim - 1; da >= 2; --da) {
        if (dim % da) continue;
        const int r = dim / da;
        bool all = true;
        for (const auto& c : certainty) {
            const CMat x = partial_trace(c.op, {da, r}, {1}) / double(r);
            if ((c.op - kron(x, identity(r))).cwiseAbs().maxCoeff() > 1e-12) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        // the rows must pin down the whole marginal
        RMat M(certainty.size(), da * da);
        for (size_t i = 0; i < certainty.size(); ++i)
            M.row(i) = herm_to_real(partial_trace(certainty[i].op, {da, r}, {1})).transpose();
        Eigen::ColPivHouseholderQR<RMat> qr(M);
        qr.setThreshold(1e-10);
        if (qr.rank() == da * da) return da;
    }
    return 0;
}

std::optional<CMat> fix_marginal(const CMat& sigma, const CMat& m) {
    const int da = static_cast<int>(m.rows()), r = static_cast<int>(sigma.rows()) / da;
    const CMat sa = hermitian_part(partial_trace(sigma, {da, r}, {1}));
    const Eig e = eig_hermitian(sa);
    if (!(e.values.minCoeff() > 0.0)) return std::nullopt;
    const CMat inv_sqrt = spectral_apply(e, [](double x) { return 1.0 / std::sqrt(x); });
    const CMat c = matrix_sqrt_psd(hermitian_part(m)) * inv_sqrt;
    const CMat k = kron(c, identity(r));
    const CMat out = hermitian_part(k * sigma * k.adjoint());
    if (!out.allFinite()) return std::nullopt;
    return out;
}

LinearSet prune_dependent_rows(const LinearSet& set, double tol) {
    const RMat R = set.real_matrix();
    std::vector<RVec> basis;
    std::vector<double> basis_rhs;
    std::vector<int> keep;
    for (int i = 0; i < set.rows(); ++i) {
        RVec r = R.row(i).transpose();
        double rb = set.b(i);
        const double nr = r.norm();
        for (int pass = 0; pass < 2; ++pass)
            for (size_t j = 0; j < basis.size(); ++j) {
                const double c = basis[j].dot(r);
                r -= c * basis[j];
                rb -= c * basis_rhs[j];
            }
        const double res = r.norm();
        if (res > tol * std::max(1.0, nr)) {
            basis.push_back(r / res);
            basis_rhs.push_back(rb / res);
            keep.push_back(i);
        } else if (std::abs(rb) > 1e-7 * std::max(1.0, std::abs(set.b(i)))) {
            throw DomainError("feasible set is empty: constraint rows are inconsistent");
        }
    }
    LinearSet out = set;
    out.G.clear();
    out.certainty.clear();
    out.A = RMat(keep.size(), set.nv);
    out.b = RVec(keep.size());
    for (size_t t = 0; t < keep.size(); ++t) {
        out.G.push_back(set.G[keep[t]]);
        out.certainty.push_back(set.certainty[keep[t]]);
        if (set.nv > 0) out.A.row(t) = set.A.row(keep[t]);
        out.b(t) = set.b(keep[t]);
    }
    return out;
}

std::optional<FeasiblePoint> find_feasible_point(const LinearSet& set, const SdpTolerances& tol) {
    SdpProblem p;
    const int bp = p.add_block(BlockKind::Hermitian, set.d);
    const int bu = set.nv > 0 ? p.add_block(BlockKind::Diagonal, set.nv) : -1;
    const int nm = set.nv > 0 ? 2 : 1;
    const int bm = p.add_block(BlockKind::Diagonal, nm);
    p.objective[bp] = CMat::Zero(set.d, set.d);
    if (bu >= 0) p.objective[bu] = CMat::Zero(set.nv, 1);
    p.objective[bm] = CMat::Constant(nm, 1, -1.0);
    for (int i = 0; i < set.rows(); ++i) {
        BlockVec coef(p.blocks.size());
        coef[bp] = set.G[i];
        if (bu >= 0) coef[bu] = set.A.row(i).transpose().cast<cplx>();
        CMat mcoef(nm, 1);
        mcoef(0, 0) = set.G[i].trace().real();
        if (nm == 2) mcoef(1, 0) = set.A.row(i).sum();
        coef[bm] = mcoef;
        p.add_row(std::move(coef), set.b(i));
    }
    const SdpSolution sol = solve(p, tol);
    const bool ok = sol.status == SdpStatus::Optimal ||
                    (sol.status == SdpStatus::MaxIter && sol.primal_residual < 1e-7);
    if (!ok) return std::nullopt;
    FeasiblePoint x;
    const double a = std::max(0.0, sol.primal[bm](0, 0).real());
    const double c = nm == 2 ? std::max(0.0, sol.primal[bm](1, 0).real()) : 0.0;
    x.sigma = hermitian_part(sol.primal[bp]) + a * CMat::Identity(set.d, set.d);
    x.v = set.nv > 0 ? RVec(sol.primal[bu].real().col(0).array() + c) : RVec();
    x.margin = nm == 2 ? std::min(a, c) : a;
    return x;
}

FeasiblePoint project_affine(const LinearSet& set, const FeasiblePoint& x) {
    const RMat R = set.real_matrix();
    RVec z(set.real_dim());
    z.head(set.d * set.d) = herm_to_real(x.sigma);
    if (set.nv > 0) z.tail(set.nv) = x.v;
    const RVec r = R * z - set.b;
    const RVec dz = R.completeOrthogonalDecomposition().solve(r);
    z -= dz;
    FeasiblePoint out = x;
    out.sigma = real_to_herm(z.head(set.d * set.d), set.d);
    if (set.nv > 0) out.v = z.tail(set.nv);
    return out;
}

}  // namespace finkey
