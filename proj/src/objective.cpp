#include "finkey/objective.hpp"

#include <algorithm>
#include <cmath>

namespace finkey {

void PostProcessingMap::validate() const {
    if (kraus.empty()) throw InvalidInput("PostProcessingMap: no Kraus operators");
    const auto r = kraus.front().rows(), c = kraus.front().cols();
    for (const auto& k : kraus)
        if (k.rows() != r || k.cols() != c) throw InvalidInput("PostProcessingMap: Kraus shapes differ");
    CMat s = CMat::Zero(c, c);
    for (const auto& k : kraus) s += k.adjoint() * k;
    if (max_eigenvalue(s) > 1.0 + 1e-9) throw InvalidInput("PostProcessingMap: map is not trace non-increasing");
    std::vector<int> seen(r, 0);
    for (const auto& b : pinching_blocks)
        for (int i : b) {
            if (i < 0 || i >= r) throw InvalidInput("PostProcessingMap: pinching index out of range");
            seen[i]++;
        }
    for (int v : seen)
        if (v != 1) throw InvalidInput("PostProcessingMap: pinching blocks do not partition the output");
    if (perturbation_eps < 0) throw InvalidInput("PostProcessingMap: negative perturbation");
}

CMat apply_G(const CMat& rho, const PostProcessingMap& map) {
    if (rho.rows() != map.input_dim() || rho.cols() != map.input_dim())
        throw InvalidInput("apply_G: input dimension mismatch");
    CMat out = CMat::Zero(map.output_dim(), map.output_dim());
    for (const auto& k : map.kraus) out.noalias() += k * rho * k.adjoint();
    return hermitian_part(out);
}

CMat apply_G(const DensityOperator& rho, const PostProcessingMap& map) { return apply_G(rho.matrix, map); }

CMat apply_G_adjoint(const CMat& y, const PostProcessingMap& map) {
    if (y.rows() != map.output_dim()) throw InvalidInput("apply_G_adjoint: dimension mismatch");
    CMat out = CMat::Zero(map.input_dim(), map.input_dim());
    for (const auto& k : map.kraus) out.noalias() += k.adjoint() * y * k;
    return hermitian_part(out);
}

CMat pinch_Z(const CMat& sigma, const PostProcessingMap& map) {
    if (sigma.rows() != map.output_dim()) throw InvalidInput("pinch_Z: dimension mismatch");
    CMat out = CMat::Zero(sigma.rows(), sigma.cols());
    for (const auto& b : map.pinching_blocks)
        for (int i : b)
            for (int j : b) out(i, j) = sigma(i, j);
    return out;
}

CMat apply_G_eps(const CMat& rho, const PostProcessingMap& map) {
    const double e = map.perturbation_eps;
    const int d = map.output_dim();
    CMat g = apply_G(rho, map);
    if (e == 0.0) return g;
    return (1.0 - e) * g + (e / d) * CMat::Identity(d, d);
}

double relative_entropy(const CMat& s, const CMat& t) {
    const Eig es = eig_hermitian(s);
    const Eig et = eig_hermitian(t);
    const double zs = 1e-14 * std::max(1.0, es.values.cwiseAbs().maxCoeff());
    const double zt = 1e-14 * std::max(1.0, et.values.cwiseAbs().maxCoeff());
    double a = 0.0;
    for (int i = 0; i < es.values.size(); ++i) {
        const double l = es.values(i);
        if (l < -kPsdTol) throw DomainError("relative_entropy: first argument not PSD");
        if (l > zs) a += l * std::log2(l);
    }
    // Tr[s log t] restricted to supp(t); any weight of s outside supp(t) means +inf
    const CMat st = et.vectors.adjoint() * s * et.vectors;
    double b = 0.0;
    for (int i = 0; i < et.values.size(); ++i) {
        const double l = et.values(i);
        const double w = st(i, i).real();
        if (l > zt)
            b += w * std::log2(l);
        else if (w > 1e-12)
            throw DomainError("relative_entropy: support mismatch; raise the perturbation");
    }
    return a - b;
}

double f_eps(const CMat& rho, const PostProcessingMap& map) {
    const CMat g = apply_G_eps(rho, map);
    return std::max(0.0, relative_entropy(g, pinch_Z(g, map)));
}

double f_eps(const DensityOperator& rho, const PostProcessingMap& map) { return f_eps(rho.matrix, map); }

CMat grad_f_eps(const CMat& rho, const PostProcessingMap& map) {
    const CMat g = apply_G_eps(rho, map);
    const CMat zg = pinch_Z(g, map);
    if (min_eigenvalue(g) <= 0.0)
        throw DomainError("grad_f_eps: G_eps(rho) is singular; raise the perturbation");
    const CMat diff = matrix_log2(g) - matrix_log2(zg);
    return (1.0 - map.perturbation_eps) * apply_G_adjoint(diff, map);
}

CMat grad_f_eps(const DensityOperator& rho, const PostProcessingMap& map) { return grad_f_eps(rho.matrix, map); }

double zeta_eps(double eps, int d_prime) {
    if (d_prime < 2) throw InvalidInput("zeta_eps: d' must be at least 2");
    const double dm = d_prime - 1.0;
    if (!(eps > 0.0) || eps > 1.0 / (M_E * dm)) throw InvalidInput("zeta_eps: eps outside (0, 1/(e(d'-1))]");
    return 2.0 * eps * dm * std::log2(d_prime / (eps * dm));
}

double choose_perturbation(const CMat& rho, const PostProcessingMap& map, double start) {
    PostProcessingMap m = map;
    const double cap = 1.0 / (M_E * std::max(1, map.output_dim() - 1));
    double e = start;
    for (; e < cap; e *= 10.0) {
        m.perturbation_eps = e;
        if (min_eigenvalue(apply_G_eps(rho, m)) > 1e-10) return e;
    }
    return std::min(e, cap);
}

PostProcessingMap compress_output(const PostProcessingMap& map, double tol) {
    map.validate();
    const int din = map.input_dim();
    const int nk = static_cast<int>(map.kraus.size());
    std::vector<CMat> bases;
    for (const auto& blk : map.pinching_blocks) {
        const int nb = static_cast<int>(blk.size());
        CMat stack(nb, din * nk);
        for (int k = 0; k < nk; ++k)
            for (int r = 0; r < nb; ++r) stack.block(r, k * din, 1, din) = map.kraus[k].row(blk[r]);
        Eigen::JacobiSVD<CMat> svd(stack, Eigen::ComputeThinU);
        const auto& sv = svd.singularValues();
        int rank = 0;
        const double thr = tol * std::max(1.0, sv.size() ? sv(0) : 0.0);
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > thr) ++rank;
        bases.push_back(svd.matrixU().leftCols(rank));
    }
    int dout = 0;
    for (const auto& b : bases) dout += static_cast<int>(b.cols());
    PostProcessingMap out;
    out.key_alphabet_size = map.key_alphabet_size;
    out.perturbation_eps = map.perturbation_eps;
    for (int k = 0; k < nk; ++k) out.kraus.push_back(CMat::Zero(dout, din));
    int off = 0;
    for (size_t bi = 0; bi < bases.size(); ++bi) {
        const auto& blk = map.pinching_blocks[bi];
        const int r = static_cast<int>(bases[bi].cols());
        if (r == 0) continue;
        std::vector<int> idx;
        for (int i = 0; i < r; ++i) idx.push_back(off + i);
        out.pinching_blocks.push_back(idx);
        for (int k = 0; k < nk; ++k) {
            CMat rows(blk.size(), din);
            for (size_t t = 0; t < blk.size(); ++t) rows.row(t) = map.kraus[k].row(blk[t]);
            out.kraus[k].block(off, 0, r, din) = bases[bi].adjoint() * rows;
        }
        off += r;
    }
    return out;
}

RMat hessian_f_eps(const CMat& rho, const PostProcessingMap& map) {
    const int d = map.input_dim();
    const int p = d * d;
    const double e = map.perturbation_eps;
    const CMat g = apply_G_eps(rho, map);
    const CMat zg = pinch_Z(g, map);
    const Eig eg = eig_hermitian(g);
    const Eig ez = eig_hermitian(zg);
    if (eg.values.minCoeff() <= 0.0) throw DomainError("hessian_f_eps: G_eps(rho) is singular");
    const double scale = (1.0 - e) * (1.0 - e) / std::log(2.0);
    RMat h(p, p);
    for (int b = 0; b < p; ++b) {
        RVec u = RVec::Zero(p);
        u(b) = 1.0;
        const CMat dg = apply_G(real_to_herm(u, d), map);
        const CMat zdg = pinch_Z(dg, map);
        const CMat t = log_frechet(eg, dg) - pinch_Z(log_frechet(ez, zdg), map);
        h.col(b) = scale * herm_to_real(apply_G_adjoint(hermitian_part(t), map));
    }
    return 0.5 * (h + h.transpose());
}

}  // namespace finkey
