#include "finkey/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "finkey/random.hpp"

namespace finkey {

bool is_hermitian(const CMat& m, double tol) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

void require_hermitian(const CMat& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw InvalidInput(std::string(what) + ": matrix must be square and non-empty");
    if (!is_hermitian(m))
        throw InvalidInput(std::string(what) + ": matrix is not Hermitian");
}

CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

Eig eig_hermitian(const CMat& m) {
    require_hermitian(m, "eig_hermitian");
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
    const int n = static_cast<int>(m.rows());
    Eig out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        out.values(i) = es.eigenvalues()(n - 1 - i);
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

double min_eigenvalue(const CMat& m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eigenvalue(const CMat& m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(m.rows() - 1);
}

CMat spectral_apply(const Eig& e, const std::function<double(double)>& f) {
    const int n = static_cast<int>(e.values.size());
    RVec fv(n);
    for (int i = 0; i < n; ++i) fv(i) = f(e.values(i));
    CMat r = e.vectors * fv.asDiagonal() * e.vectors.adjoint();
    return hermitian_part(r);
}

CMat matrix_log2(const CMat& m, bool support_only) {
    const Eig e = eig_hermitian(m);
    const double lmax = std::max(1.0, e.values.cwiseAbs().maxCoeff());
    const double zero = 1e-14 * lmax;
    for (int i = 0; i < e.values.size(); ++i) {
        const double l = e.values(i);
        if (l < -kPsdTol) throw DomainError("matrix_log2: negative eigenvalue " + std::to_string(l));
        if (!support_only && l <= 0.0)
            throw DomainError("matrix_log2: matrix is singular; use support_only or perturb");
    }
    return spectral_apply(e, [zero](double l) { return l <= zero ? 0.0 : std::log2(l); });
}

CMat matrix_sqrt_psd(const CMat& m) {
    const Eig e = eig_hermitian(m);
    return spectral_apply(e, [](double l) { return l <= 0.0 ? 0.0 : std::sqrt(l); });
}

CMat partial_trace(const CMat& m, const std::vector<int>& dims, const std::vector<int>& traced) {
    if (dims.empty()) throw InvalidInput("partial_trace: empty subsystem list");
    long total = 1;
    for (int d : dims) {
        if (d < 1) throw InvalidInput("partial_trace: subsystem dimensions must be positive");
        total *= d;
    }
    if (m.rows() != total || m.cols() != total)
        throw InvalidInput("partial_trace: subsystem dimensions do not match matrix size");
    const int ns = static_cast<int>(dims.size());
    std::vector<char> is_traced(ns, 0);
    for (int t : traced) {
        if (t < 0 || t >= ns) throw InvalidInput("partial_trace: traced index out of range");
        is_traced[t] = 1;
    }
    // strides of the row-major composite index
    std::vector<long> stride(ns);
    long s = 1;
    for (int i = ns - 1; i >= 0; --i) {
        stride[i] = s;
        s *= dims[i];
    }
    std::vector<int> kept, gone;
    long dk = 1, dt = 1;
    for (int i = 0; i < ns; ++i) {
        if (is_traced[i]) {
            gone.push_back(i);
            dt *= dims[i];
        } else {
            kept.push_back(i);
            dk *= dims[i];
        }
    }
    auto offsets = [&](const std::vector<int>& sub, long count) {
        std::vector<long> off(count, 0);
        for (long idx = 0; idx < count; ++idx) {
            long rem = idx, o = 0;
            for (int j = static_cast<int>(sub.size()) - 1; j >= 0; --j) {
                const int sys = sub[j];
                o += (rem % dims[sys]) * stride[sys];
                rem /= dims[sys];
            }
            off[idx] = o;
        }
        return off;
    };
    const auto ko = offsets(kept, dk);
    const auto to = offsets(gone, dt);
    CMat r = CMat::Zero(dk, dk);
    for (long i = 0; i < dk; ++i)
        for (long j = 0; j < dk; ++j) {
            cplx acc = 0.0;
            for (long t = 0; t < dt; ++t) acc += m(ko[i] + to[t], ko[j] + to[t]);
            r(i, j) = acc;
        }
    return r;
}

double trace_norm(const CMat& m) {
    require_hermitian(m, "trace_norm");
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

CMat kron(const CMat& a, const CMat& b) {
    CMat r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

CMat kron(const std::vector<CMat>& factors) {
    if (factors.empty()) return CMat::Identity(1, 1);
    CMat r = factors.front();
    for (size_t i = 1; i < factors.size(); ++i) r = kron(r, factors[i]);
    return r;
}

double inner(const CMat& a, const CMat& b) { return (a.conjugate().cwiseProduct(b)).sum().real(); }

double real_trace(const CMat& m) { return m.trace().real(); }

CMat identity(int d) { return CMat::Identity(d, d); }

CMat ket(int d, int i) {
    CMat v = CMat::Zero(d, 1);
    v(i, 0) = 1.0;
    return v;
}

CMat projector(const CMat& v) { return v * v.adjoint(); }

CMat outer(const CMat& a, const CMat& b) { return a * b.adjoint(); }

std::vector<CMat> hermitian_basis(int d) {
    std::vector<CMat> out;
    out.reserve(d * d);
    out.push_back(CMat::Identity(d, d) / std::sqrt(double(d)));
    for (int l = 1; l < d; ++l) {
        CMat m = CMat::Zero(d, d);
        for (int j = 0; j < l; ++j) m(j, j) = 1.0;
        m(l, l) = -double(l);
        out.push_back(m / std::sqrt(double(l) * (l + 1)));
    }
    const double r = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            CMat s = CMat::Zero(d, d);
            s(j, k) = r;
            s(k, j) = r;
            out.push_back(s);
            CMat a = CMat::Zero(d, d);
            a(j, k) = cplx(0.0, r);
            a(k, j) = cplx(0.0, -r);
            out.push_back(a);
        }
    return out;
}

RVec herm_to_real(const CMat& h) {
    const int d = static_cast<int>(h.rows());
    RVec v(d * d);
    int p = 0;
    for (int i = 0; i < d; ++i) v(p++) = h(i, i).real();
    const double s2 = std::sqrt(2.0);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            v(p++) = s2 * h(j, k).real();
            v(p++) = s2 * h(j, k).imag();
        }
    return v;
}

CMat real_to_herm(const RVec& v, int d) {
    if (v.size() != d * d) throw InvalidInput("real_to_herm: wrong coordinate count");
    CMat h = CMat::Zero(d, d);
    int p = 0;
    for (int i = 0; i < d; ++i) h(i, i) = v(p++);
    const double r = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            const cplx z(r * v(p), r * v(p + 1));
            p += 2;
            h(j, k) = z;
            h(k, j) = std::conj(z);
        }
    return h;
}

DensityOperator::DensityOperator(CMat m, std::vector<int> d, bool relaxed)
    : matrix(std::move(m)), dims(std::move(d)), relaxed_trace(relaxed) {
    validate();
}

void DensityOperator::validate() const {
    require_hermitian(matrix, "DensityOperator");
    long p = 1;
    for (int d : dims) {
        if (d < 1) throw InvalidInput("DensityOperator: subsystem dimensions must be positive");
        p *= d;
    }
    if (p != matrix.rows()) throw InvalidInput("DensityOperator: subsystem dimensions do not multiply to size");
    if (min_eigenvalue(matrix) < -kPsdTol) throw InvalidInput("DensityOperator: matrix is not PSD");
    if (!relaxed_trace && std::abs(real_trace(matrix) - 1.0) > 1e-9)
        throw InvalidInput("DensityOperator: trace is not 1");
}

CMat log_frechet(const Eig& e, const CMat& h) {
    const int n = static_cast<int>(e.values.size());
    CMat ht = e.vectors.adjoint() * h * e.vectors;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double a = e.values(i), b = e.values(j);
            double g;
            if (std::abs(a - b) <= 1e-12 * std::max(a, b))
                g = 2.0 / (a + b);
            else
                g = (std::log(a) - std::log(b)) / (a - b);
            ht(i, j) *= g;
        }
    return e.vectors * ht * e.vectors.adjoint();
}

CMat random_hermitian(int d, Rng& rng) {
    CMat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(rng.normal(), rng.normal());
    return hermitian_part(m);
}

CMat random_unitary(int d, Rng& rng) {
    CMat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(rng.normal(), rng.normal());
    Eigen::HouseholderQR<CMat> qr(m);
    CMat q = qr.householderQ() * CMat::Identity(d, d);
    CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i) {
        const cplx di = r(i, i);
        const double a = std::abs(di);
        if (a > 0) q.col(i) *= di / a;
    }
    return q;
}

CMat random_density(int d, Rng& rng, int rank) {
    if (rank <= 0 || rank > d) rank = d;
    CMat g(d, rank);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < rank; ++j) g(i, j) = cplx(rng.normal(), rng.normal());
    CMat rho = g * g.adjoint();
    rho /= rho.trace().real();
    return hermitian_part(rho);
}

}  // namespace finkey
