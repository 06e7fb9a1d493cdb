#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace finkey {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Hermitian matrices share the dense complex storage; invariants are checked
// at the API boundary instead of being encoded in the type.
using HermitianMatrix = CMat;

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPsdTol = 1e-9;

bool is_hermitian(const CMat& m, double tol = kHermitianTol);
void require_hermitian(const CMat& m, const char* what);
CMat hermitian_part(const CMat& m);

struct Eig {
    RVec values;   // descending
    CMat vectors;  // columns
};

Eig eig_hermitian(const CMat& m);
double min_eigenvalue(const CMat& m);
double max_eigenvalue(const CMat& m);

// U f(diag) U^dagger for a real spectral function.
CMat spectral_apply(const Eig& e, const std::function<double(double)>& f);

CMat matrix_log2(const CMat& m, bool support_only = false);
CMat matrix_sqrt_psd(const CMat& m);

CMat partial_trace(const CMat& m, const std::vector<int>& dims, const std::vector<int>& traced);
double trace_norm(const CMat& m);
CMat kron(const CMat& a, const CMat& b);
CMat kron(const std::vector<CMat>& factors);

// <A,B> = Re Tr(A^dagger B); exact for Hermitian arguments.
double inner(const CMat& a, const CMat& b);
double real_trace(const CMat& m);

CMat identity(int d);
CMat ket(int d, int i);
CMat projector(const CMat& v);
CMat outer(const CMat& a, const CMat& b);

// Orthonormal (Hilbert-Schmidt) Hermitian basis of size d*d; element 0 is I/sqrt(d).
std::vector<CMat> hermitian_basis(int d);

// Isometric real coordinates: diagonal, then sqrt(2)Re and sqrt(2)Im of the
// strict upper triangle (row-major).
RVec herm_to_real(const CMat& h);
CMat real_to_herm(const RVec& v, int d);

struct DensityOperator {
    CMat matrix;
    std::vector<int> dims;
    bool relaxed_trace = false;

    DensityOperator() = default;
    DensityOperator(CMat m, std::vector<int> d, bool relaxed = false);
    int dim() const { return static_cast<int>(matrix.rows()); }
    void validate() const;
};

// Frechet derivative of the natural logarithm at a positive matrix with
// eigen-decomposition e, applied to direction h.
CMat log_frechet(const Eig& e, const CMat& h);

}  // namespace finkey
