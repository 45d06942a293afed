#include "qrnn/tensor_ops.hpp"

#include <Eigen/Eigenvalues>

namespace qrnn {

void RegisterSplit::validate() const {
  if (n_e < 1 || n_m < 1) {
    throw ConfigError("register split requires n_e >= 1 and n_m >= 1");
  }
}

bool DensityCheck::ok() const {
  if (hermitian_dev > tol::kHermitian) return false;
  if (trace_dev > tol::kUnitTrace) return false;
  if (psd_checked && min_eigenvalue < tol::kPsdEigenvalue) return false;
  return true;
}

DensityMatrix DensityMatrix::zero_state(int n_qubits) {
  const int dim = 1 << n_qubits;
  CMatrix m = CMatrix::Zero(dim, dim);
  m(0, 0) = 1.0;
  return DensityMatrix(std::move(m));
}

DensityCheck DensityMatrix::check(bool with_psd) const {
  DensityCheck out;
  out.hermitian_dev = (mat - mat.adjoint()).cwiseAbs().maxCoeff();
  out.trace_dev = std::abs(mat.trace() - Complex(1.0, 0.0));
  if (with_psd) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(mat, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.psd_checked = true;
  }
  return out;
}

CMatrix tensor_product(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      out.block(i * b.rows(), k * b.cols(), b.rows(), b.cols()) = a(i, k) * b;
    }
  }
  return out;
}

CMatrix dagger(const CMatrix& a) { return a.adjoint(); }

CMatrix partial_trace_e(const CMatrix& rho, const RegisterSplit& split) {
  if (rho.rows() != split.dim() || rho.cols() != split.dim()) {
    throw ShapeError("partial_trace_e: matrix dimension does not match the register split");
  }
  const int nm = split.dim_m();
  CMatrix out = CMatrix::Zero(nm, nm);
  for (int i = 0; i < split.dim_e(); ++i) {
    out += rho.block(i * nm, i * nm, nm, nm);
  }
  return out;
}

CMatrix partial_trace_m(const CMatrix& rho, const RegisterSplit& split) {
  if (rho.rows() != split.dim() || rho.cols() != split.dim()) {
    throw ShapeError("partial_trace_m: matrix dimension does not match the register split");
  }
  const int ne = split.dim_e();
  const int nm = split.dim_m();
  CMatrix out = CMatrix::Zero(ne, ne);
  for (int i = 0; i < ne; ++i) {
    for (int j = 0; j < ne; ++j) {
      out(i, j) = rho.block(i * nm, j * nm, nm, nm).trace();
    }
  }
  return out;
}

double expectation_diag(const CMatrix& rho, const RVector& d) {
  if (rho.rows() != d.size() || rho.cols() != d.size()) {
    throw ShapeError("expectation_diag: observable length does not match matrix dimension");
  }
  double out = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out += d(i) * rho(i, i).real();
  }
  return out;
}

}  // namespace qrnn
