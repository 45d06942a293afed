#pragma once

#include "qrnn/types.hpp"

namespace qrnn {

// Split of the qubits into an exchange register E (encoded and measured
// every block) and a memory register M (never measured). Joint basis
// index convention: index = i * dim_m() + q, with i indexing E and q
// indexing M, i.e. E occupies the most significant bits.
struct RegisterSplit {
  int n_e = 1;
  int n_m = 1;

  int n_qubits() const { return n_e + n_m; }
  int dim_e() const { return 1 << n_e; }
  int dim_m() const { return 1 << n_m; }
  int dim() const { return 1 << (n_e + n_m); }

  void validate() const;
};

struct DensityCheck {
  double hermitian_dev = 0.0;  // max entrywise |rho - rho^dag|
  double trace_dev = 0.0;      // |Tr rho - 1|
  double min_eigenvalue = 0.0; // only filled when with_psd
  bool psd_checked = false;

  bool ok() const;
};

// Hermitian, unit-trace, PSD matrix; carries hidden states and the
// intermediate joint states. Construction does not validate; call
// check() in tests / debug paths.
struct DensityMatrix {
  CMatrix mat;

  DensityMatrix() = default;
  explicit DensityMatrix(CMatrix m) : mat(std::move(m)) {}

  // |0...0><0...0| on n_qubits qubits.
  static DensityMatrix zero_state(int n_qubits);

  int dim() const { return static_cast<int>(mat.rows()); }

  DensityCheck check(bool with_psd = false) const;
};

// Kronecker product; entry[(i*b.rows+j),(k*b.cols+l)] = a[i,k] * b[j,l].
CMatrix tensor_product(const CMatrix& a, const CMatrix& b);

// Conjugate transpose.
CMatrix dagger(const CMatrix& a);

// Trace out register E: sigma[q,r] = sum_i rho[i*N_M+q, i*N_M+r].
CMatrix partial_trace_e(const CMatrix& rho, const RegisterSplit& split);

// Trace out register M: sigma[i,j] = sum_q rho[i*N_M+q, j*N_M+q].
CMatrix partial_trace_m(const CMatrix& rho, const RegisterSplit& split);

// <O> = sum_i d[i] * Re(rho[i,i]) for a diagonal observable d.
double expectation_diag(const CMatrix& rho, const RVector& d);

}  // namespace qrnn
