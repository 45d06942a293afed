#pragma once

#include <random>

#include "qrnn/ansatz.hpp"
#include "qrnn/datasets.hpp"
#include "qrnn/tensor_ops.hpp"

namespace qrnn::test {

inline double urand(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline CMatrix random_complex(int rows, int cols, std::mt19937_64& rng) {
  CMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      m(i, j) = Complex(urand(rng, -1.0, 1.0), urand(rng, -1.0, 1.0));
    }
  }
  return m;
}

inline CMatrix random_unitary(int dim, std::mt19937_64& rng) {
  const Eigen::HouseholderQR<CMatrix> qr(random_complex(dim, dim, rng));
  return CMatrix(qr.householderQ());
}

// A A^dag normalized to unit trace: Hermitian and PSD by construction.
inline CMatrix random_density(int dim, std::mt19937_64& rng) {
  const CMatrix a = random_complex(dim, dim, rng);
  CMatrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  return rho;
}

inline RVector random_theta(const ParameterLayout& layout, std::mt19937_64& rng,
                            double lo = 0.0, double hi = 1.0) {
  RVector theta(layout.count());
  for (int i = 0; i < layout.angle_count(); ++i) theta(i) = urand(rng, lo, hi);
  theta(layout.bias_index()) = 0.0;
  return theta;
}

inline RMatrix random_inputs(int num_blocks, int n_inputs, std::mt19937_64& rng) {
  RMatrix series(num_blocks, n_inputs);
  for (int t = 0; t < num_blocks; ++t) {
    for (int v = 0; v < n_inputs; ++v) series(t, v) = urand(rng, -0.75, 0.75);
  }
  return series;
}

// The three reference circuit shapes.
inline AnsatzConfig case_a() { return AnsatzConfig{1, 2, 2, 3, 1}; }
inline AnsatzConfig case_b() { return AnsatzConfig{2, 3, 2, 1, 1}; }
inline AnsatzConfig case_c() { return AnsatzConfig{2, 3, 5, 3, 2}; }

// Contiguous non-overlapping training windows over a random series.
inline WindowedDataset toy_dataset(int window_len, int horizon, int k_windows, int n_inputs,
                                   std::mt19937_64& rng) {
  WindowedDataset ds;
  ds.window_len = window_len;
  ds.horizon = horizon;
  const int length = window_len * k_windows;
  ds.series.inputs = random_inputs(length, n_inputs, rng);
  ds.series.target.resize(length);
  for (int k = 0; k < length; ++k) ds.series.target(k) = urand(rng, -0.75, 0.75);
  ds.series.usable_length = length;
  for (int k = 0; k < k_windows; ++k) ds.train_starts.push_back(k * window_len);
  return ds;
}

}  // namespace qrnn::test
