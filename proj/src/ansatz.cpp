#include "qrnn/ansatz.hpp"

#include <cmath>
#include <string>

namespace qrnn {

namespace {

constexpr Complex kI{0.0, 1.0};

Eigen::Matrix2cd rotation2(Axis axis, double angle) {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  Eigen::Matrix2cd g;
  switch (axis) {
    case Axis::X:
      g << c, -kI * s, -kI * s, c;
      break;
    case Axis::Y:
      g << c, -s, s, c;
      break;
    case Axis::Z:
      g << std::exp(-kI * (angle / 2.0)), 0.0, 0.0, std::exp(kI * (angle / 2.0));
      break;
  }
  return g;
}

Eigen::Matrix2cd u3_2x2(const double* t) {
  return rotation2(Axis::Z, t[1]) * rotation2(Axis::Y, t[0]) * rotation2(Axis::Z, t[2]);
}

// Per-qubit 2x2 encoding chain: Ry(x) * U3(a^R) * ... * U3(a^1) * Ry(x).
Eigen::Matrix2cd encoding_chain(double x, std::span<const double> alpha, int qubit,
                                const AnsatzConfig& cfg) {
  Eigen::Matrix2cd chain = rotation2(Axis::Y, x);
  for (int r = 0; r < cfg.reuploads; ++r) {
    const double* t = alpha.data() + 3 * (r * cfg.n_e + qubit);
    chain = u3_2x2(t) * chain;
    chain = rotation2(Axis::Y, x) * chain;
  }
  return chain;
}

int input_for_qubit(int qubit, const AnsatzConfig& cfg) {
  return std::min(qubit, cfg.n_inputs - 1);
}

// Kronecker chain of per-qubit 2x2 gates, qubit 0 most significant.
CMatrix kron_chain(const std::vector<Eigen::Matrix2cd>& gates) {
  CMatrix out = gates.front();
  for (std::size_t g = 1; g < gates.size(); ++g) {
    CMatrix next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        next.block(2 * i, 2 * j, 2, 2) = out(i, j) * gates[g];
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

CMatrix rotation_gate(Axis axis, double angle) { return rotation2(axis, angle); }

CMatrix u3_gate(double t1, double t2, double t3) {
  const double t[3] = {t1, t2, t3};
  return u3_2x2(t);
}

int AnsatzConfig::param_count() const {
  return 3 * n_e * reuploads + 3 * n_qubits() * layers + 3 * n_e + 1;
}

void AnsatzConfig::validate() const {
  if (n_e < 1 || n_m < 1) throw ConfigError("ansatz requires n_e >= 1 and n_m >= 1");
  if (layers < 0 || reuploads < 0) throw ConfigError("ansatz requires layers >= 0 and reuploads >= 0");
  if (n_inputs < 1 || n_inputs > n_e) {
    throw ConfigError("ansatz requires 1 <= n_inputs <= n_e (variables are replicated onto extra E qubits)");
  }
}

ParameterLayout::ParameterLayout(const AnsatzConfig& config) : cfg_(config) {
  cfg_.validate();
  count_ = cfg_.param_count();
}

bool ParameterLayout::shiftable(int flat_index) const {
  if (flat_index < 0 || flat_index >= count_) {
    throw ShapeError("parameter index out of range: " + std::to_string(flat_index));
  }
  return flat_index != bias_index();
}

ParamSlot ParameterLayout::slot(int flat_index) const {
  if (flat_index < 0 || flat_index >= count_) {
    throw ShapeError("parameter index out of range: " + std::to_string(flat_index));
  }
  if (flat_index == bias_index()) return ParamSlot{ParamRole::kBias, 0, 0, 0};

  const int n = cfg_.n_qubits();
  int i = flat_index;
  if (i < alpha_size()) {
    return ParamSlot{ParamRole::kEncoding, i / (3 * cfg_.n_e), (i / 3) % cfg_.n_e, i % 3};
  }
  i -= alpha_size();
  if (i < 3 * n * cfg_.layers) {
    return ParamSlot{ParamRole::kEvolution, i / (3 * n), (i / 3) % n, i % 3};
  }
  i -= 3 * n * cfg_.layers;
  return ParamSlot{ParamRole::kFinalColumn, 0, i / 3, i % 3};
}

int ParameterLayout::flat_index(const ParamSlot& s) const {
  switch (s.role) {
    case ParamRole::kEncoding:
      return 3 * (s.column * cfg_.n_e + s.qubit) + s.angle;
    case ParamRole::kEvolution:
      return alpha_size() + 3 * (s.column * cfg_.n_qubits() + s.qubit) + s.angle;
    case ParamRole::kFinalColumn:
      return alpha_size() + 3 * cfg_.n_qubits() * cfg_.layers + 3 * s.qubit + s.angle;
    case ParamRole::kBias:
      return bias_index();
  }
  throw ConfigError("unreachable parameter role");
}

CMatrix build_encoding(const RVector& x, std::span<const double> alpha,
                       const AnsatzConfig& config) {
  if (x.size() != config.n_inputs) {
    throw ShapeError("build_encoding: input vector length does not match n_inputs");
  }
  if (static_cast<int>(alpha.size()) != 3 * config.n_e * config.reuploads) {
    throw ShapeError("build_encoding: encoding-angle slice has the wrong length");
  }
  std::vector<Eigen::Matrix2cd> chains(config.n_e);
  for (int j = 0; j < config.n_e; ++j) {
    chains[j] = encoding_chain(x(input_for_qubit(j, config)), alpha, j, config);
  }
  return kron_chain(chains);
}

CVector encoding_column(const RVector& x, std::span<const double> alpha,
                        const AnsatzConfig& config) {
  if (x.size() != config.n_inputs) {
    throw ShapeError("encoding_column: input vector length does not match n_inputs");
  }
  if (static_cast<int>(alpha.size()) != 3 * config.n_e * config.reuploads) {
    throw ShapeError("encoding_column: encoding-angle slice has the wrong length");
  }
  CVector v = CVector::Ones(1);
  for (int j = 0; j < config.n_e; ++j) {
    const Eigen::Vector2cd col =
        encoding_chain(x(input_for_qubit(j, config)), alpha, j, config).col(0);
    CVector next(v.size() * 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      next(2 * i) = v(i) * col(0);
      next(2 * i + 1) = v(i) * col(1);
    }
    v = std::move(next);
  }
  return v;
}

RVector cz_all_em_diag(const RegisterSplit& split) {
  const int n = split.n_qubits();
  RVector diag = RVector::Ones(split.dim());
  for (int e = 0; e < split.n_e; ++e) {
    for (int m = split.n_e; m < n; ++m) {
      for (int b = 0; b < split.dim(); ++b) {
        const int be = (b >> (n - 1 - e)) & 1;
        const int bm = (b >> (n - 1 - m)) & 1;
        if (be && bm) diag(b) = -diag(b);
      }
    }
  }
  return diag;
}

CMatrix build_evolution(std::span<const double> w_params, const AnsatzConfig& config) {
  const int n = config.n_qubits();
  const int expected = 3 * n * config.layers + 3 * config.n_e;
  if (static_cast<int>(w_params.size()) != expected) {
    throw ShapeError("build_evolution: evolution-angle slice has the wrong length");
  }
  const RegisterSplit split = config.split();
  const RVector cz = cz_all_em_diag(split);

  CMatrix w = CMatrix::Identity(split.dim(), split.dim());
  std::vector<Eigen::Matrix2cd> column(n);
  for (int l = 0; l < config.layers; ++l) {
    for (int q = 0; q < n; ++q) {
      column[q] = u3_2x2(w_params.data() + 3 * (l * n + q));
    }
    if (l == 0) {
      w = kron_chain(column);
    } else {
      w = kron_chain(column) * w;
    }
    w = cz.cast<Complex>().asDiagonal() * w;
  }

  // Final U3 column over register E only.
  std::vector<Eigen::Matrix2cd> final_col(n, Eigen::Matrix2cd::Identity());
  for (int j = 0; j < config.n_e; ++j) {
    final_col[j] = u3_2x2(w_params.data() + 3 * (n * config.layers + j));
  }
  w = kron_chain(final_col) * w;
  return w;
}

std::vector<CMatrix> split_w_blocks(const CMatrix& w, const RegisterSplit& split) {
  if (w.rows() != split.dim() || w.cols() != split.dim()) {
    throw ShapeError("split_w_blocks: operator dimension does not match the register split");
  }
  std::vector<CMatrix> blocks;
  blocks.reserve(split.dim_e());
  for (int i = 0; i < split.dim_e(); ++i) {
    blocks.push_back(w.middleRows(i * split.dim_m(), split.dim_m()));
  }
  return blocks;
}

}  // namespace qrnn
