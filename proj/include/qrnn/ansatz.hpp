#pragma once

#include <span>
#include <vector>

#include "qrnn/tensor_ops.hpp"

namespace qrnn {

enum class Axis { X, Y, Z };

// exp(-i * angle/2 * sigma_axis), half-angle convention. With this
// convention the +-pi/2 shift rule with a 1/2 prefactor is exact for
// every parameterized angle.
CMatrix rotation_gate(Axis axis, double angle);

// Rz(t2) * Ry(t1) * Rz(t3). Each factor is a rotation_gate, so all three
// angles are individually shift-differentiable. Global phase is
// irrelevant under conjugation.
CMatrix u3_gate(double t1, double t2, double t3);

// Circuit shape: exchange/memory widths, entangling layer count L,
// re-upload repeat count R and the number of input variables.
struct AnsatzConfig {
  int n_e = 1;
  int n_m = 1;
  int layers = 1;     // L
  int reuploads = 0;  // R
  int n_inputs = 1;   // n_v

  int n_qubits() const { return n_e + n_m; }
  RegisterSplit split() const { return RegisterSplit{n_e, n_m}; }

  // 3*n_e*R + 3*n*L + 3*n_e + 1 (trailing entry is the bias).
  int param_count() const;

  void validate() const;  // throws ConfigError
};

enum class ParamRole { kEncoding, kEvolution, kFinalColumn, kBias };

struct ParamSlot {
  ParamRole role = ParamRole::kBias;
  int column = 0;  // repetition r for encoding, layer l for evolution
  int qubit = 0;   // E-qubit index for encoding/final, global index for evolution
  int angle = 0;   // 0..2 within the U3 threesome
};

// Bijective map between flat parameter indices and gate slots. Shift
// operations may target only rotation-angle indices; the bias is never
// shiftable.
class ParameterLayout {
 public:
  explicit ParameterLayout(const AnsatzConfig& config);

  int count() const { return count_; }
  int angle_count() const { return count_ - 1; }
  int bias_index() const { return count_ - 1; }
  bool shiftable(int flat_index) const;

  ParamSlot slot(int flat_index) const;
  int flat_index(const ParamSlot& slot) const;

  int alpha_offset() const { return 0; }
  int alpha_size() const { return 3 * cfg_.n_e * cfg_.reuploads; }
  // Evolution angles: L layers over all qubits plus the final E column.
  int w_offset() const { return alpha_size(); }
  int w_size() const { return 3 * cfg_.n_qubits() * cfg_.layers + 3 * cfg_.n_e; }

  const AnsatzConfig& config() const { return cfg_; }

 private:
  AnsatzConfig cfg_;
  int count_ = 0;
};

// Encoding operator V(x, alpha) on register E: an initial column of
// Ry(x) data uploads followed by R repetitions of (trainable U3 column,
// data upload column) -- R+1 uploads total. Input variable m(j) =
// min(j, n_v - 1) is replicated onto extra E qubits.
CMatrix build_encoding(const RVector& x, std::span<const double> alpha,
                       const AnsatzConfig& config);

// First column of V(x, alpha), i.e. V|0...0>. The encoding factorizes
// per qubit, so this costs n_e chains of 2x2 products.
CVector encoding_column(const RVector& x, std::span<const double> alpha,
                        const AnsatzConfig& config);

// Evolution operator W: L layers of (U3 column on all qubits, then CZ
// between every E-M pair), followed by a final U3 column on E.
// w_params = [layer angles][final column angles], length 3*n*L + 3*n_e.
CMatrix build_evolution(std::span<const double> w_params, const AnsatzConfig& config);

// Diagonal of the all-pairs E-M CZ layer, composed gate by gate.
RVector cz_all_em_diag(const RegisterSplit& split);

// Row blocks W^i (each N_M x N): block i holds rows i*N_M .. (i+1)*N_M-1.
std::vector<CMatrix> split_w_blocks(const CMatrix& w, const RegisterSplit& split);

}  // namespace qrnn
