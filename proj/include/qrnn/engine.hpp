#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qrnn/ansatz.hpp"

namespace qrnn {

// Z^{x n_e} eigenvalues on the E basis: d[i] = (-1)^popcount(i).
RVector observable_diag(int n_e);

// Evolution operator together with its row blocks, built once per
// parameter vector and reused for all blocks of a sequence.
struct EvolutionOp {
  CMatrix w;
  std::vector<CMatrix> blocks;  // dim_e blocks, each N_M x N
};

EvolutionOp make_evolution_op(std::span<const double> theta, const AnsatzConfig& config);

// A parameter offset applied inside one specific time block only.
struct BlockShift {
  int block = 0;        // time step t_r
  int param_index = 0;  // flat index into theta (rotation angles only)
  double delta = 0.0;
};

struct StepResult {
  DensityMatrix state;
  double expectation = 0.0;
};

// One block: reset E, encode x, evolve, average over E outcomes.
// Contracts through the W row blocks; the post-evolution N x N density
// matrix is never materialized. Returns the next hidden state and <O>
// from one pass over the partial matrices.
StepResult step(const DensityMatrix& state, const RVector& x,
                std::span<const double> theta, const AnsatzConfig& config,
                const EvolutionOp& evo);

// Reference route: builds the full N x N unitary U = W (V ⊗ I_M) and the
// complete post-evolution density matrix, then reduces. Slower by
// construction; used as the equivalence oracle for step().
StepResult step_naive(const DensityMatrix& state, const RVector& x,
                      std::span<const double> theta, const AnsatzConfig& config);

struct ForwardTrace {
  std::vector<DensityMatrix> states;  // rho_M(t)
  RVector expectations;               // <O>_t
  RVector predictions;                // <O>_t + bias
};

// Run T = series.rows() blocks from the all-zero hidden state. W and its
// blocks are built once per call. Entries of `shifts` offset parameters
// inside their own block only.
ForwardTrace forward(const RMatrix& series, std::span<const double> theta,
                     const AnsatzConfig& config,
                     std::span<const BlockShift> shifts = {});

// --- low-level runner -----------------------------------------------------
//
// Bound to one (theta, config) pair; owns the base operators. Pure with
// respect to runs: concurrent run() calls on one Runner are safe as long
// as each caller passes its own Workspace.

struct Workspace {
  CMatrix kraus, tmp, m, rho_a, rho_b;
  void resize(int n_m);
};

class Runner {
 public:
  Runner(const AnsatzConfig& config, std::span<const double> theta);

  // Per-block override set derived from a list of shifts. Evolution
  // operators are rebuilt only for blocks whose shifted parameters touch
  // the W part.
  struct ShiftContext {
    struct Override {
      int block = 0;
      std::vector<double> theta;
      EvolutionOp evo;   // only valid when w_changed
      bool w_changed = false;
    };
    std::vector<Override> overrides;  // sorted by block
    int first_block = 0;              // INT_MAX when there are no shifts
  };

  ShiftContext prepare(std::span<const BlockShift> shifts) const;
  ShiftContext prepare(std::initializer_list<BlockShift> shifts) const {
    return prepare(std::span<const BlockShift>(shifts.begin(), shifts.size()));
  }

  // Full run; writes <O>_t for all t, optionally collecting hidden states.
  void run(const RMatrix& series, const ShiftContext* ctx, RVector& expectations,
           std::vector<DensityMatrix>* states = nullptr, Workspace* ws = nullptr) const;

  // Resume from a cached hidden state: executes blocks [start, T) only.
  // Entries of `expectations` below `start` are left untouched (a shift at
  // block r never changes outputs at t < r).
  void run_suffix(const RMatrix& series, int start, const CMatrix& rho_start,
                  const ShiftContext* ctx, RVector& expectations,
                  Workspace* ws = nullptr) const;

  double bias() const { return theta_.back(); }
  const EvolutionOp& base_evolution() const { return base_evo_; }
  const AnsatzConfig& config() const { return cfg_; }
  const ParameterLayout& layout() const { return layout_; }

 private:
  void run_blocks(const RMatrix& series, int start, const CMatrix& rho_start,
                  const ShiftContext* ctx, RVector& expectations,
                  std::vector<DensityMatrix>* states, Workspace& ws) const;

  AnsatzConfig cfg_;
  ParameterLayout layout_;
  std::vector<double> theta_;
  EvolutionOp base_evo_;
  RVector obs_;
};

// --- trajectory sampling ----------------------------------------------------

struct SampleStats {
  Eigen::MatrixXi counts;  // T x N_E outcome counts
  RVector expectations;    // empirical mean eigenvalue per step
  long shots = 0;
};

// Selective-measurement mode: at every block the E outcome is sampled
// from the exact probabilities and the hidden state is conditioned on
// it. Deterministic given the seed.
SampleStats sample_trajectory(const RMatrix& series, std::span<const double> theta,
                              const AnsatzConfig& config, long shots, std::uint64_t seed);

}  // namespace qrnn
