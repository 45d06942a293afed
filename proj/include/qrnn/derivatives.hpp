#pragma once

#include <atomic>
#include <span>
#include <vector>

#include "qrnn/datasets.hpp"
#include "qrnn/engine.hpp"

namespace qrnn {

// Counts distinct forward evaluations, one increment per parameter
// configuration swept (a batch of windows under one configuration is a
// single evaluation). Unshifted baseline sweeps are tallied under
// `loss`. Safe to increment from concurrent workers.
class EvalBudget {
 public:
  enum class Kind { kLoss, kGradient, kHessian };

  void add(Kind kind, long long n = 1) {
    switch (kind) {
      case Kind::kLoss: loss_ += n; break;
      case Kind::kGradient: gradient_ += n; break;
      case Kind::kHessian: hessian_ += n; break;
    }
  }
  long long loss() const { return loss_.load(); }
  long long gradient() const { return gradient_.load(); }
  long long hessian() const { return hessian_.load(); }
  long long total() const { return loss() + gradient() + hessian(); }

 private:
  std::atomic<long long> loss_{0};
  std::atomic<long long> gradient_{0};
  std::atomic<long long> hessian_{0};
};

// Shifts of rotation-angle parameters applied inside specific blocks.
// Valid shift magnitudes are +-pi/2 (first order) and +-pi (the collapsed
// equal-sign diagonal terms); at most one entry per (block, parameter).
struct ShiftSpec {
  std::vector<BlockShift> entries;

  static ShiftSpec none() { return {}; }
  static ShiftSpec single(int block, int param_index, double delta) {
    return ShiftSpec{{BlockShift{block, param_index, delta}}};
  }

  void validate(const ParameterLayout& layout, int num_blocks) const;
};

// Expectation sequence <O>_t after applying the spec's shifts; identical
// to forward() when the spec is empty. One budget increment.
RVector shifted_forward(const RMatrix& series, std::span<const double> theta,
                        const AnsatzConfig& config, const ShiftSpec& spec,
                        EvalBudget* budget = nullptr,
                        EvalBudget::Kind kind = EvalBudget::Kind::kGradient);

// d<O>_t / d theta_i by the multi-block shift rule:
// sum_{r=0..t} (E+ - E-)/2 with the shift applied at block r only.
// Uses 2(t+1) evaluations.
double gradient_expectation(const RMatrix& series, std::span<const double> theta,
                            const AnsatzConfig& config, int t, int param_index,
                            EvalBudget* budget = nullptr);

// Batched gradients of every <O>_t with respect to every rotation angle:
// one evaluation per (parameter, block, sign) serves all t at once.
// Returns T x angle_count. Exactly 2 * T * angle_count gradient
// evaluations (plus one baseline, tallied under loss).
RMatrix gradient_expectation_all(const RMatrix& series, std::span<const double> theta,
                                 const AnsatzConfig& config, EvalBudget* budget = nullptr,
                                 int workers = 0);

// Gradient of the training RMSE over the dataset's train windows.
// Rotation angles via batched shifts (2 * T * angle_count evaluations),
// bias analytically from the residuals. Optionally reports the loss
// computed from the shared baseline sweep.
RVector gradient_loss(const WindowedDataset& dataset, std::span<const double> theta,
                      const AnsatzConfig& config, EvalBudget* budget = nullptr,
                      int workers = 0, double* loss_out = nullptr);

// Hessian of <O>_t with respect to the selected rotation angles (all of
// them when `params` is empty). Off-diagonal entries average the four
// sign combinations over all block pairs; diagonal entries use the
// ordered-pair reduction with single +-pi shifts at equal blocks and the
// baseline correction. Exactly symmetric by construction; distinct
// shifted configurations are evaluated once.
RMatrix hessian_expectation(const RMatrix& series, std::span<const double> theta,
                            const AnsatzConfig& config, int t,
                            std::span<const int> params = {}, EvalBudget* budget = nullptr,
                            int workers = 0);

// Hessians for every t from one shared evaluation set.
std::vector<RMatrix> hessian_expectation_all(const RMatrix& series,
                                             std::span<const double> theta,
                                             const AnsatzConfig& config,
                                             std::span<const int> params = {},
                                             EvalBudget* budget = nullptr, int workers = 0);

// Closed-form evaluation counts.
long long eval_count_gradient(int num_blocks, int n_theta);  // 2 T n
long long eval_count_hessian(int num_blocks, int n_theta);   // 2 n^2 T^2 + 1

// Forward-difference gradient of the training RMSE, one shared baseline:
// (f(theta + eps e_i) - f(theta)) / eps for every component incl. bias.
RVector finite_diff_gradient(const WindowedDataset& dataset, std::span<const double> theta,
                             const AnsatzConfig& config, double epsilon,
                             EvalBudget* budget = nullptr, double* loss_out = nullptr);

// Training-window RMSE at theta (pooled over horizon points).
double training_rmse(const WindowedDataset& dataset, std::span<const double> theta,
                     const AnsatzConfig& config, EvalBudget* budget = nullptr);

}  // namespace qrnn
