#pragma once

#include <functional>
#include <vector>

#include "qrnn/derivatives.hpp"

namespace qrnn {

// Pooled RMSE over all (window, horizon-step) pairs of a set.
double rmse_loss(const std::vector<RVector>& predictions,
                 const std::vector<RVector>& targets);

enum class GradientMode { kAnalytical, kNumerical };

struct TrainConfig {
  double g_tol = 1e-3;
  int max_iter = 1000;
  int restarts = 8;
  GradientMode gradient = GradientMode::kAnalytical;
  double fd_epsilon = 1e-8;
  std::uint64_t init_seed = 1;
  int workers = 0;
  bool audit_invariants = false;

  static TrainConfig for_case(char tag);  // g_tol 1e-3 for 'a', 1e-4 for 'b'/'c'
};

// --- bounded-memory quasi-Newton minimizer ---------------------------------

struct LbfgsOptions {
  int history = 10;
  double wolfe_c1 = 1e-4;  // sufficient decrease
  double wolfe_c2 = 0.9;   // curvature
  double g_tol = 1e-5;     // max |gradient component|
  double f_rel_tol = 1e-9; // relative loss decrease
  int max_iter = 1000;
  int max_line_search = 25;
};

// Returns the loss at theta; fills *grad when non-null.
using Objective = std::function<double(const RVector& theta, RVector* grad)>;
using IterationCallback = std::function<void(int iter, const RVector& theta, double loss)>;

struct MinimizeResult {
  RVector theta;
  double loss = 0.0;
  double initial_loss = 0.0;
  int n_it = 0;
  int n_fev = 0;
  int n_jev = 0;
  bool converged_gtol = false;
  bool converged_ftol = false;
  bool hit_max_iter = false;
  bool line_search_failed = false;  // returned best-so-far after a failed search
};

MinimizeResult minimize(const Objective& objective, const RVector& theta0,
                        const LbfgsOptions& options,
                        const IterationCallback& on_iteration = {});

// --- training --------------------------------------------------------------

struct TrainedModel {
  AnsatzConfig config;
  RVector theta;

  double bias() const { return theta(theta.size() - 1); }
};

// Physicality bookkeeping folded over forward traces.
struct InvariantAudit {
  double max_trace_dev = 0.0;
  double max_herm_dev = 0.0;
  double min_eigenvalue = 1.0;
  double max_abs_expectation = 0.0;
  long long audited_states = 0;

  void absorb(const ForwardTrace& trace, bool with_psd);
  bool ok() const;
};

struct IterationRecord {
  int iter = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
};

struct RestartSummary {
  int index = 0;
  double final_loss = 0.0;
  double rmse_train = 0.0, rmse_val = 0.0, rmse_test = 0.0, rmse_full_test = 0.0;
  int n_it = 0, n_fev = 0, n_jev = 0;
  bool converged_gtol = false, converged_ftol = false;
  bool hit_max_iter = false, line_search_failed = false;
};

struct TrainingReport {
  int best_restart = -1;
  double rmse_train = 0.0, rmse_val = 0.0, rmse_test = 0.0, rmse_full_test = 0.0;
  int n_it = 0, n_fev = 0, n_jev = 0;  // winner's counters
  std::vector<RestartSummary> restarts;
  std::vector<IterationRecord> curve;  // winner's loss curves
  InvariantAudit audit;
  long long budget_loss = 0, budget_gradient = 0, budget_hessian = 0;
};

struct TrainResult {
  TrainedModel model;
  TrainingReport report;
};

// Thrown when no restart makes any progress; carries what was measured.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& msg, std::vector<RestartSummary> partial)
      : std::runtime_error(msg), partial_reports(std::move(partial)) {}
  std::vector<RestartSummary> partial_reports;
};

// `restarts` independent minimizations from random starts (angles uniform
// in [0,1), bias 0); the winner is the run with the lowest validation
// RMSE, ties resolved toward the lowest restart index.
TrainResult train_multi_restart(const WindowedDataset& dataset, const AnsatzConfig& config,
                                const TrainConfig& train_config);

struct EvalRmse {
  double train = 0.0, val = 0.0, test = 0.0, full_test = 0.0;
};

struct WindowPrediction {
  int start = 0;
  RVector predictions;  // horizon values
  RVector targets;
};

std::vector<WindowPrediction> predict_set(const TrainedModel& model,
                                          const WindowedDataset& dataset,
                                          const std::vector<int>& starts,
                                          InvariantAudit* audit = nullptr);

// The four report figures: train/val/test over window horizons, full-test
// over the concatenated stride-horizon tiling.
EvalRmse evaluate(const TrainedModel& model, const WindowedDataset& dataset,
                  InvariantAudit* audit = nullptr);

}  // namespace qrnn
