#include "qrnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

namespace qrnn {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct WolfePoint {
  double alpha = 0.0;
  double f = 0.0;
  double dphi = 0.0;  // directional derivative g . d
};

}  // namespace

double rmse_loss(const std::vector<RVector>& predictions,
                 const std::vector<RVector>& targets) {
  if (predictions.empty()) throw EmptyDatasetError("rmse_loss: empty prediction set");
  if (predictions.size() != targets.size()) {
    throw ShapeError("rmse_loss: prediction/target window counts differ");
  }
  double sq_sum = 0.0;
  long count = 0;
  for (std::size_t w = 0; w < predictions.size(); ++w) {
    if (predictions[w].size() != targets[w].size()) {
      throw ShapeError("rmse_loss: prediction/target lengths differ in window " +
                       std::to_string(w));
    }
    sq_sum += (predictions[w] - targets[w]).squaredNorm();
    count += predictions[w].size();
  }
  return std::sqrt(sq_sum / static_cast<double>(count));
}

TrainConfig TrainConfig::for_case(char tag) {
  TrainConfig cfg;
  cfg.g_tol = tag == 'a' ? 1e-3 : 1e-4;
  return cfg;
}

MinimizeResult minimize(const Objective& objective, const RVector& theta0,
                        const LbfgsOptions& options, const IterationCallback& on_iteration) {
  MinimizeResult result;
  RVector x = theta0;
  RVector g(x.size());

  auto eval = [&](const RVector& point, RVector* grad) {
    result.n_fev += 1;
    if (grad != nullptr) result.n_jev += 1;
    return objective(point, grad);
  };

  double f = eval(x, &g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw NumericError("minimize: non-finite loss or gradient at the initial point");
  }
  result.initial_loss = f;

  std::deque<RVector> s_hist, y_hist;
  std::deque<double> rho_hist;
  RVector x_new(x.size()), g_new(x.size()), direction(x.size());

  // Strong Wolfe line search along `direction`; returns the accepted
  // point or failure after max_line_search trials.
  auto line_search = [&](double f0, double dphi0, double alpha_init, bool& ok) -> WolfePoint {
    const double c1 = options.wolfe_c1;
    const double c2 = options.wolfe_c2;

    auto phi = [&](double alpha) -> WolfePoint {
      x_new = x + alpha * direction;
      const double fa = eval(x_new, &g_new);
      return WolfePoint{alpha, fa, g_new.dot(direction)};
    };

    auto zoom = [&](WolfePoint lo, WolfePoint hi) -> WolfePoint {
      for (int i = 0; i < options.max_line_search; ++i) {
        const double alpha = 0.5 * (lo.alpha + hi.alpha);
        WolfePoint p = phi(alpha);
        if (!std::isfinite(p.f) || p.f > f0 + c1 * alpha * dphi0 || p.f >= lo.f) {
          hi = p;
        } else {
          if (std::abs(p.dphi) <= -c2 * dphi0) {
            ok = true;
            return p;
          }
          if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = p;
        }
        if (std::abs(hi.alpha - lo.alpha) < 1e-16) break;
      }
      ok = false;
      return lo;
    };

    WolfePoint prev{0.0, f0, dphi0};
    double alpha = alpha_init;
    for (int i = 0; i < options.max_line_search; ++i) {
      WolfePoint p = phi(alpha);
      if (!std::isfinite(p.f) || p.f > f0 + c1 * alpha * dphi0 || (i > 0 && p.f >= prev.f)) {
        return zoom(prev, p);
      }
      if (std::abs(p.dphi) <= -c2 * dphi0) {
        ok = true;
        return p;
      }
      if (p.dphi >= 0.0) {
        return zoom(p, prev);
      }
      prev = p;
      alpha = std::min(2.0 * alpha, 1e6);
    }
    ok = false;
    return prev;
  };

  for (int iter = 0; iter < options.max_iter; ++iter) {
    if (g.cwiseAbs().maxCoeff() <= options.g_tol) {
      result.converged_gtol = true;
      break;
    }

    // Two-loop recursion for the quasi-Newton direction.
    direction = -g;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> a(m);
    for (int i = m - 1; i >= 0; --i) {
      a[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction -= a[i] * y_hist[i];
    }
    if (m > 0) {
      direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    }
    for (int i = 0; i < m; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(direction);
      direction += (a[i] - b) * s_hist[i];
    }

    double dphi0 = g.dot(direction);
    if (dphi0 >= 0.0) {  // not a descent direction; drop the memory
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -g;
      dphi0 = g.dot(direction);
    }

    const double alpha_init = m == 0 ? std::min(1.0, 1.0 / g.cwiseAbs().maxCoeff()) : 1.0;
    bool ok = false;
    const WolfePoint p = line_search(f, dphi0, alpha_init, ok);
    if (!ok) {
      if (std::isfinite(p.f) && p.f < f) {
        // keep the partial progress the failed search still made
        x += p.alpha * direction;
        f = p.f;
      }
      result.line_search_failed = true;
      break;
    }

    x_new = x + p.alpha * direction;
    const RVector s = x_new - x;
    const RVector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double f_prev = f;
    x = x_new;
    f = p.f;
    g = g_new;
    result.n_it += 1;
    if (on_iteration) on_iteration(result.n_it, x, f);

    if (f_prev - f <= options.f_rel_tol * std::max({std::abs(f_prev), std::abs(f), 1.0})) {
      result.converged_ftol = true;
      break;
    }
  }

  result.hit_max_iter =
      !result.converged_gtol && !result.converged_ftol && !result.line_search_failed;
  result.theta = x;
  result.loss = f;
  return result;
}

void InvariantAudit::absorb(const ForwardTrace& trace, bool with_psd) {
  for (const DensityMatrix& state : trace.states) {
    const DensityCheck c = state.check(with_psd);
    max_trace_dev = std::max(max_trace_dev, c.trace_dev);
    max_herm_dev = std::max(max_herm_dev, c.hermitian_dev);
    if (c.psd_checked) min_eigenvalue = std::min(min_eigenvalue, c.min_eigenvalue);
    audited_states += 1;
  }
  if (trace.expectations.size() > 0) {
    max_abs_expectation =
        std::max(max_abs_expectation, trace.expectations.cwiseAbs().maxCoeff());
  }
}

bool InvariantAudit::ok() const {
  return max_trace_dev <= tol::kUnitTrace && max_herm_dev <= tol::kHermitian &&
         min_eigenvalue >= tol::kPsdEigenvalue &&
         max_abs_expectation <= 1.0 + tol::kExpectationSlack;
}

std::vector<WindowPrediction> predict_set(const TrainedModel& model,
                                          const WindowedDataset& dataset,
                                          const std::vector<int>& starts,
                                          InvariantAudit* audit) {
  std::vector<WindowPrediction> out;
  out.reserve(starts.size());
  const std::span<const double> theta(model.theta.data(), model.theta.size());
  for (const int start : starts) {
    const ForwardTrace trace = forward(dataset.window_inputs(start), theta, model.config);
    if (audit != nullptr) audit->absorb(trace, true);
    WindowPrediction wp;
    wp.start = start;
    wp.predictions = trace.predictions.tail(dataset.horizon);
    wp.targets = dataset.window_targets(start);
    out.push_back(std::move(wp));
  }
  return out;
}

namespace {

double set_rmse(const TrainedModel& model, const WindowedDataset& dataset,
                const std::vector<int>& starts, InvariantAudit* audit) {
  if (starts.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto preds = predict_set(model, dataset, starts, audit);
  std::vector<RVector> p, y;
  p.reserve(preds.size());
  y.reserve(preds.size());
  for (const auto& wp : preds) {
    p.push_back(wp.predictions);
    y.push_back(wp.targets);
  }
  return rmse_loss(p, y);
}

}  // namespace

EvalRmse evaluate(const TrainedModel& model, const WindowedDataset& dataset,
                  InvariantAudit* audit) {
  EvalRmse out;
  out.train = set_rmse(model, dataset, dataset.train_starts, audit);
  out.val = set_rmse(model, dataset, dataset.val_starts, audit);
  out.test = set_rmse(model, dataset, dataset.test_starts, audit);
  out.full_test = set_rmse(model, dataset, dataset.full_test_starts, audit);
  return out;
}

TrainResult train_multi_restart(const WindowedDataset& dataset, const AnsatzConfig& config,
                                const TrainConfig& train_config) {
  config.validate();
  if (dataset.train_starts.empty()) {
    throw EmptyDatasetError("train_multi_restart: empty training set");
  }
  if (train_config.restarts < 1) throw ConfigError("train_multi_restart: restarts must be >= 1");

  const ParameterLayout layout(config);
  const int n_params = layout.count();
  EvalBudget budget;

  LbfgsOptions lbfgs;
  lbfgs.g_tol = train_config.g_tol;
  lbfgs.max_iter = train_config.max_iter;

  struct RestartRun {
    MinimizeResult min;
    EvalRmse rmse;
    std::vector<IterationRecord> curve;
  };
  std::vector<RestartRun> runs(train_config.restarts);
  std::vector<RestartSummary> summaries;
  InvariantAudit audit;

  for (int k = 0; k < train_config.restarts; ++k) {
    std::mt19937_64 rng(train_config.init_seed + 1000003ULL * static_cast<std::uint64_t>(k));
    RVector theta0(n_params);
    for (int i = 0; i < n_params - 1; ++i) theta0(i) = uniform01(rng);
    theta0(n_params - 1) = 0.0;  // bias starts at zero

    Objective objective = [&](const RVector& th, RVector* grad) -> double {
      const std::span<const double> sp(th.data(), th.size());
      if (grad == nullptr) return training_rmse(dataset, sp, config, &budget);
      double loss = 0.0;
      if (train_config.gradient == GradientMode::kAnalytical) {
        *grad = gradient_loss(dataset, sp, config, &budget, train_config.workers, &loss);
      } else {
        *grad = finite_diff_gradient(dataset, sp, config, train_config.fd_epsilon, &budget, &loss);
      }
      return loss;
    };

    RestartRun& run = runs[k];
    IterationCallback on_iter = [&](int iter, const RVector& th, double loss) {
      TrainedModel snapshot{config, th};
      InvariantAudit* audit_ptr = train_config.audit_invariants ? &audit : nullptr;
      double val = std::numeric_limits<double>::quiet_NaN();
      if (!dataset.val_starts.empty()) {
        val = set_rmse(snapshot, dataset, dataset.val_starts, audit_ptr);
      }
      if (audit_ptr != nullptr) {
        set_rmse(snapshot, dataset, dataset.train_starts, audit_ptr);
      }
      run.curve.push_back(IterationRecord{iter, loss, val});
    };

    run.min = minimize(objective, theta0, lbfgs, on_iter);
    if (train_config.gradient == GradientMode::kNumerical) {
      // finite differences hide n_params extra sweeps inside each jacobian
      run.min.n_fev += n_params * run.min.n_jev;
    }

    TrainedModel model{config, run.min.theta};
    run.rmse = evaluate(model, dataset, train_config.audit_invariants ? &audit : nullptr);

    RestartSummary s;
    s.index = k;
    s.final_loss = run.min.loss;
    s.rmse_train = run.rmse.train;
    s.rmse_val = run.rmse.val;
    s.rmse_test = run.rmse.test;
    s.rmse_full_test = run.rmse.full_test;
    s.n_it = run.min.n_it;
    s.n_fev = run.min.n_fev;
    s.n_jev = run.min.n_jev;
    s.converged_gtol = run.min.converged_gtol;
    s.converged_ftol = run.min.converged_ftol;
    s.hit_max_iter = run.min.hit_max_iter;
    s.line_search_failed = run.min.line_search_failed;
    summaries.push_back(s);
  }

  bool any_progress = false;
  for (int k = 0; k < train_config.restarts; ++k) {
    const MinimizeResult& m = runs[k].min;
    if (!m.line_search_failed || m.n_it > 0 || m.loss < m.initial_loss) any_progress = true;
  }
  if (!any_progress) {
    throw TrainingFailure("every restart failed its first line search", summaries);
  }

  // Winner: lowest validation RMSE (training RMSE when there is no
  // validation set), ties resolved toward the lowest index.
  const bool use_val = !dataset.val_starts.empty();
  int best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k < train_config.restarts; ++k) {
    const double score = use_val ? runs[k].rmse.val : runs[k].rmse.train;
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best = k;
    }
  }

  TrainResult result;
  result.model = TrainedModel{config, runs[best].min.theta};
  TrainingReport& rep = result.report;
  rep.best_restart = best;
  rep.rmse_train = runs[best].rmse.train;
  rep.rmse_val = runs[best].rmse.val;
  rep.rmse_test = runs[best].rmse.test;
  rep.rmse_full_test = runs[best].rmse.full_test;
  rep.n_it = runs[best].min.n_it;
  rep.n_fev = runs[best].min.n_fev;
  rep.n_jev = runs[best].min.n_jev;
  rep.restarts = std::move(summaries);
  rep.curve = std::move(runs[best].curve);
  rep.audit = audit;
  rep.budget_loss = budget.loss();
  rep.budget_gradient = budget.gradient();
  rep.budget_hessian = budget.hessian();
  return result;
}

}  // namespace qrnn
