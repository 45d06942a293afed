#include "qrnn/derivatives.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "qrnn/parallel.hpp"

namespace qrnn {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kPi = std::numbers::pi;

// Shift magnitudes as small integer codes so canonical evaluation keys
// compare exactly: +-1 <-> +-pi/2, +-2 <-> +-pi.
int delta_code(double delta) {
  if (delta == kHalfPi) return 1;
  if (delta == -kHalfPi) return -1;
  if (delta == kPi) return 2;
  if (delta == -kPi) return -2;
  throw InvalidShiftError("shift must be one of +-pi/2, +-pi");
}

double code_delta(int code) {
  switch (code) {
    case 1: return kHalfPi;
    case -1: return -kHalfPi;
    case 2: return kPi;
    case -2: return -kPi;
  }
  throw InvalidShiftError("unknown shift code");
}

// Canonical identity of one shifted configuration: sorted (block, param,
// code) triples. Two logically identical circuits share one key.
using EvalKey = std::vector<std::array<int, 3>>;

EvalKey make_key(std::initializer_list<std::array<int, 3>> entries) {
  EvalKey key(entries);
  std::sort(key.begin(), key.end());
  return key;
}

std::vector<BlockShift> key_shifts(const EvalKey& key) {
  std::vector<BlockShift> shifts;
  shifts.reserve(key.size());
  for (const auto& [block, param, code] : key) {
    shifts.push_back(BlockShift{block, param, code_delta(code)});
  }
  return shifts;
}

// Cached unshifted run of one window: expectations plus the hidden state
// after every block, so shifted runs can resume at their first shifted
// block (outputs before it are unchanged by construction).
struct Baseline {
  RVector expectations;
  std::vector<DensityMatrix> states;
};

Baseline run_baseline(const Runner& runner, const RMatrix& series, Workspace* ws = nullptr) {
  Baseline base;
  base.expectations.resize(series.rows());
  runner.run(series, nullptr, base.expectations, &base.states, ws);
  return base;
}

void eval_with_reuse(const Runner& runner, const RMatrix& series, const Baseline& base,
                     const Runner::ShiftContext& ctx, RVector& out, Workspace& ws) {
  const int num_blocks = static_cast<int>(series.rows());
  out = base.expectations;
  const int start = std::min(ctx.first_block, num_blocks);
  if (start >= num_blocks) return;
  const CMatrix& rho_start =
      start == 0 ? DensityMatrix::zero_state(runner.config().n_m).mat : base.states[start - 1].mat;
  runner.run_suffix(series, start, rho_start, &ctx, out, &ws);
}

std::vector<int> default_angle_params(const ParameterLayout& layout,
                                      std::span<const int> params) {
  std::vector<int> out;
  if (params.empty()) {
    out.resize(layout.angle_count());
    for (int i = 0; i < layout.angle_count(); ++i) out[i] = i;
    return out;
  }
  out.assign(params.begin(), params.end());
  for (std::size_t a = 0; a < out.size(); ++a) {
    if (!layout.shiftable(out[a])) {
      throw InvalidShiftError("hessian parameter subset may not include the bias");
    }
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      if (out[a] == out[b]) throw InvalidShiftError("duplicate parameter in hessian subset");
    }
  }
  return out;
}

// All shifted configurations required for the Hessians of <O>_t with
// r, s < max_blocks, deduplicated by canonical key.
struct HessianEvals {
  std::map<EvalKey, int> ids;
  std::vector<RVector> values;  // indexed by id; full expectation sequences
  int baseline = 0;

  const RVector& at(const EvalKey& key) const { return values[ids.at(key)]; }
};

HessianEvals collect_hessian_evals(const Runner& runner, const RMatrix& series,
                                   const std::vector<int>& params, int max_blocks,
                                   EvalBudget* budget, int workers) {
  HessianEvals evals;
  auto insert = [&evals](EvalKey key) { evals.ids.emplace(std::move(key), 0); };

  insert(make_key({}));
  for (std::size_t a = 0; a < params.size(); ++a) {
    const int pa = params[a];
    for (int r = 0; r < max_blocks; ++r) {
      insert(make_key({{r, pa, 2}}));
      insert(make_key({{r, pa, -2}}));
      for (int s = 0; s < r; ++s) {
        for (const int c1 : {1, -1}) {
          for (const int c2 : {1, -1}) {
            insert(make_key({{r, pa, c1}, {s, pa, c2}}));
          }
        }
      }
    }
    for (std::size_t b = a + 1; b < params.size(); ++b) {
      const int pb = params[b];
      for (int r = 0; r < max_blocks; ++r) {
        for (int s = 0; s < max_blocks; ++s) {
          for (const int c1 : {1, -1}) {
            for (const int c2 : {1, -1}) {
              insert(make_key({{r, pa, c1}, {s, pb, c2}}));
            }
          }
        }
      }
    }
  }

  int next = 0;
  for (auto& [key, id] : evals.ids) id = next++;
  evals.baseline = evals.ids.at(make_key({}));
  evals.values.resize(evals.ids.size());

  const Baseline base = run_baseline(runner, series);
  std::vector<const EvalKey*> keys(evals.ids.size());
  for (const auto& [key, id] : evals.ids) keys[id] = &key;

  parallel_for(static_cast<long>(keys.size()), workers, [&](long id) {
    thread_local Workspace ws;
    if (keys[id]->empty()) {
      evals.values[id] = base.expectations;
      return;
    }
    const auto ctx = runner.prepare(key_shifts(*keys[id]));
    eval_with_reuse(runner, series, base, ctx, evals.values[id], ws);
  });

  if (budget != nullptr) {
    budget->add(EvalBudget::Kind::kHessian, static_cast<long long>(evals.ids.size()));
  }
  return evals;
}

RMatrix assemble_hessian(const HessianEvals& evals, const std::vector<int>& params, int t) {
  const int p = static_cast<int>(params.size());
  RMatrix h(p, p);
  for (int a = 0; a < p; ++a) {
    const int pa = params[a];
    double diag = 0.0;
    for (int r = 0; r <= t; ++r) {
      diag += 0.25 * (evals.at(make_key({{r, pa, 2}}))(t) + evals.at(make_key({{r, pa, -2}}))(t));
      for (int s = 0; s < r; ++s) {
        diag += 0.5 * (evals.at(make_key({{r, pa, 1}, {s, pa, 1}}))(t) +
                       evals.at(make_key({{r, pa, -1}, {s, pa, -1}}))(t) -
                       evals.at(make_key({{r, pa, 1}, {s, pa, -1}}))(t) -
                       evals.at(make_key({{r, pa, -1}, {s, pa, 1}}))(t));
      }
    }
    diag -= 0.5 * (t + 1) * evals.values[evals.baseline](t);
    h(a, a) = diag;

    for (int b = a + 1; b < p; ++b) {
      const int pb = params[b];
      double off = 0.0;
      for (int r = 0; r <= t; ++r) {
        for (int s = 0; s <= t; ++s) {
          off += 0.25 * (evals.at(make_key({{r, pa, 1}, {s, pb, 1}}))(t) +
                         evals.at(make_key({{r, pa, -1}, {s, pb, -1}}))(t) -
                         evals.at(make_key({{r, pa, 1}, {s, pb, -1}}))(t) -
                         evals.at(make_key({{r, pa, -1}, {s, pb, 1}}))(t));
        }
      }
      h(a, b) = off;
      h(b, a) = off;
    }
  }
  return h;
}

}  // namespace

void ShiftSpec::validate(const ParameterLayout& layout, int num_blocks) const {
  for (std::size_t a = 0; a < entries.size(); ++a) {
    const BlockShift& s = entries[a];
    if (s.block < 0 || s.block >= num_blocks) {
      throw InvalidShiftError("shift block " + std::to_string(s.block) +
                              " outside [0, " + std::to_string(num_blocks) + ")");
    }
    if (!layout.shiftable(s.param_index)) {
      throw InvalidShiftError("the bias parameter is not shiftable");
    }
    delta_code(s.delta);
    for (std::size_t b = a + 1; b < entries.size(); ++b) {
      if (entries[b].block == s.block && entries[b].param_index == s.param_index) {
        throw InvalidShiftError("at most one shift per (block, parameter) pair");
      }
    }
  }
}

RVector shifted_forward(const RMatrix& series, std::span<const double> theta,
                        const AnsatzConfig& config, const ShiftSpec& spec,
                        EvalBudget* budget, EvalBudget::Kind kind) {
  const Runner runner(config, theta);
  spec.validate(runner.layout(), static_cast<int>(series.rows()));
  const auto ctx = runner.prepare(spec.entries);
  RVector out(series.rows());
  runner.run(series, &ctx, out);
  if (budget != nullptr) budget->add(kind);
  return out;
}

double gradient_expectation(const RMatrix& series, std::span<const double> theta,
                            const AnsatzConfig& config, int t, int param_index,
                            EvalBudget* budget) {
  const int num_blocks = static_cast<int>(series.rows());
  if (t < 0 || t >= num_blocks) {
    throw ShapeError("gradient_expectation: time index out of range");
  }
  const Runner runner(config, theta);
  if (!runner.layout().shiftable(param_index)) {
    throw InvalidShiftError("gradient_expectation: the bias is differentiated analytically");
  }
  const Baseline base = run_baseline(runner, series);
  Workspace ws;
  RVector plus(num_blocks), minus(num_blocks);
  double grad = 0.0;
  for (int r = 0; r <= t; ++r) {
    eval_with_reuse(runner, series, base,
                    runner.prepare({BlockShift{r, param_index, kHalfPi}}), plus, ws);
    eval_with_reuse(runner, series, base,
                    runner.prepare({BlockShift{r, param_index, -kHalfPi}}), minus, ws);
    grad += 0.5 * (plus(t) - minus(t));
  }
  if (budget != nullptr) budget->add(EvalBudget::Kind::kGradient, 2LL * (t + 1));
  return grad;
}

RMatrix gradient_expectation_all(const RMatrix& series, std::span<const double> theta,
                                 const AnsatzConfig& config, EvalBudget* budget, int workers) {
  const Runner runner(config, theta);
  const int num_blocks = static_cast<int>(series.rows());
  const int n_angle = runner.layout().angle_count();
  const Baseline base = run_baseline(runner, series);
  if (budget != nullptr) budget->add(EvalBudget::Kind::kLoss);

  // One evaluation per (angle, block, sign); each yields all t at once.
  const long n_specs = 2L * num_blocks * n_angle;
  std::vector<RVector> results(n_specs);
  parallel_for(n_specs, workers, [&](long id) {
    thread_local Workspace ws;
    const int sign = id % 2 == 0 ? 1 : -1;
    const int r = static_cast<int>((id / 2) % num_blocks);
    const int i = static_cast<int>(id / (2L * num_blocks));
    const auto ctx = runner.prepare({BlockShift{r, i, sign * kHalfPi}});
    eval_with_reuse(runner, series, base, ctx, results[id], ws);
  });
  if (budget != nullptr) budget->add(EvalBudget::Kind::kGradient, n_specs);

  RMatrix grads = RMatrix::Zero(num_blocks, n_angle);
  for (int i = 0; i < n_angle; ++i) {
    for (int r = 0; r < num_blocks; ++r) {
      const RVector& plus = results[(static_cast<long>(i) * num_blocks + r) * 2];
      const RVector& minus = results[(static_cast<long>(i) * num_blocks + r) * 2 + 1];
      for (int t = r; t < num_blocks; ++t) {
        grads(t, i) += 0.5 * (plus(t) - minus(t));
      }
    }
  }
  return grads;
}

RVector gradient_loss(const WindowedDataset& dataset, std::span<const double> theta,
                      const AnsatzConfig& config, EvalBudget* budget, int workers,
                      double* loss_out) {
  const auto& starts = dataset.train_starts;
  const int n_windows = static_cast<int>(starts.size());
  if (n_windows == 0) throw EmptyDatasetError("gradient_loss: empty training set");

  const Runner runner(config, theta);
  const ParameterLayout& layout = runner.layout();
  const int num_blocks = dataset.window_len;
  const int horizon = dataset.horizon;
  const int n_angle = layout.angle_count();

  std::vector<RMatrix> inputs(n_windows);
  std::vector<RVector> targets(n_windows);
  for (int w = 0; w < n_windows; ++w) {
    inputs[w] = dataset.window_inputs(starts[w]);
    targets[w] = dataset.window_targets(starts[w]);
  }

  // Shared baseline sweep: residuals for the chain rule and cached states
  // for the shifted suffix runs.
  std::vector<Baseline> base(n_windows);
  RMatrix resid(n_windows, horizon);
  double sq_sum = 0.0;
  for (int w = 0; w < n_windows; ++w) {
    base[w] = run_baseline(runner, inputs[w]);
    for (int h = 0; h < horizon; ++h) {
      const int t = num_blocks - horizon + h;
      resid(w, h) = base[w].expectations(t) + runner.bias() - targets[w](h);
      sq_sum += resid(w, h) * resid(w, h);
    }
  }
  if (budget != nullptr) budget->add(EvalBudget::Kind::kLoss);

  const double n_pooled = static_cast<double>(n_windows) * horizon;
  const double loss = std::sqrt(sq_sum / n_pooled);
  if (loss_out != nullptr) *loss_out = loss;

  RVector grad = RVector::Zero(layout.count());
  if (loss == 0.0) return grad;  // flat minimum: all residuals vanish

  // d loss / d theta_i = sum_w,h resid * d<O>_t / d theta_i / (loss * K * H).
  const long n_specs = 2L * num_blocks * n_angle;
  std::vector<double> partial(n_specs, 0.0);
  parallel_for(n_specs, workers, [&](long id) {
    thread_local Workspace ws;
    RVector expectations;
    const int sign = id % 2 == 0 ? 1 : -1;
    const int r = static_cast<int>((id / 2) % num_blocks);
    const int i = static_cast<int>(id / (2L * num_blocks));
    const auto ctx = runner.prepare({BlockShift{r, i, sign * kHalfPi}});
    double acc = 0.0;
    for (int w = 0; w < n_windows; ++w) {
      eval_with_reuse(runner, inputs[w], base[w], ctx, expectations, ws);
      for (int h = 0; h < horizon; ++h) {
        const int t = num_blocks - horizon + h;
        if (t >= r) acc += resid(w, h) * expectations(t);
      }
    }
    partial[id] = 0.5 * sign * acc;
  });
  if (budget != nullptr) budget->add(EvalBudget::Kind::kGradient, n_specs);

  const double scale = 1.0 / (loss * n_pooled);
  for (int i = 0; i < n_angle; ++i) {
    double g = 0.0;
    for (int r = 0; r < num_blocks; ++r) {
      g += partial[(static_cast<long>(i) * num_blocks + r) * 2] +
           partial[(static_cast<long>(i) * num_blocks + r) * 2 + 1];
    }
    grad(i) = g * scale;
  }
  grad(layout.bias_index()) = resid.sum() * scale;
  return grad;
}

RMatrix hessian_expectation(const RMatrix& series, std::span<const double> theta,
                            const AnsatzConfig& config, int t, std::span<const int> params,
                            EvalBudget* budget, int workers) {
  const int num_blocks = static_cast<int>(series.rows());
  if (t < 0 || t >= num_blocks) {
    throw ShapeError("hessian_expectation: time index out of range");
  }
  const Runner runner(config, theta);
  const std::vector<int> p = default_angle_params(runner.layout(), params);
  const HessianEvals evals = collect_hessian_evals(runner, series, p, t + 1, budget, workers);
  return assemble_hessian(evals, p, t);
}

std::vector<RMatrix> hessian_expectation_all(const RMatrix& series,
                                             std::span<const double> theta,
                                             const AnsatzConfig& config,
                                             std::span<const int> params, EvalBudget* budget,
                                             int workers) {
  const Runner runner(config, theta);
  const int num_blocks = static_cast<int>(series.rows());
  const std::vector<int> p = default_angle_params(runner.layout(), params);
  const HessianEvals evals = collect_hessian_evals(runner, series, p, num_blocks, budget, workers);
  std::vector<RMatrix> out;
  out.reserve(num_blocks);
  for (int t = 0; t < num_blocks; ++t) out.push_back(assemble_hessian(evals, p, t));
  return out;
}

long long eval_count_gradient(int num_blocks, int n_theta) {
  return 2LL * num_blocks * n_theta;
}

long long eval_count_hessian(int num_blocks, int n_theta) {
  return 2LL * n_theta * n_theta * num_blocks * num_blocks + 1;
}

double training_rmse(const WindowedDataset& dataset, std::span<const double> theta,
                     const AnsatzConfig& config, EvalBudget* budget) {
  const auto& starts = dataset.train_starts;
  if (starts.empty()) throw EmptyDatasetError("training_rmse: empty training set");
  const Runner runner(config, theta);
  Workspace ws;
  RVector expectations(dataset.window_len);
  double sq_sum = 0.0;
  for (const int start : starts) {
    runner.run(dataset.window_inputs(start), nullptr, expectations, nullptr, &ws);
    const RVector y = dataset.window_targets(start);
    for (int h = 0; h < dataset.horizon; ++h) {
      const int t = dataset.window_len - dataset.horizon + h;
      const double r = expectations(t) + runner.bias() - y(h);
      sq_sum += r * r;
    }
  }
  if (budget != nullptr) budget->add(EvalBudget::Kind::kLoss);
  return std::sqrt(sq_sum / (static_cast<double>(starts.size()) * dataset.horizon));
}

RVector finite_diff_gradient(const WindowedDataset& dataset, std::span<const double> theta,
                             const AnsatzConfig& config, double epsilon, EvalBudget* budget,
                             double* loss_out) {
  if (epsilon <= 0.0) throw ConfigError("finite_diff_gradient requires epsilon > 0");
  config.validate();
  if (static_cast<int>(theta.size()) != config.param_count()) {
    throw ShapeError("finite_diff_gradient: parameter vector length mismatch");
  }
  const double f0 = training_rmse(dataset, theta, config, budget);
  if (loss_out != nullptr) *loss_out = f0;

  const int n = static_cast<int>(theta.size());
  RVector grad(n);
  std::vector<double> shifted(theta.begin(), theta.end());
  for (int i = 0; i < n; ++i) {
    const double saved = shifted[i];
    shifted[i] = saved + epsilon;
    grad(i) = (training_rmse(dataset, shifted, config, budget) - f0) / epsilon;
    shifted[i] = saved;
  }
  return grad;
}

}  // namespace qrnn
