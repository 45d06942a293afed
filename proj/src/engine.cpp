#include "qrnn/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace qrnn {

namespace {

std::span<const double> alpha_span(std::span<const double> theta, const ParameterLayout& layout) {
  return theta.subspan(layout.alpha_offset(), layout.alpha_size());
}

std::span<const double> w_span(std::span<const double> theta, const ParameterLayout& layout) {
  return theta.subspan(layout.w_offset(), layout.w_size());
}

void check_theta(std::span<const double> theta, const AnsatzConfig& cfg) {
  if (static_cast<int>(theta.size()) != cfg.param_count()) {
    throw ShapeError("parameter vector length " + std::to_string(theta.size()) +
                     " does not match param_count " + std::to_string(cfg.param_count()));
  }
}

// Kraus contraction for one block: rho_out = sum_i B_i rho B_i^dag and
// expectation = sum_i d_i Tr(B_i rho B_i^dag), with B_i = W^i (v ⊗ I_M).
// Equivalent to forming sigma = rho_E ⊗ rho_M and the partial matrices
// M_i = W^i sigma (W^i)^dag, one associativity step cheaper.
void apply_block(const CMatrix& rho_in, const CVector& v, const EvolutionOp& evo,
                 const RVector& d, const RegisterSplit& split, CMatrix& rho_out,
                 double& expectation, Workspace& ws) {
  const int nm = split.dim_m();
  rho_out.setZero();
  expectation = 0.0;
  for (int i = 0; i < split.dim_e(); ++i) {
    ws.kraus.setZero();
    for (int k = 0; k < split.dim_e(); ++k) {
      ws.kraus.noalias() += v(k) * evo.blocks[i].middleCols(k * nm, nm);
    }
    ws.tmp.noalias() = ws.kraus * rho_in;
    ws.m.noalias() = ws.tmp * ws.kraus.adjoint();
    rho_out += ws.m;
    expectation += d(i) * ws.m.trace().real();
  }
}

}  // namespace

RVector observable_diag(int n_e) {
  if (n_e < 1) throw ConfigError("observable_diag requires n_e >= 1");
  const int dim = 1 << n_e;
  RVector d(dim);
  for (int i = 0; i < dim; ++i) {
    d(i) = (std::popcount(static_cast<unsigned>(i)) % 2 == 0) ? 1.0 : -1.0;
  }
  return d;
}

EvolutionOp make_evolution_op(std::span<const double> theta, const AnsatzConfig& config) {
  check_theta(theta, config);
  const ParameterLayout layout(config);
  EvolutionOp evo;
  evo.w = build_evolution(
      std::span<const double>(theta.data() + layout.w_offset(), layout.w_size()), config);
  evo.blocks = split_w_blocks(evo.w, config.split());
  return evo;
}

void Workspace::resize(int n_m) {
  const int nm = 1 << n_m;
  kraus.resize(nm, nm);
  tmp.resize(nm, nm);
  m.resize(nm, nm);
  rho_a.resize(nm, nm);
  rho_b.resize(nm, nm);
}

StepResult step(const DensityMatrix& state, const RVector& x,
                std::span<const double> theta, const AnsatzConfig& config,
                const EvolutionOp& evo) {
  check_theta(theta, config);
  const RegisterSplit split = config.split();
  if (state.dim() != split.dim_m()) {
    throw ShapeError("step: hidden state dimension does not match the memory register");
  }
  if (static_cast<int>(evo.blocks.size()) != split.dim_e()) {
    throw ShapeError("step: evolution operator blocks do not match the register split");
  }
  const ParameterLayout layout(config);
  const CVector v = encoding_column(x, alpha_span(theta, layout), config);
  const RVector d = observable_diag(config.n_e);

  Workspace ws;
  ws.resize(config.n_m);
  StepResult out;
  out.state.mat.resize(split.dim_m(), split.dim_m());
  apply_block(state.mat, v, evo, d, split, out.state.mat, out.expectation, ws);
  return out;
}

StepResult step_naive(const DensityMatrix& state, const RVector& x,
                      std::span<const double> theta, const AnsatzConfig& config) {
  check_theta(theta, config);
  const RegisterSplit split = config.split();
  if (state.dim() != split.dim_m()) {
    throw ShapeError("step_naive: hidden state dimension does not match the memory register");
  }
  const ParameterLayout layout(config);
  const CMatrix v = build_encoding(x, alpha_span(theta, layout), config);
  const CMatrix w = build_evolution(w_span(theta, layout), config);
  const CMatrix rho0_e = DensityMatrix::zero_state(config.n_e).mat;

  // Full N x N route: U = W (V ⊗ I_M) applied to the post-reset joint state.
  const CMatrix u = w * tensor_product(v, CMatrix::Identity(split.dim_m(), split.dim_m()));
  const CMatrix rho_joint = u * tensor_product(rho0_e, state.mat) * dagger(u);

  const RVector d_e = observable_diag(config.n_e);
  RVector d_full(split.dim());
  for (int i = 0; i < split.dim_e(); ++i) {
    for (int q = 0; q < split.dim_m(); ++q) {
      d_full(i * split.dim_m() + q) = d_e(i);
    }
  }

  StepResult out;
  out.state = DensityMatrix(partial_trace_e(rho_joint, split));
  out.expectation = expectation_diag(rho_joint, d_full);
  return out;
}

Runner::Runner(const AnsatzConfig& config, std::span<const double> theta)
    : cfg_(config), layout_(config), theta_(theta.begin(), theta.end()) {
  check_theta(theta, config);
  base_evo_ = make_evolution_op(theta_, cfg_);
  obs_ = observable_diag(cfg_.n_e);
}

Runner::ShiftContext Runner::prepare(std::span<const BlockShift> shifts) const {
  ShiftContext ctx;
  ctx.first_block = std::numeric_limits<int>::max();
  for (const BlockShift& s : shifts) {
    if (s.block < 0) throw InvalidShiftError("shift block index must be non-negative");
    if (!layout_.shiftable(s.param_index)) {
      throw InvalidShiftError("the bias parameter is not shiftable");
    }
    auto it = std::find_if(ctx.overrides.begin(), ctx.overrides.end(),
                           [&](const auto& o) { return o.block == s.block; });
    if (it == ctx.overrides.end()) {
      ctx.overrides.push_back({s.block, theta_, {}, false});
      it = std::prev(ctx.overrides.end());
    }
    it->theta[s.param_index] += s.delta;
    if (layout_.slot(s.param_index).role != ParamRole::kEncoding) {
      it->w_changed = true;
    }
    ctx.first_block = std::min(ctx.first_block, s.block);
  }
  for (auto& o : ctx.overrides) {
    if (o.w_changed) {
      o.evo = make_evolution_op(o.theta, cfg_);
    }
  }
  std::sort(ctx.overrides.begin(), ctx.overrides.end(),
            [](const auto& a, const auto& b) { return a.block < b.block; });
  return ctx;
}

void Runner::run_blocks(const RMatrix& series, int start, const CMatrix& rho_start,
                        const ShiftContext* ctx, RVector& expectations,
                        std::vector<DensityMatrix>* states, Workspace& ws) const {
  const int num_blocks = static_cast<int>(series.rows());
  if (num_blocks < 1) throw ShapeError("forward pass requires at least one time step");
  if (series.cols() != cfg_.n_inputs) {
    throw ShapeError("series has " + std::to_string(series.cols()) +
                     " input columns, expected " + std::to_string(cfg_.n_inputs));
  }
  if (expectations.size() != num_blocks) expectations.resize(num_blocks);

  ws.resize(cfg_.n_m);
  ws.rho_a = rho_start;

  const ShiftContext::Override* next_override = nullptr;
  std::size_t override_pos = 0;
  if (ctx != nullptr) {
    while (override_pos < ctx->overrides.size() && ctx->overrides[override_pos].block < start) {
      ++override_pos;
    }
    if (override_pos < ctx->overrides.size()) next_override = &ctx->overrides[override_pos];
  }

  RVector x(cfg_.n_inputs);
  for (int t = start; t < num_blocks; ++t) {
    const std::vector<double>* th = &theta_;
    const EvolutionOp* evo = &base_evo_;
    if (next_override != nullptr && next_override->block == t) {
      th = &next_override->theta;
      if (next_override->w_changed) evo = &next_override->evo;
      ++override_pos;
      next_override =
          override_pos < ctx->overrides.size() ? &ctx->overrides[override_pos] : nullptr;
    }
    x = series.row(t);
    const CVector v = encoding_column(x, alpha_span(*th, layout_), cfg_);
    double e = 0.0;
    apply_block(ws.rho_a, v, *evo, obs_, cfg_.split(), ws.rho_b, e, ws);
    expectations(t) = e;
    if (states != nullptr) states->emplace_back(ws.rho_b);
    std::swap(ws.rho_a, ws.rho_b);
  }
}

void Runner::run(const RMatrix& series, const ShiftContext* ctx, RVector& expectations,
                 std::vector<DensityMatrix>* states, Workspace* ws) const {
  Workspace local;
  Workspace& w = ws != nullptr ? *ws : local;
  const CMatrix rho0 = DensityMatrix::zero_state(cfg_.n_m).mat;
  if (states != nullptr) {
    states->clear();
    states->reserve(series.rows());
  }
  run_blocks(series, 0, rho0, ctx, expectations, states, w);
}

void Runner::run_suffix(const RMatrix& series, int start, const CMatrix& rho_start,
                        const ShiftContext* ctx, RVector& expectations, Workspace* ws) const {
  Workspace local;
  Workspace& w = ws != nullptr ? *ws : local;
  run_blocks(series, start, rho_start, ctx, expectations, nullptr, w);
}

ForwardTrace forward(const RMatrix& series, std::span<const double> theta,
                     const AnsatzConfig& config, std::span<const BlockShift> shifts) {
  Runner runner(config, theta);
  const Runner::ShiftContext ctx = runner.prepare(shifts);
  ForwardTrace trace;
  runner.run(series, &ctx, trace.expectations, &trace.states);
  trace.predictions = trace.expectations.array() + runner.bias();
  return trace;
}

SampleStats sample_trajectory(const RMatrix& series, std::span<const double> theta,
                              const AnsatzConfig& config, long shots, std::uint64_t seed) {
  if (shots < 1) throw ConfigError("sample_trajectory requires shots >= 1");
  check_theta(theta, config);
  const RegisterSplit split = config.split();
  const int num_blocks = static_cast<int>(series.rows());
  if (num_blocks < 1) throw ShapeError("sample_trajectory requires at least one time step");
  if (series.cols() != config.n_inputs) {
    throw ShapeError("sample_trajectory: series width does not match n_inputs");
  }

  const ParameterLayout layout(config);
  const EvolutionOp evo = make_evolution_op(theta, config);
  const RVector d = observable_diag(config.n_e);
  const int nm = split.dim_m();
  const int ne = split.dim_e();

  // Kraus operators per block do not depend on the trajectory; build once.
  std::vector<std::vector<CMatrix>> kraus(num_blocks);
  for (int t = 0; t < num_blocks; ++t) {
    const RVector x = series.row(t);
    const CVector v = encoding_column(x, alpha_span(theta, layout), config);
    kraus[t].resize(ne);
    for (int i = 0; i < ne; ++i) {
      CMatrix b = CMatrix::Zero(nm, nm);
      for (int k = 0; k < ne; ++k) {
        b.noalias() += v(k) * evo.blocks[i].middleCols(k * nm, nm);
      }
      kraus[t][i] = std::move(b);
    }
  }

  std::mt19937_64 rng(seed);
  const auto uniform01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  SampleStats stats;
  stats.counts = Eigen::MatrixXi::Zero(num_blocks, ne);
  stats.expectations = RVector::Zero(num_blocks);
  stats.shots = shots;

  CMatrix rho(nm, nm), tmp(nm, nm), m_sel(nm, nm);
  std::vector<double> probs(ne);
  std::vector<CMatrix> m_all(ne, CMatrix(nm, nm));

  for (long shot = 0; shot < shots; ++shot) {
    rho = DensityMatrix::zero_state(config.n_m).mat;
    for (int t = 0; t < num_blocks; ++t) {
      double total = 0.0;
      for (int i = 0; i < ne; ++i) {
        tmp.noalias() = kraus[t][i] * rho;
        m_all[i].noalias() = tmp * kraus[t][i].adjoint();
        probs[i] = std::max(0.0, m_all[i].trace().real());
        total += probs[i];
      }
      if (total < tol::kDegenerateProb) {
        throw NumericError("sample_trajectory: degenerate outcome distribution");
      }
      const double u = uniform01() * total;
      int outcome = ne - 1;
      double acc = 0.0;
      for (int i = 0; i < ne; ++i) {
        acc += probs[i];
        if (u < acc) {
          outcome = i;
          break;
        }
      }
      rho = m_all[outcome] / probs[outcome];
      stats.counts(t, outcome) += 1;
      stats.expectations(t) += d(outcome);
    }
  }
  stats.expectations /= static_cast<double>(shots);
  return stats;
}

}  // namespace qrnn
