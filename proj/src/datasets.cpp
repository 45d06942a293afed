#include "qrnn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace qrnn {

namespace {

// Classical fixed-step RK4 on a 2nd-order scalar ODE written as
// (s, u)' = (u, accel(s, u, t)). Integrates with `substeps` internal
// steps per recorded sample.
template <typename Accel>
RVector integrate_rk4(Accel accel, double s0, double u0, int samples, double dt_sample,
                      int substeps) {
  RVector out(samples);
  const double h = dt_sample / substeps;
  double s = s0;
  double u = u0;
  double t = 0.0;
  out(0) = s;
  for (int k = 1; k < samples; ++k) {
    for (int i = 0; i < substeps; ++i) {
      const double k1s = u;
      const double k1u = accel(s, u, t);
      const double k2s = u + 0.5 * h * k1u;
      const double k2u = accel(s + 0.5 * h * k1s, u + 0.5 * h * k1u, t + 0.5 * h);
      const double k3s = u + 0.5 * h * k2u;
      const double k3u = accel(s + 0.5 * h * k2s, u + 0.5 * h * k2u, t + 0.5 * h);
      const double k4s = u + h * k3u;
      const double k4u = accel(s + h * k3s, u + h * k3u, t + h);
      s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
      u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
      t += h;
    }
    if (!std::isfinite(s) || !std::isfinite(u)) {
      throw NumericError("oscillator integration diverged at sample " + std::to_string(k));
    }
    out(k) = s;
  }
  return out;
}

void require_case(const SeriesSpec& spec, char expected, const char* what) {
  if (spec.case_tag != expected) {
    throw ConfigError(std::string(what) + " expects a case '" + expected + "' spec, got '" +
                      spec.case_tag + "'");
  }
}

}  // namespace

SeriesSpec SeriesSpec::for_case(char tag) {
  if (tag != 'a' && tag != 'b' && tag != 'c') {
    throw ConfigError(std::string("unknown series case '") + tag + "'");
  }
  SeriesSpec spec;
  spec.case_tag = tag;
  return spec;
}

double triangle_wave(double period, double t) {
  return 2.0 / std::numbers::pi * std::asin(std::sin(2.0 * std::numbers::pi * t / period));
}

MultivariateSeries gen_triangular(const SeriesSpec& spec) {
  require_case(spec, 'a', "gen_triangular");
  MultivariateSeries out;
  out.case_tag = 'a';
  out.dt = spec.dt();
  const int n = spec.grid_points;
  RVector s(n);
  for (int k = 0; k < n; ++k) {
    const double t = k * out.dt;
    s(k) = spec.tri_amplitude * std::exp(-spec.tri_decay * t) *
           triangle_wave(spec.tri_period, t);
  }
  out.inputs = s;
  out.usable_length = n - spec.tri_shift;
  out.target = s.segment(spec.tri_shift, out.usable_length);
  return out;
}

MultivariateSeries gen_forced_vdp(const SeriesSpec& spec) {
  require_case(spec, 'b', "gen_forced_vdp");
  MultivariateSeries out;
  out.case_tag = 'b';
  out.dt = spec.dt();
  const auto accel = [&spec](double s, double u, double t) {
    return spec.vdp_mu * (1.0 - s * s) * u - s +
           spec.vdp_drive_amp * std::sin(spec.vdp_drive_freq * t);
  };
  const RVector s = integrate_rk4(accel, 1.0, 0.0, spec.grid_points, out.dt, spec.integrator_substeps);
  out.inputs = spec.vdp_scale * s;
  out.usable_length = spec.grid_points - spec.vdp_shift;
  out.target = spec.vdp_scale * s.segment(spec.vdp_shift, out.usable_length);
  return out;
}

MultivariateSeries gen_double_vdp(const SeriesSpec& spec) {
  require_case(spec, 'c', "gen_double_vdp");
  MultivariateSeries out;
  out.case_tag = 'c';
  out.dt = spec.dt();
  const auto unforced = [](double mu) {
    return [mu](double s, double u, double) { return mu * (1.0 - s * s) * u - s; };
  };
  const RVector s0 = integrate_rk4(unforced(spec.pair_mu0), 1.0, 0.0, spec.grid_points, out.dt, spec.integrator_substeps);
  const RVector s1 = integrate_rk4(unforced(spec.pair_mu1), 1.0, 0.0, spec.grid_points, out.dt, spec.integrator_substeps);
  out.inputs.resize(spec.grid_points, 2);
  out.inputs.col(0) = spec.pair_scale0 * s0;
  out.inputs.col(1) = spec.pair_scale1 * s1;
  const int max_shift = std::max(spec.pair_shift0, spec.pair_shift1);
  out.usable_length = spec.grid_points - max_shift;
  out.target.resize(out.usable_length);
  for (int k = 0; k < out.usable_length; ++k) {
    out.target(k) = spec.pair_weight0 * out.inputs(k + spec.pair_shift0, 0) +
                    spec.pair_weight1 * out.inputs(k + spec.pair_shift1, 1);
  }
  return out;
}

MultivariateSeries generate(const SeriesSpec& spec) {
  switch (spec.case_tag) {
    case 'a':
      return gen_triangular(spec);
    case 'b':
      return gen_forced_vdp(spec);
    case 'c':
      return gen_double_vdp(spec);
    default:
      throw ConfigError(std::string("unknown series case '") + spec.case_tag + "'");
  }
}

RMatrix WindowedDataset::window_inputs(int start) const {
  return series.inputs.middleRows(start, window_len);
}

RVector WindowedDataset::window_targets(int start) const {
  return series.target.segment(start + window_len - horizon, horizon);
}

WindowedDataset make_windows(MultivariateSeries series, std::uint64_t seed) {
  WindowedDataset ds;
  ds.series = std::move(series);
  const int usable = ds.series.usable_length;
  if (usable < ds.window_len + ds.horizon) {
    throw ConfigError("series too short to window: usable length " + std::to_string(usable));
  }

  const int num_windows = usable / ds.window_len;
  const int n_test = std::max<long>(1, std::lround(0.2 * num_windows));
  const int remainder = num_windows - n_test;
  const int n_val = static_cast<int>(std::lround(0.2 * remainder));

  // Validation indices: seeded draw without replacement from the non-test
  // windows. Depends only on (remainder, n_val, seed), so a shared seed
  // yields the same validation slots across datasets of equal window count.
  std::vector<int> candidates(remainder);
  for (int i = 0; i < remainder; ++i) candidates[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<int> val_ids;
  for (int i = 0; i < n_val; ++i) {
    const std::uint64_t span = static_cast<std::uint64_t>(remainder - i);
    const int j = i + static_cast<int>(rng() % span);
    std::swap(candidates[i], candidates[j]);
    val_ids.push_back(candidates[i]);
  }
  std::sort(val_ids.begin(), val_ids.end());

  for (int w = 0; w < remainder; ++w) {
    const int start = w * ds.window_len;
    if (std::binary_search(val_ids.begin(), val_ids.end(), w)) {
      ds.val_starts.push_back(start);
    } else {
      ds.train_starts.push_back(start);
    }
  }
  for (int w = remainder; w < num_windows; ++w) {
    ds.test_starts.push_back(w * ds.window_len);
  }

  // Full-test tiling: one window per `horizon` stride so the final
  // `horizon` points of the windows cover the test span exactly once.
  const int span_start = remainder * ds.window_len;
  const int span_end = num_windows * ds.window_len;
  const int context = ds.window_len - ds.horizon;
  if (span_start < context) {
    throw ConfigError("test span starts too early for full-test windows");
  }
  for (int q = span_start; q + ds.horizon <= span_end; q += ds.horizon) {
    ds.full_test_starts.push_back(q - context);
  }
  return ds;
}

}  // namespace qrnn
