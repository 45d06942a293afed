#pragma once

#include <cstdint>
#include <vector>

#include "qrnn/types.hpp"

namespace qrnn {

// Benchmark series parameters. Defaults are the reference values for
// each case; generators read only the fields of their own case.
struct SeriesSpec {
  char case_tag = 'a';
  int grid_points = 1000;
  double t_max = 100.0;
  int integrator_substeps = 20;  // internal RK4 steps per recorded sample

  // case (a): dimmed triangular signal
  double tri_amplitude = 0.75;
  double tri_decay = 0.02;
  double tri_period = 5.0;
  int tri_shift = 12;  // target lead, in samples

  // case (b): forced Van der Pol oscillator
  double vdp_mu = 2.0;
  double vdp_drive_amp = 1.0;
  double vdp_drive_freq = 5.0;
  double vdp_scale = 0.25;
  int vdp_shift = 15;

  // case (c): pair of unforced Van der Pol oscillators
  double pair_mu0 = 2.0;
  double pair_mu1 = 1.0;
  double pair_scale0 = 0.25;
  double pair_scale1 = 0.25;
  double pair_weight0 = 1.0;
  double pair_weight1 = 0.1;
  int pair_shift0 = 5;
  int pair_shift1 = 18;

  double dt() const { return t_max / grid_points; }
  static SeriesSpec for_case(char tag);
};

// Unit-amplitude triangle wave, zero and ascending at t = 0.
double triangle_wave(double period, double t);

struct MultivariateSeries {
  char case_tag = 'a';
  double dt = 0.1;
  RMatrix inputs;  // grid_points x n_v
  RVector target;  // usable_length values; target[k] pairs with inputs row k
  int usable_length = 0;

  int n_inputs() const { return static_cast<int>(inputs.cols()); }
  int length() const { return static_cast<int>(inputs.rows()); }
};

MultivariateSeries gen_triangular(const SeriesSpec& spec);
MultivariateSeries gen_forced_vdp(const SeriesSpec& spec);
MultivariateSeries gen_double_vdp(const SeriesSpec& spec);
MultivariateSeries generate(const SeriesSpec& spec);  // dispatch on case_tag

// Fixed-length windows over the usable range. Train/validation/test
// windows are non-overlapping with stride = window_len; the last 20% of
// windows (rounded) are test, a seeded draw marks 20% of the remainder
// as validation. The full-test list holds stride-`horizon` windows whose
// final `horizon` points tile the test span exactly once.
struct WindowedDataset {
  MultivariateSeries series;
  int window_len = 20;
  int horizon = 5;

  std::vector<int> train_starts;
  std::vector<int> val_starts;
  std::vector<int> test_starts;
  std::vector<int> full_test_starts;

  RMatrix window_inputs(int start) const;   // window_len x n_v
  RVector window_targets(int start) const;  // target at the last `horizon` positions

  int num_windows() const {
    return static_cast<int>(train_starts.size() + val_starts.size() + test_starts.size());
  }
};

WindowedDataset make_windows(MultivariateSeries series, std::uint64_t seed);

}  // namespace qrnn
