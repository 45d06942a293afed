#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "qrnn/io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qrnn;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerification = 3;

constexpr double kGradCheckTol = 1e-6;
constexpr double kHessCheckTol = 1e-5;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

WindowedDataset build_dataset(const RunConfig& cfg) {
  return make_windows(generate(SeriesSpec::for_case(cfg.case_tag)), cfg.split_seed);
}

fs::path out_file(const RunConfig& cfg, const std::string& stem, const std::string& ext) {
  return fs::path(cfg.output_dir) / (stem + "_" + cfg.case_tag + ext);
}

int run_gen_data(const RunConfig& cfg) {
  const MultivariateSeries series = generate(SeriesSpec::for_case(cfg.case_tag));
  const WindowedDataset dataset = make_windows(series, cfg.split_seed);
  write_series_csv(series, cfg, out_file(cfg, "series", ".csv"));
  write_split_json(dataset, cfg, out_file(cfg, "split", ".json"));
  save_run_config(cfg, out_file(cfg, "config", ".json"));
  std::printf("case %c: %d points (%d usable), %d windows: %zu train / %zu val / %zu test, %zu full-test\n",
              cfg.case_tag, series.length(), series.usable_length, dataset.num_windows(),
              dataset.train_starts.size(), dataset.val_starts.size(),
              dataset.test_starts.size(), dataset.full_test_starts.size());
  return kExitOk;
}

int run_train(const RunConfig& cfg) {
  const WindowedDataset dataset = build_dataset(cfg);
  save_run_config(cfg, out_file(cfg, "config", ".json"));

  TrainResult result;
  try {
    result = train_multi_restart(dataset, cfg.ansatz, cfg.train);
  } catch (const TrainingFailure& e) {
    std::fprintf(stderr, "training failed: %s\n", e.what());
    TrainingReport partial;
    partial.restarts = e.partial_reports;
    write_report_json(partial, cfg, out_file(cfg, "report", ".json"));
    return kExitNumeric;
  }

  write_model_json(result.model, cfg, out_file(cfg, "model", ".json"));
  write_report_json(result.report, cfg, out_file(cfg, "report", ".json"));
  write_curve_csv(result.report.curve, cfg, out_file(cfg, "curve", ".csv"));
  write_predictions_csv(result.model, dataset, cfg, out_file(cfg, "predictions", ".csv"));

  const TrainingReport& rep = result.report;
  std::printf("case %c (%s): best restart %d  n_it=%d n_fev=%d n_jev=%d\n", cfg.case_tag,
              cfg.train.gradient == GradientMode::kAnalytical ? "analytical" : "numerical",
              rep.best_restart, rep.n_it, rep.n_fev, rep.n_jev);
  std::printf("rmse train=%.6f val=%.6f test=%.6f full_test=%.6f\n", rep.rmse_train,
              rep.rmse_val, rep.rmse_test, rep.rmse_full_test);
  return kExitOk;
}

int run_evaluate(const RunConfig& cfg, const std::string& model_path) {
  const TrainedModel model = load_model_json(model_path);
  const WindowedDataset dataset = build_dataset(cfg);
  InvariantAudit audit;
  const EvalRmse rmse = evaluate(model, dataset, &audit);
  std::printf("rmse train=%.6f val=%.6f test=%.6f full_test=%.6f\n", rmse.train, rmse.val,
              rmse.test, rmse.full_test);
  std::printf("audit: states=%lld max_trace_dev=%.3g max_herm_dev=%.3g min_eig=%.3g max_abs_exp=%.9f\n",
              audit.audited_states, audit.max_trace_dev, audit.max_herm_dev,
              audit.min_eigenvalue, audit.max_abs_expectation);
  return audit.ok() ? kExitOk : kExitNumeric;
}

int run_predict(const RunConfig& cfg, const std::string& model_path) {
  const TrainedModel model = load_model_json(model_path);
  const WindowedDataset dataset = build_dataset(cfg);
  const fs::path path = out_file(cfg, "predictions", ".csv");
  write_predictions_csv(model, dataset, cfg, path);
  std::printf("wrote %s\n", path.string().c_str());
  return kExitOk;
}

struct CheckOptions {
  int num_blocks = 5;
  int trials = 3;
  std::uint64_t seed = 7;
  bool with_hessian = false;
  int subset = 0;  // 0 = all rotation angles
  bool corrupt_shift_sign = false;
};

RMatrix random_series(std::mt19937_64& rng, int num_blocks, int n_inputs) {
  RMatrix series(num_blocks, n_inputs);
  for (int t = 0; t < num_blocks; ++t) {
    for (int v = 0; v < n_inputs; ++v) series(t, v) = 1.5 * uniform01(rng) - 0.75;
  }
  return series;
}

RVector random_theta(std::mt19937_64& rng, int count) {
  RVector theta(count);
  for (int i = 0; i < count - 1; ++i) theta(i) = uniform01(rng);
  theta(count - 1) = 0.0;
  return theta;
}

int run_hessian_check_impl(const RunConfig& cfg, const CheckOptions& opt);

int run_grad_check(const RunConfig& cfg, const CheckOptions& opt) {
  const AnsatzConfig& ansatz = cfg.ansatz;
  const ParameterLayout layout(ansatz);
  std::mt19937_64 rng(opt.seed);
  const double h = 1e-6;

  double worst = 0.0;
  int worst_t = -1, worst_i = -1;
  for (int trial = 0; trial < opt.trials; ++trial) {
    const RMatrix series = random_series(rng, opt.num_blocks, ansatz.n_inputs);
    const RVector theta = random_theta(rng, layout.count());
    const std::span<const double> sp(theta.data(), theta.size());

    RMatrix analytic = gradient_expectation_all(series, sp, ansatz, nullptr, cfg.train.workers);
    if (opt.corrupt_shift_sign) {
      // test hook: flip the sign of the largest entry to prove the check trips
      int ti = 0, ii = 0;
      analytic.cwiseAbs().maxCoeff(&ti, &ii);
      analytic(ti, ii) = -analytic(ti, ii);
    }

    std::vector<double> shifted(theta.data(), theta.data() + theta.size());
    for (int i = 0; i < layout.angle_count(); ++i) {
      shifted[i] = theta(i) + h;
      const RVector plus = forward(series, shifted, ansatz).expectations;
      shifted[i] = theta(i) - h;
      const RVector minus = forward(series, shifted, ansatz).expectations;
      shifted[i] = theta(i);
      for (int t = 0; t < opt.num_blocks; ++t) {
        const double fd = (plus(t) - minus(t)) / (2.0 * h);
        const double dev = std::abs(analytic(t, i) - fd);
        if (dev > worst) {
          worst = dev;
          worst_t = t;
          worst_i = i;
        }
      }
    }
  }
  std::printf("gradient check: %d trials, max |analytic - central-fd| = %.3e at (t=%d, i=%d)\n",
              opt.trials, worst, worst_t, worst_i);
  bool pass = worst <= kGradCheckTol;
  if (!pass) {
    std::fprintf(stderr, "gradient deviation %.3e exceeds %.1e at (t=%d, i=%d)\n", worst,
                 kGradCheckTol, worst_t, worst_i);
  }
  if (opt.with_hessian && pass) {
    CheckOptions hess = opt;
    hess.with_hessian = false;
    return run_hessian_check_impl(cfg, hess);
  }
  return pass ? kExitOk : kExitVerification;
}

int run_hessian_check_impl(const RunConfig& cfg, const CheckOptions& opt) {
  const AnsatzConfig& ansatz = cfg.ansatz;
  const ParameterLayout layout(ansatz);
  std::mt19937_64 rng(opt.seed);

  const RMatrix series = random_series(rng, opt.num_blocks, ansatz.n_inputs);
  const RVector theta = random_theta(rng, layout.count());
  const std::span<const double> sp(theta.data(), theta.size());

  std::vector<int> params;
  const int subset = opt.subset > 0 ? std::min(opt.subset, layout.angle_count())
                                    : layout.angle_count();
  for (int i = 0; i < subset; ++i) params.push_back(i);

  EvalBudget budget;
  const int t = opt.num_blocks - 1;
  const RMatrix hess =
      hessian_expectation(series, sp, ansatz, t, params, &budget, cfg.train.workers);

  // symmetry is structural: mirrored entries come from the same sums
  for (int a = 0; a < hess.rows(); ++a) {
    for (int b = 0; b < hess.cols(); ++b) {
      if (hess(a, b) != hess(b, a)) {
        std::fprintf(stderr, "hessian asymmetry at (%d, %d)\n", a, b);
        return kExitVerification;
      }
    }
  }

  const long long expected = eval_count_hessian(opt.num_blocks, subset);
  if (budget.hessian() != expected) {
    std::fprintf(stderr, "hessian evaluation count %lld, expected %lld\n", budget.hessian(),
                 expected);
    return kExitVerification;
  }

  // central finite difference of the analytical gradient
  const double h = 1e-5;
  double worst = 0.0;
  int worst_a = -1, worst_b = -1;
  std::vector<double> shifted(theta.data(), theta.data() + theta.size());
  for (int b = 0; b < subset; ++b) {
    shifted[params[b]] = theta(params[b]) + h;
    std::vector<double> gp(subset), gm(subset);
    for (int a = 0; a < subset; ++a) {
      gp[a] = gradient_expectation(series, shifted, ansatz, t, params[a]);
    }
    shifted[params[b]] = theta(params[b]) - h;
    for (int a = 0; a < subset; ++a) {
      gm[a] = gradient_expectation(series, shifted, ansatz, t, params[a]);
    }
    shifted[params[b]] = theta(params[b]);
    for (int a = 0; a < subset; ++a) {
      const double fd = (gp[a] - gm[a]) / (2.0 * h);
      const double dev = std::abs(hess(a, b) - fd);
      if (dev > worst) {
        worst = dev;
        worst_a = a;
        worst_b = b;
      }
    }
  }
  std::printf(
      "hessian check: T=%d subset=%d evals=%lld, symmetric, max |analytic - fd(grad)| = %.3e\n",
      opt.num_blocks, subset, budget.hessian(), worst);
  if (worst > kHessCheckTol) {
    std::fprintf(stderr, "hessian deviation %.3e exceeds %.1e at (%d, %d)\n", worst,
                 kHessCheckTol, worst_a, worst_b);
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"density-matrix emulation and training of recurrent quantum circuits"};
  app.require_subcommand(1);

  std::string config_path;
  std::string case_tag;
  std::string output_dir;
  std::string gradient_mode;
  std::string model_path;
  double fd_eps = -1.0;
  double g_tol = -1.0;
  int restarts = -1;
  int max_iter = -1;
  int workers = -1;
  long long split_seed = -1;
  long long init_seed = -1;
  bool audit = false;

  const auto add_common = [&](CLI::App* cmd, bool with_train_flags) {
    cmd->add_option("--config", config_path, "run config JSON file");
    cmd->add_option("--case", case_tag, "series case: a, b or c");
    cmd->add_option("--out", output_dir, "output directory");
    cmd->add_option("--split-seed", split_seed, "window split seed");
    if (with_train_flags) {
      cmd->add_option("--gradient", gradient_mode, "analytical or numerical");
      cmd->add_option("--eps", fd_eps, "finite-difference step size");
      cmd->add_option("--restarts", restarts, "number of random restarts");
      cmd->add_option("--max-iter", max_iter, "iteration cap per restart");
      cmd->add_option("--g-tol", g_tol, "gradient convergence threshold");
      cmd->add_option("--init-seed", init_seed, "parameter initialisation seed");
      cmd->add_flag("--audit", audit, "validate hidden-state physicality during training");
    }
    cmd->add_option("--workers", workers, "worker threads (QRNN_WORKERS overrides default)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a benchmark series and its windows");
  add_common(gen, false);

  CLI::App* train = app.add_subcommand("train", "run the multi-restart optimisation");
  add_common(train, true);

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "report RMSEs of a trained model");
  add_common(evaluate_cmd, false);
  evaluate_cmd->add_option("--model", model_path, "model JSON file")->required();

  CLI::App* predict = app.add_subcommand("predict", "write prediction CSV for a trained model");
  add_common(predict, false);
  predict->add_option("--model", model_path, "model JSON file")->required();

  CheckOptions check;
  std::vector<int> shape;
  CLI::App* grad_check = app.add_subcommand("grad-check", "verify shift-rule gradients against finite differences");
  add_common(grad_check, false);
  grad_check->add_option("--blocks", check.num_blocks, "sequence length");
  grad_check->add_option("--trials", check.trials, "random instances");
  grad_check->add_option("--seed", check.seed, "rng seed");
  grad_check->add_option("--shape", shape, "circuit shape n_e,n_m,layers,reuploads,n_inputs")
      ->delimiter(',');
  grad_check->add_flag("--hessian", check.with_hessian, "also verify the hessian");
  grad_check->add_option("--subset", check.subset, "restrict hessian to the first k angles");
  grad_check->add_flag("--corrupt-shift-sign", check.corrupt_shift_sign,
                       "test hook: corrupt one entry and expect failure")
      ->group("");

  CLI::App* hessian_check = app.add_subcommand("hessian-check", "verify shift-rule hessians");
  add_common(hessian_check, false);
  hessian_check->add_option("--blocks", check.num_blocks, "sequence length");
  hessian_check->add_option("--seed", check.seed, "rng seed");
  hessian_check->add_option("--shape", shape, "circuit shape n_e,n_m,layers,reuploads,n_inputs")
      ->delimiter(',');
  hessian_check->add_option("--subset", check.subset, "restrict to the first k angles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_run_config(config_path);
      if (!case_tag.empty()) {
        RunConfig defaults = RunConfig::for_case(case_tag[0]);
        cfg.case_tag = defaults.case_tag;
      }
    } else {
      if (case_tag.empty()) {
        if (app.got_subcommand(gen) || app.got_subcommand(train)) {
          std::fprintf(stderr, "either --config or --case is required\n");
          return kExitConfig;
        }
        case_tag = "a";
      }
      if (case_tag.size() != 1) {
        std::fprintf(stderr, "--case must be a single letter\n");
        return kExitConfig;
      }
      cfg = RunConfig::for_case(case_tag[0]);
    }
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (split_seed >= 0) cfg.split_seed = static_cast<std::uint64_t>(split_seed);
    if (init_seed >= 0) cfg.train.init_seed = static_cast<std::uint64_t>(init_seed);
    if (!gradient_mode.empty()) {
      if (gradient_mode == "analytical") {
        cfg.train.gradient = GradientMode::kAnalytical;
      } else if (gradient_mode == "numerical") {
        cfg.train.gradient = GradientMode::kNumerical;
      } else {
        std::fprintf(stderr, "--gradient must be 'analytical' or 'numerical'\n");
        return kExitConfig;
      }
    }
    if (fd_eps > 0) cfg.train.fd_epsilon = fd_eps;
    if (g_tol > 0) cfg.train.g_tol = g_tol;
    if (restarts > 0) cfg.train.restarts = restarts;
    if (max_iter > 0) cfg.train.max_iter = max_iter;
    if (workers >= 0) cfg.train.workers = workers;
    if (audit) cfg.train.audit_invariants = true;
    if (!shape.empty()) {
      if (shape.size() != 5) {
        std::fprintf(stderr, "--shape needs n_e,n_m,layers,reuploads,n_inputs\n");
        return kExitConfig;
      }
      cfg.ansatz = AnsatzConfig{shape[0], shape[1], shape[2], shape[3], shape[4]};
    }
    cfg.ansatz.validate();

    if (app.got_subcommand(gen)) return run_gen_data(cfg);
    if (app.got_subcommand(train)) return run_train(cfg);
    if (app.got_subcommand(evaluate_cmd)) return run_evaluate(cfg, model_path);
    if (app.got_subcommand(predict)) return run_predict(cfg, model_path);
    if (app.got_subcommand(grad_check)) return run_grad_check(cfg, check);
    if (app.got_subcommand(hessian_check)) return run_hessian_check_impl(cfg, check);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitConfig;
  } catch (const TrainingFailure& e) {
    std::fprintf(stderr, "training failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}
