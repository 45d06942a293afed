#include "qrnn/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qrnn {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

json provenance(const RunConfig& config) {
  return json{{"config_hash", hash_hex(config.hash())},
              {"split_seed", config.split_seed},
              {"init_seed", config.train.init_seed}};
}

std::string provenance_comment(const RunConfig& config) {
  return "# config_hash=" + hash_hex(config.hash()) +
         " split_seed=" + std::to_string(config.split_seed) +
         " init_seed=" + std::to_string(config.train.init_seed);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

json ansatz_to_json(const AnsatzConfig& a) {
  return json{{"n_e", a.n_e},
              {"n_m", a.n_m},
              {"layers", a.layers},
              {"reuploads", a.reuploads},
              {"n_inputs", a.n_inputs}};
}

AnsatzConfig ansatz_from_json(const json& j) {
  AnsatzConfig a;
  a.n_e = j.at("n_e").get<int>();
  a.n_m = j.at("n_m").get<int>();
  a.layers = j.at("layers").get<int>();
  a.reuploads = j.at("reuploads").get<int>();
  a.n_inputs = j.at("n_inputs").get<int>();
  a.validate();
  return a;
}

json nan_safe(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig RunConfig::for_case(char tag) {
  RunConfig cfg;
  cfg.case_tag = tag;
  cfg.train = TrainConfig::for_case(tag);
  switch (tag) {
    case 'a':
      cfg.ansatz = AnsatzConfig{1, 2, 2, 3, 1};
      break;
    case 'b':
      cfg.ansatz = AnsatzConfig{2, 3, 2, 1, 1};
      break;
    case 'c':
      cfg.ansatz = AnsatzConfig{2, 3, 5, 3, 2};
      break;
    default:
      throw ConfigError(std::string("unknown case '") + tag + "'");
  }
  return cfg;
}

std::string RunConfig::to_json_string() const {
  json j;
  j["case"] = std::string(1, case_tag);
  j["ansatz"] = ansatz_to_json(ansatz);
  j["train"] = json{{"g_tol", train.g_tol},
                    {"max_iter", train.max_iter},
                    {"restarts", train.restarts},
                    {"gradient", train.gradient == GradientMode::kAnalytical ? "analytical"
                                                                             : "numerical"},
                    {"fd_epsilon", train.fd_epsilon},
                    {"workers", train.workers},
                    {"audit_invariants", train.audit_invariants}};
  j["seeds"] = json{{"split", split_seed}, {"init", train.init_seed}};
  j["output_dir"] = output_dir;
  return j.dump(2);
}

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!j.contains("case")) throw ConfigError("config is missing the 'case' tag");
  const std::string tag = j.at("case").get<std::string>();
  if (tag.size() != 1) throw ConfigError("config 'case' must be a single letter");

  RunConfig cfg = RunConfig::for_case(tag[0]);
  if (j.contains("ansatz")) cfg.ansatz = ansatz_from_json(j.at("ansatz"));
  if (j.contains("train")) {
    const json& t = j.at("train");
    if (t.contains("g_tol")) cfg.train.g_tol = t.at("g_tol").get<double>();
    if (t.contains("max_iter")) cfg.train.max_iter = t.at("max_iter").get<int>();
    if (t.contains("restarts")) cfg.train.restarts = t.at("restarts").get<int>();
    if (t.contains("gradient")) {
      const std::string mode = t.at("gradient").get<std::string>();
      if (mode == "analytical") {
        cfg.train.gradient = GradientMode::kAnalytical;
      } else if (mode == "numerical") {
        cfg.train.gradient = GradientMode::kNumerical;
      } else {
        throw ConfigError("gradient mode must be 'analytical' or 'numerical'");
      }
    }
    if (t.contains("fd_epsilon")) cfg.train.fd_epsilon = t.at("fd_epsilon").get<double>();
    if (t.contains("workers")) cfg.train.workers = t.at("workers").get<int>();
    if (t.contains("audit_invariants")) {
      cfg.train.audit_invariants = t.at("audit_invariants").get<bool>();
    }
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (s.contains("split")) cfg.split_seed = s.at("split").get<std::uint64_t>();
    if (s.contains("init")) cfg.train.init_seed = s.at("init").get<std::uint64_t>();
  }
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  return cfg;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_json_string()); }

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << config.to_json_string() << "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return RunConfig::from_json_string(ss.str());
}

void write_series_csv(const MultivariateSeries& series, const RunConfig& config,
                      const std::filesystem::path& path) {
  auto out = open_out(path);
  out << provenance_comment(config) << "\n";
  out << "time";
  for (int v = 0; v < series.n_inputs(); ++v) out << ",x" << v;
  out << ",y\n";
  for (int k = 0; k < series.length(); ++k) {
    out << fmt17(k * series.dt);
    for (int v = 0; v < series.n_inputs(); ++v) out << "," << fmt17(series.inputs(k, v));
    out << ",";
    if (k < series.usable_length) out << fmt17(series.target(k));
    out << "\n";
  }
}

void write_split_json(const WindowedDataset& dataset, const RunConfig& config,
                      const std::filesystem::path& path) {
  json j;
  j["provenance"] = provenance(config);
  j["case"] = std::string(1, dataset.series.case_tag);
  j["window_len"] = dataset.window_len;
  j["horizon"] = dataset.horizon;
  j["usable_length"] = dataset.series.usable_length;
  j["train_starts"] = dataset.train_starts;
  j["val_starts"] = dataset.val_starts;
  j["test_starts"] = dataset.test_starts;
  j["full_test_starts"] = dataset.full_test_starts;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_model_json(const TrainedModel& model, const RunConfig& config,
                      const std::filesystem::path& path) {
  json j;
  j["provenance"] = provenance(config);
  j["ansatz"] = ansatz_to_json(model.config);
  std::vector<double> theta(model.theta.data(), model.theta.data() + model.theta.size());
  j["theta"] = theta;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

TrainedModel load_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
  TrainedModel model;
  model.config = ansatz_from_json(j.at("ansatz"));
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (static_cast<int>(theta.size()) != model.config.param_count()) {
    throw ConfigError("model theta length does not match its ansatz");
  }
  model.theta = Eigen::Map<const RVector>(theta.data(), theta.size());
  return model;
}

void write_report_json(const TrainingReport& report, const RunConfig& config,
                       const std::filesystem::path& path) {
  json j;
  j["provenance"] = provenance(config);
  j["best_restart"] = report.best_restart;
  j["rmse"] = json{{"train", nan_safe(report.rmse_train)},
                   {"val", nan_safe(report.rmse_val)},
                   {"test", nan_safe(report.rmse_test)},
                   {"full_test", nan_safe(report.rmse_full_test)}};
  j["counters"] = json{{"n_it", report.n_it}, {"n_fev", report.n_fev}, {"n_jev", report.n_jev}};
  j["budget"] = json{{"loss", report.budget_loss},
                     {"gradient", report.budget_gradient},
                     {"hessian", report.budget_hessian}};
  j["audit"] = json{{"max_trace_dev", report.audit.max_trace_dev},
                    {"max_herm_dev", report.audit.max_herm_dev},
                    {"min_eigenvalue", report.audit.min_eigenvalue},
                    {"max_abs_expectation", report.audit.max_abs_expectation},
                    {"audited_states", report.audit.audited_states}};
  json restarts = json::array();
  for (const RestartSummary& r : report.restarts) {
    restarts.push_back(json{{"index", r.index},
                            {"final_loss", nan_safe(r.final_loss)},
                            {"rmse_train", nan_safe(r.rmse_train)},
                            {"rmse_val", nan_safe(r.rmse_val)},
                            {"rmse_test", nan_safe(r.rmse_test)},
                            {"rmse_full_test", nan_safe(r.rmse_full_test)},
                            {"n_it", r.n_it},
                            {"n_fev", r.n_fev},
                            {"n_jev", r.n_jev},
                            {"converged_gtol", r.converged_gtol},
                            {"converged_ftol", r.converged_ftol},
                            {"hit_max_iter", r.hit_max_iter},
                            {"line_search_failed", r.line_search_failed}});
  }
  j["restarts"] = restarts;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_curve_csv(const std::vector<IterationRecord>& curve, const RunConfig& config,
                     const std::filesystem::path& path) {
  auto out = open_out(path);
  out << provenance_comment(config) << "\n";
  out << "iteration,train_rmse,val_rmse\n";
  for (const IterationRecord& rec : curve) {
    out << rec.iter << "," << fmt17(rec.train_loss) << ",";
    if (std::isfinite(rec.val_rmse)) out << fmt17(rec.val_rmse);
    out << "\n";
  }
}

void write_predictions_csv(const TrainedModel& model, const WindowedDataset& dataset,
                           const RunConfig& config, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << provenance_comment(config) << "\n";
  out << "set,window_start,t,prediction,target\n";
  const auto emit = [&](const char* name, const std::vector<int>& starts) {
    for (const WindowPrediction& wp : predict_set(model, dataset, starts)) {
      for (int h = 0; h < dataset.horizon; ++h) {
        const int t = wp.start + dataset.window_len - dataset.horizon + h;
        out << name << "," << wp.start << "," << t << "," << fmt17(wp.predictions(h)) << ","
            << fmt17(wp.targets(h)) << "\n";
      }
    }
  };
  emit("train", dataset.train_starts);
  emit("val", dataset.val_starts);
  emit("test", dataset.test_starts);
  emit("full_test", dataset.full_test_starts);
}

}  // namespace qrnn
