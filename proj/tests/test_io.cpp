#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qrnn/io.hpp"
#include "support.hpp"

using namespace qrnn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "qrnn_io_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("fnv1a reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("run config round-trips losslessly") {
  RunConfig cfg = RunConfig::for_case('b');
  cfg.split_seed = 424242;
  cfg.train.init_seed = 99;
  cfg.train.restarts = 3;
  cfg.train.gradient = GradientMode::kNumerical;
  cfg.train.fd_epsilon = 2.5e-9;
  cfg.output_dir = "some/dir";

  const std::string text = cfg.to_json_string();
  const RunConfig back = RunConfig::from_json_string(text);
  CHECK(back.to_json_string() == text);
  CHECK(back.hash() == cfg.hash());

  const fs::path path = temp_dir() / "config.json";
  save_run_config(cfg, path);
  const RunConfig loaded = load_run_config(path);
  CHECK(loaded.to_json_string() == text);
}

TEST_CASE("case defaults carry the reference shapes") {
  CHECK(RunConfig::for_case('a').ansatz.param_count() == 31);
  CHECK(RunConfig::for_case('b').ansatz.param_count() == 43);
  CHECK(RunConfig::for_case('c').ansatz.param_count() == 100);
  CHECK(RunConfig::for_case('a').train.g_tol == 1e-3);
  CHECK(RunConfig::for_case('b').train.g_tol == 1e-4);
  CHECK_THROWS_AS(RunConfig::for_case('x'), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_string("{ not json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_string("{}"), ConfigError);  // missing case tag
}

TEST_CASE("model files restore the exact parameter vector") {
  std::mt19937_64 rng(81);
  const AnsatzConfig cfg = test::case_a();
  TrainedModel model{cfg, test::random_theta(ParameterLayout(cfg), rng)};
  model.theta(3) = 0.1234567890123456789;  // exercise full precision

  const fs::path path = temp_dir() / "model.json";
  write_model_json(model, RunConfig::for_case('a'), path);
  const TrainedModel loaded = load_model_json(path);

  CHECK(loaded.config.param_count() == cfg.param_count());
  CHECK((loaded.theta - model.theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("series csv is deterministic down to the byte") {
  const RunConfig cfg = RunConfig::for_case('a');
  const MultivariateSeries series = generate(SeriesSpec::for_case('a'));

  const fs::path p1 = temp_dir() / "series1.csv";
  const fs::path p2 = temp_dir() / "series2.csv";
  write_series_csv(series, cfg, p1);
  write_series_csv(series, cfg, p2);
  CHECK(slurp(p1) == slurp(p2));

  const std::string text = slurp(p1);
  CHECK(text.starts_with("# config_hash="));
  CHECK(text.find("time,x0,y") != std::string::npos);

  // 17 significant digits survive a parse round trip
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);  // provenance
  std::getline(lines, line);  // header
  std::getline(lines, line);  // k = 0 row
  std::getline(lines, line);  // k = 1 row
  const auto second_comma = line.find(',', line.find(',') + 1);
  const std::string x_field = line.substr(line.find(',') + 1, second_comma - line.find(',') - 1);
  CHECK(std::stod(x_field) == series.inputs(1, 0));
}

TEST_CASE("split sidecar lists every window set") {
  const RunConfig cfg = RunConfig::for_case('a');
  const WindowedDataset ds = make_windows(generate(SeriesSpec::for_case('a')), cfg.split_seed);
  const fs::path path = temp_dir() / "split.json";
  write_split_json(ds, cfg, path);
  const std::string text = slurp(path);
  CHECK(text.find("\"train_starts\"") != std::string::npos);
  CHECK(text.find("\"val_starts\"") != std::string::npos);
  CHECK(text.find("\"test_starts\"") != std::string::npos);
  CHECK(text.find("\"full_test_starts\"") != std::string::npos);
  CHECK(text.find("\"usable_length\": 988") != std::string::npos);
}

TEST_CASE("prediction and curve files carry provenance") {
  std::mt19937_64 rng(82);
  const RunConfig cfg = RunConfig::for_case('a');
  const WindowedDataset ds = make_windows(generate(SeriesSpec::for_case('a')), cfg.split_seed);
  const TrainedModel model{cfg.ansatz, test::random_theta(ParameterLayout(cfg.ansatz), rng)};

  const fs::path pred_path = temp_dir() / "predictions.csv";
  write_predictions_csv(model, ds, cfg, pred_path);
  const std::string pred = slurp(pred_path);
  CHECK(pred.starts_with("# config_hash="));
  CHECK(pred.find("full_test,") != std::string::npos);

  const fs::path curve_path = temp_dir() / "curve.csv";
  write_curve_csv({{1, 0.5, 0.6}, {2, 0.4, 0.5}}, cfg, curve_path);
  const std::string curve = slurp(curve_path);
  CHECK(curve.find("iteration,train_rmse,val_rmse") != std::string::npos);
  CHECK(curve.find("\n1,0.5") != std::string::npos);
}

}  // TEST_SUITE
