#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pupillo/config.hpp"
#include "pupillo/error.hpp"

using namespace pupillo;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults validate and round trip") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  const auto j = to_json(c);
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(to_json(run_config_from_json(j)) == j);
  CHECK(run_config_from_json(nlohmann::json::object()).train.epochs == 100);
}

TEST_CASE("non-default values survive a round trip") {
  RunConfig c;
  c.seed = 99;
  c.dataset.train_fraction = 0.75;
  c.dataset.val_path = "/data/val";
  c.augmentation_enabled = true;
  c.augmentation.fr_ops = {FlipRotateOp::Rotate90, FlipRotateOp::HorizontalFlip};
  c.augmentation.p_ca = 0.3;
  c.model.input_size = 112;
  c.model.encoder_depth = 3;
  c.model.batch_norm = false;
  c.train.optimizer = OptimizerKind::Adam;
  c.train.cyclic_enabled = false;
  c.train.steps_per_cycle = 12;
  c.evaluation.mode = PipelineMode::TwoStep;
  c.evaluation.hardware = "laptop";
  c.pupillogram.mm_per_pixel = 0.05;
  c.pupillogram.median_window = 5;
  const auto j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.model == c.model);
  CHECK(back.seed == 99);
  CHECK(back.pupillogram.mm_per_pixel == 0.05);

  const auto dir = std::filesystem::temp_directory_path() / "pupillo_test_config";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "run.json") << j.dump(2);
  CHECK(to_json(load_run_config(dir / "run.json")) == j);
}

TEST_CASE("resolved train config carries the seed and augmentation") {
  RunConfig c;
  c.seed = 5;
  CHECK(c.resolved_train().seed == 5);
  CHECK_FALSE(c.resolved_train().augmentation.has_value());
  c.augmentation_enabled = true;
  const auto t = c.resolved_train();
  REQUIRE(t.augmentation.has_value());
  CHECK(t.augmentation->seed == derive_seed(5, {0xa06}));
}

TEST_CASE("typos and bad values are rejected") {
  auto j = to_json(RunConfig{});
  j["sed"] = 1;
  CHECK(code_of([&] { run_config_from_json(j); }) == ErrorCode::ConfigError);
  j = to_json(RunConfig{});
  j["train"]["epoch"] = 3;
  CHECK(code_of([&] { run_config_from_json(j); }) == ErrorCode::ConfigError);
  j = to_json(RunConfig{});
  j["model"]["input_size"] = "big";
  CHECK(code_of([&] { run_config_from_json(j); }) == ErrorCode::ConfigError);
  j = to_json(RunConfig{});
  j["dataset"]["train_fraction"] = 1.5;
  CHECK(code_of([&] { run_config_from_json(j).validate(); }) == ErrorCode::ConfigError);
  j = to_json(RunConfig{});
  j["pupillogram"]["median_window"] = 4;
  CHECK(code_of([&] { run_config_from_json(j).validate(); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { load_run_config("/nonexistent/run.json"); }) == ErrorCode::ConfigError);
}

TEST_CASE("run manifest is deterministic") {
  RunConfig c;
  c.output_dir = "/tmp/a";
  RunConfig d = c;
  d.output_dir = "/tmp/b";
  const auto m = run_manifest("synth", c, {{"count", 8}});
  CHECK(m == run_manifest("synth", d, {{"count", 8}}));
  CHECK(m["command"] == "synth");
  CHECK(m["toolkit_version"] == toolkit_version());
  CHECK(m["seed"] == 0);
  CHECK(m.contains("schema_version"));
}

}  // TEST_SUITE
