#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(PUPILLO_CLI) + " " + args + " --quiet > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_raw(const std::string& args) {
  const std::string cmd = std::string(PUPILLO_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pupillo_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Same relative file list with identical bytes.
bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const auto& f : fa)
    if (slurp(a / f) != slurp(b / f)) return false;
  return true;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is byte identical across runs") {
  const auto a = fresh("synth_a"), b = fresh("synth_b");
  REQUIRE(run("synth --count 8 --size 64 --seed 7 --out " + a.string()) == 0);
  REQUIRE(run("synth --count 8 --size 64 --seed 7 --out " + b.string()) == 0);
  CHECK(same_tree(a, b));
  const auto m = read_json(a / "run_manifest.json");
  CHECK(m["command"] == "synth");
  CHECK(m["seed"] == 7);
  const auto c = fresh("synth_c");
  REQUIRE(run("synth --count 8 --size 64 --seed 8 --out " + c.string()) == 0);
  CHECK_FALSE(same_tree(a, c));
}

TEST_CASE("oracle evaluation is perfect") {
  const auto data = fresh("eval_data"), out = fresh("eval_out");
  REQUIRE(run("synth --count 8 --size 64 --seed 3 --out " + data.string()) == 0);
  REQUIRE(run("evaluate --oracle --mode joint --data " + data.string() + " --out " + out.string()) == 0);
  const auto m = read_json(out / "metrics.json");
  CHECK(m["aggregate"]["dsc"]["mean"] == 1.0);
  CHECK(m["n"] == 8);
  CHECK(m["n_effective"] == 8);
  CHECK(m["aggregate"]["diameter_error_px"]["mean"].get<double>() < 1e-9);
  CHECK(fs::exists(out / "per_image.csv"));
  CHECK(fs::exists(out / "run_manifest.json"));
}

TEST_CASE("pupillogram on the piecewise trace") {
  const auto dir = fresh("plr");
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "fixture.csv");
    csv << "t_seconds,diameter_px\n";
    for (int i = 0; i <= 120; ++i) {
      const double t = i / 30.0;
      const double d = t <= 1.2 ? 6.0 : t >= 2.2 ? 4.0 : 6.0 - 2.0 * (t - 1.2);
      csv << t << ',' << d << '\n';
    }
  }
  const auto out = dir / "out";
  REQUIRE(run("pupillogram --trace " + (dir / "fixture.csv").string() +
              " --stimulus-onset 1.0 --median-window 1 --out " + out.string()) == 0);
  const auto m = read_json(out / "metrics.json");
  CHECK(m["D0"].get<double>() == doctest::Approx(6.0));
  CHECK(m["Dmin"].get<double>() == doctest::Approx(4.0));
  CHECK(m["MCA"].get<double>() == doctest::Approx(2.0));
  CHECK(std::abs(m["tL_s"].get<double>() - 0.2) <= 1.0 / 30 + 1e-9);
  CHECK(std::abs(m["MCV_per_s"].get<double>() - 2.0) <= 0.2);
  CHECK(std::abs(m["tC_s"].get<double>() - 1.0) <= 2.0 / 30 + 1e-9);
  for (const char* f : {"trace.csv", "trace.json", "pupillogram.png", "run_manifest.json"})
    CHECK(fs::exists(out / f));
}

TEST_CASE("exit codes and no partial writes") {
  const auto out = fresh("usage");
  CHECK(run_raw("synth --count 4") == 1);                           // missing --out
  CHECK(run("synth --count 4 --bogus --out " + out.string()) == 1);  // unknown flag
  CHECK(run("synth --count 0 --out " + out.string()) == 1);
  CHECK(run("evaluate --data /nonexistent --oracle --out " + out.string()) == 1);
  CHECK(run("pupillogram --out " + out.string()) == 1);
  CHECK_FALSE(fs::exists(out));

  // A duplicate timestamp is a validation error.
  const auto dir = fresh("dup");
  fs::create_directories(dir);
  std::ofstream(dir / "t.csv") << "t_seconds,diameter_px\n0,5\n0.1,5\n0.1,5\n0.2,5\n";
  CHECK(run("pupillogram --trace " + (dir / "t.csv").string() + " --stimulus-onset 0.15 --out " +
            (dir / "o").string()) == 1);
  CHECK_FALSE(fs::exists(dir / "o"));

  // A corrupt checkpoint is a runtime failure.
  std::ofstream(dir / "bad.pt") << "not a checkpoint";
  const auto data = fresh("data_for_bad");
  REQUIRE(run("synth --count 2 --size 64 --out " + data.string()) == 0);
  CHECK(run("evaluate --checkpoint " + (dir / "bad.pt").string() + " --data " + data.string() +
            " --out " + (dir / "e").string()) == 2);
  CHECK(run_raw("--version") == 0);
}

TEST_CASE("inputs are not modified") {
  const auto data = fresh("ro_data"), out = fresh("ro_out");
  REQUIRE(run("synth --count 3 --size 64 --seed 1 --out " + data.string()) == 0);
  const auto snapshot = fresh("ro_snapshot");
  fs::copy(data, snapshot, fs::copy_options::recursive);
  REQUIRE(run("augment --data " + data.string() + " --copies 2 --out " + out.string()) == 0);
  CHECK(same_tree(data, snapshot));
  int images = 0;
  for (const auto& e : fs::directory_iterator(out / "images")) images += e.is_regular_file();
  CHECK(images == 9);
}

}  // TEST_SUITE
