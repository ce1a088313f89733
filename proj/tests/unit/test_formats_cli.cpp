#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "volterra/cli.hpp"
#include "volterra/errors.hpp"
#include "volterra/formats.hpp"

using namespace volterra;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("volterra_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

RunConfig tiny_config(const fs::path& dir) {
  RunConfig c;
  c.out_dir = dir.string();
  c.plan_preset = "custom";
  c.axes = {{7, 120, 2}, {41, 120, 2}, {87, 120, 2}};
  c.levels_dbm = {5.0, 10.0};
  c.probe_mode = "analytic";
  return c;
}

void write_config(const fs::path& path, const RunConfig& c) {
  std::ofstream(path) << config_to_json(c).dump(2);
}

}  // namespace

TEST_CASE("hash and base64 primitives") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(encode_f64({1.0}) == "AAAAAAAA8D8=");
  const std::vector<double> v{0.0, -1.5, 1e-300, 3.141592653589793};
  CHECK(decode_f64(encode_f64(v)) == v);
  const std::vector<std::int64_t> i{-7, 0, 1ll << 40};
  CHECK(decode_i64(encode_i64(i)) == i);
  const std::vector<std::complex<double>> z{{1.0, -2.0}, {0.25, 8.0}};
  CHECK(decode_complex(encode_complex(z)) == z);
  CHECK_THROWS_AS(decode_f64("AAA"), InputError);
}

TEST_CASE("envelope versions") {
  Json j = envelope("volterra-plan", "h");
  CHECK_NOTHROW(check_envelope(j, "volterra-plan"));
  j["format_version"] = "1.7";
  CHECK_NOTHROW(check_envelope(j, "volterra-plan"));
  j["format_version"] = "2.0";
  CHECK_THROWS_AS(check_envelope(j, "volterra-plan"), InputError);
  CHECK_THROWS_AS(check_envelope(envelope("volterra-plan", "h"), "volterra-kernel-archive"), InputError);
  CHECK_THROWS_AS(check_envelope(Json::object(), "volterra-plan"), InputError);
}

TEST_CASE("plan, dataset and archive round trips are exact") {
  const SweepPlan plan = with_levels(thin_plan(build_table2_plan(), 9), {5.0, 10.0}, 3);
  const SweepPlan p2 = plan_from_json(Json::parse(plan_to_json(plan, "h").dump()));
  CHECK(p2.axes == plan.axes);
  CHECK(p2.amplitudes == plan.amplitudes);
  CHECK(p2.id == plan.id);
  CHECK(p2.seed == plan.seed);

  const SpectralDataset ds = generate_dataset_analytic(oracle_kernels(make_system("benchmark")), plan, 3);
  const SpectralDataset d2 = dataset_from_json(Json::parse(dataset_to_json(ds, "h").dump()));
  CHECK(d2.blocks() == ds.blocks());
  CHECK(d2.amplitudes == ds.amplitudes);
  CHECK(d2.triplets == ds.triplets);
  CHECK(d2.capture.source == "analytic");

  const ExtractionResult r = extract(ds, plan, {});
  const KernelSetArchive a2 = archive_from_json(Json::parse(archive_to_json(r.archive, "h").dump()));
  REQUIRE(a2.max_order() == 3);
  for (int n = 1; n <= 3; ++n) {
    const auto& x = r.archive.grid(n).samples();
    const auto& y = a2.grid(n).samples();
    REQUIRE(x.size() == y.size());
    auto it = y.begin();
    for (const auto& [key, acc] : x) {
      CHECK(key == it->first);
      CHECK(acc.sum == it->second.sum);
      CHECK(acc.count == it->second.count);
      ++it;
    }
    CHECK(a2.grid(n).axes() == r.archive.grid(n).axes());
  }
  CHECK(a2.metadata().extraction_settings == r.archive.metadata().extraction_settings);
  CHECK_THROWS_AS(read_json("/nonexistent/volterra.json"), InputError);
}

TEST_CASE("settings and configuration round trips") {
  ExtractionSettings s;
  s.two_stage = true;
  s.stage1_window_db = 1.25;
  const ExtractionSettings t = settings_from_json(Json::parse(settings_to_json(s)));
  CHECK(t.two_stage);
  CHECK(t.stage1_window_db == 1.25);

  RunConfig c;
  c.system = "surrogate";
  c.levels_dbm = {-20.0, -14.0};
  c.plan_max_points = 8;
  c.axes = {{1, 2, 3}};
  const RunConfig d = config_from_json(config_to_json(c));
  CHECK(config_to_json(d) == config_to_json(c));
  CHECK(config_hash(c, "probe") == config_hash(d, "probe"));
  CHECK(config_hash(c, "probe") != config_hash(c, "extract"));
  RunConfig e = c;
  e.synth_samples = 100;
  CHECK(config_hash(c, "probe") == config_hash(e, "probe"));
  CHECK(config_hash(c, "synthesize") != config_hash(e, "synthesize"));
  CHECK_THROWS_AS(config_from_json(Json{{"jobs", "many"}}), InputError);
}

TEST_CASE("enumeration matches the committed golden files") {
  const std::string golden = GOLDEN_DIR;
  CHECK(enumeration_text(3, 3) == read_file(golden + "/enumerate_3_3.txt"));
  RunConfig c;
  const std::string json = enumeration_json(3, 3, config_hash(c, "enumerate")).dump(2) + "\n";
  CHECK(json == read_file(golden + "/enumerate_3_3.json"));

  const fs::path dir = scratch("enum");
  REQUIRE(run_cli("enumerate --tones 3 --order 3 --out " + dir.string()) == 0);
  CHECK(read_file(dir / "enumerate_3_3.txt") == read_file(golden + "/enumerate_3_3.txt"));
  CHECK(read_file(dir / "enumerate_3_3.json") == read_file(golden + "/enumerate_3_3.json"));
  REQUIRE(run_cli("enumerate --tones 1 --order 1 --out " + dir.string()) == 0);
  CHECK(read_file(dir / "enumerate_1_1.txt").find("output frequencies: 1 ") != std::string::npos);
}

TEST_CASE("pipeline through the command-line tool") {
  const fs::path dir = scratch("pipeline");
  const RunConfig c = tiny_config(dir);
  write_config(dir / "config.json", c);
  const std::string cfg = "--config " + (dir / "config.json").string();
  CHECK(run_cli("plan " + cfg) == 0);
  CHECK(run_cli("probe " + cfg) == 0);
  CHECK(run_cli("extract " + cfg) == 0);
  CHECK(run_cli("synthesize " + cfg) == 0);
  const Json ar = read_json(dir / "archive.json");
  CHECK(ar["format"] == "volterra-kernel-archive");
  CHECK(ar["format_version"] == kFormatVersion);
  CHECK(ar["config_hash"] == config_hash(c, "extract"));
  CHECK(ar["metadata"]["system_id"] == "benchmark");
  CHECK(ar["completeness"]["solved"] == ar["completeness"]["systems"]);
  CHECK(read_json(dir / "dataset.json")["config_hash"] == config_hash(c, "probe"));
  CHECK(fs::exists(dir / "synthesis.csv"));

  // identical configuration and inputs give identical bytes
  const std::string first = read_file(dir / "archive.json");
  const std::string data = read_file(dir / "dataset.json");
  CHECK(run_cli("probe " + cfg + " --jobs 2") == 0);
  CHECK(run_cli("extract " + cfg + " --jobs 2") == 0);
  CHECK(read_file(dir / "dataset.json") == data);
  CHECK(read_file(dir / "archive.json") == first);
}

TEST_CASE("command-line failures map to exit codes") {
  const fs::path dir = scratch("failures");
  RunConfig c = tiny_config(dir);
  c.axes = {{10, 1, 1}, {20, 1, 1}, {77, 1, 1}};
  write_config(dir / "collide.json", c);
  std::ostringstream out, err;
  CHECK(run_command("probe", c, out, err) == kExitValidation);
  CHECK(out.str().find("collision") != std::string::npos);
  CHECK(run_cli("plan --config " + (dir / "collide.json").string()) == kExitValidation);

  const RunConfig ok = tiny_config(dir);
  CHECK(run_command("extract", ok, out, err) == kExitInput);  // no dataset yet
  CHECK(run_cli("validate --out " + (dir / "missing").string()) == kExitInput);
  CHECK(run_cli("frobnicate") == kExitInput);
  RunConfig loud = tiny_config(dir);
  loud.system = "surrogate";
  CHECK(run_command("probe", loud, out, err) == kExitInput);
  CHECK(err.str().find("exceeds") != std::string::npos);

  // truncated dataset: extraction reports the missing entries
  REQUIRE(run_command("probe", ok, out, err) == kExitOk);
  Json ds = read_json(dir / "dataset.json");
  Json& lsop = ds["lsop"];
  for (std::size_t i = 0; i < lsop.size();) {
    if (lsop[i]["triplet"] == 0 || lsop[i]["triplet"] == 1) {
      lsop.erase(i);
    } else {
      ++i;
    }
  }
  write_file_atomic(dir / "dataset.json", ds.dump());
  std::ostringstream rep;
  CHECK(run_command("extract", ok, rep, err) == kExitValidation);
  CHECK(rep.str().find("missing phasor") != std::string::npos);
}
