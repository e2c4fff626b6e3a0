#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sshred/cli/commands.hpp"

using namespace sshred;
using namespace sshred::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / "sshred_cli_tests";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Result run_cli(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(SSHRED_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) n += !line.empty();
  return n;
}

// Small modal field plus a run config that trains in well under a second.
fs::path small_run(const std::string& name, const std::string& extra_train = "") {
  const fs::path dir = work_dir() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path field = dir / "field.fld";
  EXPECT_EQ(run_cli("generate modal --out " + field.string() + " --frames 400 --height 6 --width 6 --modes 2").code, 0);
  std::ofstream cfg(dir / "run.json");
  cfg << R"({"field": ")" << field.string() << R"(", "sensor_count": 6, "out_dir": ")" << (dir / "out").string()
      << R"(", "train": {"lag": 5, "latent": 4, "gru_layers": 1, "decoder_hidden": [16], "epochs": 3,
        "batch_size": 64, "dt": 0.02, "threshold_interval": 2, "threshold_low": 0.05,
        "threshold_high": 1.0, "ensemble_size": 3, "log_wall_time": false, "seed": 5)"
      << extra_train << "}}";
  return dir;
}

}  // namespace

TEST(RunConfig, UnknownAndMissingKeys) {
  EXPECT_THROW(run_config_from_json({{"field", "a.fld"}, {"outdir", "x"}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"sensor_count", 3}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"field", "a.fld"}, {"train", {{"lags", 3}}}}), ConfigError);
  const RunConfig r = run_config_from_json({{"field", "a.fld"}, {"train", {{"latent", 3}, {"ensemble_size", 10}}}});
  EXPECT_EQ(r.train.latent, 3u);
  EXPECT_EQ(r.sensor_count, 25u);
}

TEST(RunConfig, SstStyleConfigAccepted) {
  const RunConfig r = run_config_from_json({{"field", "sst.fld"},
                                            {"train",
                                             {{"latent", 3},
                                              {"ensemble_size", 10},
                                              {"threshold_low", 0.1},
                                              {"threshold_high", 1.0},
                                              {"threshold_interval", 100},
                                              {"epochs", 1000},
                                              {"batch_size", 128}}}});
  EXPECT_EQ(r.train.threshold_interval, 100u);
  EXPECT_EQ(r.train.ensemble_size, 10u);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("generate spiral --out " + (work_dir() / "x.fld").string()).code, 2);
  EXPECT_EQ(run_cli("validate-theory --suite thm3").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(Cli, MissingFilesExitTwoNamingPath) {
  const fs::path cfg = work_dir() / "missing_field.json";
  {
    std::ofstream os(cfg);
    os << R"({"field": "/nonexistent/field.fld"})";
  }
  const Result r = run_cli("train " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/field.fld"), std::string::npos);

  const Result f = run_cli("forecast --checkpoint /nonexistent/c.shrd --field " + cfg.string());
  EXPECT_EQ(f.code, 2);
  EXPECT_NE(f.err.find("/nonexistent/c.shrd"), std::string::npos);
}

TEST(Cli, GenerateWritesSidecars) {
  const fs::path modal = work_dir() / "gen" / "modal.fld";
  ASSERT_EQ(run_cli("generate modal --modes 1 --frames 50 --out " + modal.string()).code, 0);
  const Field f = load_field(modal);
  EXPECT_EQ(f.frames(), 50u);
  const json side = read_json(fs::path(modal.string() + ".json"));
  EXPECT_DOUBLE_EQ(side["modes"][0]["omega"].get<double>(), 2 * std::numbers::pi);
  EXPECT_TRUE(fs::exists(modal.parent_path() / "manifest.json"));

  const fs::path pend = work_dir() / "gen" / "pendulum.fld";
  ASSERT_EQ(run_cli("generate pendulum --frames 20 --out " + pend.string()).code, 0);
  const json ps = read_json(fs::path(pend.string() + ".json"));
  EXPECT_EQ(ps["coefficients"]["zdot^2"].get<double>(), 0.17);
  EXPECT_EQ(ps["coefficients"]["zdot^3"].get<double>(), -0.06);
  EXPECT_EQ(ps["coefficients"]["sin(z)"].get<double>(), -10.87);
  EXPECT_EQ(ps["coefficients"]["sin(zdot)"].get<double>(), 0.48);
  EXPECT_EQ(ps["trajectory"].size(), 20u);
}

TEST(Cli, GenerateIsReproducible) {
  const fs::path a = work_dir() / "rep" / "a.fld", b = work_dir() / "rep" / "b.fld";
  ASSERT_EQ(run_cli("generate modal --frames 40 --sigma 0.1 --seed 3 --out " + a.string()).code, 0);
  ASSERT_EQ(run_cli("generate modal --frames 40 --sigma 0.1 --seed 3 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Cli, TrainForecastLandscapePipeline) {
  const fs::path dir = small_run("pipeline");
  ASSERT_EQ(run_cli("train " + (dir / "run.json").string()).code, 0);
  const fs::path out = dir / "out";
  for (const char* f : {"checkpoint.shrd", "log.jsonl", "equations.txt", "sensors.csv", "selection.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(line_count(out / "log.jsonl"), 3u);

  // Same manifest config, same bytes.
  const std::string first = slurp(out / "checkpoint.shrd");
  ASSERT_EQ(run_cli("train " + (dir / "run.json").string()).code, 0);
  EXPECT_EQ(slurp(out / "checkpoint.shrd"), first);
  EXPECT_EQ(read_json(out / "manifest.json")["command"], "train");

  const std::string common = "--checkpoint " + (out / "checkpoint.shrd").string() + " --field " + (dir / "field.fld").string();
  const fs::path fc = dir / "fc";
  ASSERT_EQ(run_cli("forecast " + common + " --start 0 --horizon 274 --windows 0:100,100:200,200:275 --out " + fc.string()).code, 0);
  const json rep = read_json(fc / "forecast.json");
  ASSERT_EQ(rep["windows"].size(), 3u);
  EXPECT_EQ(rep["windows"][2]["end"], 275);
  EXPECT_TRUE(fs::exists(fc / "prediction.fld"));
  EXPECT_EQ(load_field(fc / "prediction.fld").frames(), 275u);

  // Horizon past the end of the record: prediction kept, windows truncated.
  const Result longer = run_cli("forecast " + common + " --horizon 500 --windows 0:250,250:501 --out " + (dir / "fc2").string());
  EXPECT_EQ(longer.code, 0);
  EXPECT_NE(longer.err.find("truncated"), std::string::npos);
  EXPECT_EQ(load_field(dir / "fc2" / "prediction.fld").frames(), 501u);

  const fs::path held = dir / "held.csv";
  {
    const auto train_sensors = read_sensor_csv(out / "sensors.csv").indices;
    std::ofstream os(held);
    std::size_t written = 0;
    for (std::size_t i = 0; i < 36 && written < 4; ++i)
      if (std::find(train_sensors.begin(), train_sensors.end(), i) == train_sensors.end()) os << i << "\n", ++written;
  }
  ASSERT_EQ(run_cli("forecast " + common + " --horizon 20 --held-out-sensors " + held.string() + " --out " + (dir / "fc3").string()).code, 0);
  EXPECT_EQ(line_count(dir / "fc3" / "traces.csv"), 1u + 4u * 21u);

  EXPECT_EQ(run_cli("landscape " + common + " --grid 4 --out " + (dir / "ls_bad").string()).code, 2);
  ASSERT_EQ(run_cli("landscape " + common + " --alpha 5 --grid 21 --segments 5 --out " + (dir / "ls").string()).code, 0);
  EXPECT_EQ(line_count(dir / "ls" / "landscape.csv"), 442u);
  const json conv = read_json(dir / "ls" / "convexity.json");
  EXPECT_TRUE(conv["center_equals_base"].get<bool>());
  EXPECT_EQ(conv["tolerance"].get<double>(), 1e-7);

  ASSERT_EQ(run_cli("landscape " + common + " --alpha 0 --grid 5 --out " + (dir / "ls0").string()).code, 0);
  EXPECT_TRUE(read_json(dir / "ls0" / "convexity.json")["convex"].get<bool>());
}

TEST(Cli, KoopmanModeOverride) {
  const fs::path dir = small_run("koopman");
  ASSERT_EQ(run_cli("train " + (dir / "run.json").string() + " --mode koopman").code, 0);
  const CheckpointData c = load_checkpoint(dir / "out" / "checkpoint.shrd");
  EXPECT_EQ(c.model.mode(), Mode::Koopman);
  EXPECT_EQ(c.model.ensemble.size(), 1u);
  EXPECT_EQ(library_size(c.model.ensemble.models[0].spec), 4u);
  EXPECT_EQ(run_cli("train " + (dir / "run.json").string() + " --mode dmd").code, 2);
}

TEST(Cli, ForecastDimensionMismatchExitsTwo) {
  const fs::path dir = small_run("mismatch");
  ASSERT_EQ(run_cli("train " + (dir / "run.json").string()).code, 0);
  const fs::path other = dir / "other.fld";
  ASSERT_EQ(run_cli("generate modal --frames 100 --height 5 --width 5 --out " + other.string()).code, 0);
  EXPECT_EQ(run_cli("forecast --checkpoint " + (dir / "out" / "checkpoint.shrd").string() + " --field " + other.string()).code, 2);
}
