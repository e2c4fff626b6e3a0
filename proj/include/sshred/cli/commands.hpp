#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "sshred/sshred.hpp"

namespace sshred::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kAcceptance = 4 };

// Runs fn and maps library errors onto the exit-code contract.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const SelectionError& e) {
    std::cerr << "model selection failed: " << e.what() << "\n";
    return kNumerical;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  os << std::setw(2) << j << "\n";
}

inline json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("cannot create output directory " + p.string());
}

// Config, seeds and build information next to every command's outputs.
inline void write_manifest(const fs::path& dir, const std::string& command, const json& options) {
  json m{{"command", command},
         {"options", options},
         {"version", kVersion},
         {"compiler", __VERSION__},
         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION)},
         {"threads", worker_count()}};
  write_json(dir / "manifest.json", m);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  std::string kind;
  fs::path out;
  std::size_t frames = 0;  // 0: kind default
  double dt = 0.0;         // 0: kind default
  std::uint64_t seed = 0;
  // modal
  std::size_t height = 16, width = 16, modes = 2;
  std::vector<double> omegas;
  double sigma = 0.01;
  // pendulum
  double theta0 = 1.0, omega0 = 0.0, noise = 0.0;
  PendulumCoeffs coeffs;
  // sine
  double x0 = 2.0, v0 = 0.0;

  json to_json() const {
    return {{"kind", kind}, {"out", out.string()}, {"frames", frames}, {"dt", dt}, {"seed", seed},
            {"height", height}, {"width", width}, {"modes", modes}, {"omegas", omegas}, {"sigma", sigma},
            {"theta0", theta0}, {"omega0", omega0}, {"noise", noise},
            {"coeffs", {coeffs.quad, coeffs.cubic, coeffs.grav, coeffs.sin_vel}}, {"x0", x0}, {"v0", v0}};
  }
};

inline int cmd_generate(const GenerateOptions& o) {
  Field field;
  json truth;
  if (o.kind == "modal") {
    if (o.modes == 0) throw ConfigError("generate modal: need at least one mode");
    std::vector<ModeSpec> modes;
    for (std::size_t i = 0; i < o.modes; ++i) {
      ModeSpec m;
      m.pattern = i;
      m.omega = i < o.omegas.size() ? o.omegas[i] : 2.0 * std::numbers::pi * static_cast<double>(i + 1);
      m.amplitude = 1.0 / static_cast<double>(i + 1);
      modes.push_back(m);
    }
    auto r = gen_modal_field(o.height, o.width, modes, o.frames ? o.frames : 3000, o.dt > 0 ? o.dt : 0.02, o.sigma, o.seed);
    field = std::move(r.field);
    truth = std::move(r.truth);
  } else if (o.kind == "pendulum") {
    PendulumSpec s;
    s.theta0 = o.theta0;
    s.omega0 = o.omega0;
    s.coeffs = o.coeffs;
    if (o.frames) s.frames = o.frames;
    if (o.dt > 0) s.dt = o.dt;
    s.height = o.height;
    s.width = o.width;
    s.noise = o.noise;
    s.seed = o.seed;
    auto r = gen_pendulum(s);
    field = std::move(r.field);
    truth = std::move(r.meta);
    json traj = json::array();
    for (Eigen::Index t = 0; t < r.truth.rows(); ++t) traj.push_back({r.truth(t, 0), r.truth(t, 1)});
    truth["trajectory"] = traj;
  } else if (o.kind == "sine") {
    const std::size_t T = o.frames ? o.frames : 2000;
    const double dt = o.dt > 0 ? o.dt : 0.02;
    field.data = gen_sine_ode(o.x0, o.v0, T, dt, 10);
    field.grid = {2};
    field.dt = dt;
    truth = {{"kind", "sine"}, {"equation", "x'' = -sin(x)"}, {"x0", o.x0}, {"v0", o.v0}, {"frames", T}, {"dt", dt}};
  } else {
    throw ConfigError("unknown generator kind '" + o.kind + "' (expected modal, pendulum or sine)");
  }
  if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
  save_field(field, o.out);
  fs::path sidecar = o.out;
  sidecar += ".json";
  write_json(sidecar, truth);
  write_manifest(o.out.has_parent_path() ? o.out.parent_path() : fs::path("."), "generate", o.to_json());
  std::cout << "wrote " << o.out.string() << " (" << field.frames() << " frames x " << field.points() << " points)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

// {"field": path, "sensors": path (optional), "sensor_count": n,
//  "out_dir": path, "train": {TrainConfig}}
struct RunConfig {
  fs::path field;
  std::optional<fs::path> sensors;
  std::size_t sensor_count = 25;
  fs::path out_dir = "run";
  TrainConfig train;

  json to_json() const {
    json j{{"field", field.string()}, {"sensor_count", sensor_count}, {"out_dir", out_dir.string()},
           {"train", sshred::to_json(train)}};
    if (sensors) j["sensors"] = sensors->string();
    return j;
  }
};

inline RunConfig run_config_from_json(const json& j) {
  static const std::set<std::string> known{"field", "sensors", "sensor_count", "out_dir", "train"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw ConfigError("run config: unknown key '" + k + "'");
  RunConfig r;
  if (!j.contains("field")) throw ConfigError("run config: missing 'field'");
  r.field = j.at("field").get<std::string>();
  if (j.contains("sensors") && !j.at("sensors").is_null()) r.sensors = fs::path(j.at("sensors").get<std::string>());
  r.sensor_count = j.value("sensor_count", r.sensor_count);
  r.out_dir = j.value("out_dir", r.out_dir.string());
  if (j.contains("train")) r.train = train_config_from_json(j.at("train"));
  r.train.validate();
  return r;
}

struct Prepared {
  Field field;  // standardized
  SensorSet sensors;
  WindowedDataset ds;
};

inline Prepared prepare(const Field& raw, const std::optional<SensorSet>& sensors, std::size_t sensor_count,
                        const TrainConfig& cfg) {
  Prepared p;
  p.field = raw.scale ? raw : standardize(raw);
  p.sensors = sensors ? *sensors
                      : select_sensors(p.field, sensor_count, stream_seed(cfg.seed, SeedStream::Sensors), true);
  p.ds = make_windows(p.field, p.sensors, cfg.lag, {cfg.train_fraction, cfg.validation_fraction});
  return p;
}

inline json scale_json(const Scale& s) { return {{"min", s.min}, {"max", s.max}}; }

struct TrainOutcome {
  ShredModel model;
  Selection selection;
  std::vector<EpochLog> log;
};

inline TrainOutcome train_and_select(const Prepared& p, const TrainConfig& cfg,
                                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  TrainOutcome out;
  out.model = init_model(cfg, p.sensors.size(), p.field.points());
  Trainer trainer(out.model, p.ds);
  trainer.on_epoch = on_epoch;
  out.log = trainer.run();
  const IndexRange val = p.ds.validation.size() >= 2 ? p.ds.validation : p.ds.train;
  out.selection = select_discovered_model(out.model, encode_range(out.model, p.ds, val));
  return out;
}

inline int cmd_train(const fs::path& config_path, std::optional<std::string> mode_override = std::nullopt) {
  require_file(config_path, "config file");
  RunConfig rc = run_config_from_json(read_json(config_path));
  if (mode_override) {
    rc.train.mode = mode_from_string(*mode_override);
    rc.train.validate();
  }
  require_file(rc.field, "field file");
  std::optional<SensorSet> sensors;
  if (rc.sensors) {
    require_file(*rc.sensors, "sensor file");
    sensors = read_sensor_csv(*rc.sensors);
  }
  ensure_dir(rc.out_dir);
  const Field raw = load_field(rc.field);
  const Prepared p = prepare(raw, sensors, rc.sensor_count, rc.train);

  std::ofstream log(rc.out_dir / "log.jsonl");
  if (!log) throw Error("cannot write " + (rc.out_dir / "log.jsonl").string());
  TrainOutcome t = train_and_select(p, rc.train, [&](const EpochLog& e) { log << e.to_json().dump() << "\n" << std::flush; });

  json meta{{"scale", scale_json(*p.field.scale)},
            {"sensor_indices", p.sensors.indices},
            {"sensor_seed", p.sensors.seed},
            {"selected", t.selection.index},
            {"selection_mse", t.selection.rollout_mse},
            {"field", rc.field.string()},
            {"field_dt", raw.dt}};
  save_checkpoint(rc.out_dir / "checkpoint.shrd", t.model, nullptr, meta);
  write_sensor_csv(p.sensors, rc.out_dir / "sensors.csv");
  {
    std::ofstream eq(rc.out_dir / "equations.txt");
    eq << t.selection.equations;
  }
  json sel = sshred::to_json(t.selection.model);
  try {
    sel["frequencies"] = analyze_linear_system(linear_generator(t.selection.model)).frequencies();
  } catch (const Error&) {  // no linear block in the library
  }
  write_json(rc.out_dir / "selection.json", sel);
  write_manifest(rc.out_dir, "train", rc.to_json());

  const auto& last = t.log.back();
  std::cout << "final loss " << last.total << " (recon " << last.recon << ", dynamics " << last.dynamics << ")\n";
  std::cout << "nnz per member:";
  for (auto n : last.nnz) std::cout << " " << n;
  std::cout << "\nselected member " << t.selection.index << ":\n" << t.selection.equations;
  return kOk;
}

// ---------------------------------------------------------------------------
// forecast

struct LoadedRun {
  CheckpointData ckpt;
  Prepared prep;
};

inline LoadedRun load_run(const fs::path& checkpoint, const fs::path& field_path) {
  require_file(checkpoint, "checkpoint");
  require_file(field_path, "field file");
  LoadedRun r;
  r.ckpt = load_checkpoint(checkpoint);
  Field raw = load_field(field_path);
  if (raw.points() != r.ckpt.model.points())
    throw ShapeError("field has " + std::to_string(raw.points()) + " points, checkpoint expects " +
                     std::to_string(r.ckpt.model.points()));
  const auto& meta = r.ckpt.meta;
  if (meta.contains("scale") && !raw.scale) {
    const Scale s{meta["scale"]["min"].get<double>(), meta["scale"]["max"].get<double>()};
    raw.data = ((raw.data.array() - s.min) / (s.max - s.min)).matrix();
    raw.scale = s;
  }
  std::optional<SensorSet> sensors;
  if (meta.contains("sensor_indices")) sensors = SensorSet{meta["sensor_indices"].get<std::vector<std::size_t>>(), 0};
  r.prep = prepare(raw, sensors, r.ckpt.model.sensors(), r.ckpt.model.config);
  return r;
}

inline SindyModel selected_member(const CheckpointData& c) {
  const std::size_t idx = c.meta.value("selected", std::size_t{0});
  if (idx >= c.model.ensemble.size()) throw FormatError("checkpoint selects a missing ensemble member");
  return c.model.ensemble.models[idx];
}

struct ForecastOptions {
  fs::path checkpoint, field, out_dir = "forecast";
  std::size_t horizon = 100;
  std::optional<std::string> windows;
  std::optional<fs::path> held_out;
  std::optional<std::size_t> start;  // window index; default: first test window

  json to_json() const {
    json j{{"checkpoint", checkpoint.string()}, {"field", field.string()}, {"out_dir", out_dir.string()},
           {"horizon", horizon}};
    if (windows) j["windows"] = *windows;
    if (held_out) j["held_out_sensors"] = held_out->string();
    if (start) j["start"] = *start;
    return j;
  }
};

inline int cmd_forecast(const ForecastOptions& o) {
  const LoadedRun run = load_run(o.checkpoint, o.field);
  const auto& ds = run.prep.ds;
  const std::size_t b = o.start.value_or(ds.test.size() ? ds.test.begin : ds.validation.begin);
  if (b >= ds.count()) throw ConfigError("forecast start window " + std::to_string(b) + " out of range");
  std::vector<IndexRange> windows = o.windows ? parse_windows(*o.windows) : std::vector<IndexRange>{{0, o.horizon + 1}};
  for (const auto& w : windows)
    if (w.end > o.horizon + 1) throw ConfigError("window end " + std::to_string(w.end) + " exceeds horizon + 1");
  ensure_dir(o.out_dir);

  const SindyModel dyn = selected_member(run.ckpt);
  const ForecastReport rep = forecast(run.ckpt.model, dyn, ds.window(b), o.horizon);

  // Truth for rows that still fall inside the record.
  const std::size_t first = ds.target_frame(b);
  const std::size_t avail = std::min<std::size_t>(o.horizon + 1, run.prep.field.frames() - first);
  const RowMat truth = run.prep.field.data.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(avail));
  std::vector<IndexRange> usable;
  for (auto w : windows) {
    if (w.begin >= avail) continue;
    if (w.end > avail) {
      std::cerr << "warning: truth ends at row " << avail << "; window " << w.begin << ":" << w.end << " truncated\n";
      w.end = avail;
    }
    usable.push_back(w);
  }
  if (usable.size() < windows.size())
    std::cerr << "warning: " << windows.size() - usable.size() << " window(s) lie beyond the available truth\n";

  json report{{"start_window", b}, {"target_frame", first}, {"horizon", o.horizon}, {"truth_rows", avail}};
  if (!usable.empty()) {
    const HorizonTable tab = horizon_mse(rep.fields.topRows(static_cast<Eigen::Index>(avail)), truth, usable);
    json rows = json::array();
    for (const auto& r : tab.rows) rows.push_back({{"begin", r.begin}, {"end", r.end}, {"mse", r.mse}});
    report["windows"] = rows;
    report["total_mse"] = tab.total;
  }
  json freqs = json::array();
  if (rep.latents.rows() >= 4)
    for (Eigen::Index j = 0; j < rep.latents.cols(); ++j)
      freqs.push_back(dominant_frequency(rep.latents.col(j), dyn.dt));
  report["latent_fft_omega"] = freqs;
  try {
    report["model_omega"] = analyze_linear_system(linear_generator(dyn)).frequencies();
  } catch (const Error&) {
  }
  json lat = json::array();
  for (Eigen::Index t = 0; t < rep.latents.rows(); ++t) {
    std::vector<double> row(rep.latents.row(t).data(), rep.latents.row(t).data() + rep.latents.cols());
    lat.push_back(row);
  }
  report["latents"] = lat;

  std::ofstream csv(o.out_dir / "traces.csv");
  csv << "sensor,step,predicted,truth\n";
  if (o.held_out) {
    require_file(*o.held_out, "held-out sensor file");
    const SensorSet held = read_sensor_csv(*o.held_out);
    const auto traces = sensor_traces(rep.fields.topRows(static_cast<Eigen::Index>(avail)), truth, held.indices, run.prep.sensors);
    csv << std::setprecision(17);
    for (const auto& tr : traces)
      for (std::size_t t = 0; t < tr.predicted.size(); ++t)
        csv << tr.index << "," << t << "," << tr.predicted[t] << "," << tr.truth[t] << "\n";
    report["held_out_sensors"] = held.indices;
  }
  Field pred;
  pred.data = rep.fields;
  pred.grid = run.prep.field.grid;
  pred.dt = run.prep.field.dt;
  pred.scale = run.prep.field.scale;
  save_field(pred, o.out_dir / "prediction.fld");
  write_json(o.out_dir / "forecast.json", report);
  write_manifest(o.out_dir, "forecast", o.to_json());
  if (report.contains("total_mse")) std::cout << "total MSE " << report["total_mse"].get<double>() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// landscape

struct LandscapeOptions {
  fs::path checkpoint, field, out_dir = "landscape";
  double alpha = 5.0;
  std::size_t grid = 21;
  std::uint64_t seed_x = 1, seed_y = 2;
  std::size_t batch = 64;
  std::size_t segments = 100, samples = 9;
  double tolerance = 1e-7;

  json to_json() const {
    return {{"checkpoint", checkpoint.string()}, {"field", field.string()}, {"out_dir", out_dir.string()},
            {"alpha", alpha}, {"grid", grid}, {"seeds", {seed_x, seed_y}}, {"batch", batch},
            {"segments", segments}, {"samples", samples}, {"tolerance", tolerance}};
  }
};

// First `batch` training windows that have a dynamics partner.
inline std::vector<std::size_t> landscape_batch(const WindowedDataset& ds, const TrainConfig& cfg, std::size_t batch) {
  std::vector<std::size_t> starts;
  for (std::size_t b = ds.train.begin; b + cfg.lookahead() < ds.train.end && starts.size() < batch; ++b)
    starts.push_back(b);
  if (starts.empty()) throw ConfigError("landscape: training split has no usable windows");
  return starts;
}

inline int cmd_landscape(const LandscapeOptions& o) {
  if (o.grid < 3 || o.grid % 2 == 0) throw ConfigError("--grid must be odd and >= 3, got " + std::to_string(o.grid));
  if (!(o.alpha >= 0)) throw ConfigError("--alpha must be >= 0");
  const LoadedRun run = load_run(o.checkpoint, o.field);
  ensure_dir(o.out_dir);
  const auto& model = run.ckpt.model;
  const ModelLoss loss = fixed_batch_loss(run.prep.ds, landscape_batch(run.prep.ds, model.config, o.batch), run.prep.ds.train.end);
  const LandscapeGrid g = landscape_scan(model, loss, o.alpha, o.grid, o.seed_x, o.seed_y);

  std::ofstream csv(o.out_dir / "landscape.csv");
  csv << "t_x,t_y,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      csv << g.t(i) << "," << g.t(j) << "," << g.loss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << "\n";

  const ConvexityResult grid_check = convexity_check(grid_segments(g), o.tolerance);
  ConvexityResult seg_check;
  if (o.segments > 0 && o.alpha > 0)
    seg_check = convexity_check(sample_segments(model, loss, o.alpha, o.seed_x, o.seed_y, o.segments, o.samples,
                                                split_seed(o.seed_x ^ (o.seed_y << 1), 99)),
                                o.tolerance);
  json verdict{{"base_loss", g.base_loss},
               {"center_equals_base", g.loss(static_cast<Eigen::Index>(g.n / 2), static_cast<Eigen::Index>(g.n / 2)) == g.base_loss},
               {"grid_segments", grid_check.segments},
               {"grid_pass_fraction", grid_check.pass_fraction()},
               {"random_segments", seg_check.segments},
               {"random_pass_fraction", seg_check.pass_fraction()},
               {"tolerance", o.tolerance},
               {"convex", grid_check.pass_fraction() >= 0.95 && seg_check.pass_fraction() >= 0.95}};
  json viol = json::array();
  for (const auto& v : grid_check.violations)
    if (viol.size() < 50) viol.push_back({{"segment", v.segment}, {"triple", {v.a, v.mid, v.b}}, {"f", {v.fa, v.fmid, v.fb}}});
  verdict["grid_violations"] = viol;
  write_json(o.out_dir / "convexity.json", verdict);
  write_manifest(o.out_dir, "landscape", o.to_json());
  std::cout << "convexity: " << (verdict["convex"].get<bool>() ? "PASS" : "FAIL") << " (grid "
            << grid_check.pass_fraction() << ", random segments " << seg_check.pass_fraction() << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// validate-theory

struct TheoryOptions {
  std::string suite;
  fs::path out_dir = "theory";
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;

  json to_json() const {
    json j{{"suite", suite}, {"out_dir", out_dir.string()}};
    if (trials) j["trials"] = *trials;
    if (seed) j["seed"] = *seed;
    return j;
  }
};

inline int cmd_validate_theory(const TheoryOptions& o) {
  json report;
  bool ok = false;
  if (o.suite == "thm1") {
    ScalingConfig cfg;
    if (o.trials) cfg.trials = *o.trials;
    if (o.seed) cfg.seed = *o.seed;
    const ScalingReport r = theory_scaling_experiment(cfg);
    report = r.to_json();
    ok = r.passed();
    std::cout << "slope " << r.slope_n.slope << " [" << r.slope_n.ci_low() << ", " << r.slope_n.ci_high()
              << "], noise-doubling ratio " << std::exp(r.log_ratio_2s) << "\n";
  } else if (o.suite == "thm2-qual") {
    GrowthConfig cfg;
    if (o.seed) cfg.seed = *o.seed;
    const GrowthReport r = error_growth_comparison(cfg);
    report = r.to_json();
    ok = r.nn_worse_at_long_horizon();
    std::cout << "error at H=" << r.horizons.back() << ": network " << r.nn_error.back() << ", SINDy "
              << r.sindy_error.back() << "\n";
  } else if (o.suite == "sine") {
    SineConfig cfg;
    if (o.seed) cfg.seed = *o.seed;
    const SineReport r = sine_comparison(cfg);
    report = r.to_json();
    ok = r.passed();
    std::cout << "extrapolation MSE: SINDy " << r.sindy_mse << ", GRU " << r.gru_mse << "\n" << r.equations;
  } else {
    throw ConfigError("unknown suite '" + o.suite + "' (expected thm1, thm2-qual or sine)");
  }
  ensure_dir(o.out_dir);
  report["suite"] = o.suite;
  write_json(o.out_dir / ("report_" + o.suite + ".json"), report);
  write_manifest(o.out_dir, "validate-theory", o.to_json());
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kAcceptance;
}

}  // namespace sshred::cli
