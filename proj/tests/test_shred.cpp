#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sshred/data/generators.hpp"
#include "sshred/data/windows.hpp"
#include "sshred/diff/gradcheck.hpp"
#include "sshred/shred/checkpoint.hpp"
#include "sshred/shred/select.hpp"

using namespace sshred;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sshred_tests";
  fs::create_directories(dir);
  return dir / name;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.lag = 4;
  c.latent = 2;
  c.gru_layers = 1;
  c.decoder_hidden = {8};
  c.dropout = 0.0;
  c.epochs = 5;
  c.batch_size = 16;
  c.lr = 1e-2;
  c.dt = 0.1;
  c.substeps = 4;
  c.threshold_interval = 2;
  c.threshold_low = 0.01;
  c.threshold_high = 0.1;
  c.ensemble_size = 3;
  c.seed = 3;
  c.log_wall_time = false;
  return c;
}

Field modal_field(std::size_t T, double dt, std::size_t H = 6, std::size_t W = 6) {
  auto r = gen_modal_field(H, W, {{0, 1.0, 2.0, 0.0}, {2, 0.5, 3.0, 0.4}}, T, dt, 0.0, 1);
  return standardize(r.field);
}

struct Fixture {
  Field field;
  WindowedDataset ds;
  ShredModel model;
};

Fixture make_fixture(const TrainConfig& c, std::size_t T = 60, std::size_t sensors = 5) {
  Fixture f;
  f.field = modal_field(T, c.dt);
  f.ds = make_windows(f.field, select_sensors(f.field, sensors, 2), c.lag, {c.train_fraction, c.validation_fraction});
  f.model = init_model(c, sensors, f.field.points());
  return f;
}

std::vector<std::size_t> iota(std::size_t n, std::size_t from = 0) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = from + i;
  return v;
}

void randomize_xi(ShredModel& m, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  for (auto& mem : m.ensemble.models) {
    RowMat c = mem.coefficients();
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = scale * rng.normal();
    mem.set_coefficients(c);
  }
}

double eval_loss(const ShredModel& m, const WindowedDataset& ds) {
  NoGradGuard ng;
  return combined_loss(iota(ds.train.end - 1), m, ds, ds.train.end, false, nullptr).total.item();
}

nlohmann::json log_json(const std::vector<EpochLog>& log) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : log) j.push_back(e.to_json());
  return j;
}

void expect_same_params(const ShredModel& a, const ShredModel& b) {
  const auto pa = a.named_params(), pb = b.named_params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].first, pb[i].first);
    EXPECT_EQ(pa[i].second.value().values(), pb[i].second.value().values()) << pa[i].first;
  }
  for (std::size_t i = 0; i < a.ensemble.size(); ++i) EXPECT_EQ(a.ensemble.models[i].mask, b.ensemble.models[i].mask);
}

}  // namespace

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c = tiny_config();
  c.trig = {{TrigTerm::Kind::Sin, 1.0}, {TrigTerm::Kind::Cos, 2.0}};
  c.mode = Mode::Sindy;
  c.max_degree = 2;
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.library(), c.library());
}

TEST(TrainConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(train_config_from_json({{"latnet", 3}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"threshold_low", 2.0}, {"threshold_high", 1.0}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"lag", -1}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"mode", "dmd"}}), ConfigError);
  EXPECT_EQ(train_config_from_json(nlohmann::json::object()).epochs, 1000u);
}

TEST(TrainConfig, KoopmanModeRestrictsLibrary) {
  TrainConfig c = tiny_config();
  c.mode = Mode::Koopman;
  c.max_degree = 3;
  c.trig = {{TrigTerm::Kind::Sin, 1.0}};
  EXPECT_EQ(library_size(c.library()), 2u);
  const ShredModel m = init_model(c, 3, 10);
  EXPECT_EQ(m.ensemble.size(), 1u);
}

TEST(ShredModel, LatentWidthsAgree) {
  ShredModel m = init_model(tiny_config(), 3, 10);
  EXPECT_NO_THROW(m.check_consistency());
  EXPECT_EQ(m.sensors(), 3u);
  EXPECT_EQ(m.points(), 10u);
  m.config.latent = 3;
  EXPECT_THROW(m.check_consistency(), ShapeError);
}

TEST(ShredModel, InitDeterministicPerSeed) {
  const auto a = init_model(tiny_config(), 3, 10), b = init_model(tiny_config(), 3, 10);
  expect_same_params(a, b);
}

TEST(CombinedLoss, ZeroDecoderGivesTargetMeanSquare) {
  const TrainConfig c = tiny_config();
  Fixture f = make_fixture(c);
  for (auto& l : f.model.decoder.layers) {
    l.w.mutable_value().fill(0.0);
    l.b.mutable_value().fill(0.0);
  }
  const auto starts = iota(10, 3);
  const LossTerms lt = combined_loss(starts, f.model, f.ds, f.ds.count(), false, nullptr);
  double ms = 0.0;
  for (auto b : starts) ms += f.ds.target(b).squaredNorm();
  ms /= static_cast<double>(starts.size() * f.ds.points());
  EXPECT_NEAR(lt.recon, ms, 1e-12);
}

TEST(CombinedLoss, StationaryLatentsGiveZeroDynamics) {
  Field flat;
  flat.data = RowMat::Constant(30, 12, 0.25);
  flat.data.col(3).setConstant(0.75);
  for (Mode mode : {Mode::Sindy, Mode::Koopman}) {
    TrainConfig c = tiny_config();
    c.mode = mode;
    const WindowedDataset ds = make_windows(flat, {{0, 3, 7}, 0}, c.lag);
    const ShredModel m = init_model(c, 3, 12);
    const LossTerms lt = combined_loss(iota(8), m, ds, ds.count(), false, nullptr);
    EXPECT_EQ(lt.dynamics, 0.0) << to_string(mode);
    EXPECT_NEAR(lt.total.item(), lt.recon, 1e-15);
  }
}

TEST(CombinedLoss, RejectsWindowWithoutPartner) {
  const TrainConfig c = tiny_config();
  const Fixture f = make_fixture(c);
  EXPECT_THROW(combined_loss({f.ds.train.end - 1}, f.model, f.ds, f.ds.train.end, false, nullptr), ConfigError);
  EXPECT_NO_THROW(combined_loss({f.ds.train.end - 2}, f.model, f.ds, f.ds.train.end, false, nullptr));
  EXPECT_THROW(combined_loss({}, f.model, f.ds, f.ds.train.end, false, nullptr), ConfigError);
}

TEST(CombinedLoss, GradientMatchesFiniteDifferences) {
  TrainConfig c = tiny_config();
  c.decoder_hidden = {5};
  Fixture f = make_fixture(c, 30, 3);
  randomize_xi(f.model, 4);
  std::vector<Var> params;
  for (auto& [_, p] : f.model.named_params()) params.push_back(p);
  const auto starts = iota(4, 2);
  const double err = finite_diff_check(
      [&] { return combined_loss(starts, f.model, f.ds, f.ds.count(), false, nullptr).total; }, params);
  EXPECT_LT(err, 1e-6);
}

TEST(CombinedLoss, EveryParameterReceivesGradient) {
  TrainConfig c = tiny_config();
  Fixture f = make_fixture(c);
  randomize_xi(f.model, 5);
  const LossTerms lt = combined_loss(iota(16), f.model, f.ds, f.ds.count(), true, nullptr);
  for (auto& [_, p] : f.model.named_params()) p.zero_grad();
  backward(lt.total);
  for (const auto& [name, p] : f.model.named_params()) {
    ASSERT_TRUE(p.has_grad()) << name;
    EXPECT_GT(p.grad().mat().cwiseAbs().maxCoeff(), 0.0) << name;
  }
  for (const auto& m : f.model.ensemble.models)
    for (std::size_t i = 0; i < m.xi.grad().numel(); ++i) EXPECT_NE(m.xi.grad()[i], 0.0);
}

TEST(CombinedLoss, KoopmanMatchesSindyWithLinearLibrary) {
  TrainConfig ks = tiny_config();
  ks.mode = Mode::Koopman;
  ks.koopman_m_max = 1;
  TrainConfig ss = tiny_config();
  ss.include_constant = false;
  ss.max_degree = 1;
  ss.ensemble_size = 1;
  Fixture fk = make_fixture(ks);
  ShredModel sm = init_model(ss, fk.model.sensors(), fk.model.points());
  randomize_xi(fk.model, 6);
  sm.ensemble.models[0].set_coefficients(fk.model.ensemble.models[0].coefficients());
  sm.gru = fk.model.gru;
  sm.decoder = fk.model.decoder;
  const auto starts = iota(20);
  const double a = combined_loss(starts, fk.model, fk.ds, fk.ds.count(), false, nullptr).dynamics;
  const double b = combined_loss(starts, sm, fk.ds, fk.ds.count(), false, nullptr).dynamics;
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(a, b, 1e-10);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  TrainConfig c = tiny_config();
  c.epochs = 0;
  Fixture f = make_fixture(c);
  const ShredModel before = f.model.clone();
  Trainer t(f.model, f.ds);
  EXPECT_TRUE(t.run().empty());
  expect_same_params(before, f.model);
}

TEST(Train, SmokeRunReducesLoss) {
  TrainConfig c;
  c.lag = 10;
  c.latent = 2;
  c.gru_layers = 2;
  c.gru_hidden = 16;
  c.decoder_hidden = {32, 32};
  c.dropout = 0.0;
  c.epochs = 50;
  c.batch_size = 64;
  c.lr = 5e-3;
  c.dt = 0.02;
  c.threshold_interval = 25;
  c.threshold_low = 0.01;
  c.threshold_high = 0.1;
  c.ensemble_size = 2;
  c.seed = 1;
  c.log_wall_time = false;
  auto r = gen_modal_field(16, 16, {{1, 1.0, 2 * std::numbers::pi, 0.0}}, 2000, c.dt, 0.0, 1);
  const Field fld = standardize(r.field);
  const WindowedDataset ds = make_windows(fld, select_sensors(fld, 20, 7), c.lag);
  ShredModel m = init_model(c, 20, fld.points());
  const double initial = eval_loss(m, ds);
  Trainer t(m, ds);
  t.run();
  const double final_loss = eval_loss(m, ds);
  EXPECT_LT(final_loss, 0.25 * initial) << "initial " << initial << " final " << final_loss;
}

TEST(Train, PruningScheduleCount) {
  TrainConfig c = tiny_config();
  c.epochs = 1000;
  c.threshold_interval = 100;
  c.batch_size = 64;
  c.lr = 1e-3;
  Fixture f = make_fixture(c, 20, 2);
  Trainer t(f.model, f.ds);
  const auto& log = t.run();
  std::size_t events = 0;
  for (const auto& e : log) events += e.pruned;
  EXPECT_EQ(events, 10u);
  EXPECT_EQ(t.pruning_events(), 10u);
  EXPECT_TRUE(log[99].pruned);
  EXPECT_FALSE(log[100].pruned);
}

TEST(Train, MaskSizesNeverGrow) {
  TrainConfig c = tiny_config();
  c.epochs = 12;
  c.threshold_low = 0.05;
  c.threshold_high = 0.5;
  Fixture f = make_fixture(c);
  Trainer t(f.model, f.ds);
  const auto& log = t.run();
  for (std::size_t e = 1; e < log.size(); ++e)
    for (std::size_t i = 0; i < log[e].nnz.size(); ++i) EXPECT_LE(log[e].nnz[i], log[e - 1].nnz[i]);
  EXPECT_TRUE(log.front().sindy_init);
}

TEST(Train, DeterministicGivenSeed) {
  TrainConfig c = tiny_config();
  c.dropout = 0.1;
  Fixture a = make_fixture(c), b = make_fixture(c);
  Trainer ta(a.model, a.ds), tb(b.model, b.ds);
  EXPECT_EQ(log_json(ta.run()), log_json(tb.run()));
  expect_same_params(a.model, b.model);
}

TEST(Train, NonFiniteLossAbortsWithDiagnostic) {
  Fixture f = make_fixture(tiny_config());
  f.model.decoder.layers.back().b.mutable_value()[0] = std::numeric_limits<double>::quiet_NaN();
  Trainer t(f.model, f.ds);
  try {
    t.run();
    FAIL();
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 0"), std::string::npos);
    EXPECT_NE(msg.find("batch 0"), std::string::npos);
    EXPECT_NE(msg.find("recon="), std::string::npos);
  }
}

TEST(Train, NullEnsembleKeepsTrainingReconstruction) {
  TrainConfig c = tiny_config();
  c.threshold_low = 1e6;
  c.threshold_high = 1e6;
  c.threshold_interval = 1;
  c.epochs = 3;
  Fixture f = make_fixture(c);
  Trainer t(f.model, f.ds);
  const auto& log = t.run();
  EXPECT_TRUE(f.model.ensemble.all_null());
  EXPECT_EQ(log.back().dynamics, 0.0);
  EXPECT_TRUE(std::isfinite(log.back().recon));
}

TEST(Select, SingletonTieBreakAndGate) {
  EXPECT_EQ(select_member({0.7}, {4}), 0u);
  EXPECT_EQ(select_member({0.2, 0.2}, {9, 5}), 1u);
  EXPECT_EQ(select_member({0.1, 1.0}, {6, 1}), 0u);
  EXPECT_EQ(select_member({0.1, 0.109, 0.2}, {6, 3, 1}), 1u);
  EXPECT_EQ(select_member({0.1, std::numeric_limits<double>::infinity()}, {6, 0}), 0u);
}

TEST(Select, AllDivergedListsMembers) {
  const double inf = std::numeric_limits<double>::infinity();
  try {
    select_member({inf, inf}, {1, 2});
    FAIL();
  } catch (const SelectionError& e) {
    EXPECT_NE(std::string(e.what()).find("[1] inf"), std::string::npos);
  }
}

TEST(Select, DiscoveredModelOnLatents) {
  TrainConfig c = tiny_config();
  c.ensemble_size = 2;
  ShredModel m = init_model(c, 3, 4);
  // z' = G z with a rotation; member 0 exact, member 1 exact plus a spurious term.
  RowMat xi = RowMat::Zero(3, 2);
  xi(1, 1) = -1.0;
  xi(2, 0) = 1.0;
  m.ensemble.models[0].set_coefficients(xi);
  xi(0, 0) = 0.5;
  m.ensemble.models[1].set_coefficients(xi);
  m.ensemble.models[0].mask(0, 0) = m.ensemble.models[0].mask(0, 1) = false;
  m.ensemble.models[0].mask(1, 0) = m.ensemble.models[0].mask(2, 1) = false;
  Eigen::VectorXd z0(2);
  z0 << 1.0, 0.0;
  const RowMat Z = sindy_rollout(z0, m.ensemble.models[0], 40);
  const Selection s = select_discovered_model(m, Z);
  EXPECT_EQ(s.index, 0u);
  EXPECT_EQ(s.rollout_mse[0], 0.0);
  EXPECT_FALSE(s.equations.empty());
}

TEST(Checkpoint, RoundTripReproducesForwardOutputs) {
  TrainConfig c = tiny_config();
  Fixture f = make_fixture(c);
  Trainer t(f.model, f.ds);
  t.run(3);
  const fs::path p = temp_path("rt.shrd");
  save_checkpoint(p, f.model, &t, {{"note", "x"}});
  const CheckpointData d = load_checkpoint(p);
  expect_same_params(f.model, d.model);
  EXPECT_EQ(d.meta["note"], "x");
  const auto idx = iota(10, 5);
  NoGradGuard ng;
  const Tensor a = decode(encode(f.ds.batch_steps(idx), f.model.gru), f.model.decoder, false).value();
  const Tensor b = decode(encode(f.ds.batch_steps(idx), d.model.gru), d.model.decoder, false).value();
  EXPECT_EQ(a.values(), b.values());
  ASSERT_TRUE(d.state.has_value());
  EXPECT_EQ(d.state->epoch, 3u);
}

TEST(Checkpoint, ResumeEqualsUninterrupted) {
  TrainConfig c = tiny_config();
  c.dropout = 0.2;
  c.epochs = 6;
  Fixture ref = make_fixture(c);
  Trainer tr(ref.model, ref.ds);
  const auto full = tr.run();

  Fixture part = make_fixture(c);
  Trainer tp(part.model, part.ds);
  tp.run(3);
  const fs::path p = temp_path("resume.shrd");
  save_checkpoint(p, part.model, &tp);
  CheckpointData d = load_checkpoint(p);
  Trainer tq(d.model, part.ds);
  resume(tq, *d.state);
  const auto rest = tq.run();
  ASSERT_EQ(rest.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rest[i].to_json(), full[i + 3].to_json());
  expect_same_params(ref.model, d.model);
}

TEST(Checkpoint, TruncationNamesSection) {
  Fixture f = make_fixture(tiny_config());
  const fs::path p = temp_path("trunc.shrd");
  save_checkpoint(p, f.model);
  const auto size = fs::file_size(p);
  fs::resize_file(p, size - 10);
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const ChecksumError& e) {
    EXPECT_EQ(e.section(), "mask.2");
    EXPECT_NE(std::string(e.what()).find("mask.2"), std::string::npos);
  }
}

TEST(Checkpoint, FlippedByteFailsChecksum) {
  Fixture f = make_fixture(tiny_config());
  const fs::path p = temp_path("flip.shrd");
  save_checkpoint(p, f.model);
  std::string bytes;
  {
    std::ifstream is(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  bytes[bytes.size() - 20] ^= 0x10;
  {
    std::ofstream os(p, std::ios::binary);
    os << bytes;
  }
  EXPECT_THROW(load_checkpoint(p), ChecksumError);
}

TEST(Checkpoint, VersionAndMagicChecked) {
  Fixture f = make_fixture(tiny_config());
  const fs::path p = temp_path("ver.shrd");
  save_checkpoint(p, f.model);
  std::fstream fsx(p, std::ios::binary | std::ios::in | std::ios::out);
  fsx.seekp(4);
  fsx.put(7);
  fsx.close();
  EXPECT_THROW(load_checkpoint(p), VersionError);
  fsx.open(p, std::ios::binary | std::ios::in | std::ios::out);
  fsx.put('X');
  fsx.close();
  EXPECT_THROW(load_checkpoint(p), FormatError);
}
