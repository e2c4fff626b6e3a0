#include <iostream>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "sshred/cli/commands.hpp"

using namespace sshred::cli;

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep large tensor buffers on the heap instead of fresh mmaps per op.
  mallopt(M_MMAP_THRESHOLD, 16 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"Sparse-sensor field reconstruction with latent SINDy dynamics", "sshred"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "write a synthetic FLD1 field and a JSON ground-truth sidecar");
  g->add_option("kind", gen.kind, "modal, pendulum or sine")->required();
  g->add_option("--out,-o", gen.out, "output field path")->required();
  g->add_option("--frames", gen.frames, "number of frames (0: generator default)");
  g->add_option("--dt", gen.dt, "time step per frame (0: generator default)");
  g->add_option("--seed", gen.seed, "noise seed");
  g->add_option("--height", gen.height, "grid rows");
  g->add_option("--width", gen.width, "grid columns");
  g->add_option("--modes", gen.modes, "modal: number of modes");
  g->add_option("--omegas", gen.omegas, "modal: angular frequencies (default 2*pi*k)")->delimiter(',');
  g->add_option("--sigma", gen.sigma, "modal: Gaussian noise level");
  g->add_option("--theta0", gen.theta0, "pendulum: initial angle");
  g->add_option("--omega0", gen.omega0, "pendulum: initial angular velocity");
  g->add_option("--noise", gen.noise, "pendulum: pixel noise");
  g->add_option("--quad", gen.coeffs.quad, "pendulum: zdot^2 coefficient");
  g->add_option("--cubic", gen.coeffs.cubic, "pendulum: zdot^3 coefficient");
  g->add_option("--grav", gen.coeffs.grav, "pendulum: sin(z) coefficient");
  g->add_option("--sin-vel", gen.coeffs.sin_vel, "pendulum: sin(zdot) coefficient");
  g->add_option("--x0", gen.x0, "sine: initial position");
  g->add_option("--v0", gen.v0, "sine: initial velocity");

  std::string train_config;
  std::string train_mode;
  auto* t = app.add_subcommand("train", "train a model from a JSON run config");
  t->add_option("config", train_config, "run config (JSON)")->required();
  t->add_option("--mode", train_mode, "override the dynamics mode: sindy or koopman");

  ForecastOptions fc;
  std::string held_out, windows;
  std::size_t start = 0;
  auto* f = app.add_subcommand("forecast", "roll the latent model forward and decode");
  f->add_option("--checkpoint", fc.checkpoint, "checkpoint file")->required();
  f->add_option("--field", fc.field, "FLD1 field with the truth")->required();
  f->add_option("--horizon", fc.horizon, "number of rollout steps");
  auto* wopt = f->add_option("--windows", windows, "MSE windows, e.g. 0:100,100:200,200:275");
  auto* hopt = f->add_option("--held-out-sensors", held_out, "CSV of held-out locations for trace export");
  auto* sopt = f->add_option("--start", start, "window index to start from (default: first test window)");
  f->add_option("--out", fc.out_dir, "output directory");

  LandscapeOptions ls;
  std::vector<std::uint64_t> seeds;
  auto* l = app.add_subcommand("landscape", "scan the loss over a random 2-D parameter plane");
  l->add_option("--checkpoint", ls.checkpoint, "checkpoint file")->required();
  l->add_option("--field", ls.field, "FLD1 field")->required();
  l->add_option("--alpha", ls.alpha, "perturbation scale");
  l->add_option("--grid", ls.grid, "grid resolution (odd, >= 3)");
  auto* seed_opt = l->add_option("--seeds", seeds, "direction seeds x,y")->delimiter(',')->expected(2);
  l->add_option("--batch", ls.batch, "training windows in the fixed loss batch");
  l->add_option("--segments", ls.segments, "random segments for the convexity check");
  l->add_option("--samples", ls.samples, "samples per random segment");
  l->add_option("--tolerance", ls.tolerance, "midpoint convexity tolerance");
  l->add_option("--out", ls.out_dir, "output directory");

  TheoryOptions th;
  std::size_t trials = 0;
  std::uint64_t theory_seed = 0;
  auto* v = app.add_subcommand("validate-theory", "run an error-scaling or baseline-comparison suite");
  v->add_option("--suite", th.suite, "thm1, thm2-qual or sine")->required();
  auto* trials_opt = v->add_option("--trials", trials, "Monte-Carlo trials per cell (thm1)");
  auto* tseed_opt = v->add_option("--seed", theory_seed, "seed");
  v->add_option("--out", th.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (*g) return guarded([&] { return cmd_generate(gen); });
  if (*t)
    return guarded([&] {
      return cmd_train(train_config, train_mode.empty() ? std::nullopt : std::optional<std::string>(train_mode));
    });
  if (*f) {
    if (*wopt) fc.windows = windows;
    if (*hopt) fc.held_out = held_out;
    if (*sopt) fc.start = start;
    return guarded([&] { return cmd_forecast(fc); });
  }
  if (*l) {
    if (*seed_opt) {
      ls.seed_x = seeds[0];
      ls.seed_y = seeds[1];
    }
    return guarded([&] { return cmd_landscape(ls); });
  }
  if (*v) {
    if (*trials_opt) th.trials = trials;
    if (*tseed_opt) th.seed = theory_seed;
    return guarded([&] { return cmd_validate_theory(th); });
  }
  return kUsage;
}
