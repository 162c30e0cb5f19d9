#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "imasp/imasp.hpp"
#include "selftest.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Options {
  std::string config;
  std::string out = "out";
  std::uint64_t seed_offset = 0;
  int threads = 1;
};

int generate(const Options& o) {
  const auto cfg = imasp::load_config(o.config);
  std::filesystem::create_directories(o.out);
  imasp::FieldSampler sampler(cfg.field, cfg.domain());
  for (auto seed : cfg.seeds) {
    seed += o.seed_offset;
    const auto path = std::filesystem::path(o.out) / ("field_" + std::to_string(seed) + ".csv");
    imasp::save_field_csv(sampler.sample(seed), path);
    std::cout << path.string() << '\n';
  }
  return 0;
}

int run(const Options& o) {
  const auto cfg = imasp::load_config(o.config);
  const auto records = imasp::run_experiment(cfg, o.threads, o.seed_offset);
  const auto domain = cfg.domain();
  imasp::emit_results(records, o.out, cfg.ttest_alpha, &domain);
  std::cout << imasp::summary_csv(records, cfg.ttest_alpha);
  return 0;
}

int bounds(const Options& o) {
  const auto cfg = imasp::load_config(o.config);
  std::printf("seed,model,lower,upper,gap,paths,converged,truncated_mass\n");
  const double tail = imasp::make_partition(0.0, 1.0, cfg.planner.intervals, cfg.planner.truncation)
                          .truncated_mass();
  for (auto seed : cfg.seeds) {
    seed += o.seed_offset;
    const auto inst = imasp::make_instance(cfg, seed);
    for (auto model : {imasp::Model::LGP, imasp::Model::GP}) {
      const imasp::PlanningContext ctx(cfg.domain(), inst.fitted, model, cfg.horizon());
      auto pc = cfg.planner;
      pc.seed = cfg.planner.seed + seed;
      const auto r = imasp::urtdp(ctx, inst.d0, inst.s0, pc);
      std::printf("%llu,%s,%.10g,%.10g,%.6g,%ld,%d,%.3g\n", static_cast<unsigned long long>(seed),
                  model == imasp::Model::GP ? "gp" : "lgp", r.root.lower, r.root.upper,
                  r.root.gap(), r.simulated_paths, r.converged ? 1 : 0, tail);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive multi-robot exploration of hotspot fields"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "experiment config (key = value)");
    if (needs_config) c->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed-offset", o.seed_offset, "added to every configured seed");
    sub->add_option("--threads", o.threads, "worker threads for seeds")->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("generate", "sample synthetic fields to CSV");
  auto* runc = app.add_subcommand("run", "run the configured policy comparison");
  auto* bnd = app.add_subcommand("bounds", "print URTDP root bounds for each seed");
  auto* self = app.add_subcommand("selftest", "run the built-in invariant checks");
  add_common(gen, true);
  add_common(runc, true);
  add_common(bnd, true);
  add_common(self, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (gen->parsed()) return generate(o);
    if (runc->parsed()) return run(o);
    if (bnd->parsed()) return bounds(o);
    if (self->parsed()) return imasp::tools::selftest(std::cout) ? 0 : kRuntimeError;
  } catch (const imasp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
