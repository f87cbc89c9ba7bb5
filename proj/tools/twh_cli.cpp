// Command line driver: stationary / orbits / homology / continue / validate /
// report stages over a JSON experiment configuration.

#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>

#include "twh/pipeline.hpp"

namespace {

struct GlobalArgs {
  std::string config;
  std::string out = "twh_out";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  double tol_scale = 1.0;
};

void print_error(const char* type, const std::string& message) {
  nlohmann::json err;
  err["error"] = {{"type", type}, {"message", message}};
  std::fprintf(stderr, "%s\n", err.dump().c_str());
}

int dispatch(const std::string& verb, const GlobalArgs& args) {
  using namespace twh;
  try {
    auto cfg = load_config(args.config, args.tol_scale, args.seed, args.threads);
    fs::path out(args.out);
    if (verb == "stationary") return cmd_stationary(cfg, out);
    if (verb == "orbits") return cmd_orbits(cfg, out);
    if (verb == "homology") return cmd_homology(cfg, out);
    if (verb == "continue") return cmd_continue(cfg, out);
    if (verb == "validate") return cmd_validate(cfg, out);
    if (verb == "report") return cmd_report(cfg, out);
    print_error("usage", "unknown verb " + verb);
    return 2;
  } catch (const ConfigError& e) {
    print_error("config", e.what());
    return 2;
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return 2;
  } catch (const PipelineOrderError& e) {
    print_error("pipeline_order", e.what());
    return 3;
  } catch (const CertificationError& e) {
    print_error("certification", e.what());
    return 4;
  } catch (const NumericError& e) {
    print_error("numeric", e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"travelling-wave homology pipeline"};
  app.require_subcommand(1);

  GlobalArgs args;
  std::uint64_t seed_value = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "experiment configuration (JSON)")->required();
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", seed_value, "override the experiment seed");
    sub->add_option("--threads", args.threads, "worker threads for multistarts");
    sub->add_option("--tol-scale", args.tol_scale, "scale factor on all tolerances");
  };

  const char* verbs[] = {"stationary", "orbits", "homology", "continue", "validate", "report"};
  const char* descs[] = {"find stationary solutions and certificates",
                         "locate connecting orbits and mod-2 counts",
                         "assemble the chain complex and compute homology",
                         "run a homotopy continuation check",
                         "check the nonlinearity hypotheses",
                         "emit plot-ready CSV data from a run directory"};
  for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(verbs[i], descs[i]));

  CLI11_PARSE(app, argc, argv);

  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) seed_set = true;
  }
  if (seed_set) args.seed = seed_value;

  std::string verb = app.get_subcommands().front()->get_name();
  return dispatch(verb, args);
}
