// dlnlab: runs deep linear network experiments described by INI files.
//
//   dlnlab flow --config flow.ini --out runs/flow
//   dlnlab audit --seed 3

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "dln/config.hpp"
#include "dln/experiment.hpp"

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* sub, Args& args, bool needsConfig) {
  auto* opt = sub->add_option("-c,--config", args.config, "experiment INI file");
  if (needsConfig) opt->required()->check(CLI::ExistingFile);
  else opt->check(CLI::ExistingFile);
  sub->add_option("-s,--seed", args.seed, "override the master seed");
  sub->add_option("-o,--out", args.out, "output directory");
  sub->add_flag("-q,--quiet", args.quiet, "suppress the status line");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep linear network experiments"};
  app.set_version_flag("--version", std::string(dln::kToolName) + " " + dln::kToolVersion);
  app.require_subcommand(1);

  Args args;
  const char* kinds[] = {"flow", "rle", "dyson", "sphere", "complete", "entropy-map", "audit"};
  for (const char* kind : kinds) {
    const bool audit = std::string(kind) == "audit";
    add_common(app.add_subcommand(kind, std::string("run a ") + kind + " experiment"), args,
               !audit);
  }

  CLI11_PARSE(app, argc, argv);
  const std::string kindName = app.get_subcommands().front()->get_name();

  dln::ExperimentConfig config;
  try {
    const dln::ExperimentKind kind = dln::parse_kind(kindName);
    if (!args.config.empty()) {
      config = dln::load_config(args.config);
      if (config.kind != kind)
        throw dln::ConfigError("config describes a '" + dln::kind_name(config.kind) +
                               "' experiment, not '" + kindName + "'");
    }
    config.kind = kind;
    if (args.seed) config.set_seed(*args.seed);
    config.validate();
  } catch (const dln::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  dln::RunOptions options;
  options.outDir = args.out;
  options.quiet = args.quiet;
  const dln::RunReport report = dln::run(config, options, std::cout);
  if (report.exitCode != 0) std::cerr << report.status << ": " << report.message << "\n";
  return report.exitCode;
}
