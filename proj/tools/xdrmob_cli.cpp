// xdrmob: command-line front end for the pipeline stages.
//
//   xdrmob synth --out run
//   xdrmob ingest --xdr run/synth/xdr.csv --catalog run/synth/catalog.csv --out run
//   xdrmob features --out run   (then profile, encode, train, infer, match, eval)
//
// Exit status: 0 success, 1 input error, 2 internal error.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xdrmob/config.hpp"
#include "xdrmob/error.hpp"
#include "xdrmob/pipeline.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  // flag name -> config key, value
  std::map<std::string, std::optional<std::string>> values;
};

const std::map<std::string, std::string>& flag_keys() {
  static const std::map<std::string, std::string> keys{
      {"xdr", "xdr"},           {"catalog", "catalog"}, {"out", "out"},         {"province", "province"},
      {"time-mode", "time_mode"}, {"alpha", "alpha"},   {"rt-mode", "rt_mode"}, {"seed", "seed"},
      {"threads", "threads"},   {"bins", "bins"},       {"repeats", "repeats"}};
  return keys;
}

void add_flags(CLI::App& app, Flags& flags) {
  app.add_option("--config", flags.config, "key = value configuration file");
  for (const auto& [flag, key] : flag_keys()) app.add_option("--" + flag, flags.values[flag], "overrides " + key);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic and mobility behavior analysis of XDR data"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& [name, fn] : xdrmob::stages()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " stage");
    add_flags(*sub, flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    xdrmob::PipelineConfig cfg;
    if (flags.config) {
      std::ifstream in(*flags.config);
      if (!in) throw xdrmob::InputError("cannot open config file " + *flags.config);
      xdrmob::load_config(in, cfg);
    }
    for (const auto& [flag, value] : flags.values)
      if (value) cfg.set(flag_keys().at(flag), *value);
    xdrmob::stages().at(stage)(cfg, std::cerr);
  } catch (const xdrmob::InputError& e) {
    std::cerr << "xdrmob " << stage << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "xdrmob " << stage << ": internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
