#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "riskscore/config.hpp"
#include "riskscore/error.hpp"
#include "riskscore/pipeline.hpp"

namespace {

using namespace riskscore;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::empty_corpus:
    case ErrorKind::malformed_record:
    case ErrorKind::invalid_input: return 4;
    case ErrorKind::degenerate_table:
    case ErrorKind::insufficient_pool:
    case ErrorKind::degenerate_training:
    case ErrorKind::undefined_metric:
    case ErrorKind::unsplittable: return 5;
    case ErrorKind::rule_compilation: return 6;
    case ErrorKind::leakage: return 7;
  }
  return 1;
}

std::string key_listing() {
  const PipelineConfig defaults;
  std::string out = "Configuration keys (flat `key = value` file, `#` comments):\n";
  for (const auto& k : config_keys()) {
    std::string line = "  " + k.name;
    if (k.name.find('<') == std::string::npos) {
      line += " = " + get_config_value(defaults, k.name);
    }
    out += line + "\n      " + k.help + "\n";
  }
  out += "\nExit status: 0 ok, 2 config, 3 io, 4 bad input, 5 insufficient data,\n"
         "6 rule compilation, 7 leakage, 1 other.\n";
  return out;
}

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool table2 = false;
};

PipelineConfig build_config(const Options& o) {
  PipelineConfig config;
  if (!o.config.empty()) config = make_config(read_key_values(o.config));
  for (const auto& s : o.overrides) {
    auto [k, v] = parse_assignment(s);
    set_config_value(config, k, v);
  }
  if (o.seed) config.seed = *o.seed;
  if (!o.out.empty()) config.paths.out = o.out;
  if (o.table2) config.table2 = true;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-level risk scoring with labeling-bias diagnosis and mitigation"};
  app.footer(key_listing());
  app.require_subcommand(1);

  Options opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config, "key = value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", opts.out, "artifact directory (paths.out)");
    sub->add_option("-s,--seed", opts.seed, "master seed");
    sub->add_option("--set", opts.overrides, "override one key, e.g. --set model.lambda=0.01");
  };

  std::vector<std::pair<CLI::App*, std::vector<Stage>>> commands;
  const std::vector<std::pair<Stage, std::string>> stage_help = {
      {Stage::synth, "generate a synthetic corpus with planted clusters and labels"},
      {Stage::ingest, "normalize the input corpus and extract attributes"},
      {Stage::cluster, "build the similarity graph and cluster documents"},
      {Stage::diagnose, "test labeled data for class-dependent attributes"},
      {Stage::sample, "draw negative clusters (random or conditioned)"},
      {Stage::train, "fit the risk model on labeled clusters"},
      {Stage::evaluate, "cross-validate at cluster level and re-check bias"},
      {Stage::indicators, "evaluate indicator rules on every cluster"},
  };
  for (const auto& [stage, help] : stage_help) {
    auto* sub = app.add_subcommand(std::string(to_string(stage)), help);
    add_common(sub);
    if (stage == Stage::diagnose) {
      sub->add_flag("--table2", opts.table2, "diagnose the built-in domain x class count table");
    }
    commands.push_back({sub, {stage}});
  }
  auto* all = app.add_subcommand("pipeline", "run ingest through indicators");
  add_common(all);
  commands.push_back({all, pipeline_stages()});

  CLI11_PARSE(app, argc, argv);

  std::vector<Stage> stages;
  for (const auto& [sub, st] : commands) {
    if (sub->parsed()) stages = st;
  }

  PipelineConfig config;
  try {
    config = build_config(opts);
    for (Stage s : stages) validate(config, s);
  } catch (const Error& e) {
    std::cerr << "error [config] " << e.what() << "\n";
    return exit_code(e.kind());
  }

  for (Stage s : stages) {
    try {
      const std::string summary = run_stage(config, s);
      std::cout << to_string(s) << ": " << summary << std::endl;
    } catch (const Error& e) {
      std::cerr << "error [" << to_string(s) << "] " << to_string(e.kind()) << ": " << e.what()
                << "\n";
      return exit_code(e.kind());
    } catch (const std::exception& e) {
      std::cerr << "error [" << to_string(s) << "] " << e.what() << "\n";
      return 1;
    }
  }
  return 0;
}
