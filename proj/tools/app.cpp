#include "app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "experiments.hpp"
#include "presets.hpp"

namespace shapedyn::cli {

namespace {

struct Loaded {
  std::vector<nlohmann::json> experiments;
  bool sweep = false;
};

// Reads the --config file or the named preset. Returns nullopt after printing
// the problem.
std::optional<Loaded> load(const std::string& path, const std::string& preset, std::ostream& err) {
  nlohmann::json doc;
  if (!preset.empty()) {
    const Preset* p = find_preset(preset);
    if (!p) {
      err << "error: unknown preset '" << preset << "' (see 'shapedyn presets')\n";
      return std::nullopt;
    }
    doc = p->config;
  } else {
    std::ifstream in(path);
    if (!in) {
      err << "error: cannot open " << path << "\n";
      return std::nullopt;
    }
    try {
      doc = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      err << path << ": " << e.what() << "\n";
      return std::nullopt;
    }
  }
  Loaded out;
  out.sweep = doc.is_array();
  if (out.sweep) {
    if (doc.empty()) {
      err << "error: empty sweep\n";
      return std::nullopt;
    }
    for (auto& e : doc) out.experiments.push_back(e);
  } else {
    out.experiments.push_back(doc);
  }
  return out;
}

std::string run_label(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "run-%03zu", index);
  return buf;
}

// Diagnostics of every experiment, prefixed by the run label in a sweep.
std::vector<std::string> diagnose(const Loaded& loaded) {
  std::vector<std::string> all;
  for (std::size_t i = 0; i < loaded.experiments.size(); ++i) {
    for (const auto& d : validate(loaded.experiments[i])) all.push_back(loaded.sweep ? run_label(i) + ": " + d : d);
  }
  return all;
}

struct Outcome {
  int code = kPassed;
  std::string line;
  std::string error;
};

Outcome execute(const ExperimentConfig& config, const std::filesystem::path& dir) {
  Outcome o;
  try {
    const RunResult result = run_experiment(config);
    write_outputs(result, config, dir);
    o.line = summary_line(result);
    o.code = result.passed() ? kPassed : kToleranceViolated;
  } catch (const std::exception& e) {
    o.code = kRuntimeError;
    o.error = std::string(to_string(config.kind)) + " seed=" + std::to_string(config.seed) + ": " + e.what();
  }
  return o;
}

int run_command(const Loaded& loaded, const std::string& out_dir, std::optional<std::uint64_t> seed, bool quiet,
                std::ostream& out, std::ostream& err) {
  const auto diagnostics = diagnose(loaded);
  if (!diagnostics.empty()) {
    for (const auto& d : diagnostics) err << "invalid config: " << d << "\n";
    return kConfigInvalid;
  }
  std::vector<ExperimentConfig> configs;
  for (const auto& doc : loaded.experiments) {
    configs.push_back(parse_config(doc));
    if (seed) configs.back().seed = *seed;
  }

  // Independent experiments of a sweep run concurrently; results are
  // reported in input order.
  std::vector<Outcome> outcomes(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const std::filesystem::path base(out_dir);
      outcomes[i] = execute(configs[i], loaded.sweep ? base / run_label(i) : base);
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(configs.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  int code = kPassed;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const Outcome& o = outcomes[i];
    const std::string prefix = loaded.sweep ? run_label(i) + " " : "";
    if (o.code == kRuntimeError) err << prefix << "error: " << o.error << "\n";
    else if (!quiet) out << prefix << o.line << "\n";
    code = std::max(code, o.code);
  }
  return code;
}

int presets_command(const std::string& show, std::ostream& out, std::ostream& err) {
  if (!show.empty()) {
    const Preset* p = find_preset(show);
    if (!p) {
      err << "error: unknown preset '" << show << "'\n";
      return kConfigInvalid;
    }
    out << p->config.dump(2) << "\n";
    return kPassed;
  }
  for (const Preset& p : presets()) out << p.name << "  " << p.config["kind"].get<std::string>() << "  " << p.provenance << "\n";
  return kPassed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relational shape-space classical and Bohmian mechanics experiments", "shapedyn"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir = "out", show;
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  auto add_source = [&](CLI::App* sub) {
    auto* c = sub->add_option("--config", config_path, "experiment file (JSON object, or an array for a sweep)");
    auto* p = sub->add_option("--preset", preset, "built-in experiment (see 'presets')");
    c->excludes(p);
    return std::pair{c, p};
  };
  CLI::App* run = app.add_subcommand("run", "validate and execute an experiment or a sweep");
  add_source(run);
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--seed", seed, "override the seed of every experiment");
  run->add_flag("--quiet", quiet, "suppress the summary lines");
  CLI::App* check = app.add_subcommand("validate", "report every problem in a config without running it");
  add_source(check);
  CLI::App* list = app.add_subcommand("presets", "list built-in presets with their provenance");
  list->add_option("--show", show, "print the config of one preset");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kPassed;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kConfigInvalid;
  }

  if (*list) return presets_command(show, out, err);
  if (config_path.empty() && preset.empty()) {
    err << "error: give --config PATH or --preset NAME\n";
    return kConfigInvalid;
  }
  const auto loaded = load(config_path, preset, err);
  if (!loaded) return kConfigInvalid;
  if (*check) {
    const auto diagnostics = diagnose(*loaded);
    for (const auto& d : diagnostics) out << d << "\n";
    return diagnostics.empty() ? kPassed : kConfigInvalid;
  }
  return run_command(*loaded, out_dir, seed, quiet, out, err);
}

}  // namespace shapedyn::cli
