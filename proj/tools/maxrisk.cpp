// maxrisk: run, list and validate experiment configs.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maxrisk/experiments.hpp"
#include "maxrisk_catalog.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitVerdict = 2;

/// A path to a JSON file, or the name of a catalog entry.
json load_config(const std::string& arg) {
  if (fs::exists(arg)) return maxrisk::io::read_json_file(arg);
  for (const auto& e : maxrisk::catalog::kEntries)
    if (arg == e.name) return json::parse(e.json);
  throw maxrisk::io::ConfigError("no such config file or catalog entry: " + arg);
}

int cmd_list(bool as_json) {
  json all = json::array();
  for (const auto& e : maxrisk::catalog::kEntries) {
    auto cfg = json::parse(e.json);
    if (as_json) {
      all.push_back(cfg);
      continue;
    }
    std::cout << e.name << "  [" << cfg.at("kind").get<std::string>() << "]  "
              << cfg.value("anchor", std::string()) << "\n";
  }
  if (as_json) std::cout << all.dump(2) << "\n";
  return kExitPass;
}

int cmd_validate(const std::string& arg) {
  auto e = maxrisk::parse_experiment(load_config(arg));
  std::cout << "ok: " << e.name << " (" << e.kind << ")\n";
  return kExitPass;
}

int cmd_run(const std::string& arg, bool quiet) {
  auto e = maxrisk::parse_experiment(load_config(arg));
  fs::path out = e.output_dir;
  if (const char* env = std::getenv("MAXRISK_OUT"); env && *env) out = env;
  if (!quiet) std::cout << "running " << e.name << " (" << e.kind << ") -> " << out.string() << "\n";
  auto rec = maxrisk::execute(e, out);
  if (!quiet)
    for (const auto& p : rec.artifacts) std::cout << "  wrote " << p.string() << "\n";
  std::cout << e.name << ": " << (rec.verdict ? "PASS" : "FAIL") << " (observed "
            << (rec.observed_pass ? "pass" : "fail") << ", expected " << (e.expect_pass ? "pass" : "fail") << ") in "
            << rec.wall_seconds << " s\n";
  return rec.verdict ? kExitPass : kExitVerdict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maxitive risk measures and sharp large deviations: experiment runner"};
  app.require_subcommand(1);
  bool quiet = false;
  bool list_json = false;
  std::string target;

  auto* run = app.add_subcommand("run", "Run a config file or catalog entry");
  run->add_option("config", target, "Config JSON path or catalog name")->required();
  run->add_flag("-q,--quiet", quiet, "Suppress progress lines");
  auto* list = app.add_subcommand("list", "List the built-in experiment catalog");
  list->add_flag("--json", list_json, "Print the catalog configs as JSON");
  auto* validate = app.add_subcommand("validate", "Validate a config without running it");
  validate->add_option("config", target, "Config JSON path or catalog name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitError;
  }

  try {
    if (*list) return cmd_list(list_json);
    if (*validate) return cmd_validate(target);
    return cmd_run(target, quiet);
  } catch (const maxrisk::io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const maxrisk::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << " (achieved " << e.achieved() << ")\n";
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitError;
}
