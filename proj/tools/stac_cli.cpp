// stac: batch experiment runner.
//
//   stac <ser-sweep|energy-compare|session-sim|extract-demo|grouping>
//        --config <scenario.json> [--out <path>] [--seed <u64>] [--threads <n>]
//
// Exit codes: 0 success, 2 configuration error, 3 capacity/overflow error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stac/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCapacity = 3;

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw stac::experiments::ConfigError("--config", "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw stac::experiments::ConfigError("<syntax>", path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous transmission and air computation: experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;

  for (auto kind : {stac::experiments::Kind::kSerSweep, stac::experiments::Kind::kEnergyCompare,
                    stac::experiments::Kind::kSessionSim, stac::experiments::Kind::kExtractDemo,
                    stac::experiments::Kind::kGrouping}) {
    auto* sub = app.add_subcommand(stac::experiments::kind_name(kind));
    sub->add_option("--config", config_path, "Scenario file (JSON)")->required();
    sub->add_option("--out", out_path, "Output file; stdout when omitted");
    sub->add_option("--seed", seed, "Overrides the scenario seed");
    sub->add_option("--threads", threads, "Monte-Carlo worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const auto kind = *stac::experiments::parse_kind(app.get_subcommands().front()->get_name());
  try {
    const auto cfg = load_config(config_path);
    const auto result = stac::experiments::run(kind, cfg, {seed, threads});
    if (out_path.empty()) {
      std::cout << result.csv;
      std::cerr << result.summary;
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) {
        std::cerr << "error: cannot write '" << out_path << "'\n";
        return kExitConfig;
      }
      out << result.csv;
      std::cout << result.summary;
    }
  } catch (const stac::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const stac::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
