#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "metapop_app/config.hpp"

namespace metapop::app {

struct RunOptions {
  std::filesystem::path out = "out";
  unsigned threads = 1;
};

struct InvariantCheck {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double tolerance = 0.0;
};

struct RunResult {
  nlohmann::json summary;
  std::vector<std::string> outputs;  // file names relative to the output directory
  bool pass = true;
};

// Dispatches to the regime, writes the data files, summary.json and
// manifest.json into options.out.
RunResult run(const RunConfig& config, const RunOptions& options);

// Runs one configuration per value of the "sweep" block
// {"parameter": "dotted.path", "values": [...]} into out/sweep_NNNN and
// writes sweep.csv; returns true if every point passed its checks.
bool sweep(const nlohmann::json& doc, const RunOptions& options);

// FNV-1a over the compact dump of the normalized config.
std::string config_hash(const nlohmann::json& doc);

}  // namespace metapop::app
