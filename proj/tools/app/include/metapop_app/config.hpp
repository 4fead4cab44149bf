#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "metapop/exprlang.hpp"
#include "metapop/kernels.hpp"
#include "metapop/measure.hpp"

namespace metapop::app {

enum class Regime { micro, tss, meanfield, replicator, canonical, compare };

std::string to_string(Regime regime);

struct Diagnostic {
  std::string field;  // dotted path, e.g. "model.lambda"
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  ConfigError(std::string field, std::string message)
      : ConfigError(std::vector<Diagnostic>{{std::move(field), std::move(message)}}) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

struct ModelConfig {
  std::size_t dim = 1;
  std::string c = "1";
  std::string theta = "0";
  std::string lambda = "0";
  MutationKind mutation = MutationKind::degenerate;
  double mutation_scale = 1.0;
  double bound_C = 1.0;
  ProbeBox probe_box;
  std::size_t probes = 10000;
};

struct RunConfig {
  Regime regime = Regime::tss;
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  ModelConfig model;
  std::size_t K = 0;
  int N = 0;
  std::size_t M = 0;
  std::size_t G = 16;
  double gamma = 0.0;
  double epsilon = 0.0;
  double dt = 1e-3;
  double horizon = 0.0;
  double snapshot_interval = 0.0;
  bool record_events = false;

  std::vector<Trait> sites;   // micro, tss, compare
  std::vector<Atom> atoms;    // meanfield, canonical
  std::vector<Trait> traits;  // meanfield finite, replicator
  std::vector<double> w0;     // replicator
  std::string method = "finite";  // meanfield: finite | particles | chaos-scan
  std::string mode = "homogeneous";  // replicator: homogeneous | spatial
  std::vector<std::size_t> K_list;   // chaos-scan
  std::string statistic = "x";       // chaos-scan, f(x)
  double t_star = 1.0;               // chaos-scan, compare
  std::vector<double> gammas;        // compare

  nlohmann::json source;  // normalized document, defaults filled in
};

// Parses and validates; throws ConfigError listing every problem found.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

// Builds the rate model (homogeneous when no kernel reads r or rp) and runs
// the bound probes; failures are reported as ConfigError on model.* fields.
RateModel build_model(const RunConfig& config);

}  // namespace metapop::app
