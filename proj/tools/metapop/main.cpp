#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "metapop/errors.hpp"
#include "metapop_app/config.hpp"
#include "metapop_app/runner.hpp"

namespace {

using metapop::app::ConfigError;
using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out = "out";
};

json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
}

json prepare(const Flags& flags, const char* force_regime = nullptr) {
  json doc = read_document(flags.config);
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  if (flags.seed) doc["seed"] = *flags.seed;
  if (force_regime) doc["regime"] = force_regime;
  return doc;
}

void report_failure(const Flags& flags, const std::string& kind, const json& detail) {
  const json record = {{"status", "failed"}, {"kind", kind}, {"detail", detail}};
  std::cerr << record.dump() << '\n';
  std::error_code ec;
  std::filesystem::create_directories(flags.out, ec);
  if (!ec) std::ofstream(std::filesystem::path(flags.out) / "failure.json", std::ios::binary) << record.dump(2) << '\n';
}

json diagnostics_json(const ConfigError& e) {
  json out = json::array();
  for (const auto& d : e.diagnostics()) out.push_back({{"field", d.field}, {"message", d.message}});
  return out;
}

int guarded(const Flags& flags, bool write_failure, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << d.field << ": " << d.message << '\n';
    if (write_failure) report_failure(flags, "config", diagnostics_json(e));
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (write_failure) report_failure(flags, "runtime", e.what());
    return 3;
  }
}

int run_single(const Flags& flags, const char* force_regime) {
  const auto cfg = metapop::app::parse_config(prepare(flags, force_regime));
  const auto res = metapop::app::run(cfg, {flags.out, flags.threads});
  for (const auto& c : res.summary["invariant_checks"])
    if (!c["pass"].get<bool>()) std::cerr << "invariant check failed: " << c["name"].get<std::string>() << '\n';
  return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial Moran metapopulation simulator"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", flags.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Override the master seed");
    if (with_out) {
      sub->add_option("--threads", flags.threads, "Worker threads for replicates")->check(CLI::PositiveNumber);
      sub->add_option("--out", flags.out, "Output directory");
    }
  };
  auto* validate = app.add_subcommand("validate", "Parse the config and probe the rate bound");
  auto* run = app.add_subcommand("run", "Run the configured regime");
  auto* compare = app.add_subcommand("compare", "Compare the microscopic model with the TSS");
  auto* sweep = app.add_subcommand("sweep", "Run one configuration per value of the sweep block");
  add_common(validate, false);
  add_common(run, true);
  add_common(compare, true);
  add_common(sweep, true);
  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    return guarded(flags, false, [&] {
      const auto cfg = metapop::app::parse_config(prepare(flags));
      metapop::app::build_model(cfg);
      std::cout << cfg.source.dump(2) << '\n';
      return 0;
    });
  }
  if (run->parsed()) return guarded(flags, true, [&] { return run_single(flags, nullptr); });
  if (compare->parsed()) return guarded(flags, true, [&] { return run_single(flags, "compare"); });
  return guarded(flags, true, [&] {
    return metapop::app::sweep(prepare(flags), {flags.out, flags.threads}) ? 0 : 1;
  });
}
