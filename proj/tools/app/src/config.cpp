#include "metapop_app/config.hpp"

#include <fstream>
#include <sstream>

namespace metapop::app {

using nlohmann::json;

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::micro: return "micro";
    case Regime::tss: return "tss";
    case Regime::meanfield: return "meanfield";
    case Regime::replicator: return "replicator";
    case Regime::canonical: return "canonical";
    case Regime::compare: return "compare";
  }
  return "unknown";
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "\n";
    out += d.field + ": " + d.message;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join_messages(diagnostics)), diagnostics_(std::move(diagnostics)) {}

namespace {

// Walks the document by dotted path and records every problem.
class Reader {
 public:
  explicit Reader(json& doc) : doc_(doc) {}

  std::vector<Diagnostic>& diagnostics() { return diags_; }
  void fail(const std::string& field, const std::string& message) { diags_.push_back({field, message}); }

  json* find(const std::string& path) {
    json* cur = &doc_;
    std::istringstream in(path);
    std::string part;
    while (std::getline(in, part, '.')) {
      if (!cur->is_object()) return nullptr;
      auto it = cur->find(part);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    }
    return cur;
  }

  // Writes a default into the document so the normalized config shows it.
  void set_default(const std::string& path, json value) {
    json* cur = &doc_;
    std::istringstream in(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(in, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!cur->contains(parts[i])) (*cur)[parts[i]] = json::object();
      cur = &(*cur)[parts[i]];
      if (!cur->is_object()) return;
    }
    if (!cur->contains(parts.back())) (*cur)[parts.back()] = std::move(value);
  }

  template <class T>
  std::optional<T> get(const std::string& path, bool required) {
    json* v = find(path);
    if (!v) {
      if (required) fail(path, "required field is missing");
      return std::nullopt;
    }
    try {
      return convert<T>(path, *v);
    } catch (const json::exception&) {
      fail(path, "has the wrong type");
    }
    return std::nullopt;
  }

  template <class T>
  T get_or(const std::string& path, T fallback) {
    if (!find(path)) {
      set_default(path, fallback);
      return fallback;
    }
    return get<T>(path, false).value_or(fallback);
  }

  std::optional<Trait> trait(const std::string& path, const json& v, std::size_t dim) {
    std::vector<double> coords;
    if (v.is_number()) {
      coords.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (const auto& c : v) {
        if (!c.is_number()) {
          fail(path, "trait coordinates must be numbers");
          return std::nullopt;
        }
        coords.push_back(c.get<double>());
      }
    } else {
      fail(path, "trait must be a number or an array of numbers");
      return std::nullopt;
    }
    if (coords.size() != dim) {
      fail(path, "trait has " + std::to_string(coords.size()) + " coordinates, model.dim is " + std::to_string(dim));
      return std::nullopt;
    }
    return Trait(std::move(coords));
  }

  std::vector<Trait> traits(const std::string& path, std::size_t dim, bool required) {
    std::vector<Trait> out;
    json* v = find(path);
    if (!v) {
      if (required) fail(path, "required field is missing");
      return out;
    }
    if (!v->is_array() || v->empty()) {
      fail(path, "must be a nonempty array of traits");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i)
      if (auto t = trait(path + "[" + std::to_string(i) + "]", (*v)[i], dim)) out.push_back(std::move(*t));
    return out;
  }

  std::vector<Atom> atoms(const std::string& path, std::size_t dim) {
    std::vector<Atom> out;
    json* v = find(path);
    if (!v) {
      fail(path, "required field is missing");
      return out;
    }
    if (!v->is_array() || v->empty()) {
      fail(path, "must be a nonempty array of {r, x, w} objects");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string at = path + "[" + std::to_string(i) + "]";
      const json& a = (*v)[i];
      if (!a.is_object() || !a.contains("x") || !a.contains("w")) {
        fail(at, "atom needs fields x and w");
        continue;
      }
      auto x = trait(at + ".x", a["x"], dim);
      if (!x) continue;
      const double r = a.value("r", 0.0);
      const double w = a["w"].is_number() ? a["w"].get<double>() : -1.0;
      if (!(r >= 0.0 && r <= 1.0)) fail(at + ".r", "must lie in [0, 1]");
      if (!(w >= 0.0)) fail(at + ".w", "must be a nonnegative number");
      out.push_back({r, std::move(*x), w});
    }
    return out;
  }

 private:
  template <class T>
  T convert(const std::string& path, const json& v) {
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (v.is_number_unsigned()) return v.get<std::uint64_t>();
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        std::size_t used = 0;
        try {
          const auto u = std::stoull(s, &used, 0);
          if (used == s.size()) return u;
        } catch (const std::exception&) {
        }
      }
      throw json::type_error::create(302, "expected an unsigned 64-bit integer", &v);
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw json::type_error::create(302, "expected a boolean", &v);
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw json::type_error::create(302, "expected an integer", &v);
      const auto i = v.get<std::int64_t>();
      if (i < 0) fail(path, "must be nonnegative");
      return static_cast<T>(std::max<std::int64_t>(i, 0));
    } else {
      return v.get<T>();
    }
  }

  json& doc_;
  std::vector<Diagnostic> diags_;
};

void check_expression(Reader& rd, const std::string& field, const std::string& source,
                      std::initializer_list<expr::Var> allowed, std::size_t dim) {
  try {
    expr::check_variables(expr::parse(source), allowed, dim);
  } catch (const expr::ParseError& e) {
    rd.fail(field, e.what());
  }
}

void require_positive(Reader& rd, const std::string& field, double v) {
  if (!(v > 0.0)) rd.fail(field, "must be positive");
}

}  // namespace

RunConfig parse_config(const json& input) {
  using expr::Var;
  RunConfig cfg;
  cfg.source = input;
  if (!cfg.source.is_object()) throw ConfigError("", "config must be a JSON object");
  Reader rd(cfg.source);

  const auto regime = rd.get<std::string>("regime", true);
  if (regime) {
    static const std::pair<const char*, Regime> names[] = {
        {"micro", Regime::micro},         {"tss", Regime::tss},           {"meanfield", Regime::meanfield},
        {"replicator", Regime::replicator}, {"canonical", Regime::canonical}, {"compare", Regime::compare}};
    bool found = false;
    for (const auto& [name, r] : names)
      if (*regime == name) {
        cfg.regime = r;
        found = true;
      }
    if (!found) rd.fail("regime", "unknown regime '" + *regime + "'");
  }
  if (!regime || !rd.diagnostics().empty()) throw ConfigError(rd.diagnostics());

  cfg.seed = rd.get<std::uint64_t>("seed", false).value_or(0);
  rd.set_default("seed", cfg.seed);
  cfg.replicates = rd.get_or<std::size_t>("replicates", 1);
  if (cfg.replicates == 0) rd.fail("replicates", "must be at least 1");

  auto& m = cfg.model;
  m.dim = rd.get_or<std::size_t>("model.dim", 1);
  if (m.dim == 0) rd.fail("model.dim", "must be at least 1");
  m.c = rd.get<std::string>("model.c", true).value_or("1");
  m.theta = rd.get_or<std::string>("model.theta", "0");
  m.lambda = rd.get_or<std::string>("model.lambda", "0");
  check_expression(rd, "model.c", m.c, {Var::r, Var::x, Var::y}, m.dim);
  check_expression(rd, "model.theta", m.theta, {Var::r, Var::x}, m.dim);
  check_expression(rd, "model.lambda", m.lambda, {Var::r, Var::rp, Var::x, Var::y}, m.dim);
  const auto kind = rd.get_or<std::string>("model.mutation.kind", "degenerate");
  if (auto k = parse_mutation_kind(kind)) {
    m.mutation = *k;
  } else {
    rd.fail("model.mutation.kind", "unknown mutation family '" + kind + "'");
  }
  m.mutation_scale = rd.get_or<double>("model.mutation.scale", 1.0);
  if (!(m.mutation_scale >= 0.0)) rd.fail("model.mutation.scale", "must be nonnegative");
  if (auto C = rd.get<double>("model.bound_C", true)) {
    m.bound_C = *C;
    require_positive(rd, "model.bound_C", *C);
  }
  const double box_lo = rd.get_or<double>("model.probe_box.lo", 0.0);
  const double box_hi = rd.get_or<double>("model.probe_box.hi", 1.0);
  if (!(box_lo <= box_hi)) rd.fail("model.probe_box", "lo must not exceed hi");
  m.probe_box = {box_lo, box_hi};
  m.probes = rd.get_or<std::size_t>("model.probes", 10000);

  cfg.N = rd.get<int>("sizes.N", true).value_or(0);
  if (rd.find("sizes.N") && cfg.N < 1) rd.fail("sizes.N", "must be at least 1");
  cfg.G = rd.get_or<std::size_t>("sizes.G", 16);
  if (cfg.G == 0) rd.fail("sizes.G", "must be at least 1");
  cfg.epsilon = rd.get_or<double>("scales.epsilon", 0.0);
  if (!(cfg.epsilon >= 0.0)) rd.fail("scales.epsilon", "must be nonnegative");
  cfg.dt = rd.get_or<double>("numerics.dt", 1e-3);
  require_positive(rd, "numerics.dt", cfg.dt);
  cfg.snapshot_interval = rd.get_or<double>("numerics.snapshot_interval", 0.0);
  if (!(cfg.snapshot_interval >= 0.0)) rd.fail("numerics.snapshot_interval", "must be nonnegative");
  cfg.record_events = rd.get_or<bool>("numerics.record_events", false);
  if (cfg.regime != Regime::compare) {
    cfg.horizon = rd.get<double>("numerics.horizon", true).value_or(0.0);
    if (!(cfg.horizon >= 0.0)) rd.fail("numerics.horizon", "must be nonnegative");
  }

  auto sites = [&] {
    cfg.sites = rd.traits("init.sites", m.dim, true);
    if (auto K = rd.get<std::size_t>("sizes.K", false); K && *K != cfg.sites.size())
      rd.fail("sizes.K", "is " + std::to_string(*K) + " but init.sites lists " + std::to_string(cfg.sites.size()));
    cfg.K = cfg.sites.size();
  };

  switch (cfg.regime) {
    case Regime::micro:
      sites();
      cfg.gamma = rd.get<double>("scales.gamma", true).value_or(0.0);
      if (!(cfg.gamma >= 0.0)) rd.fail("scales.gamma", "must be nonnegative");
      break;
    case Regime::tss:
      sites();
      break;
    case Regime::compare: {
      sites();
      cfg.gammas = rd.get<std::vector<double>>("compare.gammas", true).value_or(std::vector<double>{});
      if (rd.find("compare.gammas") && cfg.gammas.empty()) rd.fail("compare.gammas", "must not be empty");
      for (double g : cfg.gammas)
        if (!(g > 0.0)) rd.fail("compare.gammas", "every gamma must be positive");
      cfg.t_star = rd.get<double>("compare.t_star", true).value_or(1.0);
      require_positive(rd, "compare.t_star", cfg.t_star);
      break;
    }
    case Regime::meanfield:
      cfg.method = rd.get_or<std::string>("meanfield.method", "finite");
      cfg.atoms = rd.atoms("init.atoms", m.dim);
      if (cfg.method == "finite") {
        cfg.traits = rd.traits("traits", m.dim, true);
      } else if (cfg.method == "particles") {
        cfg.M = rd.get<std::size_t>("sizes.M", true).value_or(0);
        if (rd.find("sizes.M") && cfg.M < 2) rd.fail("sizes.M", "must be at least 2");
      } else if (cfg.method == "chaos-scan") {
        cfg.K_list = rd.get<std::vector<std::size_t>>("chaos.K_list", true).value_or(std::vector<std::size_t>{});
        for (std::size_t k = 0; k < cfg.K_list.size(); ++k) {
          if (cfg.K_list[k] < 2) rd.fail("chaos.K_list", "every K must be at least 2");
          if (k > 0 && cfg.K_list[k] <= cfg.K_list[k - 1]) rd.fail("chaos.K_list", "must be increasing");
        }
        cfg.t_star = rd.get<double>("chaos.t_star", true).value_or(1.0);
        cfg.statistic = rd.get_or<std::string>("chaos.statistic", "x");
        check_expression(rd, "chaos.statistic", cfg.statistic, {Var::x}, m.dim);
        if (cfg.replicates < 3) rd.fail("replicates", "chaos-scan needs at least 3 replicates");
      } else {
        rd.fail("meanfield.method", "must be finite, particles or chaos-scan");
      }
      break;
    case Regime::replicator: {
      cfg.traits = rd.traits("traits", m.dim, true);
      cfg.mode = rd.get_or<std::string>("replicator.mode", "homogeneous");
      if (cfg.mode != "homogeneous" && cfg.mode != "spatial")
        rd.fail("replicator.mode", "must be homogeneous or spatial");
      if (rd.find("w0")) {
        cfg.w0 = rd.get<std::vector<double>>("w0", false).value_or(std::vector<double>{});
        if (cfg.w0.size() != cfg.traits.size()) rd.fail("w0", "must list one weight per trait");
      } else if (!cfg.traits.empty()) {
        cfg.w0.assign(cfg.traits.size(), 1.0 / static_cast<double>(cfg.traits.size()));
      }
      double total = 0.0;
      for (double w : cfg.w0) {
        if (!(w >= 0.0)) rd.fail("w0", "weights must be nonnegative");
        total += w;
      }
      if (!cfg.w0.empty() && std::abs(total - 1.0) > 1e-10) rd.fail("w0", "weights must sum to 1");
      break;
    }
    case Regime::canonical:
      cfg.atoms = rd.atoms("init.atoms", m.dim);
      cfg.M = rd.get<std::size_t>("sizes.M", true).value_or(0);
      if (rd.find("sizes.M") && cfg.M < 2) rd.fail("sizes.M", "must be at least 2");
      break;
  }
  if (!cfg.atoms.empty()) {
    double total = 0.0;
    for (const auto& a : cfg.atoms) total += a.w;
    if (std::abs(total - 1.0) > 1e-10) rd.fail("init.atoms", "weights must sum to 1");
  }
  if (!rd.diagnostics().empty()) throw ConfigError(rd.diagnostics());
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

RateModel build_model(const RunConfig& config) {
  using expr::Var;
  const auto& m = config.model;
  auto c = expr::parse(m.c);
  auto theta = expr::parse(m.theta);
  auto lambda = expr::parse(m.lambda);
  const bool homogeneous =
      !c.uses(Var::r) && !theta.uses(Var::r) && !lambda.uses(Var::r) && !lambda.uses(Var::rp);
  MutationFamily fam{m.mutation, m.mutation_scale, config.epsilon, {}};
  RateModel model(m.dim, expr::selection_kernel(std::move(c)), expr::mutation_rate_kernel(std::move(theta)),
                  expr::migration_kernel(std::move(lambda)), fam, m.bound_C, homogeneous);
  Rng probe_rng(mix64(config.seed ^ 0x70726F6265ULL));
  try {
    probe_bounds(model, probe_rng, m.probes, m.probe_box);
  } catch (const RateBoundError& e) {
    throw ConfigError("model.bound_C", std::string("probe failure: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError("model", std::string("probe failure: ") + e.what());
  }
  return model;
}

}  // namespace metapop::app
