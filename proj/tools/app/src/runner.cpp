#include "metapop_app/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "metapop/canonical.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/microsim.hpp"
#include "metapop/parallel.hpp"
#include "metapop/replicator.hpp"
#include "metapop/tss.hpp"
#include "metapop_app/csv.hpp"

namespace metapop::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Collects data files and invariant checks for one run.
class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    fs::remove(dir_ / "failure.json");
  }

  void write(const std::string& name, const std::string& text) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << text;
    files_.push_back(name);
  }

  void check(std::string name, bool pass, double value, double tolerance) {
    checks_.push_back({std::move(name), pass, value, tolerance});
  }

  // |value| <= tolerance
  void check_bound(std::string name, double value, double tolerance) {
    check(std::move(name), std::abs(value) <= tolerance, value, tolerance);
  }

  json& extra() { return extra_; }
  const std::vector<std::string>& files() const { return files_; }
  const std::vector<InvariantCheck>& checks() const { return checks_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
  std::vector<InvariantCheck> checks_;
  json extra_ = json::object();
};

std::string replicate_name(const std::string& stem, std::size_t rep, std::size_t total) {
  if (total == 1) return stem + ".csv";
  char buf[32];
  std::snprintf(buf, sizeof buf, "_rep%04zu.csv", rep);
  return stem + buf;
}

// 0, interval, 2 interval, ... below the horizon, then the horizon itself.
std::vector<double> snapshot_times(double horizon, double interval) {
  std::vector<double> out{0.0};
  if (interval > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * interval;
      if (t >= horizon * (1.0 - 1e-12)) break;
      out.push_back(t);
    }
  }
  if (horizon > 0.0) out.push_back(horizon);
  return out;
}

std::vector<std::string> header(std::vector<std::string> head, std::size_t dim, std::vector<std::string> tail = {}) {
  for (auto& c : coordinate_columns(dim)) head.push_back(std::move(c));
  for (auto& c : tail) head.push_back(std::move(c));
  return head;
}

void trait_cells(CsvBuffer& csv, TraitView x) {
  for (double v : x) csv.cell(v);
}

void run_micro(const RunConfig& cfg, const RateModel& model, const RunOptions& opt, Output& out) {
  const std::size_t R = cfg.replicates;
  const std::size_t d = cfg.model.dim;
  std::vector<std::string> traj(R), events(R);
  std::vector<std::size_t> polymorphic(R);
  std::vector<char> sizes_ok(R, 1), times_ok(R, 1);
  const auto times = snapshot_times(cfg.horizon, cfg.snapshot_interval);
  parallel_for(R, opt.threads, [&](std::size_t rep) {
    Rng rng(derive_stream_seed(cfg.seed, rep));
    MicroSimulator sim(model, MicroState::monomorphic(cfg.sites, static_cast<std::size_t>(cfg.N), cfg.gamma), rng,
                       cfg.record_events);
    CsvBuffer csv(header({"t", "patch"}, d));
    for (double t : times) {
      sim.advance_to(t);
      const MicroState& s = sim.state();
      if (s.traits.size() != s.K * s.N * s.d) sizes_ok[rep] = 0;
      for (std::size_t l = 0; l < s.K; ++l)
        for (std::size_t i = 0; i < s.N; ++i) {
          csv.cell(t).cell(l);
          trait_cells(csv, s.trait(l, i));
          csv.end_row();
        }
    }
    traj[rep] = csv.text();
    polymorphic[rep] = sim.polymorphic_patches();
    if (cfg.record_events) {
      CsvBuffer ev(header({"t", "kind", "patch", "individual", "source_patch", "source_individual"}, 0,
                          [&] {
                            std::vector<std::string> cols;
                            for (auto& c : coordinate_columns(d, "old_x")) cols.push_back(c);
                            for (auto& c : coordinate_columns(d, "new_x")) cols.push_back(c);
                            return cols;
                          }()));
      double last = -1.0;
      for (const auto& e : sim.log().events) {
        if (!(e.time > last)) times_ok[rep] = 0;
        last = e.time;
        ev.cell(e.time).cell(to_string(e.kind)).cell(e.patch).cell(e.individual).cell(e.source_patch)
            .cell(e.source_individual);
        trait_cells(ev, e.old_trait);
        trait_cells(ev, e.new_trait);
        ev.end_row();
      }
      events[rep] = ev.text();
    }
  });
  std::size_t bad_sizes = 0, bad_times = 0, poly = 0;
  for (std::size_t rep = 0; rep < R; ++rep) {
    out.write(replicate_name("micro", rep, R), traj[rep]);
    if (cfg.record_events) out.write(replicate_name("micro_events", rep, R), events[rep]);
    bad_sizes += sizes_ok[rep] ? 0 : 1;
    bad_times += times_ok[rep] ? 0 : 1;
    poly += polymorphic[rep];
  }
  out.check_bound("patch_sizes_constant", static_cast<double>(bad_sizes), 0.0);
  out.check_bound("event_times_increasing", static_cast<double>(bad_times), 0.0);
  out.extra()["terminal_polymorphic_patches_mean"] = static_cast<double>(poly) / static_cast<double>(R);
}

void run_tss(const RunConfig& cfg, const RateModel& model, const RunOptions& opt, Output& out) {
  const std::size_t R = cfg.replicates;
  const std::size_t d = cfg.model.dim;
  std::vector<std::string> traj(R), jumps(R);
  std::vector<char> times_ok(R, 1);
  std::vector<TssCounters> counters(R);
  parallel_for(R, opt.threads, [&](std::size_t rep) {
    Rng rng(derive_stream_seed(cfg.seed, rep));
    TssOptions topt;
    topt.snapshot_interval = cfg.snapshot_interval;
    topt.record_jumps = cfg.record_events;
    const auto result = tss_run(model, cfg.N, SiteConfiguration::from_traits(cfg.sites), cfg.horizon, rng, topt);
    CsvBuffer csv(header({"t", "patch"}, d));
    for (const auto& s : result.snapshots)
      for (std::size_t l = 0; l < s.K; ++l) {
        csv.cell(s.time).cell(l);
        trait_cells(csv, s.site(l));
        csv.end_row();
      }
    traj[rep] = csv.text();
    counters[rep] = result.counters;
    if (cfg.record_events) {
      std::vector<std::string> tail = coordinate_columns(d, "old_x");
      for (auto& c : coordinate_columns(d, "new_x")) tail.push_back(c);
      CsvBuffer j(header({"t", "site", "source", "kind"}, 0, tail));
      double last = -1.0;
      for (const auto& e : result.jumps) {
        if (!(e.time > last)) times_ok[rep] = 0;
        last = e.time;
        j.cell(e.time).cell(e.site).cell(e.source).cell(e.migration ? "migration" : "mutation");
        trait_cells(j, e.old_trait);
        trait_cells(j, e.new_trait);
        j.end_row();
      }
      jumps[rep] = j.text();
    }
  });
  std::size_t bad = 0, mut = 0, mig = 0;
  for (std::size_t rep = 0; rep < R; ++rep) {
    out.write(replicate_name("tss", rep, R), traj[rep]);
    if (cfg.record_events) out.write(replicate_name("tss_jumps", rep, R), jumps[rep]);
    bad += times_ok[rep] ? 0 : 1;
    mut += counters[rep].mutation_fixations;
    mig += counters[rep].migration_fixations;
  }
  out.check_bound("jump_times_increasing", static_cast<double>(bad), 0.0);
  out.extra()["mutation_fixations"] = mut;
  out.extra()["migration_fixations"] = mig;
}

void measure_rows(CsvBuffer& csv, double t, const AtomicMeasure& m) {
  for (const auto& a : m.atoms()) {
    csv.cell(t).cell(a.r);
    trait_cells(csv, a.x);
    csv.cell(a.w);
    csv.end_row();
  }
}

void run_meanfield(const RunConfig& cfg, const RateModel& model, const RunOptions& opt, Output& out) {
  const std::size_t d = cfg.model.dim;
  const AtomicMeasure init(cfg.atoms);
  out.extra()["method"] = cfg.method;
  if (cfg.method == "finite") {
    const auto res = meanfield_finite_solve(model, cfg.N, init, cfg.traits, cfg.horizon, cfg.dt, cfg.snapshot_interval);
    CsvBuffer csv(header({"t", "r"}, d, {"weight"}));
    for (std::size_t k = 0; k < res.trajectory.times.size(); ++k)
      measure_rows(csv, res.trajectory.times[k], res.trajectory.measures[k]);
    out.write("meanfield.csv", csv.text());
    out.check("mass_conservation", res.max_mass_error <= 1e-10, res.max_mass_error, 1e-10);
    out.extra()["warnings"] = res.warnings;
  } else if (cfg.method == "particles") {
    Rng rng(derive_stream_seed(cfg.seed, 0));
    const auto res = mckean_vlasov_run(model, cfg.N, cfg.M, init, cfg.horizon, rng, cfg.snapshot_interval);
    CsvBuffer csv(header({"t", "r"}, d, {"weight"}));
    double worst = 0.0;
    for (std::size_t k = 0; k < res.law.times.size(); ++k) {
      measure_rows(csv, res.law.times[k], res.law.measures[k]);
      worst = std::max(worst, std::abs(res.law.measures[k].total_weight() - 1.0));
    }
    out.write("meanfield.csv", csv.text());
    out.check("mass_conservation", worst <= 1e-10, worst, 1e-10);
    out.extra()["mutation_fixations"] = res.counters.mutation_fixations;
    out.extra()["migration_fixations"] = res.counters.migration_fixations;
  } else {
    const auto f = expr::mutation_rate_kernel(expr::parse(cfg.statistic));
    ChaosOptions copt{cfg.replicates, cfg.seed, opt.threads};
    const auto rows = chaos_decay_scan(
        model, cfg.N, cfg.K_list, init, [&](TraitView x) { return f(0.0, x); }, cfg.t_star, copt);
    CsvBuffer csv({"K", "estimate", "stderr"});
    for (const auto& row : rows) {
      csv.cell(row.K).cell(row.estimate).cell(row.std_error);
      csv.end_row();
    }
    out.write("chaos.csv", csv.text());
    const auto& last = rows.back();
    const double tol = std::max(0.05, 4.0 * last.std_error);
    out.check("terminal_abs_correlation", std::abs(last.estimate) <= tol, std::abs(last.estimate), tol);
  }
}

void weight_rows(CsvBuffer& csv, double t, const Eigen::VectorXd& w) {
  csv.cell(t);
  for (Eigen::Index i = 0; i < w.size(); ++i) csv.cell(w[i]);
  csv.end_row();
}

std::size_t record_stride(const RunConfig& cfg) {
  if (!(cfg.snapshot_interval > 0.0)) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.snapshot_interval / cfg.dt)));
}

void run_replicator(const RunConfig& cfg, const RateModel& model, Output& out) {
  const std::size_t n = cfg.traits.size();
  const Eigen::VectorXd w0 = Eigen::Map<const Eigen::VectorXd>(cfg.w0.data(), static_cast<Eigen::Index>(n));
  std::vector<std::string> cols{"t"};
  for (std::size_t i = 1; i <= n; ++i) cols.push_back("w" + std::to_string(i));
  const std::size_t stride = record_stride(cfg);

  if (cfg.mode == "spatial") {
    const auto G = static_cast<Eigen::Index>(cfg.G);
    const Eigen::MatrixXd grid = w0.replicate(1, G);
    const auto traj = spatial_weights_integrate(model, cfg.traits, cfg.N, grid, cfg.dt, cfg.horizon);
    CsvBuffer mean(cols);
    CsvBuffer spatial({"t", "trait_index", "grid_index", "w"});
    double mass_err = 0.0, min_w = 1.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      const auto& w = traj.weights[k];
      mass_err = std::max(mass_err, std::abs(w.sum() / static_cast<double>(G) - 1.0));
      min_w = std::min(min_w, w.minCoeff());
      if (k % stride != 0 && k + 1 != traj.times.size()) continue;
      weight_rows(mean, traj.times[k], traj.mean_weights(k));
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index g = 0; g < G; ++g) {
          spatial.cell(traj.times[k]).cell(static_cast<std::size_t>(i + 1)).cell(static_cast<std::size_t>(g)).cell(w(i, g));
          spatial.end_row();
        }
    }
    out.write("replicator_meanweights.csv", mean.text());
    out.write("replicator_spatial.csv", spatial.text());
    out.check("mass_conservation", mass_err <= 1e-10, mass_err, 1e-10);
    out.check("positivity", min_w > 0.0 || w0.minCoeff() == 0.0, min_w, 0.0);
    return;
  }

  const auto A = build_interaction_matrix(model, cfg.traits, cfg.N);
  const auto traj = replicator_integrate(A, w0, cfg.dt, cfg.horizon);
  CsvBuffer csv(cols);
  double mass_err = 0.0, min_w = 1.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    mass_err = std::max(mass_err, std::abs(traj.weights[k].sum() - 1.0));
    min_w = std::min(min_w, traj.weights[k].minCoeff());
    if (k % stride == 0 || k + 1 == traj.times.size()) weight_rows(csv, traj.times[k], traj.weights[k]);
  }
  out.write("replicator_meanweights.csv", csv.text());
  out.check("mass_conservation", mass_err <= 1e-10, mass_err, 1e-10);
  if (w0.minCoeff() > 0.0) out.check("positivity", min_w > 0.0, min_w, 0.0);

  const auto invader = invasion_check(A, w0);
  if (invader) {
    double worst = 0.0;
    for (std::size_t k = 1; k < traj.times.size(); ++k)
      worst = std::max(worst, traj.weights[k - 1][*invader] - traj.weights[k][*invader]);
    out.check("invader_share_nondecreasing", worst <= 1e-9, worst, 1e-9);
    out.extra()["invader"] = *invader + 1;
  } else {
    out.extra()["invader"] = nullptr;
  }
  if (const auto eq = interior_equilibrium(A); eq && w0.minCoeff() > 0.0) {
    const double v0 = replicator_integral(*eq, traj.weights.front());
    double drift = 0.0;
    for (const auto& w : traj.weights) drift = std::max(drift, std::abs(replicator_integral(*eq, w) - v0));
    out.check("interior_integral_drift", drift < 1e-6, drift, 1e-6);
  }
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.A.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < A.A.cols(); ++j) row.push_back(A.A(i, j));
    rows.push_back(row);
  }
  out.extra()["interaction_matrix"] = rows;
  out.extra()["max_asymmetry"] = A.max_asymmetry;
  const auto& last = traj.weights.back();
  out.extra()["terminal_weights"] = std::vector<double>(last.data(), last.data() + last.size());
}

void run_canonical(const RunConfig& cfg, const RateModel& model, Output& out) {
  const std::size_t d = cfg.model.dim;
  const AtomicMeasure init(cfg.atoms);
  Rng rng(derive_stream_seed(cfg.seed, 0));
  XiEnsemble e0;
  e0.d = d;
  for (std::size_t i = 0; i < cfg.M; ++i) {
    const Atom& a = init.atoms()[init.sample_index(rng)];
    e0.r.push_back(a.r);
    e0.traits.insert(e0.traits.end(), a.x.coords().begin(), a.x.coords().end());
  }
  const auto traj = canonical_ensemble_run(model, cfg.N, std::move(e0), cfg.dt, cfg.horizon, rng,
                                           {cfg.snapshot_interval});
  CsvBuffer particles(header({"t", "particle"}, d));
  std::vector<std::string> mcols{"t"};
  for (auto& c : coordinate_columns(d, "mean_x")) mcols.push_back(c);
  for (auto& c : coordinate_columns(d, "var_x")) mcols.push_back(c);
  CsvBuffer moments(mcols);
  std::size_t non_finite = 0;
  for (const auto& s : traj.snapshots) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      particles.cell(s.time).cell(i);
      trait_cells(particles, s.trait(i));
      particles.end_row();
      for (double v : s.trait(i)) non_finite += std::isfinite(v) ? 0 : 1;
    }
    const auto m = ensemble_moments(s);
    moments.cell(s.time);
    for (Eigen::Index k = 0; k < m.mean.size(); ++k) moments.cell(m.mean[k]);
    for (Eigen::Index k = 0; k < m.variance.size(); ++k) moments.cell(m.variance[k]);
    moments.end_row();
  }
  out.write("canonical.csv", particles.text());
  out.write("canonical_moments.csv", moments.text());
  out.check_bound("finite_traits", static_cast<double>(non_finite), 0.0);
  out.extra()["accepted_jumps"] = traj.accepted_jumps;
  out.extra()["proposed_jumps"] = traj.proposed_jumps;
}

void run_compare(const RunConfig& cfg, const RateModel& model, const RunOptions& opt, Output& out) {
  CsvBuffer table({"gamma", "tv", "stderr", "polymorphic_fraction"});
  CsvBuffer outcomes({"gamma", "outcome", "micro", "tss"});
  std::vector<CompareReport> reports;
  for (double g : cfg.gammas) {
    CompareOptions copt;
    copt.replicates = cfg.replicates;
    copt.seed = cfg.seed;
    copt.threads = opt.threads;
    reports.push_back(tss_vs_micro_compare(model, cfg.sites, cfg.N, g, cfg.t_star, copt));
    const auto& r = reports.back();
    table.cell(g).cell(r.tv).cell(r.tv_stderr).cell(r.polymorphic_fraction);
    table.end_row();
    for (const auto& o : r.outcomes) {
      outcomes.cell(g).cell(o.label).cell(o.micro).cell(o.tss);
      outcomes.end_row();
    }
    out.check("polymorphic_fraction_gamma_" + format_double(g), r.polymorphic_fraction <= 0.05,
              r.polymorphic_fraction, 0.05);
  }
  out.write("compare.csv", table.text());
  out.write("compare_outcomes.csv", outcomes.text());
}

}  // namespace

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunResult run(const RunConfig& cfg, const RunOptions& options) {
  const std::string started = utc_now();
  const RateModel model = build_model(cfg);
  Output out(options.out);
  switch (cfg.regime) {
    case Regime::micro: run_micro(cfg, model, options, out); break;
    case Regime::tss: run_tss(cfg, model, options, out); break;
    case Regime::meanfield: run_meanfield(cfg, model, options, out); break;
    case Regime::replicator: run_replicator(cfg, model, out); break;
    case Regime::canonical: run_canonical(cfg, model, out); break;
    case Regime::compare: run_compare(cfg, model, options, out); break;
  }

  RunResult result;
  json checks = json::array();
  for (const auto& c : out.checks()) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}});
    result.pass = result.pass && c.pass;
  }
  result.summary = {{"regime", to_string(cfg.regime)}, {"invariant_checks", checks}};
  for (auto& [k, v] : out.extra().items()) result.summary[k] = v;
  result.outputs = out.files();
  std::ofstream(options.out / "summary.json", std::ios::binary) << result.summary.dump(2) << '\n';

  json manifest = {{"config_hash", config_hash(cfg.source)},
                   {"version", kVersion},
                   {"seed", cfg.seed},
                   {"threads", options.threads},
                   {"started", started},
                   {"finished", utc_now()},
                   {"outputs", result.outputs},
                   {"config", cfg.source}};
  std::ofstream(options.out / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  return result;
}

namespace {

void set_path(json& doc, const std::string& path, const json& value) {
  json* cur = &doc;
  std::istringstream in(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!cur->contains(parts[i]) || !(*cur)[parts[i]].is_object()) (*cur)[parts[i]] = json::object();
    cur = &(*cur)[parts[i]];
  }
  (*cur)[parts.back()] = value;
}

}  // namespace

bool sweep(const json& doc, const RunOptions& options) {
  if (!doc.contains("sweep") || !doc["sweep"].is_object())
    throw ConfigError("sweep", "required field is missing");
  const json& block = doc["sweep"];
  if (!block.contains("parameter") || !block["parameter"].is_string())
    throw ConfigError("sweep.parameter", "must be a dotted field path");
  if (!block.contains("values") || !block["values"].is_array() || block["values"].empty())
    throw ConfigError("sweep.values", "must be a nonempty array");
  const auto parameter = block["parameter"].get<std::string>();

  // Validate every point before running any of them.
  std::vector<RunConfig> configs;
  for (std::size_t k = 0; k < block["values"].size(); ++k) {
    json point = doc;
    point.erase("sweep");
    set_path(point, parameter, block["values"][k]);
    try {
      configs.push_back(parse_config(point));
    } catch (const ConfigError& e) {
      auto diags = e.diagnostics();
      for (auto& d : diags) d.message += " (sweep point " + std::to_string(k) + ")";
      throw ConfigError(diags);
    }
  }
  fs::create_directories(options.out);
  CsvBuffer table({"index", "value", "pass", "dir"});
  bool all = true;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    char dir[32];
    std::snprintf(dir, sizeof dir, "sweep_%04zu", k);
    RunOptions point = options;
    point.out = options.out / dir;
    const auto res = run(configs[k], point);
    all = all && res.pass;
    table.cell(k).cell(block["values"][k].dump()).cell(res.pass ? "true" : "false").cell(dir);
    table.end_row();
  }
  std::ofstream(options.out / "sweep.csv", std::ios::binary) << table.text();
  return all;
}

}  // namespace metapop::app
