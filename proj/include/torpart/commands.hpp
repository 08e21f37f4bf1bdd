#pragma once

// Batch commands behind the torpart executable. Each takes a JSON config,
// validates it against its schema (collecting every offending field), runs,
// and writes its artifacts. Outputs are deterministic given the config;
// wall-clock data goes to separate *.meta.json files.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "torpart/hex_tiling.hpp"
#include "torpart/io.hpp"
#include "torpart/partition_extract.hpp"
#include "torpart/relaxed_optimizer.hpp"
#include "torpart/svg.hpp"
#include "torpart/torus_spectra.hpp"

namespace torpart::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kSchemaVersion = 1;

/// Rejected config; `detail` is the machine-readable error document.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(json d) : InvalidArgument(d.dump()), detail(std::move(d)) {}
  json detail;
};

/// Typed access to a config object that records every violation before failing.
class Schema {
 public:
  Schema(std::string command, const json& cfg) : command_(std::move(command)), cfg_(cfg) {
    if (!cfg_.is_object()) {
      fail("", "config must be a JSON object");
      finish();
    }
    seen_.insert("schema_version");
    if (cfg_.contains("schema_version") &&
        !(cfg_["schema_version"].is_number_integer() && cfg_["schema_version"].get<int>() == kSchemaVersion))
      fail("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }

  void fail(const std::string& field, const std::string& message) {
    errors_.push_back({{"field", field}, {"message", message}});
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return cfg_.contains(key) && !cfg_[key].is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return cfg_[key];
  }

  std::optional<long> integer(const std::string& key, std::optional<long> def, long lo, long hi) {
    if (!has(key)) {
      if (!def) fail(key, "required integer");
      return def;
    }
    const json& v = cfg_[key];
    if (!v.is_number_integer()) {
      fail(key, "must be an integer");
      return def;
    }
    const long x = v.get<long>();
    if (x < lo || x > hi) {
      fail(key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return def;
    }
    return x;
  }

  std::optional<double> number(const std::string& key, std::optional<double> def, double lo, double hi,
                               bool open_low = false) {
    if (!has(key)) {
      if (!def) fail(key, "required number");
      return def;
    }
    const json& v = cfg_[key];
    if (!v.is_number()) {
      fail(key, "must be a number");
      return def;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_low && x == lo)) {
      fail(key, std::string("must be in ") + (open_low ? "(" : "[") + io::fmt(lo) + ", " + io::fmt(hi) + "]");
      return def;
    }
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!cfg_[key].is_boolean()) {
      fail(key, "must be true or false");
      return def;
    }
    return cfg_[key].get<bool>();
  }

  std::optional<std::string> string(const std::string& key, std::optional<std::string> def,
                                    const std::vector<std::string>& choices = {}) {
    if (!has(key)) {
      if (!def) fail(key, "required string");
      return def;
    }
    if (!cfg_[key].is_string()) {
      fail(key, "must be a string");
      return def;
    }
    auto s = cfg_[key].get<std::string>();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string all;
      for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
      fail(key, "must be one of: " + all);
      return def;
    }
    return s;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def, double lo, double hi) {
    if (!has(key)) return def;
    const json& v = cfg_[key];
    if (!v.is_array() || v.empty()) {
      fail(key, "must be a nonempty array of numbers");
      return def;
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !(e.get<double>() >= lo && e.get<double>() <= hi)) {
        fail(key, "entries must be numbers in [" + io::fmt(lo) + ", " + io::fmt(hi) + "]");
        return def;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<long> integers(const std::string& key, std::vector<long> def, long lo, long hi) {
    if (!has(key)) return def;
    const json& v = cfg_[key];
    if (!v.is_array() || v.empty()) {
      fail(key, "must be a nonempty array of integers");
      return def;
    }
    std::vector<long> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long>() < lo || e.get<long>() > hi) {
        fail(key, "entries must be integers in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return def;
      }
      out.push_back(e.get<long>());
    }
    return out;
  }

  /// Throws ConfigError listing unknown keys and every recorded violation.
  void finish() {
    if (cfg_.is_object())
      for (auto it = cfg_.begin(); it != cfg_.end(); ++it)
        if (!seen_.count(it.key())) fail(it.key(), "unknown field");
    if (!errors_.empty()) throw ConfigError({{"error", "config"}, {"command", command_}, {"fields", errors_}});
  }

 private:
  std::string command_;
  const json& cfg_;
  json errors_ = json::array();
  std::set<std::string> seen_;
};

namespace detail {

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline void write_meta(const fs::path& path, const std::string& command, const std::string& started, double seconds) {
  io::write_file(path.string(), json{{"command", command},
                                     {"started", started},
                                     {"finished", timestamp()},
                                     {"wall_seconds", seconds}}
                                    .dump(2) +
                                    "\n");
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string csv_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string modes_text(const SpectralLine& line) {
  std::string s;
  for (const auto& m : line.modes) s += (s.empty() ? "" : ";") + std::to_string(m.m) + ":" + std::to_string(m.n);
  return s;
}

inline std::optional<WrapMatrix> parse_wrap(Schema& sc, const std::string& key, std::optional<long> k) {
  if (!sc.has(key)) {
    if (k && WrapMatrix::standard(static_cast<int>(*k))) return WrapMatrix::standard(static_cast<int>(*k));
    return std::nullopt;
  }
  const json& v = sc.raw(key);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "V3") return WrapMatrix::v3();
    if (s == "V4") return WrapMatrix::v4();
    if (s == "V5") return WrapMatrix::v5();
    sc.fail(key, "named matrices are V3, V4, V5");
    return std::nullopt;
  }
  const bool shape = v.is_array() && v.size() == 2 && v[0].is_array() && v[1].is_array() && v[0].size() == 2 &&
                     v[1].size() == 2 && v[0][0].is_number_integer() && v[0][1].is_number_integer() &&
                     v[1][0].is_number_integer() && v[1][1].is_number_integer();
  if (!shape) {
    sc.fail(key, "must be [[v11, v12], [v21, v22]] with integer entries, or \"V3\"/\"V4\"/\"V5\"");
    return std::nullopt;
  }
  WrapMatrix V(v[0][0].get<int>(), v[0][1].get<int>(), v[1][0].get<int>(), v[1][1].get<int>(), 0);
  V.k = std::abs(V.det());
  if (V.k == 0) {
    sc.fail(key, "matrix is singular");
    return std::nullopt;
  }
  if (k && *k != V.k) {
    sc.fail(key, "|det V| = " + std::to_string(V.k) + " does not match k = " + std::to_string(*k));
    return std::nullopt;
  }
  return V;
}

inline std::vector<std::pair<int, int>> parse_levels(Schema& sc, const std::string& key,
                                                      std::vector<std::pair<int, int>> def) {
  if (!sc.has(key)) return def;
  const json& v = sc.raw(key);
  std::vector<std::pair<int, int>> out;
  bool ok = v.is_array() && !v.empty();
  if (ok)
    for (const auto& e : v) {
      if (!(e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer() &&
            e[0].get<int>() >= 4 && e[1].get<int>() >= 4 && e[0].get<int>() <= 4096 && e[1].get<int>() <= 4096)) {
        ok = false;
        break;
      }
      out.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  if (!ok) {
    sc.fail(key, "must be a nonempty list of [nx, ny] pairs with 4 <= n <= 4096");
    return def;
  }
  return out;
}

// Optimizer fields shared by `optimize` and the optimizer column of `sweep`.
struct OptimizerFields {
  OptimizerConfig cfg;
  long seeds = 1;
  double eval_tol = 1e-8;
};

inline OptimizerFields parse_optimizer_fields(Schema& sc, OptimizerFields f) {
  f.cfg.p = sc.number("p", f.cfg.p, 1.0, 1e3).value_or(f.cfg.p);
  f.cfg.eps_schedule = sc.numbers("eps_schedule", f.cfg.eps_schedule, 1e-300, 1e6);
  f.cfg.eps_final_factor = sc.number("eps_final_factor", f.cfg.eps_final_factor, 0.0, 1e6, true).value_or(4.0);
  f.cfg.max_iters = static_cast<int>(sc.integer("max_iters", f.cfg.max_iters, 1, 1000000).value_or(200));
  f.cfg.rng_seed = static_cast<std::uint64_t>(sc.integer("seed", 1, 0, 1L << 53).value_or(1));
  f.cfg.stop_tol = sc.number("stop_tol", f.cfg.stop_tol, 0.0, 1.0).value_or(1e-5);
  f.cfg.eig_tol = sc.number("eig_tol", f.cfg.eig_tol, 0.0, 1e-2, true).value_or(1e-9);
  f.seeds = sc.integer("seeds", f.seeds, 1, 1000).value_or(1);
  f.eval_tol = sc.number("eval_tol", f.eval_tol, 0.0, 1e-2, true).value_or(1e-8);
  if (sc.has("step")) {
    const json& st = sc.raw("step");
    Schema sub("step", st);
    auto& s = f.cfg.step;
    s.initial_step = sub.number("initial_step", s.initial_step, 0.0, 1e6, true).value_or(s.initial_step);
    s.backtrack = sub.number("backtrack", s.backtrack, 0.0, 1.0, true).value_or(s.backtrack);
    s.growth = sub.number("growth", s.growth, 1.0, 100.0).value_or(s.growth);
    s.armijo = sub.number("armijo", s.armijo, 0.0, 1.0, true).value_or(s.armijo);
    s.max_backtracks = static_cast<int>(sub.integer("max_backtracks", s.max_backtracks, 0, 200).value_or(30));
    s.fixed = sub.boolean("fixed", s.fixed);
    try {
      sub.finish();
    } catch (const ConfigError& e) {
      for (const auto& err : e.detail["fields"]) sc.fail("step." + err["field"].get<std::string>(), err["message"]);
    }
  }
  for (std::size_t i = 1; i < f.cfg.eps_schedule.size(); ++i)
    if (!(f.cfg.eps_schedule[i] < f.cfg.eps_schedule[i - 1])) sc.fail("eps_schedule", "must be strictly decreasing");
  return f;
}

inline json drift_json(const EnergyReport& rep) {
  if (!rep.complete || rep.per_domain_lambda1.empty()) return nullptr;
  const auto [lo, hi] = std::minmax_element(rep.per_domain_lambda1.begin(), rep.per_domain_lambda1.end());
  double mean = 0.0;
  for (double l : rep.per_domain_lambda1) mean += l;
  mean /= static_cast<double>(rep.per_domain_lambda1.size());
  const double drift = mean > 0 ? (*hi - *lo) / mean : 0.0;
  return {{"relative_spread", drift}, {"flagged", drift > 0.10}};
}

}  // namespace detail

// ---------------------------------------------------------------- spectrum

inline int cmd_spectrum(const json& cfg, std::ostream& out) {
  Schema sc("spectrum", cfg);
  const double a = sc.number("a", 1.0, 0.0, 1e6, true).value_or(1.0);
  const double b = sc.number("b", 1.0, 0.0, 1e6, true).value_or(1.0);
  const long count = sc.integer("count", 10, 1, 100000).value_or(10);
  const auto k = sc.has("k") ? sc.integer("k", std::nullopt, 3, 100000) : std::nullopt;
  const long antisym_count = sc.integer("antisym_count", count, 1, 100000).value_or(count);
  const auto covering = sc.string("covering", "double", {"double", "quadruple"}).value_or("double");
  const auto path = sc.string("out", "-").value_or("-");
  if (b > a) sc.fail("b", "must satisfy b <= a");
  sc.finish();

  std::ostringstream os;
  os << "kind,index,value,multiplicity,detail\n";
  const auto lines = sorted_spectrum({a, b}, static_cast<int>(count));
  for (std::size_t i = 0; i < lines.size(); ++i)
    os << "torus," << i + 1 << ',' << detail::csv_num(lines[i].value) << ',' << lines[i].multiplicity << ','
       << detail::modes_text(lines[i]) << '\n';
  const Covering cov = covering == "double" ? Covering::kDouble : Covering::kQuadruple;
  const auto anti = antisym_spectrum(cov, b, static_cast<int>(antisym_count));
  for (std::size_t i = 0; i < anti.size(); ++i)
    os << "antisym_" << covering << ',' << i + 1 << ',' << detail::csv_num(anti[i].value) << ','
       << anti[i].multiplicity << ',' << detail::modes_text(anti[i]) << '\n';
  if (k) {
    const auto t = transition_values(static_cast<int>(*k));
    if (t.even_value) os << "transition," << *k << ',' << detail::csv_num(*t.even_value) << ",,even_value\n";
    if (t.conjectured_odd)
      os << "transition," << *k << ',' << detail::csv_num(*t.conjectured_odd) << ",,conjectured_odd\n";
    os << "transition," << *k << ',' << detail::csv_num(t.strip_lower) << ",,strip_lower\n";
    os << "transition," << *k << ',' << detail::csv_num(t.strip_upper) << ",,strip_upper\n";
    os << "antisym_kth," << *k << ',' << detail::csv_num(antisym_eigenvalue(cov, b, static_cast<int>(*k))) << ",,"
       << covering << '\n';
    os << "strip_energy," << *k << ',' << detail::csv_num(strip_partition_energy(static_cast<int>(*k), a)) << ",,\n";
  }
  if (path == "-")
    out << os.str();
  else
    io::write_file(path, os.str());
  return kExitOk;
}

// ---------------------------------------------------------------- optimize

inline int cmd_optimize(const json& cfg, std::ostream& log) {
  Schema sc("optimize", cfg);
  const long k = sc.integer("k", std::nullopt, 2, 64).value_or(2);
  const double a = sc.number("a", 1.0, 0.0, 1e6, true).value_or(1.0);
  const double b = sc.number("b", std::nullopt, 0.0, 1e6, true).value_or(1.0);
  if (b > a) sc.fail("b", "must satisfy b <= a");
  detail::OptimizerFields f;
  f.cfg.k = static_cast<int>(k);
  f.cfg.geom = {a, std::min(a, b)};
  f.cfg.levels = detail::parse_levels(sc, "levels", OptimizerConfig::default_levels(b, a));
  f = detail::parse_optimizer_fields(sc, f);
  const auto warm_path = sc.string("warm_start", "").value_or("");
  const auto out_dir = sc.string("out_dir", ".").value_or(".");
  sc.finish();

  const auto started = detail::timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    f.cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError({{"error", "config"}, {"command", "optimize"}, {"fields", {{{"field", ""}, {"message", e.what()}}}}});
  }
  std::optional<DensityMatrix> warm;
  if (!warm_path.empty()) {
    try {
      warm = io::density_from_text(io::read_file(warm_path));
    } catch (const InvalidArgument& e) {
      throw ConfigError(
          {{"error", "config"}, {"command", "optimize"}, {"fields", {{{"field", "warm_start"}, {"message", e.what()}}}}});
    }
    if (warm->k != k)
      throw ConfigError({{"error", "config"},
                         {"command", "optimize"},
                         {"fields", {{{"field", "warm_start"}, {"message", "warm start has a different k"}}}}});
  }
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  std::vector<StartResult> starts;
  std::size_t best = 0;
  for (long s = 0; s < f.seeds; ++s) {
    OptimizerConfig c = f.cfg;
    c.rng_seed = f.cfg.rng_seed + static_cast<std::uint64_t>(s);
    auto run = warm ? optimize(c, *warm) : optimize(c);
    starts.push_back(score_run(c.rng_seed, std::move(run), c.p, f.eval_tol));
    if (starts.back().extracted_energy() < starts[best].extracted_energy()) best = starts.size() - 1;
    io::write_file((dir / ("trace_seed" + std::to_string(c.rng_seed) + ".csv")).string(),
                   starts.back().run.trace.to_csv());
    log << "seed " << c.rng_seed << ": extracted energy " << detail::csv_num(starts.back().extracted_energy())
        << "\n";
  }

  const StartResult& top = starts[best];
  json report = {{"command", "optimize"},
                 {"k", k},
                 {"a", a},
                 {"b", b},
                 {"p", f.cfg.p},
                 {"levels", f.cfg.levels},
                 {"eps_final", f.cfg.eps_final(f.cfg.levels.back().first, f.cfg.levels.back().second)},
                 {"eig_tol", f.cfg.eig_tol},
                 {"eval_tol", f.eval_tol},
                 {"warm_start", warm_path.empty() ? json(nullptr) : json(warm_path)},
                 {"strip_energy", strip_partition_energy(static_cast<int>(k), a)},
                 {"best_seed", top.seed}};
  json runs = json::array();
  for (const auto& s : starts)
    runs.push_back({{"seed", s.seed},
                    {"extracted_energy", std::isfinite(s.extracted_energy()) ? json(s.extracted_energy()) : json(nullptr)},
                    {"relaxed_energy", s.run.trace.rows.empty() ? json(nullptr) : json(s.run.trace.rows.back().energy)},
                    {"aborted", s.run.trace.aborted},
                    {"error", s.run.trace.error},
                    {"extract_error", s.extract_error},
                    {"warnings", s.run.trace.warnings},
                    {"trace_hash", detail::hex(s.run.trace.hash())}});
  report["starts"] = runs;

  io::write_file((dir / "density.txt").string(), io::density_to_text(top.run.phi));
  io::write_file((dir / "trace.csv").string(), top.run.trace.to_csv());
  const LabelField labels = binarize(top.run.phi);
  io::write_file((dir / "partition.csv").string(), io::labels_to_csv(labels));

  int code = kExitOk;
  if (top.report) {
    report["energy"] = io::to_json(*top.report);
    report["equispectral_drift"] = detail::drift_json(*top.report);
    const auto part = extract(labels);
    report["components"] = connected_components(part);
    io::write_file((dir / "partition.svg").string(), svg::partition(part));
  } else {
    report["energy"] = nullptr;
    report["error"] = top.extract_error.empty() ? top.run.trace.error : top.extract_error;
    code = kExitNumerical;
  }
  if (top.report && !top.report->complete) code = kExitNumerical;
  io::write_file((dir / "report.json").string(), report.dump(2) + "\n");
  detail::write_meta(dir / "report.meta.json", "optimize", started, detail::seconds_since(t0));
  return code;
}

// ---------------------------------------------------------------- tiling

inline int cmd_tiling(const json& cfg, std::ostream& log) {
  Schema sc("tiling", cfg);
  const auto k = sc.has("k") ? sc.integer("k", std::nullopt, 1, 10000) : std::nullopt;
  const auto V = detail::parse_wrap(sc, "V", k);
  if (!V && !sc.has("V")) sc.fail("V", "required (or give k in {3,4,5})");
  const double b = sc.number("b", std::nullopt, 0.0, 1.0, true).value_or(1.0);
  const int resolution = static_cast<int>(sc.integer("resolution", 128, 24, 4096).value_or(128));
  const bool gaps = sc.boolean("gaps", true);
  const int raster_nx = static_cast<int>(sc.integer("raster_nx", 192, 16, 8192).value_or(192));
  const double tol = sc.number("tol", 1e-8, 0.0, 1e-2, true).value_or(1e-8);
  const auto out_dir = sc.string("out_dir", ".").value_or(".");
  sc.finish();

  const auto started = detail::timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  const AdaptedBasis basis = adapted_basis(*V, b);
  const FermatTest ft = fermat_test(basis);
  if (!ft.exists) {
    json err = {{"error", "no_tiling"}, {"command", "tiling"}, {"b", b}, {"p", ft.p}, {"r", ft.r}};
    try {
      err["bH"] = threshold_bH(*V);
    } catch (const std::exception&) {
      err["bH"] = nullptr;
    }
    err["message"] = "no Fermat point for the adapted basis at b = " + detail::csv_num(b);
    throw ConfigError(err);
  }
  const HexTiling t = build_tiling(*V, b);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  json doc = io::to_json(t);
  doc["fermat_test"] = {{"p", ft.p}, {"r", ft.r}};
  try {
    doc["threshold_bH"] = threshold_bH(*V);
  } catch (const std::exception&) {
    doc["threshold_bH"] = nullptr;
  }
  const HexEnergy e = hex_lambda1(t, resolution, tol);
  doc["lambda1"] = e.lambda1;
  doc["upper_bound"] = e.upper_bound;
  doc["strip_energy"] = strip_partition_energy(t.k(), 1.0);
  doc["grid"] = {{"resolution", resolution}, {"spacing", e.spacing}, {"n", e.grid_n}, {"points", e.points}, {"tol", tol}};
  log << "lambda1(Hex) = " << detail::csv_num(e.lambda1) << "\n";
  if (gaps) {
    json g = json::array();
    for (int j = 1; j <= 3; ++j) {
      const auto d = double_hex_gap(t, j, resolution, tol);
      g.push_back({{"j", j},
                   {"delta", d.delta},
                   {"lambda1_hex", d.lambda1_hex},
                   {"lambda1_union", d.lambda1_union},
                   {"lambda2_union", d.lambda2_union}});
      log << "delta_" << j << " = " << detail::csv_num(d.delta) << "\n";
    }
    doc["gaps"] = g;
  }
  const int raster_ny = std::max(4, static_cast<int>(std::lround(raster_nx * b)));
  try {
    const auto raster = rasterize(t, PeriodicGrid({1.0, b}, raster_nx, raster_ny));
    io::write_file((dir / "partition.csv").string(), io::labels_to_csv(raster.labels));
    io::write_file((dir / "partition.svg").string(), svg::partition(extract(raster.labels)));
    doc["raster"] = {{"nx", raster_nx}, {"ny", raster_ny}};
  } catch (const InvalidArgument& ex) {
    doc["raster"] = {{"error", ex.what()}};
  }
  io::write_file((dir / "tiling.json").string(), doc.dump(2) + "\n");
  io::write_file((dir / "tiling.svg").string(), svg::tiling(t));
  detail::write_meta(dir / "tiling.meta.json", "tiling", started, detail::seconds_since(t0));
  return kExitOk;
}

// ---------------------------------------------------------------- nodal

inline int cmd_nodal(const json& cfg, std::ostream& log) {
  Schema sc("nodal", cfg);
  const double a = sc.number("a", 1.0, 0.0, 1e6, true).value_or(1.0);
  const double b = sc.number("b", 1.0, 0.0, 1e6, true).value_or(1.0);
  const int nx = static_cast<int>(sc.integer("nx", 256, 4, 8192).value_or(256));
  const int ny = static_cast<int>(sc.integer("ny", std::max(4L, std::lround(256 * b / a)), 4, 8192).value_or(4));
  const double p = sc.number("p", 8.0, 1.0, 1e3).value_or(8.0);
  const double tol = sc.number("tol", 1e-8, 0.0, 1e-2, true).value_or(1e-8);
  const auto out_dir = sc.string("out_dir", ".").value_or(".");
  if (b > a) sc.fail("b", "must satisfy b <= a");
  TrigExpression expr;
  if (!sc.has("terms")) {
    sc.fail("terms", "required list of {coef, x, m, y, n}");
  } else {
    const json& terms = sc.raw("terms");
    if (!terms.is_array() || terms.empty()) sc.fail("terms", "must be a nonempty list");
    for (std::size_t i = 0; terms.is_array() && i < terms.size(); ++i) {
      Schema st("terms[" + std::to_string(i) + "]", terms[i]);
      const double coef = st.number("coef", 1.0, -1e12, 1e12).value_or(0.0);
      const auto fx = st.string("x", std::nullopt, {"sin", "cos"}).value_or("cos");
      const long m = st.integer("m", std::nullopt, 0, 100000).value_or(0);
      const auto fy = st.string("y", std::nullopt, {"sin", "cos"}).value_or("cos");
      const long n = st.integer("n", std::nullopt, 0, 100000).value_or(0);
      try {
        st.finish();
      } catch (const ConfigError& e) {
        for (const auto& err : e.detail["fields"])
          sc.fail("terms[" + std::to_string(i) + "]." + err["field"].get<std::string>(), err["message"]);
      }
      expr.push_back({coef, fx == "sin" ? Trig::kSin : Trig::kCos, static_cast<int>(m),
                      fy == "sin" ? Trig::kSin : Trig::kCos, static_cast<int>(n)});
    }
  }
  sc.finish();

  const auto started = detail::timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  const PeriodicGrid grid({a, b}, nx, ny);
  LabelField labels;
  try {
    labels = nodal_labels(expr, grid);
  } catch (const InvalidArgument& e) {
    throw ConfigError({{"error", "config"}, {"command", "nodal"}, {"fields", {{{"field", "terms"}, {"message", e.what()}}}}});
  }
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const auto part = extract(labels);
  const auto rep = evaluate(part, p, tol);
  log << "nodal domains: " << labels.k << ", energy " << detail::csv_num(rep.energy_max) << "\n";
  json doc = {{"command", "nodal"}, {"a", a}, {"b", b}, {"nx", nx}, {"ny", ny}, {"domains", labels.k}};
  doc["energy"] = io::to_json(rep);
  doc["components"] = connected_components(part);
  doc["tie_cells"] = part.tie_cells;
  io::write_file((dir / "partition.csv").string(), io::labels_to_csv(labels));
  io::write_file((dir / "partition.svg").string(), svg::partition(part));
  io::write_file((dir / "report.json").string(), doc.dump(2) + "\n");
  detail::write_meta(dir / "report.meta.json", "nodal", started, detail::seconds_since(t0));
  return rep.complete ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
  double b = 0.0;
  std::vector<std::string> cells;  // everything after the b column
};

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{"b",           "strip_energy",      "hex_lambda1",  "hex_status",
                                             "square_bound", "optimizer_energy", "optimizer_status", "best_bound"};
  return cols;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Completed rows of an earlier (possibly interrupted) run, keyed by the b cell.
inline std::map<std::string, std::string> completed_rows(const std::string& path) {
  std::map<std::string, std::string> rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) return rows;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // a torn final line is recomputed
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() == sweep_columns().size()) rows[cells[0]] = line;
  }
  return rows;
}

}  // namespace detail

inline int cmd_sweep(const json& cfg, std::ostream& log) {
  Schema sc("sweep", cfg);
  const long k = sc.integer("k", std::nullopt, 2, 64).value_or(3);
  std::vector<double> bs;
  if (sc.has("b_values")) {
    bs = sc.numbers("b_values", {}, 1e-6, 1.0);
  } else {
    const double lo = sc.number("b_min", std::nullopt, 1e-6, 1.0).value_or(0.5);
    const double hi = sc.number("b_max", std::nullopt, 1e-6, 1.0).value_or(1.0);
    const double step = sc.number("b_step", std::nullopt, 0.0, 1.0, true).value_or(0.05);
    if (lo > hi) sc.fail("b_min", "must not exceed b_max");
    if (lo <= hi && step > 0)
      for (long i = 0; lo + i * step <= hi * (1 + 1e-12); ++i) bs.push_back(std::min(hi, lo + i * step));
  }
  const auto V = detail::parse_wrap(sc, "V", k);
  const int hex_resolution = static_cast<int>(sc.integer("hex_resolution", 128, 24, 4096).value_or(128));
  const double hex_tol = sc.number("hex_tol", 1e-8, 0.0, 1e-2, true).value_or(1e-8);
  const long workers = sc.integer("workers", 1, 1, 256).value_or(1);
  const auto out = sc.string("out", std::nullopt).value_or("sweep.csv");
  const auto svg_path = sc.string("svg", out + ".svg").value_or("");

  bool run_optimizer = false;
  detail::OptimizerFields of;
  of.cfg.k = static_cast<int>(k);
  std::vector<long> opt_nx{32, 64};
  if (sc.has("optimizer")) {
    const json& o = sc.raw("optimizer");
    if (o.is_boolean()) {
      run_optimizer = o.get<bool>();
    } else if (o.is_object()) {
      run_optimizer = true;
      Schema os("optimizer", o);
      opt_nx = os.integers("nx", opt_nx, 8, 4096);
      of = detail::parse_optimizer_fields(os, of);
      try {
        os.finish();
      } catch (const ConfigError& e) {
        for (const auto& err : e.detail["fields"]) sc.fail("optimizer." + err["field"].get<std::string>(), err["message"]);
      }
    } else {
      sc.fail("optimizer", "must be a boolean or an object of optimizer settings");
    }
  }
  sc.finish();

  const auto started = detail::timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  const double bh = V ? [&] {
    try {
      return threshold_bH(*V);
    } catch (const std::exception&) {
      return 2.0;
    }
  }()
                      : 2.0;

  auto compute = [&](double b) {
    std::vector<std::string> c;
    const double strip = strip_partition_energy(static_cast<int>(k), 1.0);
    double best = strip;
    c.push_back(detail::csv_num(strip));
    if (!V) {
      c.push_back("");
      c.push_back("no_matrix");
    } else if (!(b > bh)) {
      c.push_back("");
      c.push_back("below_bH");
    } else {
      try {
        const double l = hex_lambda1(*V, b, hex_resolution, hex_tol).lambda1;
        best = std::min(best, l);
        c.push_back(detail::csv_num(l));
        c.push_back("ok");
      } catch (const std::exception&) {
        c.push_back("");
        c.push_back("failed");
      }
    }
    if (k == 5 && std::abs(b - 1.0) < 1e-12) {
      best = std::min(best, 10 * kPi2);
      c.push_back(detail::csv_num(10 * kPi2));
    } else {
      c.push_back("");
    }
    if (run_optimizer) {
      OptimizerConfig oc = of.cfg;
      oc.geom = {1.0, b};
      oc.levels.clear();
      for (long nx : opt_nx)
        oc.levels.push_back({static_cast<int>(nx), std::max(4, static_cast<int>(std::lround(nx * b)))});
      try {
        const auto ms = multi_start(oc, static_cast<int>(of.seeds));
        const double e = ms.best_start().extracted_energy();
        if (std::isfinite(e)) {
          best = std::min(best, e);
          c.push_back(detail::csv_num(e));
          c.push_back("ok");
        } else {
          c.push_back("");
          c.push_back("failed");
        }
      } catch (const std::exception&) {
        c.push_back("");
        c.push_back("failed");
      }
    } else {
      c.push_back("");
      c.push_back("skipped");
    }
    c.push_back(detail::csv_num(best));
    return c;
  };

  auto done = detail::completed_rows(out);
  std::vector<std::string> keys;
  for (double b : bs) keys.push_back(detail::csv_num(b));
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < bs.size(); ++i)
    if (!done.count(keys[i])) pending.push_back(i);
  log << "sweep: " << bs.size() << " rows, " << bs.size() - pending.size() << " already done\n";

  // Completed rows are appended as they finish so an interruption loses at
  // most the rows in flight; the file is rewritten in b order at the end.
  {
    std::string header;
    for (const auto& c : sweep_columns()) header += (header.empty() ? "" : ",") + c;
    std::string text = header + "\n";
    for (const auto& [key, line] : done) text += line + "\n";
    io::write_file(out, text);
  }
  std::mutex mu;
  std::ofstream append(out, std::ios::app | std::ios::binary);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < pending.size();) {
      const std::size_t i = pending[t];
      const auto cells = compute(bs[i]);
      std::string line = keys[i];
      for (const auto& c : cells) line += "," + c;
      std::lock_guard<std::mutex> lock(mu);
      done[keys[i]] = line;
      append << line << "\n" << std::flush;
    }
  };
  std::vector<std::thread> pool;
  for (long w = 1; w < std::min<long>(workers, static_cast<long>(pending.size())); ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  append.close();

  std::string header;
  for (const auto& c : sweep_columns()) header += (header.empty() ? "" : ",") + c;
  std::string text = header + "\n";
  std::vector<svg::Series> series{{"k^2 pi^2", {}}, {"hex lambda1", {}}, {"optimizer", {}}};
  std::set<std::string> written;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    if (!written.insert(keys[i]).second) continue;
    const std::string& line = done.at(keys[i]);
    text += line + "\n";
    const auto cells = detail::split_csv(line);
    auto val = [&](std::size_t c) { return cells[c].empty() ? std::nan("") : std::stod(cells[c]); };
    series[0].points.push_back({bs[i], val(1)});
    series[1].points.push_back({bs[i], val(2)});
    series[2].points.push_back({bs[i], val(5)});
  }
  io::write_file(out, text);
  if (!svg_path.empty()) io::write_file(svg_path, svg::curves(series, "b", "energy"));
  detail::write_meta(out + ".meta.json", "sweep", started, detail::seconds_since(t0));
  return kExitOk;
}

/// Dispatches a command; maps errors to exit codes and writes a JSON error
/// document to `err`.
inline int run(const std::string& command, const json& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (command == "spectrum") return cmd_spectrum(cfg, out);
    if (command == "optimize") return cmd_optimize(cfg, err);
    if (command == "sweep") return cmd_sweep(cfg, err);
    if (command == "tiling") return cmd_tiling(cfg, err);
    if (command == "nodal") return cmd_nodal(cfg, err);
    err << json{{"error", "config"}, {"message", "unknown command " + command}}.dump() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << e.detail.dump() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << json{{"error", "numerical"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << json{{"error", "config"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << json{{"error", "io"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
    return kExitConfig;
  }
}

}  // namespace torpart::cli
