// torpart: spectra tables, optimizer runs, b-sweeps, tiling evaluation and
// nodal partitions. Every flag mirrors a config field; a --config file
// overrides the flags. Exit codes: 0 ok, 2 config error, 3 numerical failure.

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "torpart/commands.hpp"

using nlohmann::json;

namespace {

// Flag values are parsed as JSON when possible ("[[32,16]]", "0.5", "true"),
// otherwise kept as strings ("V3", "out/").
json flag_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

struct Sub {
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> flags;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral minimal partitions of flat tori"};
  app.require_subcommand(1);

  const std::map<std::string, std::vector<std::pair<std::string, std::string>>> fields{
      {"spectrum",
       {{"a", "torus width"},
        {"b", "torus height"},
        {"count", "number of distinct eigenvalues"},
        {"k", "transition values for k"},
        {"antisym_count", "number of antisymmetric eigenvalues"},
        {"covering", "double or quadruple"},
        {"out", "output CSV, - for stdout"}}},
      {"optimize",
       {{"k", "number of domains"},
        {"a", "torus width"},
        {"b", "torus height"},
        {"levels", "refinement levels [[nx,ny],...]"},
        {"p", "p-norm exponent"},
        {"eps_schedule", "penalization schedule"},
        {"eps_final_factor", "final eps as a multiple of h^2"},
        {"step", "step rule object"},
        {"max_iters", "iterations per phase"},
        {"seed", "first random seed"},
        {"seeds", "number of random starts"},
        {"stop_tol", "relative energy decrease stop"},
        {"eig_tol", "eigensolver tolerance"},
        {"eval_tol", "evaluation eigensolver tolerance"},
        {"warm_start", "density file to start from"},
        {"out_dir", "output directory"}}},
      {"sweep",
       {{"k", "number of domains"},
        {"b_values", "explicit list of b"},
        {"b_min", "first b"},
        {"b_max", "last b"},
        {"b_step", "b increment"},
        {"V", "wrap matrix or V3/V4/V5"},
        {"hex_resolution", "grid points across the hexagon"},
        {"hex_tol", "hexagon eigensolver tolerance"},
        {"optimizer", "true or optimizer settings object"},
        {"workers", "concurrent rows"},
        {"out", "output CSV"},
        {"svg", "energy curve SVG"}}},
      {"tiling",
       {{"V", "wrap matrix or V3/V4/V5"},
        {"k", "number of tiles"},
        {"b", "torus height"},
        {"resolution", "grid points across the hexagon"},
        {"gaps", "compute double-hexagon gaps"},
        {"raster_nx", "raster export width"},
        {"tol", "eigensolver tolerance"},
        {"out_dir", "output directory"}}},
      {"nodal",
       {{"a", "torus width"},
        {"b", "torus height"},
        {"nx", "grid columns"},
        {"ny", "grid rows"},
        {"terms", "[{coef,x,m,y,n},...]"},
        {"p", "p-norm exponent"},
        {"tol", "eigensolver tolerance"},
        {"out_dir", "output directory"}}}};
  const std::map<std::string, std::string> help{{"spectrum", "analytic torus and antisymmetric spectra"},
                                                {"optimize", "relaxed optimizer, multi-start"},
                                                {"sweep", "energy upper bounds over a range of b"},
                                                {"tiling", "hexagonal tiling, lambda1 and gaps"},
                                                {"nodal", "nodal partition of a trigonometric expression"}};

  std::map<std::string, Sub> subs;
  // Options bind to map nodes, which stay put once inserted.
  for (const auto& [name, list] : fields) {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name, help.at(name));
    s.app->add_option("--config,-c", s.config_path, "JSON config file; its fields override flags");
    for (const auto& [key, text] : list) s.app->add_option("--" + key, s.flags[key], text);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? torpart::cli::kExitOk : torpart::cli::kExitConfig;
  }

  for (auto& [name, s] : subs) {
    if (!s.app->parsed()) continue;
    json cfg = json::object();
    for (const auto& [key, text] : fields.at(name)) {
      auto* opt = s.app->get_option("--" + key);
      if (opt->count() > 0) cfg[key] = flag_value(s.flags[key]);
    }
    if (!s.config_path.empty()) {
      json file;
      try {
        file = json::parse(torpart::io::read_file(s.config_path));
      } catch (const std::exception& e) {
        std::cerr << json{{"error", "config"}, {"command", name}, {"message", e.what()}}.dump() << "\n";
        return torpart::cli::kExitConfig;
      }
      if (!file.is_object()) {
        std::cerr << json{{"error", "config"}, {"command", name}, {"message", "config file must hold an object"}}.dump()
                  << "\n";
        return torpart::cli::kExitConfig;
      }
      cfg.update(file);
    }
    return torpart::cli::run(name, cfg, std::cout, std::cerr);
  }
  return torpart::cli::kExitConfig;
}
