#pragma once

// Text formats: run-length masks, label rasters, density matrices (warm
// starts), and JSON views of eigen results, energy reports and tilings.
// Every raster carries its {a, b, nx, ny} header.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "torpart/fd_laplace.hpp"
#include "torpart/hex_tiling.hpp"
#include "torpart/partition_extract.hpp"
#include "torpart/relaxed_optimizer.hpp"

namespace torpart::io {

using nlohmann::json;

class FormatError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json grid_header(const PeriodicGrid& g) {
  return {{"a", g.geom().a}, {"b", g.geom().b}, {"nx", g.nx()}, {"ny", g.ny()}};
}

inline PeriodicGrid grid_from_header(const json& h) {
  try {
    return PeriodicGrid({h.at("a").get<double>(), h.at("b").get<double>()}, h.at("nx").get<int>(),
                        h.at("ny").get<int>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad raster header: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

// ---- masks: header line, then "value:count" runs over flat indices

inline std::string mask_to_rle(const DomainMask& m) {
  json h = grid_header(m.grid);
  h["format"] = "torpart-mask";
  std::ostringstream os;
  os << h.dump() << '\n';
  const auto& in = m.inside;
  for (std::size_t i = 0; i < in.size();) {
    std::size_t j = i;
    while (j < in.size() && in[j] == in[i]) ++j;
    os << (i ? " " : "") << int(in[i] != 0) << ':' << (j - i);
    i = j;
  }
  os << '\n';
  return os.str();
}

inline DomainMask mask_from_rle(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  const json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || h.value("format", "") != "torpart-mask") throw FormatError("not a torpart mask");
  const PeriodicGrid g = grid_from_header(h);
  std::vector<std::uint8_t> in;
  in.reserve(g.size());
  std::string run;
  while (is >> run) {
    const auto colon = run.find(':');
    if (colon == std::string::npos) throw FormatError("bad run '" + run + "'");
    const int v = std::stoi(run.substr(0, colon));
    const long n = std::stol(run.substr(colon + 1));
    if ((v != 0 && v != 1) || n <= 0 || static_cast<long>(in.size()) + n > g.size())
      throw FormatError("bad run '" + run + "'");
    in.insert(in.end(), n, static_cast<std::uint8_t>(v));
  }
  if (static_cast<int>(in.size()) != g.size()) throw FormatError("mask runs do not cover the grid");
  return DomainMask(g, std::move(in));
}

// ---- label rasters: CSV with a header row, then ny rows of nx labels (j = 0 first)

inline std::string labels_to_csv(const LabelField& f) {
  const auto& g = f.grid;
  std::ostringstream os;
  os << "a,b,nx,ny,k\n" << fmt(g.geom().a) << ',' << fmt(g.geom().b) << ',' << g.nx() << ',' << g.ny() << ','
     << f.k << '\n';
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) os << (i ? "," : "") << f.labels[g.index(i, j)];
    os << '\n';
  }
  return os.str();
}

inline LabelField labels_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (line != "a,b,nx,ny,k") throw FormatError("label raster header missing");
  std::getline(is, line);
  double a = 0, b = 0;
  int nx = 0, ny = 0, k = 0;
  if (std::sscanf(line.c_str(), "%lf,%lf,%d,%d,%d", &a, &b, &nx, &ny, &k) != 5) throw FormatError("bad raster header");
  LabelField f{PeriodicGrid({a, b}, nx, ny), std::vector<int>(static_cast<std::size_t>(nx) * ny), k};
  for (int j = 0; j < ny; ++j) {
    if (!std::getline(is, line)) throw FormatError("label raster truncated");
    std::istringstream row(line);
    std::string cell;
    for (int i = 0; i < nx; ++i) {
      if (!std::getline(row, cell, ',')) throw FormatError("label row too short");
      f.labels[f.grid.index(i, j)] = std::stoi(cell);
    }
  }
  return f;
}

// ---- density matrices: header line, then one row of k values per grid point

inline std::string density_to_text(const DensityMatrix& d) {
  json h = grid_header(d.grid);
  h["format"] = "torpart-density";
  h["k"] = d.k;
  std::ostringstream os;
  os << h.dump() << '\n';
  for (int r = 0; r < d.grid.size(); ++r) {
    for (int c = 0; c < d.k; ++c) os << (c ? " " : "") << fmt(d.phi(r, c));
    os << '\n';
  }
  return os.str();
}

inline DensityMatrix density_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  const json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || h.value("format", "") != "torpart-density") throw FormatError("not a torpart density file");
  DensityMatrix d{grid_from_header(h), h.value("k", 0), {}};
  if (d.k < 2) throw FormatError("density file needs k >= 2");
  d.phi.resize(d.grid.size(), d.k);
  for (int r = 0; r < d.grid.size(); ++r)
    for (int c = 0; c < d.k; ++c)
      if (!(is >> d.phi(r, c))) throw FormatError("density file truncated");
  d.validate(1e-9);
  return d;
}

// ---- JSON views

inline json to_json(const EigenResult& r) {
  return {{"values", r.values},       {"residuals", r.residuals},         {"iterations", r.iterations},
          {"converged", r.converged}, {"norm_estimate", r.norm_estimate}};
}

inline json to_json(const EnergyReport& r) {
  json j = {{"per_domain_lambda1", r.per_domain_lambda1},
            {"residuals", r.residuals},
            {"points", r.points},
            {"p", r.p},
            {"nx", r.nx},
            {"ny", r.ny},
            {"complete", r.complete}};
  if (r.complete) {
    j["energy_max"] = r.energy_max;
    j["energy_p"] = r.energy_p;
  } else {
    j["energy_max"] = nullptr;
    j["energy_p"] = nullptr;
    j["error"] = r.error;
  }
  return j;
}

inline json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

inline json to_json(const HexTiling& t) {
  json verts = json::array();
  for (const auto& v : t.vertices) verts.push_back(to_json(v));
  json sides = json::array();
  for (double s : t.side_lengths()) sides.push_back(s);
  return {{"V", {{t.V.v[0][0], t.V.v[0][1]}, {t.V.v[1][0], t.V.v[1][1]}}},
          {"k", t.k()},
          {"b", t.b},
          {"u1", to_json(t.basis.u1)},
          {"u2", to_json(t.basis.u2)},
          {"fermat", to_json(t.fermat)},
          {"vertices", verts},
          {"side_lengths", sides},
          {"area", t.area()}};
}

}  // namespace torpart::io
