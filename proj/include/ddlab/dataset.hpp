#pragma once

// Strain-stress datasets: generation from a reference FE run, multiplicative
// stress noise, random subsets and a CSV file format with a '#' header.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddlab/fem.hpp"
#include "ddlab/materials.hpp"
#include "ddlab/nn_train.hpp"

namespace ddlab {

struct DatasetHeader {
  std::string law = "ciarlet";
  std::string params;       // free-form "name=value" list
  double noise = 0.0;       // accumulated noise level
  std::uint64_t seed = 0;   // seed of the last transform
  std::string parent = "-";  // hash of the file this one was derived from
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<PhasePoint> points;
  std::vector<double> psi;  // empty or one energy per point

  std::size_t size() const { return points.size(); }
  bool has_energy() const { return !psi.empty(); }
};

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline void write_dataset(std::ostream& os, const DatasetFile& d) {
  if (d.has_energy() && d.psi.size() != d.size()) throw InvalidConfig("energy column length differs from row count");
  os << "# ddlab-dataset v1\n";
  os << "# law " << d.header.law << '\n';
  os << "# params " << (d.header.params.empty() ? "-" : d.header.params) << '\n';
  os << std::setprecision(17);
  os << "# noise " << d.header.noise << '\n';
  os << "# seed " << d.header.seed << '\n';
  os << "# parent " << d.header.parent << '\n';
  os << "# rows " << d.size() << '\n';
  os << (d.has_energy() ? "E11,E22,E12,S11,S22,S12,psi\n" : "E11,E22,E12,S11,S22,S12\n");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const PhasePoint& z = d.points[i];
    os << z.E.a11 << ',' << z.E.a22 << ',' << z.E.a12 << ',' << z.S.a11 << ',' << z.S.a22 << ',' << z.S.a12;
    if (d.has_energy()) os << ',' << d.psi[i];
    os << '\n';
  }
}

inline std::string dataset_text(const DatasetFile& d) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  write_dataset(os, d);
  return os.str();
}

/// Content hash of the serialised file.
inline std::string dataset_hash(const DatasetFile& d) { return fnv1a_hex(dataset_text(d)); }

inline DatasetFile read_dataset(std::istream& is) {
  is.imbue(std::locale::classic());
  DatasetFile d;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) -> MalformedFile {
    return MalformedFile("dataset line " + std::to_string(lineno) + ": " + what);
  };
  auto next = [&]() {
    if (!std::getline(is, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next() || line != "# ddlab-dataset v1") throw fail("missing '# ddlab-dataset v1' header");
  std::map<std::string, std::string> meta;
  while (true) {
    if (!next()) throw fail("truncated header");
    if (line.rfind("# ", 0) != 0) break;
    const std::string body = line.substr(2);
    const auto sp = body.find(' ');
    if (sp == std::string::npos) throw fail("header entry without value");
    meta[body.substr(0, sp)] = body.substr(sp + 1);
  }
  for (const char* key : {"law", "noise", "seed", "parent", "rows"})
    if (!meta.count(key)) throw fail(std::string("header lacks '") + key + "'");
  std::size_t rows = 0;
  try {
    d.header.law = meta["law"];
    d.header.params = meta.count("params") && meta["params"] != "-" ? meta["params"] : "";
    d.header.noise = std::stod(meta["noise"]);
    d.header.seed = std::stoull(meta["seed"]);
    d.header.parent = meta["parent"];
    rows = std::stoull(meta["rows"]);
  } catch (const std::logic_error&) {
    throw fail("unparsable header value");
  }

  bool energy = false;
  if (line == "E11,E22,E12,S11,S22,S12,psi")
    energy = true;
  else if (line != "E11,E22,E12,S11,S22,S12")
    throw fail("unexpected column line '" + line + "'");
  const std::size_t ncol = energy ? 7 : 6;

  d.points.reserve(rows);
  while (next()) {
    if (line.empty()) continue;
    double v[7];
    std::size_t n = 0;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      if (n >= ncol) throw fail("too many columns");
      char* end = nullptr;
      v[n] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0' || !std::isfinite(v[n])) throw fail("bad value '" + cell + "'");
      ++n;
    }
    if (n != ncol) throw fail("expected " + std::to_string(ncol) + " columns, found " + std::to_string(n));
    d.points.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
    if (energy) d.psi.push_back(v[6]);
  }
  if (d.points.size() != rows)
    throw fail("header announces " + std::to_string(rows) + " rows, file has " + std::to_string(d.points.size()));
  return d;
}

inline void save_dataset(const std::string& path, const DatasetFile& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << dataset_text(d);
}

inline DatasetFile load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_dataset(is);
}

// ---------------------------------------------------------------------------

struct SourceOptions {
  CookMeshOptions mesh = CookMeshOptions::source();
  double traction = 20.0;  // N/mm
  int load_steps = 4;
};

inline std::string law_params(const AnalyticLaw& law) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (const auto* c = std::get_if<Ciarlet>(&law.variant()))
    os << "mu=" << c->params.mu << ";lambda=" << c->params.lambda;
  else if (const auto* h = std::get_if<HartmannNeff>(&law.variant()))
    os << "a=" << h->params.a << ";c10=" << h->params.c10 << ";c01=" << h->params.c01 << ";k=" << h->params.k;
  return os.str();
}

/// Element-centre samples of a Ciarlet Cook run. For other laws the strains
/// of that run are kept and the stresses and energies recomputed.
inline DatasetFile generate_source(const AnalyticLaw& law, const SourceOptions& opt = {}) {
  const Discretization disc(cook_mesh(opt.mesh));
  const Ciarlet ciarlet;
  const FESolution sol = newton_solve(disc, ciarlet, cook_bcs(opt.traction), opt.load_steps);
  const std::vector<CenterSample> rows = sample_centers(sol, ciarlet);
  DatasetFile d;
  d.header.law = law.name();
  d.header.params = law_params(law);
  d.points.reserve(rows.size());
  d.psi.reserve(rows.size());
  for (const CenterSample& r : rows) {
    if (law.kind() == LawKind::Ciarlet) {
      d.points.push_back(r.z);
      d.psi.push_back(r.psi);
    } else {
      const SymTensor2 C = cauchy_green_from_strain(r.z.E);
      d.points.push_back({r.z.E, law.stress(C)});
      d.psi.push_back(law.energy(C));
    }
  }
  return d;
}

/// Multiplies every stress component by (1 + level * xi), xi ~ N(0, 1).
/// Strains and energy labels are left untouched.
inline DatasetFile add_noise(const DatasetFile& d, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) throw InvalidConfig("noise level must be >= 0");
  if (level == 0.0) return d;
  DatasetFile out = d;
  out.header.parent = dataset_hash(d);
  out.header.noise = d.header.noise + level;
  out.header.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  for (PhasePoint& z : out.points) {
    z.S.a11 *= 1.0 + level * xi(rng);
    z.S.a22 *= 1.0 + level * xi(rng);
    z.S.a12 *= 1.0 + level * xi(rng);
  }
  return out;
}

/// Uniform random subset of n rows without replacement.
inline DatasetFile subsample(const DatasetFile& d, std::size_t n, std::uint64_t seed) {
  if (n > d.size())
    throw SubsampleTooLarge("requested " + std::to_string(n) + " rows from a dataset of " + std::to_string(d.size()));
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  DatasetFile out;
  out.header = d.header;
  out.header.parent = dataset_hash(d);
  out.header.seed = seed;
  for (std::size_t k = 0; k < n; ++k) {
    out.points.push_back(d.points[idx[k]]);
    if (d.has_energy()) out.psi.push_back(d.psi[idx[k]]);
  }
  return out;
}

/// Samples for network training; energies are attached when present.
inline std::vector<LabeledSample> labeled_samples(const DatasetFile& d) {
  std::vector<LabeledSample> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::optional<double> psi;
    if (d.has_energy()) psi = d.psi[i];
    out.emplace_back(cauchy_green_from_strain(d.points[i].E), psi, d.points[i].S);
  }
  return out;
}

}  // namespace ddlab
