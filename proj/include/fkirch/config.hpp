#pragma once
// Run configuration: flat "key = value" text, '#' starts a comment, dotted section names.
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grids.hpp"
#include "kirchhoff.hpp"
#include "linearization.hpp"
#include "spectral.hpp"

namespace fkirch {

struct ConfigError : InvalidInput {
  using InvalidInput::InvalidInput;
};

enum class Stage { construct, verify, kernel, sectors, reconcile };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::construct: return "construct";
    case Stage::verify: return "verify";
    case Stage::kernel: return "kernel";
    case Stage::sectors: return "sectors";
    case Stage::reconcile: return "reconcile";
  }
  return "?";
}

struct BoxSpec {
  double L = 0;
  int m = 0;
};

struct RadialSpec {
  int M = 0;
  double R_max = 0;  // in units of the bubble scale lambda
  Stretch stretch = Stretch::algebraic;
  double exponent = 3;
  OuterBC bc = OuterBC::robin;
};

struct Tolerances {
  double root = 1e-12;
  double residual = 1e-2;
  double consistency = 1e-4;
  double pohozaev = 1e-3;
  double gap = 1e-3;
  double sector = 1e-2;
  double correlation = 0.99;
  double confinement = 1e-9;
};

struct RunConfig {
  ProblemParams params;
  BoxSpec box, kernel;
  RadialSpec radial;
  double pohozaev_R_max = 0;      // radial Pohozaev grid (units of lambda), N >= 2
  int l_max = 3;
  int sector_count = 4;
  Tolerances tol;
  std::vector<Stage> pipeline;    // dependency order, prerequisites added
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  Mutation mutation = Mutation::none;
  double min_points_per_mu = 2;
  std::string source;             // file the config came from

  bool has(Stage s) const { return std::find(pipeline.begin(), pipeline.end(), s) != pipeline.end(); }
};

// Resolution defaults per dimension; all overridable.
inline void apply_defaults(RunConfig& c) {
  const int N = c.params.N;
  struct D {
    BoxSpec box, kernel;
    int M;
    double R, poh_R;
  };
  D d = N == 1   ? D{{8192, 16384}, {8192, 16384}, 4096, 3e6, 3e6}
        : N == 2 ? D{{1280, 2048}, {320, 1024}, 2048, 4e4, 1e6}
                 : D{{12, 128}, {12, 64}, 1024, 1e4, 1e3};
  if (N == 3) {
    // N = 3 bubbles can be very wide (lambda ~ 1e6 at s = 0.8, a = b = 1): scale the boxes
    double lam = solve_E0(c.params, bubble_kappa_exact(N, c.params.s)).lambda(c.params.s);
    d.box.L *= lam;
    d.kernel.L *= lam;
  }
  if (c.box.m == 0) c.box = d.box;
  if (c.kernel.m == 0) c.kernel = d.kernel;
  if (c.radial.M == 0) c.radial.M = d.M;
  if (c.radial.R_max == 0) c.radial.R_max = d.R;
  if (c.pohozaev_R_max == 0) c.pohozaev_R_max = d.poh_R;
  if (N == 1) c.l_max = std::min(c.l_max, 1);
}

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': not a number: '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  double x = to_double(key, v);
  if (x != double((long long)x)) throw ConfigError("config field '" + key + "': not an integer: '" + v + "'");
  return (long long)x;
}

inline double positive(const std::string& key, double x) {
  if (!(x > 0)) throw ConfigError("config field '" + key + "' must be positive, got " + std::to_string(x));
  return x;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  using namespace detail;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (k.empty() || v.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
    if (!kv.emplace(k, v).second) throw ConfigError("config field '" + k + "' given twice");
  }

  RunConfig c;
  c.source = origin;
  std::set<std::string> used;
  auto get = [&](const std::string& k) -> const std::string* {
    auto it = kv.find(k);
    if (it == kv.end()) return nullptr;
    used.insert(k);
    return &it->second;
  };
  auto need = [&](const std::string& k) -> const std::string& {
    auto v = get(k);
    if (!v) throw ConfigError("config field '" + k + "' is missing");
    return *v;
  };

  c.params.N = int(to_int("params.N", need("params.N")));
  c.params.s = to_double("params.s", need("params.s"));
  c.params.a = to_double("params.a", need("params.a"));
  c.params.b = to_double("params.b", need("params.b"));
  try {
    c.params.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config params: ") + e.what());
  }

  if (auto v = get("box.L")) c.box.L = positive("box.L", to_double("box.L", *v));
  if (auto v = get("box.m")) c.box.m = int(to_int("box.m", *v));
  if (auto v = get("kernel.L")) c.kernel.L = positive("kernel.L", to_double("kernel.L", *v));
  if (auto v = get("kernel.m")) c.kernel.m = int(to_int("kernel.m", *v));
  if ((c.box.L == 0) != (c.box.m == 0)) throw ConfigError("config fields 'box.L' and 'box.m' go together");
  if ((c.kernel.L == 0) != (c.kernel.m == 0))
    throw ConfigError("config fields 'kernel.L' and 'kernel.m' go together");
  if (auto v = get("radial.M")) c.radial.M = int(to_int("radial.M", *v));
  if (auto v = get("radial.R_max")) c.radial.R_max = positive("radial.R_max", to_double("radial.R_max", *v));
  if (auto v = get("radial.stretch")) {
    if (*v == "uniform") c.radial.stretch = Stretch::uniform;
    else if (*v == "algebraic") c.radial.stretch = Stretch::algebraic;
    else throw ConfigError("config field 'radial.stretch' must be uniform or algebraic");
  }
  if (auto v = get("radial.exponent")) c.radial.exponent = positive("radial.exponent", to_double("radial.exponent", *v));
  if (auto v = get("radial.bc")) {
    if (*v == "robin") c.radial.bc = OuterBC::robin;
    else if (*v == "dirichlet") c.radial.bc = OuterBC::dirichlet;
    else throw ConfigError("config field 'radial.bc' must be robin or dirichlet");
  }
  if (auto v = get("verify.R_max")) c.pohozaev_R_max = positive("verify.R_max", to_double("verify.R_max", *v));
  if (auto v = get("sectors.l_max")) {
    c.l_max = int(to_int("sectors.l_max", *v));
    if (c.l_max < 1) throw ConfigError("config field 'sectors.l_max' must be >= 1");
  }
  if (auto v = get("sectors.count")) {
    c.sector_count = int(to_int("sectors.count", *v));
    if (c.sector_count < 2) throw ConfigError("config field 'sectors.count' must be >= 2");
  }

  const std::pair<const char*, double*> tols[] = {
      {"tol.root", &c.tol.root},         {"tol.residual", &c.tol.residual},
      {"tol.consistency", &c.tol.consistency}, {"tol.pohozaev", &c.tol.pohozaev},
      {"tol.gap", &c.tol.gap},           {"tol.sector", &c.tol.sector},
      {"tol.correlation", &c.tol.correlation}, {"tol.confinement", &c.tol.confinement}};
  for (auto [k, dst] : tols)
    if (auto v = get(k)) *dst = positive(k, to_double(k, *v));
  if (c.tol.correlation >= 1) throw ConfigError("config field 'tol.correlation' must be below 1");

  std::set<Stage> want;
  if (auto v = get("pipeline")) {
    std::istringstream ps(*v);
    std::string item;
    while (std::getline(ps, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      bool ok = false;
      for (Stage s : {Stage::construct, Stage::verify, Stage::kernel, Stage::sectors, Stage::reconcile})
        if (item == to_string(s)) want.insert(s), ok = true;
      if (!ok) throw ConfigError("config field 'pipeline': unknown stage '" + item + "'");
    }
    if (want.empty()) throw ConfigError("config field 'pipeline' is empty");
  } else {
    want = {Stage::construct, Stage::verify, Stage::kernel, Stage::sectors, Stage::reconcile};
  }
  if (want.count(Stage::verify)) want.insert(Stage::construct);
  if (want.count(Stage::reconcile)) want.insert({Stage::kernel, Stage::sectors});
  for (Stage s : {Stage::construct, Stage::verify, Stage::kernel, Stage::sectors, Stage::reconcile})
    if (want.count(s)) c.pipeline.push_back(s);

  if (auto v = get("output_dir")) c.output_dir = *v;
  if (auto v = get("seed")) {
    long long sd = to_int("seed", *v);
    if (sd < 0) throw ConfigError("config field 'seed' must be non-negative");
    c.seed = std::uint64_t(sd);
  }
  if (auto v = get("debug.mutation")) {
    if (*v == "none") c.mutation = Mutation::none;
    else if (*v == "potential_exponent") c.mutation = Mutation::potential_exponent;
    else if (*v == "drop_rank_one") c.mutation = Mutation::drop_rank_one;
    else throw ConfigError("config field 'debug.mutation' must be none, potential_exponent or drop_rank_one");
  }
  if (auto v = get("min_points_per_mu"))
    c.min_points_per_mu = positive("min_points_per_mu", to_double("min_points_per_mu", *v));

  for (auto& [k, v] : kv)
    if (!used.count(k)) throw ConfigError("config field '" + k + "' is not recognised");

  apply_defaults(c);
  for (auto [name, spec] : {std::pair{"box", &c.box}, std::pair{"kernel", &c.kernel}}) {
    if (spec->m < 16 || (spec->m & (spec->m - 1)))
      throw ConfigError(std::string("config field '") + name + ".m' must be a power of two >= 16");
  }
  if (c.radial.M < 32) throw ConfigError("config field 'radial.M' must be >= 32");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace fkirch
