// Batch front end: run, converge, calibrate, inspect.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "fkirch/pipeline.hpp"

using namespace fkirch;
namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& path, const std::string& out_override) {
  RunConfig cfg = load_config(path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  RunResult R = run_pipeline(cfg, &std::cout);
  write_run_reports(R, cfg.output_dir);
  int code = R.exit_code();
  for (auto& c : R.checks)
    if (c.status == Status::fail) std::cerr << c.line() << "\n";
  for (auto& e : R.errors) std::cerr << "FAIL " << e << "\n";
  std::cout << (code == exit_ok            ? "all checks passed"
                : code == exit_inconclusive ? "inconclusive: spectral gap too small for the requested tol.gap"
                                            : "checks failed")
            << " (exit " << code << "), reports in " << cfg.output_dir << "\n";
  return code;
}

int cmd_converge(const std::string& path, int levels, const std::string& out_override) {
  RunConfig cfg = load_config(path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  auto st = convergence_study(cfg, levels, &std::cout);
  write_convergence(st, cfg.output_dir);
  for (auto& c : st.checks) (c.status == Status::pass ? std::cout : std::cerr) << c.line() << "\n";
  int code = st.exit_code();
  std::cout << "convergence.csv written to " << cfg.output_dir << " (exit " << code << ")\n";
  return code;
}

int cmd_calibrate(int N, double s, double L, int m, const std::string& cache) {
  check_window(N, s);
  if (L <= 0) L = N == 1 ? 2048 : N == 2 ? 160 : 20;
  if (m <= 0) m = N == 1 ? 16384 : N == 2 ? 1024 : 128;
  auto g = make_box_grid(N, L, m);
  auto cal = calibrate_normalization(N, s, g, ZeroMode::free_space);
  double exact = bubble_constant_exact(N, s);
  KeyValueReport k;
  k.add("N", N);
  k.add("s", s);
  k.add("grid", g.id());
  k.add("C", cal.C);
  k.add("C_closed_form", exact);
  k.add("C_relative_difference", std::abs(cal.C - exact) / exact);
  k.add("residual", cal.residual);
  std::cout << k.body();
  if (!cache.empty()) {
    update_cache(cache, CacheEntry{N, s, cal.C, cal.residual, cal.resolution});
    std::cout << "cache: " << cache << "\n";
  }
  return 0;
}

int inspect_file(const std::string& path) {
  auto r = read_report(path);
  std::cout << "== " << fs::path(path).filename().string() << " " << r.timestamp << "\n";
  if (!r.csv) {
    std::size_t w = 0;
    for (auto& [k, v] : r.fields) w = std::max(w, k.size());
    for (auto& [k, v] : r.fields) std::cout << "  " << k << std::string(w - k.size(), ' ') << "  " << v << "\n";
    return 0;
  }
  std::vector<std::size_t> w(r.header.size(), 0);
  for (std::size_t i = 0; i < r.header.size(); ++i) w[i] = r.header[i].size();
  for (auto& row : r.rows)
    for (std::size_t i = 0; i < row.size() && i < w.size(); ++i) w[i] = std::max(w[i], row[i].size());
  auto print = [&](const std::vector<std::string>& row) {
    std::cout << " ";
    for (std::size_t i = 0; i < row.size() && i < w.size(); ++i)
      std::cout << " " << row[i] << std::string(w[i] - row[i].size(), ' ');
    std::cout << "\n";
  };
  print(r.header);
  for (auto& row : r.rows) print(row);
  int st = r.column("status");
  if (st >= 0) {
    int fail = 0, inc = 0;
    for (auto& row : r.rows) {
      if (st < int(row.size()) && row[st] == "FAIL") ++fail;
      if (st < int(row.size()) && row[st] == "INCONCLUSIVE") ++inc;
    }
    std::cout << "  " << r.rows.size() << " checks, " << fail << " failed, " << inc << " inconclusive\n";
  }
  return 0;
}

int cmd_inspect(const std::string& path) {
  if (fs::is_directory(path)) {
    const char* order[] = {"certificate.txt", "residuals.csv",  "identities.txt", "spectrum_full.txt",
                           "sectors.csv",     "reconcile.txt", "convergence.csv"};
    int found = 0;
    for (auto* name : order) {
      auto p = fs::path(path) / name;
      if (fs::exists(p)) inspect_file(p.string()), ++found;
    }
    if (!found) throw InvalidInput("no report files in '" + path + "'");
    return 0;
  }
  return inspect_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground states and nondegeneracy checks for the fractional Kirchhoff problem"};
  app.require_subcommand(1);

  std::string config, out, cache, report;
  int levels = 0, N = 0, m = 0;
  double s = 0, L = 0;

  auto* run = app.add_subcommand("run", "Run the configured pipeline");
  run->add_option("config", config, "config file")->required();
  run->add_option("--output", out, "override output_dir");

  auto* conv = app.add_subcommand("converge", "Convergence study over doubling boxes");
  conv->add_option("config", config, "config file")->required();
  conv->add_option("--levels", levels, "number of levels (>= 2)")->required();
  conv->add_option("--output", out, "override output_dir");

  auto* cal = app.add_subcommand("calibrate", "Calibrate the bubble constant on a box");
  cal->add_option("N", N, "dimension")->required();
  cal->add_option("s", s, "order")->required();
  cal->add_option("--L", L, "box half-width (bubble units)");
  cal->add_option("--m", m, "points per axis");
  cal->add_option("--cache", cache, "constants cache file to update");

  auto* ins = app.add_subcommand("inspect", "Print a report file or an output directory");
  ins->add_option("report", report, "report file or directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : exit_usage;
  }

  try {
    if (*run) return cmd_run(config, out);
    if (*conv) return cmd_converge(config, levels, out);
    if (*cal) return cmd_calibrate(N, s, L, m, cache);
    if (*ins) return cmd_inspect(report);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_failed;
  }
  return exit_usage;
}
