// Command-line front end: tables, simulation and theorem verification.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "zeroavoid/cli_runner.hpp"

using namespace zeroavoid;

namespace {

struct Overrides {
  std::string config;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string out;
  std::string model;
  std::vector<double> gammas;
  bool quick = false;
};

ExperimentConfig resolve(const Overrides& o, CLI::App& app) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (app.count("--seed")) c.seed = o.seed;
  if (app.count("--workers")) c.workers = o.workers;
  if (app.count("--out")) c.out_dir = o.out;
  if (app.count("--model")) c.model.name = o.model;
  if (app.count("--gamma")) c.gammas = o.gammas;
  if (o.quick) c.make_quick();
  validate(c);
  return c;
}

void print_rows(const ExperimentReport& r) {
  std::cout << csv::kHeader << '\n';
  for (const auto& row : r.rows) std::cout << csv::row(row) << '\n';
}

int finish(const ExperimentReport& r, const ExperimentConfig& c) {
  print_rows(r);
  const auto files = emit_tables(r, c.out_dir);
  std::cerr << "wrote " << files.size() << " files to " << c.out_dir << " in " << r.environment.wall_time << " s\n";
  std::size_t failed = 0;
  std::size_t inconclusive = 0;
  for (const auto& row : r.rows) {
    failed += row.pass == Verdict::fail;
    inconclusive += row.pass == Verdict::inconclusive;
  }
  std::cerr << r.rows.size() << " rows, " << failed << " failed, " << inconclusive << " inconclusive\n";
  return failed ? 1 : 0;
}

void write_plot(const PlotData& p, const ExperimentConfig& c) {
  std::cout << plot_text(p);
  ExperimentReport r;
  r.plots.push_back(p);
  r.environment.seed = c.seed;
  const auto files = emit_tables(r, c.out_dir);
  std::cerr << "wrote " << files.back().string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-avoiding Levy processes: h tables, conditioned simulation, verification"};
  app.require_subcommand(0, 1);
  Overrides o;
  bool emit_default = false;
  app.add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--model", o.model, "brownian | stable | sn-stable | truncated-stable");
  app.add_option("--gamma", o.gammas, "gamma list")->delimiter(',');
  app.add_flag("--quick", o.quick, "reduced path counts for smoke runs");
  app.add_flag("--emit-default-config", emit_default, "print the annotated default configuration");

  auto* hfun = app.add_subcommand("hfun", "table of h and h^(gamma)");
  double lo = -5.0;
  double hi = 5.0;
  std::size_t points = 81;
  hfun->add_option("--lo", lo);
  hfun->add_option("--hi", hi);
  hfun->add_option("--points", points);

  auto* resolvent = app.add_subcommand("resolvent", "table of r_q, h_q and the conditioned resolvent");
  double q = 0.5;
  double x0 = 1.0;
  resolvent->add_option("--q", q, "discount rate")->check(CLI::PositiveNumber);
  resolvent->add_option("--x0", x0, "start of the conditioned resolvent");
  resolvent->add_option("--lo", lo);
  resolvent->add_option("--hi", hi);
  resolvent->add_option("--points", points);

  auto* hitting = app.add_subcommand("hitting", "P_x(T_a < T_0) from h");
  std::vector<double> starts{0.3, 0.5, 1.0};
  std::vector<double> levels{1.0, 2.0};
  hitting->add_option("--x", starts, "start points")->delimiter(',');
  hitting->add_option("--a", levels, "target levels")->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "sample paths on a uniform grid");
  double horizon = 1.0;
  std::size_t count = 10;
  double start = 0.0;
  simulate->add_option("--x0", start, "start point");
  simulate->add_option("--horizon", horizon)->check(CLI::PositiveNumber);
  simulate->add_option("--count", count, "number of paths");

  auto* verify = app.add_subcommand("verify", "run theorem checks: verify <id>... or verify all");
  std::vector<std::string> ids;
  verify->add_option("ids", ids, "theorem ids or all")->required();

  auto* report = app.add_subcommand("report", "run the configured experiment selection and write tables");
  auto* list = app.add_subcommand("list", "print the theorem table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (emit_default) {
      std::cout << write_config(ExperimentConfig{});
      return 0;
    }
    auto c = resolve(o, app);
    if (*list) {
      for (const auto& t : theorems()) std::cout << t.id << '\t' << t.statement << '\n';
      return 0;
    }
    if (*hfun) {
      write_plot(hfun_table(c.model.build(), c.quadrature, c.gammas, lo, hi, points), c);
      return 0;
    }
    if (*resolvent) {
      write_plot(resolvent_table(c.model.build(), c.quadrature, q, c.gammas.front(), x0, lo, hi, points), c);
      return 0;
    }
    if (*hitting) {
      write_plot(hitting_table(c.model.build(), c.quadrature, starts, levels), c);
      return 0;
    }
    if (*simulate) {
      const auto paths = simulate_paths(c.model.build(), c.simulation, start, horizon, count, c.seed);
      std::filesystem::create_directories(c.out_dir);
      const auto file = (std::filesystem::path(c.out_dir) / "paths.csv").string();
      write_paths_csv(paths, file);
      std::cerr << "wrote " << file << '\n';
      return 0;
    }
    if (*verify) {
      c.experiments = ids;
      return finish(run_experiment(c), c);
    }
    if (*report) return finish(run_experiment(c), c);
    std::cout << app.help();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
