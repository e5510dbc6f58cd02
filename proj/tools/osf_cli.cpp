#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "osf/scenario.hpp"

namespace fs = std::filesystem;
using namespace osf;

namespace {

struct Common {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> jmax;
  std::string out = "out";
  bool deterministic = false;
  unsigned jobs = 1;

  RunOptions options() const { return RunOptions{out, deterministic, jobs}; }
  std::optional<Spin> j_max() const {
    if (!jmax) return std::nullopt;
    return Spin::parse(*jmax);
  }
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.configs, "scenario JSON file (repeat for a batch)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "override the scenario seed");
  cmd->add_option("--jmax", c.jmax, "override the spin cutoff (e.g. 2 or 3/2)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_flag("--deterministic", c.deterministic, "leave wall time out of report.json");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::Range(1u, 256u))->capture_default_str();
}

Json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("config " + path + ": " + e.what());
  }
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const ShapeError*>(&e)) return "ShapeError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const GraphError*>(&e)) return "GraphError";
  if (dynamic_cast<const CapacityError*>(&e)) return "CapacityError";
  if (dynamic_cast<const InvariantError*>(&e)) return "InvariantError";
  return "Error";
}

using Body = std::function<Json(const Json& config, Json& effective, const RunOptions&, const fs::path& dir)>;

// One report.json per config; a batch writes into out/<config stem>/.
int run_batch(const std::string& command, const Common& c, const Body& body) {
  const RunOptions o = c.options();
  int status = 0;
  for (const auto& path : c.configs) {
    const fs::path dir = c.configs.size() > 1 ? fs::path(o.out) / fs::path(path).stem() : fs::path(o.out);
    Json report = report_header(command, o);
    report["config_file"] = path;
    const auto t0 = std::chrono::steady_clock::now();
    Json effective;
    try {
      const Json cfg = load(path);
      report["result"] = body(cfg, effective, o, dir);
      report["config"] = effective;
      report["error"] = nullptr;
    } catch (const std::exception& e) {
      report["config"] = effective;
      report["error"] = {{"kind", error_kind(e)}, {"message", e.what()}};
      std::cerr << "osf " << command << ": " << path << ": " << e.what() << '\n';
      status = 1;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_report(dir, report, secs, o);
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open spin-foam relaxation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version));

  Common evolve, steady, two_level, fit, sample, temperature, compare;

  auto* c_evolve = app.add_subcommand("evolve", "amplitudes -> kappa -> evolution -> observables");
  add_common(c_evolve, evolve);
  auto* c_steady = app.add_subcommand("steady-state", "steady states of the effective generator");
  add_common(c_steady, steady);
  auto* c_two = app.add_subcommand("two-level", "two-level steady state over a lambda grid");
  add_common(c_two, two_level);
  auto* c_fit = app.add_subcommand("fit", "fit the simplified bath model");
  add_common(c_fit, fit);
  auto* c_sample = app.add_subcommand("sample", "cost distribution of random bath parameters");
  add_common(c_sample, sample);
  auto* c_temp = app.add_subcommand("spectral-temperature", "spectral temperature along a trajectory");
  add_common(c_temp, temperature);

  auto* c_cmp = app.add_subcommand("compare", "normalized L2 distance between two curves");
  add_common(c_cmp, compare, false);
  std::string file_a, file_b, time_col = "gk", value_col = "release", time_col_b, value_col_b;
  int points = 200;
  c_cmp->add_option("a", file_a, "first CSV")->required()->check(CLI::ExistingFile);
  c_cmp->add_option("b", file_b, "second CSV")->required()->check(CLI::ExistingFile);
  c_cmp->add_option("--time", time_col, "time column")->capture_default_str();
  c_cmp->add_option("--value", value_col, "value column")->capture_default_str();
  c_cmp->add_option("--time-b", time_col_b, "time column of the second file (default: --time)");
  c_cmp->add_option("--value-b", value_col_b, "value column of the second file (default: --value)");
  c_cmp->add_option("--points", points, "samples on the common window")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_evolve) {
      return run_batch("evolve", evolve, [&](const Json& j, Json& eff, const RunOptions& o, const fs::path& dir) {
        const auto cfg = ScenarioConfig::from_json(j, evolve.seed, evolve.j_max());
        eff = cfg.effective;
        return run_evolve(cfg, o, dir);
      });
    }
    if (*c_steady) {
      return run_batch("steady-state", steady, [&](const Json& j, Json& eff, const RunOptions& o, const fs::path& dir) {
        const auto cfg = ScenarioConfig::from_json(j, steady.seed, steady.j_max());
        eff = cfg.effective;
        return run_steady_state(cfg, o, dir);
      });
    }
    if (*c_temp) {
      return run_batch("spectral-temperature", temperature,
                       [&](const Json& j, Json& eff, const RunOptions& o, const fs::path& dir) {
                         const auto cfg = ScenarioConfig::from_json(j, temperature.seed, temperature.j_max());
                         eff = cfg.effective;
                         return run_spectral_temperature(cfg, o, dir);
                       });
    }
    if (*c_two) {
      return run_batch("two-level", two_level, [&](const Json& j, Json& eff, const RunOptions&, const fs::path& dir) {
        const auto s = TwoLevelSweep::from_json(j);
        eff = s.effective;
        return run_two_level(s, dir);
      });
    }
    if (*c_fit) {
      return run_batch("fit", fit, [&](const Json& j, Json& eff, const RunOptions& o, const fs::path& dir) {
        const auto cfg = FitConfig::from_json(j, fit.seed, fit.j_max());
        eff = cfg.effective;
        return run_fit(cfg, o, dir);
      });
    }
    if (*c_sample) {
      return run_batch("sample", sample, [&](const Json& j, Json& eff, const RunOptions& o, const fs::path& dir) {
        const auto cfg = FitConfig::from_json(j, sample.seed, sample.j_max());
        eff = cfg.effective;
        return run_sample(cfg, o, dir);
      });
    }
    if (*c_cmp) {
      const RunOptions o = compare.options();
      Json report = report_header("compare", o);
      const auto t0 = std::chrono::steady_clock::now();
      int status = 0;
      try {
        const auto a = read_series(file_a, time_col, value_col);
        const auto b = read_series(file_b, time_col_b.empty() ? time_col : time_col_b,
                                   value_col_b.empty() ? value_col : value_col_b);
        const double d = compare_curves(a, b, points);
        report["result"] = {{"a", file_a}, {"b", file_b}, {"points", points}, {"distance", d}};
        report["error"] = nullptr;
        std::cout << d << '\n';
      } catch (const std::exception& e) {
        report["error"] = {{"kind", error_kind(e)}, {"message", e.what()}};
        std::cerr << "osf compare: " << e.what() << '\n';
        status = 1;
      }
      write_report(o.out, report, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), o);
      return status;
    }
  } catch (const std::exception& e) {
    std::cerr << "osf: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
