// Command-line front door: scenario validation, timing solve, cascade
// analysis, simulation, and parameter sweeps with deterministic reports.
//
// Exit codes: 0 success, 1 semantic/config error, 2 parse error, 3 infeasible.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psdsim/cascade.hpp"
#include "psdsim/memory.hpp"
#include "psdsim/report.hpp"
#include "psdsim/scenario.hpp"
#include "psdsim/simulator.hpp"
#include "psdsim/solver.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_semantic = 1;
constexpr int exit_parse = 2;
constexpr int exit_infeasible = 3;

struct OutputTarget {
  std::string path;  // empty: stdout
  bool human = false;

  void write(const std::vector<psdsim::json>& lines) const {
    if (!path.empty()) {
      std::ofstream out(path);
      if (!out) throw psdsim::ConfigError("cannot open output file: " + path);
      psdsim::write_report_lines(out, lines);
      return;
    }
    if (!human) psdsim::write_report_lines(std::cout, lines);
  }
};

std::string resolve_out(const std::string& out) {
  if (out.empty()) return out;
  const char* dir = std::getenv("PSDSIM_OUT_DIR");
  if (!dir || std::filesystem::path(out).is_absolute()) return out;
  return (std::filesystem::path(dir) / out).string();
}

psdsim::ScenarioDocument load_or_die(const std::string& path, bool lenient, int& rc) {
  rc = exit_ok;
  try {
    return psdsim::load_scenario(path, !lenient);
  } catch (const psdsim::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    rc = exit_parse;
  } catch (const psdsim::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    rc = exit_semantic;
  } catch (const nlohmann::json::exception& e) {
    // Wrong JSON value types surface as parse failures, not semantic ones.
    std::cerr << "parse error: " << e.what() << "\n";
    rc = exit_parse;
  }
  return {};
}

int cmd_validate(const std::string& path, bool lenient) {
  int rc = 0;
  auto doc = load_or_die(path, lenient, rc);
  if (rc != exit_ok) return rc;
  auto report = psdsim::validate_scenario(doc);
  std::vector<psdsim::json> lines;
  lines.push_back(psdsim::report_header("validate", doc.name, psdsim::file_digest(path)));
  for (const auto& w : doc.warnings) {
    psdsim::json j;
    j["type"] = "warning";
    j["message"] = w;
    lines.push_back(j);
  }
  for (const auto& v : report.violations) {
    psdsim::json j;
    j["type"] = "violation";
    j["subject"] = v.subject;
    j["message"] = v.message;
    lines.push_back(j);
  }
  psdsim::json s;
  s["type"] = "validation_summary";
  s["violations"] = report.violations.size();
  s["ok"] = report.ok();
  lines.push_back(s);
  psdsim::write_report_lines(std::cout, lines);
  return report.ok() ? exit_ok : exit_semantic;
}

int require_valid(const psdsim::ScenarioDocument& doc) {
  auto report = psdsim::validate_scenario(doc);
  if (report.ok()) return exit_ok;
  for (const auto& v : report.violations)
    std::cerr << "invalid scenario: " << v.subject << ": " << v.message << "\n";
  return exit_semantic;
}

void apply_strategy_override(psdsim::ScenarioDocument& doc, const std::string& name) {
  if (name.empty()) return;
  auto s = psdsim::strategy_from_name(name);
  if (!s) throw psdsim::ConfigError("unknown strategy '" + name + "'");
  doc.strategy = *s;
}

int cmd_solve(const std::string& path, bool lenient, const std::string& strategy,
              double epsilon_ps, const OutputTarget& target) {
  int rc = 0;
  auto doc = load_or_die(path, lenient, rc);
  if (rc != exit_ok) return rc;
  apply_strategy_override(doc, strategy);
  if (int v = require_valid(doc); v != exit_ok) return v;

  auto caps = doc.capability();
  auto sys = psdsim::build_constraints(doc.topology, caps, doc.simulation.rep_period, doc.memory);
  auto result = psdsim::solve(sys, static_cast<psdsim::ps_t>(epsilon_ps));

  std::vector<psdsim::json> lines;
  lines.push_back(psdsim::report_header("solve", doc.name, psdsim::file_digest(path)));
  lines.push_back(psdsim::to_json(result));
  target.write(lines);
  if (target.human) {
    if (result.feasible()) {
      std::cout << "feasible; " << result.assignment->values.size() << " variables\n";
      for (const auto& [id, v] : result.assignment->values)
        std::cout << "  " << id << " = " << v << " ps\n";
    } else if (result.bounds) {
      std::cout << "infeasible at " << result.bounds->bsa << ": required "
                << result.bounds->required << " ps, available [" << result.bounds->available_lo
                << ", " << result.bounds->available_hi << "] ps\n";
    } else if (result.cycle) {
      std::cout << "infeasible cycle: imbalance " << result.cycle->fixed_imbalance
                << " ps vs adjustable range " << result.cycle->total_adjustable_range << " ps\n";
    }
  }
  return result.feasible() ? exit_ok : exit_infeasible;
}

int cmd_cascade(const std::string& path, bool lenient, const std::string& strategy,
                const std::string& perturb, const OutputTarget& target) {
  int rc = 0;
  auto doc = load_or_die(path, lenient, rc);
  if (rc != exit_ok) return rc;
  apply_strategy_override(doc, strategy);
  if (int v = require_valid(doc); v != exit_ok) return v;

  const auto eq = perturb.find('=');
  if (eq == std::string::npos)
    throw psdsim::ConfigError("--perturb expects <link>=<delta_length_m>");
  const std::string link = perturb.substr(0, eq);
  const double delta = std::stod(perturb.substr(eq + 1));

  auto report = psdsim::analyze_cascade(doc.topology, doc.strategy, link, delta,
                                        doc.simulation.rep_period);
  std::vector<psdsim::json> lines;
  lines.push_back(psdsim::report_header("cascade", doc.name, psdsim::file_digest(path)));
  lines.push_back(psdsim::to_json(report));
  target.write(lines);
  if (target.human) {
    std::cout << "perturb " << link << " by " << delta << " m under "
              << psdsim::to_string(report.strategy) << ": depth " << report.cascade_depth
              << ", affected BSAs:";
    for (const auto& b : report.affected_bsas) std::cout << " " << b;
    std::cout << (report.infeasible_after ? " (infeasible after perturbation)" : "") << "\n";
  }
  return exit_ok;
}

std::vector<psdsim::json> simulate_lines(const psdsim::ScenarioDocument& doc,
                                         std::uint64_t seed) {
  std::vector<psdsim::json> lines;
  if (doc.memory && doc.memory->mode == psdsim::MemoryMode::HoldUntilReady) {
    auto metrics = psdsim::run_hop_by_hop(doc.topology, doc.simulation, *doc.memory, seed);
    lines.push_back(psdsim::to_json(metrics));
  } else {
    auto metrics = psdsim::run(doc.topology, doc.strategy, doc.simulation, seed,
                               doc.drift_models, doc.effective_mode(), doc.memory);
    for (auto& l : psdsim::to_json_lines(metrics)) lines.push_back(std::move(l));
  }
  return lines;
}

int cmd_simulate(const std::string& path, bool lenient, std::optional<std::uint64_t> seed,
                 std::optional<std::int64_t> slots, const OutputTarget& target) {
  int rc = 0;
  auto doc = load_or_die(path, lenient, rc);
  if (rc != exit_ok) return rc;
  if (int v = require_valid(doc); v != exit_ok) return v;
  if (slots) doc.simulation.slots = *slots;
  const std::uint64_t effective_seed = seed.value_or(doc.simulation.seed);

  std::vector<psdsim::json> lines;
  lines.push_back(psdsim::report_header("simulate", doc.name, psdsim::file_digest(path)));
  psdsim::json meta;
  meta["type"] = "run_meta";
  meta["seed"] = effective_seed;
  meta["slots"] = doc.simulation.slots;
  meta["strategy"] = psdsim::to_string(doc.strategy);
  lines.push_back(meta);
  const auto t0 = std::chrono::steady_clock::now();
  for (auto& l : simulate_lines(doc, effective_seed)) lines.push_back(std::move(l));
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  target.write(lines);
  if (target.human) {
    // Wall-clock stays out of the machine payload so files stay byte-stable.
    for (const auto& l : lines)
      if (l["type"] == "summary" || l["type"] == "hop_by_hop_summary")
        std::cout << l.dump(2) << "\n";
    std::cout << "seed " << effective_seed << ", wall " << wall_ms << " ms\n";
  }
  return exit_ok;
}

struct SweepPoint {
  std::uint64_t seed;
  std::vector<std::pair<std::string, std::string>> params;  // dotted path -> literal
};

int cmd_sweep(const std::string& path, bool lenient, const std::string& seeds_spec,
              const std::vector<std::string>& param_specs, int jobs,
              const OutputTarget& target) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "parse error: cannot open scenario file: " << path << "\n";
    return exit_parse;
  }
  psdsim::json root;
  try {
    root = psdsim::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return exit_parse;
  }

  std::vector<std::uint64_t> seeds;
  if (seeds_spec.empty()) {
    psdsim::ScenarioDocument probe = psdsim::parse_scenario(root, !lenient);
    seeds.push_back(probe.simulation.seed);
  } else {
    const auto dots = seeds_spec.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(std::stoull(seeds_spec));
    } else {
      const std::uint64_t a = std::stoull(seeds_spec.substr(0, dots));
      const std::uint64_t b = std::stoull(seeds_spec.substr(dots + 2));
      if (b < a) throw psdsim::ConfigError("--seeds range must be ascending");
      for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    }
  }

  // Each --param key=v1,v2,... contributes one grid axis, in the given order.
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& spec : param_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw psdsim::ConfigError("--param expects key=v1,v2,...");
    std::vector<std::string> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(item);
    if (values.empty()) throw psdsim::ConfigError("--param needs at least one value");
    axes.emplace_back(spec.substr(0, eq), values);
  }
  std::vector<std::vector<std::pair<std::string, std::string>>> grid{{}};
  for (const auto& [key, values] : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& point : grid)
      for (const auto& v : values) {
        auto p = point;
        p.emplace_back(key, v);
        next.push_back(std::move(p));
      }
    grid = std::move(next);
  }

  std::vector<SweepPoint> points;
  for (const auto& seed : seeds)
    for (const auto& params : grid) points.push_back({seed, params});

  std::vector<std::vector<psdsim::json>> results(points.size());
  std::vector<std::string> errors(points.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= points.size()) return;
      try {
        psdsim::json modified = root;
        for (const auto& [key, literal] : points[i].params) {
          psdsim::json* cur = &modified;
          std::stringstream ss(key);
          std::string part;
          std::vector<std::string> parts;
          while (std::getline(ss, part, '.')) parts.push_back(part);
          for (std::size_t d = 0; d + 1 < parts.size(); ++d) cur = &((*cur)[parts[d]]);
          (*cur)[parts.back()] = psdsim::json::parse(literal);
        }
        psdsim::ScenarioDocument doc = psdsim::parse_scenario(modified, !lenient);
        auto report = psdsim::validate_scenario(doc);
        if (!report.ok())
          throw psdsim::ConfigError("invalid scenario at grid point: " +
                                    report.violations[0].message);
        results[i] = simulate_lines(doc, points[i].seed);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "sweep point " << i << " failed: " << errors[i] << "\n";
      return exit_semantic;
    }
  }

  std::vector<psdsim::json> lines;
  lines.push_back(psdsim::report_header("sweep", root.value("name", ""),
                                        psdsim::file_digest(path)));
  for (std::size_t i = 0; i < points.size(); ++i) {
    psdsim::json j;
    j["type"] = "sweep_run";
    j["seed"] = points[i].seed;
    j["params"] = psdsim::json::object();
    for (const auto& [key, literal] : points[i].params)
      j["params"][key] = psdsim::json::parse(literal);
    for (const auto& line : results[i])
      if (line["type"] == "summary" || line["type"] == "hop_by_hop_summary")
        j["summary"] = line;
    lines.push_back(j);
  }
  target.write(lines);
  if (target.human) std::cout << "sweep: " << points.size() << " runs\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timing coordination for optical Bell state analyzers in quantum networks"};
  app.require_subcommand(1);

  std::string scenario_path;
  bool lenient = false;
  std::string out_path;
  bool human = false;
  std::string strategy_override;

  auto add_common = [&](CLI::App* cmd, bool with_output) {
    cmd->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
    cmd->add_flag("--lenient", lenient, "warn instead of failing on unknown keys");
    if (with_output) {
      cmd->add_option("--out", out_path, "write the machine report to this file");
      cmd->add_flag("--human", human, "print a human summary instead of machine records");
    }
  };

  auto* validate = app.add_subcommand("validate", "check a scenario file");
  add_common(validate, false);

  auto* solve = app.add_subcommand("solve", "solve the simultaneity constraints");
  add_common(solve, true);
  double epsilon_ps = 1.0;
  solve->add_option("--epsilon", epsilon_ps, "tolerance in picoseconds (default 1)");
  solve->add_option("--strategy", strategy_override, "override the scenario strategy");

  auto* cascade = app.add_subcommand("cascade", "analyze perturbation propagation");
  add_common(cascade, true);
  std::string perturb;
  cascade->add_option("--perturb", perturb, "<link>=<delta_length_m>")->required();
  cascade->add_option("--strategy", strategy_override, "override the scenario strategy");

  auto* simulate = app.add_subcommand("simulate", "run the seeded engine");
  add_common(simulate, true);
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> slots;
  simulate->add_option("--seed", seed, "override the scenario seed");
  simulate->add_option("--slots", slots, "override the slot count");

  auto* sweep = app.add_subcommand("sweep", "run a seed/parameter grid");
  add_common(sweep, true);
  std::string seeds_spec;
  std::vector<std::string> params;
  int jobs = 1;
  sweep->add_option("--seeds", seeds_spec, "seed or inclusive range a..b");
  sweep->add_option("--param", params, "grid axis key=v1,v2,... (repeatable)");
  sweep->add_option("--jobs", jobs, "parallel workers (env PSDSIM_JOBS)");

  CLI11_PARSE(app, argc, argv);

  if (const char* env_jobs = std::getenv("PSDSIM_JOBS"); env_jobs && jobs == 1)
    jobs = std::max(1, std::atoi(env_jobs));

  OutputTarget target{resolve_out(out_path), human};
  try {
    if (validate->parsed()) return cmd_validate(scenario_path, lenient);
    if (solve->parsed())
      return cmd_solve(scenario_path, lenient, strategy_override, epsilon_ps, target);
    if (cascade->parsed())
      return cmd_cascade(scenario_path, lenient, strategy_override, perturb, target);
    if (simulate->parsed()) return cmd_simulate(scenario_path, lenient, seed, slots, target);
    if (sweep->parsed()) return cmd_sweep(scenario_path, lenient, seeds_spec, params, jobs, target);
  } catch (const psdsim::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return exit_parse;
  } catch (const psdsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_semantic;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_semantic;
  }
  return exit_ok;
}
