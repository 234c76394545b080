// Acceptance suite: one pass/fail line per criterion, each at its stated
// tolerance. Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "helpers.hpp"
#include "psdsim/cascade.hpp"
#include "psdsim/memory.hpp"
#include "psdsim/report.hpp"
#include "psdsim/scenario.hpp"
#include "psdsim/simulator.hpp"
#include "psdsim/solver.hpp"

using namespace psdsim;

namespace {

const std::string cli = PSDSIM_CLI_PATH;
const std::string scenario_dir = PSDSIM_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

ScenarioDocument load(const std::string& name) {
  return load_scenario(scenario_dir + "/" + name + ".json");
}

int run_cli(const std::string& args, const std::string& stdout_file) {
  std::string cmd = cli + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file;
  cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

// 1. Cascade confinement: 20 randomized in-headroom perturbations under
//    quantum-odl touch exactly the adjacent BSA, depth 0, in under a second.
Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto doc = load("fig5_chain4");
  std::vector<std::pair<std::string, std::string>> bsa_links;  // link -> its BSA
  for (const auto& l : doc.topology.links) {
    if (l.channel != ChannelKind::Quantum) continue;
    if (doc.topology.find_node(l.to.node)->kind == NodeKind::BsaSupport)
      bsa_links.emplace_back(l.id, l.to.node);
  }
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> magnitude(0.5, 4.0);  // <= ~19.6 ns of fiber
  for (int i = 0; i < 20; ++i) {
    const auto& [link, bsa] = bsa_links[rng() % bsa_links.size()];
    const double delta = magnitude(rng) * (rng() % 2 ? 1.0 : -1.0);
    auto report = analyze_cascade(doc.topology, StrategyKind::QuantumPathAdjustAtBsa, link,
                                  delta, doc.simulation.rep_period);
    if (report.infeasible_after)
      return {false, "perturbation " + link + " left ODL headroom"};
    if (report.cascade_depth != 0)
      return {false, "depth " + std::to_string(report.cascade_depth) + " at " + link};
    if (report.affected_bsas != std::vector<std::string>{bsa})
      return {false, "affected set is not exactly " + bsa};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 1.0) return {false, "took " + fmt(secs) + " s (budget 1 s)"};
  return {true, "20 perturbations, depth 0, adjacent BSA only, " + fmt(secs) + " s"};
}

// 2. Cascade propagation: pump-path and emission-offset reach BSA3 from a
//    perturbation at link A-BSA1.
Outcome criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  auto doc = load("fig5_chain4");
  for (auto strategy : {StrategyKind::PumpPathAdjust, StrategyKind::EmissionOffsetAdjust}) {
    auto report =
        analyze_cascade(doc.topology, strategy, "qA_BSA1", 2.0, doc.simulation.rep_period);
    const bool reaches_bsa3 =
        std::find(report.affected_bsas.begin(), report.affected_bsas.end(), "BSA3") !=
        report.affected_bsas.end();
    if (report.cascade_depth < 2 || !reaches_bsa3)
      return {false, to_string(strategy) + " depth " + std::to_string(report.cascade_depth)};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 1.0) return {false, "took " + fmt(secs) + " s (budget 1 s)"};
  return {true, "both strategies reach BSA3 with depth >= 2, " + fmt(secs) + " s"};
}

// 3. Cycle infeasibility: fig8_cycle exits 3; the certificate matches an
//    independent cycle_imbalance recomputation and a 0.1 ns grid search.
Outcome criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string out = "acceptance_c3.out";
  const int rc = run_cli("solve " + scenario_dir + "/fig8_cycle.json", out);
  if (rc != 3) return {false, "cmd_solve exit " + std::to_string(rc) + ", wanted 3"};
  json cert;
  std::istringstream lines(slurp(out));
  std::string line;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    if (j["type"] == "certificate") cert = j;
  }
  std::remove(out.c_str());
  if (cert.is_null() || cert["kind"] != "cycle") return {false, "no cycle certificate emitted"};
  const ps_t imbalance = cert["fixed_imbalance_ps"].get<ps_t>();
  const ps_t range = cert["total_adjustable_range_ps"].get<ps_t>();
  if (std::abs(imbalance) != 10 * ps_per_ns)
    return {false, "imbalance " + std::to_string(imbalance) + " ps, wanted +-10000"};
  if (range != 4 * ps_per_ns)
    return {false, "adjustable range " + std::to_string(range) + " ps, wanted 4000"};

  auto doc = load("fig8_cycle");
  std::vector<std::string> loop = cert["cycle_links"].get<std::vector<std::string>>();
  if (cycle_imbalance(doc.topology, loop) != imbalance)
    return {false, "cycle_imbalance recomputation disagrees with the certificate"};

  auto sys = build_constraints(doc.topology, doc.capability(), doc.simulation.rep_period);
  auto oracle = testutil::grid_search_feasible(sys, 100, 1);  // 0.1 ns grid
  if (oracle.feasible) return {false, "grid oracle found a feasible point"};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 30.0) return {false, "took " + fmt(secs) + " s (budget 30 s)"};
  return {true, "exit 3, certificate 10 ns vs 4 ns, oracle checked " +
                    std::to_string(oracle.points_checked) + " points, " + fmt(secs) + " s"};
}

// 4. Solver-simulator cross-check: 50 random chains, delta exactly zero in
//    every slot at every BSA after solve + apply_assignment.
Outcome criterion_4() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> length(1000.0, 50000.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n_bsas = 2 + static_cast<int>(rng() % 4);
    ChainDefaults defaults;
    defaults.odl_hi = 800 * ps_per_us;
    auto topo = parse_path_notation(testutil::chain_notation(n_bsas), 10000.0, defaults);
    for (auto& l : topo.links)
      if (l.channel == ChannelKind::Quantum) l.length_m = length(rng);

    auto caps = capability_of(StrategyKind::QuantumPathAdjustAtBsa, topo, ps_per_us);
    auto solved = solve(build_constraints(topo, caps, ps_per_us));
    if (!solved.feasible()) return {false, "trial " + std::to_string(trial) + " infeasible"};
    auto tuned = apply_assignment(topo, *solved.assignment);

    SimulationConfig config;
    config.slots = 100;
    config.rep_period = ps_per_us;
    config.p_gen = 1.0;
    config.sigma = 100;
    config.default_window = 100;
    config.drift_enabled = false;
    auto metrics = run(tuned, StrategyKind::QuantumPathAdjustAtBsa, config, 1000 + trial);
    for (const auto& [bsa, totals] : metrics.per_bsa) {
      if (totals.paired != config.slots || totals.sum_abs_delta != 0 || totals.max_abs_delta != 0)
        return {false, "trial " + std::to_string(trial) + " has nonzero delta at " + bsa};
    }
  }
  return {true, "50 chains, 2-5 BSAs, 1-50 km: delta == 0 ps everywhere"};
}

// 5. Exponential hop decay: all-sources-fire rate within 3 binomial sigma of
//    p_gen^n over 1e6 slots, in under a minute.
Outcome criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  for (const auto& [notation, n_sources] :
       std::vector<std::pair<std::string, int>>{{"DSISD", 2}, {"DSISISD", 3}}) {
    auto topo = parse_path_notation(notation, 10000.0);
    SimulationConfig config;
    config.slots = 1000000;
    config.rep_period = ps_per_us;
    config.p_gen = 0.05;
    config.p0 = 1.0;
    config.sigma = 100;
    config.default_window = 100;
    config.drift_enabled = false;
    auto metrics = run(topo, StrategyKind::QuantumPathAdjustAtBsa, config, 56);
    const double p = std::pow(0.05, n_sources);
    const double expected = 1e6 * p;
    const double sigma = std::sqrt(expected * (1 - p));
    const double observed = static_cast<double>(metrics.all_fired_slots);
    if (std::abs(observed - expected) > 3 * sigma)
      return {false, notation + ": " + fmt(observed) + " vs " + fmt(expected) + " +- " +
                         fmt(3 * sigma)};
    detail += notation + " " + fmt(observed) + "/" + fmt(expected) + " ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 60.0) return {false, "took " + fmt(secs) + " s (budget 60 s)"};
  return {true, detail + "within 3 sigma, " + fmt(secs) + " s"};
}

// 6. HOM swap law at delta in {0, sigma, 2 sigma}: Monte-Carlo frequency
//    within 3 standard errors of p0 exp(-delta^2 / 2 sigma^2).
Outcome criterion_6() {
  const ps_t sigma = 100;
  const int trials = 100000;
  for (const ps_t delta : {ps_t{0}, sigma, 2 * sigma}) {
    RandomStream rng(606, "hom/" + std::to_string(delta));
    int successes = 0;
    for (int i = 0; i < trials; ++i)
      successes += bsa_measure(delta, 0, 10 * sigma, 1.0, sigma, rng).swap_success;
    const double expected = swap_probability(delta, 1.0, sigma);
    const double freq = static_cast<double>(successes) / trials;
    const double se = std::sqrt(expected * (1 - expected) / trials);
    if (std::abs(freq - expected) > 3 * se)
      return {false, "delta " + std::to_string(delta) + ": " + fmt(freq) + " vs " +
                         fmt(expected) + " +- " + fmt(3 * se)};
  }
  return {true, "frequencies match p0*exp(-d^2/2s^2) at 0, sigma, 2 sigma"};
}

// 7. Feedback tracking: >= 99% of post-warm-up paired slots stay inside the
//    100 ps window under 1 ns sinusoidal drift, over 5 fixed seeds.
Outcome criterion_7() {
  auto doc = load("feedback_sine");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto metrics = run(doc.topology, doc.strategy, doc.simulation, seed, doc.drift_models);
    const auto& totals = metrics.per_bsa.at("BSA1");
    if (totals.paired_post_warmup == 0) return {false, "no post-warmup slots"};
    const double locked = static_cast<double>(totals.in_window_post_warmup) /
                          static_cast<double>(totals.paired_post_warmup);
    if (locked < 0.99)
      return {false, "seed " + std::to_string(seed) + " locked " + fmt(locked * 100) + "%"};
  }
  return {true, ">= 99% in-window after warm-up for seeds 1..5"};
}

// 8. Memory decoupling: hop-by-hop latency matches max-of-geometrics, the
//    coupling graph is edgeless, and the memoryless baseline is ~1/q^2.
Outcome criterion_8() {
  auto doc = load("memory_two_link");
  auto memory = *doc.memory;
  memory.max_deliveries = 10000;
  const double q = memory.link_success_prob;

  auto metrics = run_hop_by_hop(doc.topology, doc.simulation, memory, 7);
  if (metrics.deliveries != 10000) return {false, "only " + std::to_string(metrics.deliveries)};
  const double formula = 2.0 / q - 1.0 / (2.0 * q - q * q);
  const double mean = metrics.mean_delivery_latency_slots();
  if (std::abs(mean - formula) / formula > 0.05)
    return {false, "hop-by-hop mean " + fmt(mean) + " vs formula " + fmt(formula)};

  auto graph = coupling_graph(doc.topology, StrategyKind::EmissionOffsetAdjust,
                              doc.simulation.rep_period, memory);
  if (!graph.edges.empty()) return {false, "coupling graph has edges"};

  auto baseline_cfg = memory;
  baseline_cfg.synchronous_baseline = true;
  auto baseline = run_hop_by_hop(doc.topology, doc.simulation, baseline_cfg, 7);
  const double base_mean = baseline.mean_delivery_latency_slots();
  if (std::abs(base_mean - 1.0 / (q * q)) / (1.0 / (q * q)) > 0.05)
    return {false, "baseline mean " + fmt(base_mean) + " vs 1/q^2 = " + fmt(1.0 / (q * q))};
  if (mean >= base_mean) return {false, "memory mode is not faster than the baseline"};
  return {true, "mean " + fmt(mean) + " ~ " + fmt(formula) + ", baseline " + fmt(base_mean) +
                    " ~ 100, no coupling edges"};
}

// 9. Determinism: identical scenario + seed gives byte-identical payloads,
//    including under --jobs 8 sweeps.
Outcome criterion_9() {
  const std::string a = "acceptance_c9_a.out", b = "acceptance_c9_b.out";
  if (run_cli("simulate " + scenario_dir + "/fig7_continuous.json --seed 3", a) != 0)
    return {false, "simulate failed"};
  if (run_cli("simulate " + scenario_dir + "/fig7_continuous.json --seed 3", b) != 0)
    return {false, "simulate failed"};
  if (slurp(a) != slurp(b) || slurp(a).empty()) return {false, "simulate bytes differ"};

  const std::string args = "sweep " + scenario_dir + "/dsisd_symmetric.json" +
                           " --seeds 1..4 --param simulation.p_gen=0.001,0.01" +
                           " --param simulation.slots=5000 --jobs 8";
  if (run_cli(args, a) != 0) return {false, "sweep failed"};
  if (run_cli(args, b) != 0) return {false, "sweep failed"};
  const bool same = slurp(a) == slurp(b) && !slurp(a).empty();
  std::remove(a.c_str());
  std::remove(b.c_str());
  if (!same) return {false, "sweep bytes differ under --jobs 8"};
  return {true, "simulate and 8-way sweep reproduce byte-identical files"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1 cascade confinement (quantum-odl, 20 random perturbations)", criterion_1},
      {"C2 cascade propagation (pump-path, emission-offset reach BSA3)", criterion_2},
      {"C3 cycle infeasibility (fig8_cycle certificate + grid oracle)", criterion_3},
      {"C4 solver-simulator cross-check (50 random chains, exact zero)", criterion_4},
      {"C5 exponential hop decay (p_gen^n over 1e6 slots)", criterion_5},
      {"C6 HOM swap law (Monte-Carlo vs closed form)", criterion_6},
      {"C7 feedback tracking (sinusoidal drift, 5 seeds)", criterion_7},
      {"C8 memory decoupling (hop-by-hop latency + coupling graph)", criterion_8},
      {"C9 determinism (byte-identical reports, --jobs 8)", criterion_9},
  };

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (outcome.pass ? "PASS  " : "FAIL  ") << name << " - " << outcome.detail << "\n";
    failures += !outcome.pass;
  }
  std::cout << (failures == 0 ? "all criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures;
}
