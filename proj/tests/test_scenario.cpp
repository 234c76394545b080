#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "psdsim/scenario.hpp"

using namespace psdsim;

namespace {
const std::string scenario_dir = PSDSIM_SCENARIO_DIR;
}

TEST_CASE("shipped scenarios load and validate") {
  for (const std::string name :
       {"dsisd_symmetric", "dsisd_asymmetric", "fig1_symmetric", "fig5_chain4",
        "fig7_continuous", "fig8_cycle", "memory_two_link", "feedback_sine"}) {
    auto doc = load_scenario(scenario_dir + "/" + name + ".json");
    INFO(name);
    CHECK(doc.name == name);
    CHECK(validate_scenario(doc).ok());
  }
}

TEST_CASE("time quantities need value and unit") {
  json q = {{"value", 1}, {"unit", "us"}};
  CHECK(detail::parse_time(q, "x") == ps_per_us);
  q["unit"] = "ns";
  CHECK(detail::parse_time(q, "x") == ps_per_ns);
  q["value"] = 0.5;
  CHECK(detail::parse_time(q, "x") == 500);
  q["unit"] = "lightyears";
  CHECK_THROWS_AS(detail::parse_time(q, "x"), ParseError);
  CHECK_THROWS_AS(detail::parse_time(json(3.0), "x"), ParseError);
}

TEST_CASE("unknown keys fail strict parsing and warn in lenient mode") {
  auto doc = load_scenario(scenario_dir + "/dsisd_symmetric.json");
  auto j = scenario_to_json(doc);
  j["typo_key"] = 1;
  CHECK_THROWS_AS(parse_scenario(j, true), ValidationError);
  auto lenient = parse_scenario(j, false);
  REQUIRE(lenient.warnings.size() == 1);
  CHECK(lenient.warnings[0].find("typo_key") != std::string::npos);
}

TEST_CASE("malformed files raise ParseError") {
  const std::string path = "truncated_test_scenario.json";
  {
    std::ofstream out(path);
    out << "{\"nodes\": [";
  }
  CHECK_THROWS_AS(load_scenario(path), ParseError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_scenario("no_such_file.json"), ParseError);
}

TEST_CASE("semantic validation catches dangling drift references") {
  auto doc = load_scenario(scenario_dir + "/dsisd_symmetric.json");
  doc.topology.links[0].drift_ref = "ghost";
  auto report = validate_scenario(doc);
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations[0].message.find("ghost") != std::string::npos);
}

TEST_CASE("per-source rep_period must match the shared grid") {
  auto doc = load_scenario(scenario_dir + "/dsisd_symmetric.json");
  doc.topology.find_node("A")->rep_period = 2 * ps_per_us;
  CHECK_FALSE(validate_scenario(doc).ok());
  doc.topology.find_node("A")->rep_period = doc.simulation.rep_period;
  CHECK(validate_scenario(doc).ok());
}

TEST_CASE("config sanity is enforced") {
  SimulationConfig c;
  c.slots = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c.slots = 10;
  c.p_gen = 1.5;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c.p_gen = 0.5;
  CHECK_NOTHROW(c.check());
}

TEST_CASE("strategy names resolve to the five presets") {
  CHECK(strategy_from_name("pump-path") == StrategyKind::PumpPathAdjust);
  CHECK(strategy_from_name("quantum-odl") == StrategyKind::QuantumPathAdjustAtBsa);
  CHECK(strategy_from_name("emission-offset") == StrategyKind::EmissionOffsetAdjust);
  CHECK(strategy_from_name("freq-sync") == StrategyKind::FrequencySyncQuantumAdjust);
  CHECK(strategy_from_name("combined-1-2") == StrategyKind::Combined12);
  CHECK_FALSE(strategy_from_name("teleport-harder").has_value());
}
