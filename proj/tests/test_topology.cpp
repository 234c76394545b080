#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "psdsim/scenario.hpp"
#include "psdsim/topology.hpp"

using namespace psdsim;

TEST_CASE("chain notation expands to the expected node mix") {
  auto dsd = parse_path_notation("DSD", 1000.0);
  CHECK(dsd.nodes_of_kind(NodeKind::Source).size() == 1);
  CHECK(dsd.nodes_of_kind(NodeKind::BsaSupport).empty());
  CHECK(dsd.nodes_of_kind(NodeKind::EndDetector).size() == 2);
  int quantum = 0;
  for (const auto& l : dsd.links) quantum += l.channel == ChannelKind::Quantum;
  CHECK(quantum == 2);

  auto big = parse_path_notation("DSISISD", 1000.0);
  CHECK(big.nodes_of_kind(NodeKind::Source).size() == 3);
  CHECK(big.nodes_of_kind(NodeKind::BsaSupport).size() == 2);
  CHECK(big.nodes_of_kind(NodeKind::EndDetector).size() == 2);
}

TEST_CASE("chain notation node counts follow the grammar") {
  for (const std::string text : {"DSD", "DSISD", "DSISISD", "DSISISISD"}) {
    auto topo = parse_path_notation(text, 500.0);
    const std::size_t n_sources = (text.size() - 1) / 2;
    CHECK(topo.nodes_of_kind(NodeKind::Source).size() == n_sources);
    CHECK(topo.nodes_of_kind(NodeKind::BsaSupport).size() == n_sources - 1);
    int quantum = 0;
    for (const auto& l : topo.links) quantum += l.channel == ChannelKind::Quantum;
    CHECK(static_cast<std::size_t>(quantum) == text.size() - 1);
    CHECK(validate_topology(topo).ok());
  }
}

TEST_CASE("grammar violations report a 1-based position") {
  try {
    parse_path_notation("DDS", 1000.0);
    FAIL("expected GrammarError");
  } catch (const GrammarError& e) {
    CHECK(e.position == 2);
  }
  CHECK_THROWS_AS(parse_path_notation("", 1000.0), GrammarError);
  CHECK_THROWS_AS(parse_path_notation("DS", 1000.0), GrammarError);
  CHECK_THROWS_AS(parse_path_notation("DSISDX", 1000.0), GrammarError);
  CHECK_THROWS_AS(parse_path_notation("SDS", 1000.0), GrammarError);
}

TEST_CASE("propagation delay follows length * index / c plus the lump") {
  Link l;
  l.length_m = 0;
  CHECK(propagation_delay_ps(l) == 0);

  l.length_m = 299792458.0;
  l.group_index = 1.0;
  CHECK(propagation_delay_ps(l) == ps_per_s);  // exactly one second

  l.length_m = 10000.0;
  l.group_index = 1.468;
  const ps_t expected = std::llround(10000.0 * 1.468 / 299792458.0 * 1e12);
  CHECK(propagation_delay_ps(l) == expected);
  CHECK_THAT(seconds_from_ps(propagation_delay_ps(l)),
             Catch::Matchers::WithinRel(4.8967e-5, 1e-4));

  l.extra_fixed_delay = 123;
  CHECK(propagation_delay_ps(l) == expected + 123);
}

TEST_CASE("propagation delay is monotone in length, index, and lump") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> len(0.0, 50000.0);
  std::uniform_real_distribution<double> gi(1.0, 2.0);
  std::uniform_int_distribution<ps_t> extra(0, 1000000);
  for (int i = 0; i < 200; ++i) {
    Link a, b;
    a.length_m = len(rng);
    a.group_index = gi(rng);
    a.extra_fixed_delay = extra(rng);
    b = a;
    b.length_m += len(rng) * 0.1;
    b.group_index += 0.05;
    b.extra_fixed_delay += extra(rng);
    CHECK(propagation_delay_ps(b) >= propagation_delay_ps(a));
  }
}

TEST_CASE("validate_topology reports structural violations") {
  auto topo = parse_path_notation("DSISD", 1000.0);
  REQUIRE(validate_topology(topo).ok());

  SECTION("a BSA with one quantum input") {
    NetworkTopology broken = topo;
    std::erase_if(broken.links, [](const Link& l) { return l.id == "q2"; });
    auto report = validate_topology(broken);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations)
      found |= v.subject == "I2" && v.message.find("in-degree 1") != std::string::npos;
    CHECK(found);
  }

  SECTION("group_index below one") {
    NetworkTopology broken = topo;
    broken.links[0].group_index = 0.5;
    auto report = validate_topology(broken);
    REQUIRE_FALSE(report.ok());
    CHECK(report.violations[0].message.find("group_index") != std::string::npos);
  }

  SECTION("quantum links never join two BSAs") {
    NetworkTopology broken = topo;
    Link bad;
    bad.id = "bad";
    bad.channel = ChannelKind::Quantum;
    bad.from = {"I2", 0};
    bad.to = {"I2", 1};
    bad.length_m = 1;
    broken.links.push_back(bad);
    CHECK_FALSE(validate_topology(broken).ok());
  }
}

TEST_CASE("photon paths trace upstream to their source") {
  auto topo = parse_path_notation("DSISD", 2000.0);
  auto left = trace_photon_path(topo, "I2", 0);
  auto right = trace_photon_path(topo, "I2", 1);
  CHECK(left.source == "S1");
  CHECK(right.source == "S3");
  CHECK(left.links == std::vector<std::string>{"q1"});
  CHECK(right.links == std::vector<std::string>{"q2"});
}

TEST_CASE("scenario round-trip preserves the topology field for field") {
  for (const std::string text : {"DSD", "DSISD", "DSISISD"}) {
    ScenarioDocument doc;
    doc.name = "roundtrip";
    doc.topology = parse_path_notation(text, 12345.0);
    doc.topology.links[0].extra_fixed_delay = 777;
    doc.topology.links[1].drift_ref = "m1";
    doc.drift_models.push_back({"m1", DriftKind::Static, 5, 0, 0, 0, 0, 0, 0});
    doc.strategy = StrategyKind::EmissionOffsetAdjust;
    auto j = scenario_to_json(doc);
    auto back = parse_scenario(j, true);
    CHECK(back.topology == doc.topology);
    CHECK(back.strategy == doc.strategy);
    CHECK(back.drift_models == doc.drift_models);
  }
}

TEST_CASE("perturbing a link changes only its length") {
  auto topo = parse_path_notation("DSISD", 1000.0);
  auto bumped = perturb_link_length(topo, "q1", 2.5);
  CHECK(bumped.find_link("q1")->length_m == 1002.5);
  CHECK(bumped.find_link("q2")->length_m == 1000.0);
  CHECK_THROWS_AS(perturb_link_length(topo, "nope", 1.0), UnknownVariable);
  CHECK_THROWS_AS(perturb_link_length(topo, "q1", -5000.0), BoundsViolation);
}
