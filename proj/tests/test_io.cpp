#include <catch_amalgamated.hpp>

#include <acpn/chest_clinic.hpp>
#include <acpn/io.hpp>

#include "support/gen.hpp"

#include <cmath>
#include <random>
#include <string>

using namespace acpn;

namespace {

void check_same_experience(const ExperienceSet& a, const ExperienceSet& b) {
  REQUIRE(a.tables.size() == b.tables.size());
  for (std::size_t v = 0; v < a.tables.size(); ++v) {
    const ExperienceTable& ta = a.tables[v];
    const ExperienceTable& tb = b.tables[v];
    CHECK(ta.mode == tb.mode);
    CHECK(ta.fading_factor == tb.fading_factor);
    REQUIRE(ta.rows.size() == tb.rows.size());
    for (std::size_t j = 0; j < ta.rows.size(); ++j)
      CHECK(ta.rows[j].counts == tb.rows[j].counts);
  }
}

}  // namespace

TEST_CASE("bundled fixture file parses to the built-in network") {
  NetworkDef parsed =
      parse_network(read_text_file(std::string(ACPN_DATA_DIR) +
                                   "/chest_clinic.net"));
  CHECK(parsed == chest_clinic());
}

TEST_CASE("serialize then parse is byte-stable") {
  NetworkDef net = chest_clinic();
  std::string s1 = serialize_network(net);
  NetworkDef again = parse_network(s1);
  CHECK(again == net);
  CHECK(serialize_network(again) == s1);
}

TEST_CASE("single root variable round-trips") {
  NetworkDef net;
  net.add_variable("coin", {"heads", "tails"});
  net.set_cpt(0, {0.4, 0.6});
  NetworkDef again = parse_network(serialize_network(net));
  CHECK(again == net);
}

TEST_CASE("random networks round-trip within 1e-12") {
  std::mt19937_64 rng(1234);
  for (int round = 0; round < 20; ++round) {
    NetworkDef net = testgen::random_network(rng, 6);
    std::string text = serialize_network(net);
    NetworkDef parsed = parse_network(text);
    CHECK(networks_equal(net, parsed, 1e-12));
    CHECK(serialize_network(parsed) == text);
  }
}

TEST_CASE("columns with tiny rounding drift are renormalized at parse") {
  std::string text =
      "variable a { x y }\n"
      "cpt a { 0.5 0.5000000005 }\n";
  NetworkDef net = parse_network(text);
  double sum = net.cpt_entry(0, 0, 0) + net.cpt_entry(0, 1, 0);
  CHECK(std::abs(sum - 1.0) < 1e-15);
  CHECK(validate(net).empty());
}

TEST_CASE("grossly non-normalized columns are kept for validate to flag") {
  std::string text =
      "variable a { x y }\n"
      "cpt a { 0.5 0.6 }\n";
  NetworkDef net = parse_network(text);
  CHECK(net.cpt_entry(0, 1, 0) == 0.6);
  CHECK_FALSE(validate(net).empty());
}

TEST_CASE("exactly normalized columns are untouched") {
  std::string text =
      "variable a { x y }\n"
      "cpt a { 0.25 0.75 }\n";
  NetworkDef net = parse_network(text);
  CHECK(net.cpt_entry(0, 0, 0) == 0.25);
  CHECK(net.cpt_entry(0, 1, 0) == 0.75);
}

TEST_CASE("parse errors carry line and column") {
  try {
    parse_network("variable a { x y }\nnonsense\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 1);
  }

  try {
    parse_network("variable a { x y }\ncpt a { 0.5 oops }\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 13);
  }
}

TEST_CASE("empty input reports no variables declared") {
  CHECK_THROWS_MATCHES(
      parse_network("# just a comment\n"), ParseError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("no variables declared")));
}

TEST_CASE("cpt row count mismatch names the variable") {
  std::string text =
      "variable a { x y }\n"
      "variable b { x y }\n"
      "parents b { a }\n"
      "cpt a { 0.5 0.5 }\n"
      "cpt b { 0.5 0.5 }\n";
  CHECK_THROWS_MATCHES(parse_network(text), ParseError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("'b'")));
}

TEST_CASE("structural parse errors") {
  CHECK_THROWS_AS(parse_network("variable a { x y }\nvariable a { x y }\n"
                                "cpt a { 0.5 0.5 }\n"),
                  ParseError);  // duplicate declaration
  CHECK_THROWS_AS(parse_network("variable a { x y }\nparents a { ghost }\n"
                                "cpt a { 0.5 0.5 }\n"),
                  ParseError);  // undeclared reference
  CHECK_THROWS_AS(parse_network("variable a { x }\ncpt a { 1 }\n"),
                  ParseError);  // one state
  CHECK_THROWS_AS(parse_network("variable a { x y }\ncpt a {\n0.5 0.5\n"),
                  ParseError);  // unterminated block
  CHECK_THROWS_AS(parse_network("variable a { x y }\n"),
                  ParseError);  // missing cpt
  CHECK_THROWS_AS(parse_network("variable a { x y }\ncpt a { 0.5 0.5 }\n"
                                "cpt a { 0.5 0.5 }\n"),
                  ParseError);  // duplicate cpt
  CHECK_THROWS_AS(parse_network("variable a { x x }\ncpt a { 0.5 0.5 }\n"),
                  ParseError);  // duplicate state
  CHECK_THROWS_AS(parse_network("variable a\ncpt a { 0.5 0.5 }\n"),
                  ParseError);  // missing brace
}

TEST_CASE("adapt stanza sets mode, ess, and fading factor") {
  std::string text =
      "variable a { x y }\n"
      "cpt a { 0.3 0.7 }\n"
      "adapt a { mode=accumulate ess=20 }\n";
  Model m = parse_model(text);
  CHECK(m.exp.tables[0].mode == AdaptMode::accumulate);
  CHECK(m.exp.tables[0].rows[0].counts ==
        std::vector<double>{20 * 0.3, 20 * 0.7});

  Model fade_model = parse_model(
      "variable a { x y }\ncpt a { 0.3 0.7 }\n"
      "adapt a { mode=fade ess=default mss=50 }\n");
  CHECK(fade_model.exp.tables[0].mode == AdaptMode::fade);
  CHECK(fade_model.exp.tables[0].fading_factor == 49.0 / 50.0);
  CHECK(fade_model.exp.tables[0].rows[0].ess() == Catch::Approx(10.0));

  Model default_mss = parse_model(
      "variable a { x y }\ncpt a { 0.3 0.7 }\nadapt a { mode=fade }\n");
  // table has 2 entries, so the default maximal sample size is 50
  CHECK(default_mss.exp.tables[0].fading_factor == 49.0 / 50.0);
}

TEST_CASE("tables default to fixed mode with ess 5k") {
  Model m = parse_model("variable a { x y z }\ncpt a { 0.2 0.3 0.5 }\n");
  CHECK(m.exp.tables[0].mode == AdaptMode::fixed);
  CHECK(m.exp.tables[0].rows[0].ess() == Catch::Approx(15.0));
}

TEST_CASE("experience stanza overrides derived counts") {
  std::string text =
      "variable a { x y }\n"
      "variable b { x y }\n"
      "parents b { a }\n"
      "cpt a { 0.5 0.5 }\n"
      "cpt b {\n  0.2 0.8\n  0.9 0.1\n}\n"
      "adapt b { mode=accumulate ess=10 }\n"
      "experience b {\n  3 4\n  5 6\n}\n";
  Model m = parse_model(text);
  CHECK(m.exp.tables[1].rows[0].counts == std::vector<double>{3, 4});
  CHECK(m.exp.tables[1].rows[1].counts == std::vector<double>{5, 6});

  CHECK_THROWS_AS(parse_model("variable a { x y }\ncpt a { 0.5 0.5 }\n"
                              "experience a { -1 2 }\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_model("variable a { x y }\ncpt a { 0.5 0.5 }\n"
                              "experience a { 0 0 }\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_model("variable a { x y }\ncpt a { 0.5 0.5 }\n"
                              "adapt a { mode=sideways }\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_model("variable a { x y }\ncpt a { 0.5 0.5 }\n"
                              "adapt a { ess=10 }\n"),
                  ParseError);  // mode missing
}

TEST_CASE("model snapshots round-trip exactly") {
  Model m;
  m.net = chest_clinic();
  m.exp = ExperienceSet::from_network(m.net, 10.0);
  for (int v = 0; v < m.net.size(); ++v)
    if (m.net.variable(v).name != kLogicalVariable)
      set_mode(m.exp.tables[v], AdaptMode::accumulate);
  set_mode(m.exp.tables[m.net.index_of("smoke")], AdaptMode::fade, 1000.0);
  // odd, non-representable counts to stress number formatting
  m.exp.tables[1].rows[0].counts = {1.0 / 3.0, 2.0 / 7.0};

  std::string s1 = serialize_model(m);
  Model back = parse_model(s1);
  CHECK(back.net == m.net);
  check_same_experience(back.exp, m.exp);
  CHECK(serialize_model(back) == s1);
}

TEST_CASE("cases files parse and serialize") {
  NetworkDef net = chest_clinic();
  std::string text =
      "smoke=yes dysp=no\n"
      "\n"
      "# a comment line\n"
      "asia=yes\n";
  auto cases = parse_cases(net, text);
  REQUIRE(cases.size() == 3);
  CHECK(cases[0].count_observed() == 2);
  CHECK(cases[1].empty());
  CHECK(cases[2].states[net.index_of("asia")] == 0);

  std::string out = serialize_cases(net, cases);
  CHECK(out == "smoke=yes dysp=no\n\nasia=yes\n");
  auto again = parse_cases(net, out);
  REQUIRE(again.size() == 3);
  for (std::size_t i = 0; i < again.size(); ++i)
    CHECK(again[i].states == cases[i].states);
}

TEST_CASE("cases file errors") {
  NetworkDef net = chest_clinic();
  CHECK_THROWS_AS(parse_cases(net, "smoke\n"), ParseError);
  CHECK_THROWS_AS(parse_cases(net, "ghost=yes\n"), ParseError);
  CHECK_THROWS_AS(parse_cases(net, "smoke=maybe\n"), ParseError);
  CHECK_THROWS_AS(parse_cases(net, "smoke=yes smoke=no\n"), ParseError);
  try {
    parse_cases(net, "smoke=yes\nsmoke=yes tub=wat\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 15);
  }
}

TEST_CASE("empty cases input yields no cases") {
  CHECK(parse_cases(chest_clinic(), "").empty());
}
