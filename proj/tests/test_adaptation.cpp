#include <catch_amalgamated.hpp>

#include <acpn/adaptation.hpp>
#include <acpn/chest_clinic.hpp>
#include <acpn/experience.hpp>
#include <acpn/inference.hpp>
#include <acpn/network.hpp>

#include <vector>

using namespace acpn;

namespace {

/// Family posterior weights computed by brute-force enumeration, kept
/// independent of the elimination code adapt_case runs on.
struct FamilyWeights {
  std::vector<std::vector<double>> w;  // per config: one weight per state
  std::vector<double> config_mass;
};

FamilyWeights enumerated_weights(const NetworkDef& net, const EvidenceCase& e,
                                 int v) {
  std::vector<int> fam = net.parents(v);
  fam.push_back(v);
  JointTable jt = brute_force_joint(net, e);
  std::vector<double> tab = jt.marginal(fam);
  int k = net.state_count(v);
  FamilyWeights fw;
  fw.w.resize(net.config_count(v));
  fw.config_mass.resize(net.config_count(v));
  for (int j = 0; j < net.config_count(v); ++j) {
    fw.w[j].resize(k);
    double mass = 0.0;
    for (int i = 0; i < k; ++i) {
      fw.w[j][i] = tab[static_cast<std::size_t>(j) * k + i];
      mass += fw.w[j][i];
    }
    fw.config_mass[j] = mass;
  }
  return fw;
}

std::vector<std::vector<std::vector<double>>> all_counts(
    const ExperienceSet& exp) {
  std::vector<std::vector<std::vector<double>>> out;
  for (const auto& t : exp.tables) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : t.rows) rows.push_back(r.counts);
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

TEST_CASE("a complete case adds one observation to each hit row") {
  NetworkDef net = chest_clinic();
  ExperienceSet exp = ExperienceSet::from_network(net, 10.0);
  int either = net.index_of("either");
  // the deterministic table stays fixed: zero-variance rows carry no
  // sample-size information and would jump to the cap
  for (auto& t : exp.tables)
    if (t.child != either) set_mode(t, AdaptMode::accumulate);
  auto before = all_counts(exp);

  // asia=no tub=no smoke=yes lung=no bronc=yes either=no xray=no dysp=yes
  EvidenceCase e = EvidenceCase::from_pairs(
      net, {{"asia", "no"},
            {"tub", "no"},
            {"smoke", "yes"},
            {"lung", "no"},
            {"bronc", "yes"},
            {"either", "no"},
            {"xray", "no"},
            {"dysp", "yes"}});
  adapt_case(net, exp, e);

  for (int v = 0; v < net.size(); ++v) {
    int k = net.state_count(v);
    int hit = net.config_of(v, e.states);
    for (int j = 0; j < net.config_count(v); ++j) {
      const auto& now = exp.tables[v].rows[j].counts;
      for (int i = 0; i < k; ++i) {
        bool adds = v != either && j == hit && i == e.states[v];
        double expected = before[v][j][i] + (adds ? 1.0 : 0.0);
        CHECK(now[i] == Catch::Approx(expected).margin(1e-12));
      }
      // network carries the disseminated frequencies
      double s = exp.tables[v].rows[j].ess();
      for (int i = 0; i < k; ++i)
        CHECK(net.cpt_entry(v, i, j) ==
              Catch::Approx(now[i] / s).margin(1e-15));
    }
  }
}

TEST_CASE("an empty case changes nothing") {
  NetworkDef net = chest_clinic();
  NetworkDef reference = net;
  ExperienceSet exp = ExperienceSet::from_network(net);
  int either = net.index_of("either");
  for (auto& t : exp.tables)
    if (t.child != either) set_mode(t, AdaptMode::accumulate);
  auto before = all_counts(exp);

  adapt_case(net, exp, EvidenceCase(net.size()));

  for (int v = 0; v < net.size(); ++v)
    for (int j = 0; j < net.config_count(v); ++j)
      for (std::size_t i = 0; i < before[v][j].size(); ++i)
        CHECK(exp.tables[v].rows[j].counts[i] ==
              Catch::Approx(before[v][j][i]).margin(1e-12));
  CHECK(networks_equal(net, reference, 1e-12));
}

TEST_CASE("partial evidence matches retrieval from enumerated weights") {
  NetworkDef net = chest_clinic();
  ExperienceSet exp = ExperienceSet::from_network(net, 10.0);
  int either = net.index_of("either");
  int smoke = net.index_of("smoke");
  for (auto& t : exp.tables)
    if (t.child != either) set_mode(t, AdaptMode::accumulate);
  set_mode(exp.tables[smoke], AdaptMode::fade, 1000.0);

  EvidenceCase e =
      EvidenceCase::from_pairs(net, {{"xray", "yes"}, {"dysp", "no"}});

  // expected tables via the enumeration oracle, staged from the same priors
  NetworkDef pre = net;
  auto before = all_counts(exp);
  adapt_case(net, exp, e);

  for (int v = 0; v < net.size(); ++v) {
    if (v == either) continue;
    FamilyWeights fw = enumerated_weights(pre, e, v);
    double q = v == smoke ? exp.tables[v].fading_factor : 1.0;
    for (int j = 0; j < net.config_count(v); ++j) {
      ExperienceRow faded;
      faded.counts = before[v][j];
      for (double& c : faded.counts) c *= q;
      ExperienceRow want =
          retrieve(faded, fw.w[j], 1.0 - fw.config_mass[j]).row();
      const auto& got = exp.tables[v].rows[j].counts;
      REQUIRE(got.size() == want.counts.size());
      for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == Catch::Approx(want.counts[i]).margin(1e-12));
      double s = exp.tables[v].rows[j].ess();
      for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(net.cpt_entry(v, static_cast<int>(i), j) ==
              Catch::Approx(got[i] / s).margin(1e-15));
    }
  }

  // the fixed table kept both its counts and its CPT column
  CHECK(exp.tables[either].rows[0].counts == before[either][0]);
  CHECK(net.cpt(either) == pre.cpt(either));
}

TEST_CASE("an impossible case aborts without side effects") {
  NetworkDef net = chest_clinic();
  ExperienceSet exp = ExperienceSet::from_network(net);
  for (auto& t : exp.tables) set_mode(t, AdaptMode::accumulate);
  NetworkDef net_before = net;
  auto counts_before = all_counts(exp);

  SECTION("partial contradiction") {
    EvidenceCase e = EvidenceCase::from_pairs(
        net, {{"tub", "no"}, {"lung", "no"}, {"either", "yes"}});
    CHECK_THROWS_AS(adapt_case(net, exp, e), ZeroProbabilityEvidence);
  }

  SECTION("complete contradiction takes the fast path") {
    EvidenceCase e = EvidenceCase::from_pairs(
        net, {{"asia", "no"},
              {"tub", "yes"},
              {"smoke", "no"},
              {"lung", "no"},
              {"bronc", "no"},
              {"either", "no"},  // impossible: tub says yes
              {"xray", "no"},
              {"dysp", "no"}});
    CHECK_THROWS_AS(adapt_case(net, exp, e), ZeroProbabilityEvidence);
  }

  CHECK(net == net_before);
  CHECK(all_counts(exp) == counts_before);
}

TEST_CASE("fade discounts before the observation lands") {
  NetworkDef net = chest_clinic();
  ExperienceSet exp = ExperienceSet::from_network(net, 10.0);
  int smoke = net.index_of("smoke");
  set_mode(exp.tables[smoke], AdaptMode::fade, 1000.0);

  EvidenceCase e = EvidenceCase::from_pairs(
      net, {{"asia", "no"},
            {"tub", "no"},
            {"smoke", "yes"},
            {"lung", "no"},
            {"bronc", "no"},
            {"either", "no"},
            {"xray", "no"},
            {"dysp", "no"}});
  adapt_case(net, exp, e);

  double q = 0.999;
  const auto& c = exp.tables[smoke].rows[0].counts;
  CHECK(c[0] == Catch::Approx(5.0 * q + 1.0).margin(1e-12));
  CHECK(c[1] == Catch::Approx(5.0 * q).margin(1e-12));
  CHECK(exp.tables[smoke].rows[0].ess() ==
        Catch::Approx(10.0 * q + 1.0).margin(1e-12));

  // everything else was fixed and untouched
  int bronc = net.index_of("bronc");
  CHECK(exp.tables[bronc].rows[0].counts == std::vector<double>{6.0, 4.0});
}

TEST_CASE("switching modes mid-session keeps the accumulated counts") {
  NetworkDef net = chest_clinic();
  ExperienceSet exp = ExperienceSet::from_network(net, 10.0);
  int smoke = net.index_of("smoke");
  set_mode(exp.tables[smoke], AdaptMode::accumulate);

  EvidenceCase e = EvidenceCase::from_pairs(
      net, {{"asia", "no"},
            {"tub", "no"},
            {"smoke", "yes"},
            {"lung", "no"},
            {"bronc", "no"},
            {"either", "no"},
            {"xray", "no"},
            {"dysp", "no"}});
  for (int n = 0; n < 3; ++n) adapt_case(net, exp, e);
  CHECK(exp.tables[smoke].rows[0].ess() == Catch::Approx(13.0).margin(1e-9));

  set_mode(exp.tables[smoke], AdaptMode::fade, 1000.0);
  CHECK(exp.tables[smoke].rows[0].ess() == Catch::Approx(13.0).margin(1e-9));

  adapt_case(net, exp, e);
  CHECK(exp.tables[smoke].rows[0].ess() ==
        Catch::Approx(13.0 * 0.999 + 1.0).margin(1e-9));
}

TEST_CASE("adapt_case rejects a mismatched experience set") {
  NetworkDef net = chest_clinic();
  ExperienceSet exp = ExperienceSet::from_network(net);
  exp.tables.pop_back();
  CHECK_THROWS_AS(adapt_case(net, exp, EvidenceCase(net.size())),
                  std::invalid_argument);
}

TEST_CASE("all-fixed adaptation is a no-op") {
  NetworkDef net = chest_clinic();
  NetworkDef reference = net;
  ExperienceSet exp = ExperienceSet::from_network(net);
  auto before = all_counts(exp);
  EvidenceCase e =
      EvidenceCase::from_pairs(net, {{"dysp", "yes"}, {"smoke", "no"}});
  adapt_case(net, exp, e);
  CHECK(net == reference);
  CHECK(all_counts(exp) == before);
}

TEST_CASE("a type variable takes its posterior as the new prior") {
  NetworkDef net = chest_clinic();
  int smoke = net.index_of("smoke");
  EvidenceCase e = EvidenceCase::from_pairs(net, {{"dysp", "yes"}});
  Distribution expected = posterior_marginal(net, e, smoke);

  Distribution d = type_variable_adapt(net, smoke, e);
  CHECK(d.p == expected.p);
  CHECK(net.cpt(smoke) == expected.p);

  int dysp = net.index_of("dysp");
  CHECK_THROWS_AS(type_variable_adapt(net, dysp, e), std::invalid_argument);
}

TEST_CASE("summing out a type parent averages over its prior") {
  NetworkDef net;
  int t = net.add_variable("t", {"t1", "t2"});
  int x = net.add_variable("x", {"a", "b"});
  int c1 = net.add_variable("c1", {"yes", "no"});
  int c2 = net.add_variable("c2", {"yes", "no"});
  int d = net.add_variable("d", {"yes", "no"});
  net.set_parents(c1, {t, x});
  net.set_parents(c2, {x, t});
  net.set_parents(d, {c1});
  net.set_cpt(t, {0.3, 0.7});
  net.set_cpt(x, {0.6, 0.4});
  // P(c=yes | t, x): (t1,a)=0.9 (t1,b)=0.8 (t2,a)=0.2 (t2,b)=0.1
  net.set_cpt(c1, {0.9, 0.1, 0.8, 0.2, 0.2, 0.8, 0.1, 0.9});
  net.set_cpt(c2, {0.9, 0.1, 0.2, 0.8, 0.8, 0.2, 0.1, 0.9});
  net.set_cpt(d, {0.5, 0.5, 0.5, 0.5});
  REQUIRE(validate(net).empty());

  for (int child : {c1, c2}) {
    TypeMarginalizedCpt r = sum_out_type_parent(net, child, t);
    CHECK(r.parents == std::vector<int>{x});
    REQUIRE(r.cpt.size() == 4);
    CHECK(r.cpt[0] == Catch::Approx(0.3 * 0.9 + 0.7 * 0.2).margin(1e-15));
    CHECK(r.cpt[1] == Catch::Approx(0.3 * 0.1 + 0.7 * 0.8).margin(1e-15));
    CHECK(r.cpt[2] == Catch::Approx(0.3 * 0.8 + 0.7 * 0.1).margin(1e-15));
    CHECK(r.cpt[3] == Catch::Approx(0.3 * 0.2 + 0.7 * 0.9).margin(1e-15));
  }

  // c2 is no parent of c1; c1 is a parent of d but not a root
  CHECK_THROWS_AS(sum_out_type_parent(net, c1, c2), std::invalid_argument);
  CHECK_THROWS_AS(sum_out_type_parent(net, d, c1), std::invalid_argument);
}
