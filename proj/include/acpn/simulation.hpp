#pragma once

#include <acpn/adaptation.hpp>
#include <acpn/chest_clinic.hpp>
#include <acpn/experience.hpp>
#include <acpn/io.hpp>
#include <acpn/network.hpp>
#include <acpn/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace acpn {

/// One linearly interpolated CPT replacement: at case n the variable's
/// CPT is (1 - n/n_cases) * start + (n/n_cases) * end, clamped past the
/// end. Normalization is preserved by linearity.
struct LinearDrift {
  int variable = -1;
  std::vector<double> start_cpt;
  std::vector<double> end_cpt;
  int n_cases = 0;
};

/// A sampling distribution: a base network plus any parameter drift.
struct GroundTruth {
  NetworkDef base;
  std::vector<LinearDrift> drifts;
  std::vector<int> order;
};

inline GroundTruth ground_truth(NetworkDef net,
                                std::vector<LinearDrift> drifts = {}) {
  auto ord = net.topological_order();
  if (!ord) throw std::invalid_argument("ground-truth network is cyclic");
  return GroundTruth{std::move(net), std::move(drifts), std::move(*ord)};
}

/// The CPT column of variable v at parent config for case index n.
inline std::vector<double> drifted_column(const GroundTruth& gt, int v,
                                          int config, int n) {
  int k = gt.base.state_count(v);
  std::vector<double> col(k);
  for (int i = 0; i < k; ++i) col[i] = gt.base.cpt_entry(v, i, config);
  for (const LinearDrift& d : gt.drifts) {
    if (d.variable != v) continue;
    double t = std::min(1.0, static_cast<double>(n) / d.n_cases);
    for (int i = 0; i < k; ++i) {
      std::size_t at = static_cast<std::size_t>(config) * k + i;
      col[i] = (1.0 - t) * d.start_cpt[at] + t * d.end_cpt[at];
    }
  }
  return col;
}

/// Ancestral sampling: draw each variable given its sampled parents, in
/// topological order, one uniform per variable. n is the 0-based case
/// index and only matters under drift.
inline std::vector<int> forward_sample(const GroundTruth& gt, int n,
                                       std::mt19937_64& rng) {
  std::vector<int> a(gt.base.size(), -1);
  for (int v : gt.order) {
    int config = gt.base.config_of(v, a);
    std::vector<double> col = drifted_column(gt, v, config, n);
    a[v] = draw_categorical(col, rng);
  }
  return a;
}

/// Linear ramp of P(smoke=yes) from start to end over n cases; all other
/// tables static.
inline std::vector<LinearDrift> drift_schedule_smoker(const NetworkDef& net,
                                                      double start,
                                                      double end,
                                                      int n_cases) {
  if (!(start >= 0.0 && start <= 1.0 && end >= 0.0 && end <= 1.0))
    throw std::invalid_argument("drift endpoints must be probabilities");
  int v = net.index_of("smoke");
  if (v < 0 || !net.parents(v).empty() || net.state_count(v) != 2)
    throw std::invalid_argument("network has no binary root 'smoke'");
  LinearDrift d;
  d.variable = v;
  d.start_cpt = {start, 1.0 - start};
  d.end_cpt = {end, 1.0 - end};
  d.n_cases = n_cases;
  return {d};
}

enum class RLevel { R1 = 1, R2 = 2, R3 = 3 };
enum class OLevel { O1 = 1, O2 = 2 };
enum class PLevel { P1 = 1, P2 = 2 };
enum class LLevel { L1 = 1, L2 = 2, L3 = 3 };

/// O2 keeps only the externally observable fixture variables.
inline const std::vector<std::string>& o2_observed_names() {
  static const std::vector<std::string> names = {"asia", "smoke", "xray",
                                                 "dysp"};
  return names;
}

/// Restrict a (possibly already partial) assignment to the observation
/// scheme: O1 keeps everything, O2 the four observable variables.
inline EvidenceCase mask(const NetworkDef& net, std::span<const int> states,
                         OLevel o) {
  EvidenceCase e(net.size());
  if (o == OLevel::O1) {
    for (int v = 0; v < net.size(); ++v) e.states[v] = states[v];
    return e;
  }
  for (const std::string& name : o2_observed_names()) {
    int v = net.index_of(name);
    if (v >= 0) e.states[v] = states[v];
  }
  return e;
}

inline double ess_for(PLevel p) { return p == PLevel::P1 ? 10.0 : 100.0; }

/// Maximal sample size for the fading levels.
inline double mss_for(LLevel l) {
  switch (l) {
    case LLevel::L2: return 1000.0;
    case LLevel::L3: return 100.0;
    default: throw std::invalid_argument("no maximal sample size for L1");
  }
}

struct ExperimentConfig {
  RLevel r = RLevel::R1;
  OLevel o = OLevel::O1;
  PLevel p = PLevel::P1;
  LLevel l = LLevel::L1;
  int n_cases = 10000;
  std::uint64_t seed = 1;
  // 1-based case count after which L2/L3 turn on fading.
  int mode_switch_case = 1000;
};

inline std::string cell_name(const ExperimentConfig& cfg) {
  return "R" + std::to_string(static_cast<int>(cfg.r)) + "_O" +
         std::to_string(static_cast<int>(cfg.o)) + "_P" +
         std::to_string(static_cast<int>(cfg.p)) + "_L" +
         std::to_string(static_cast<int>(cfg.l)) + "_seed" +
         std::to_string(cfg.seed);
}

inline std::string cell_filename(const ExperimentConfig& cfg) {
  return cell_name(cfg) + ".csv";
}

/// Ground truth per R level: R1 the fixture itself; R2 a deterministic
/// strong perturbation (each non-logical column reverse-sorted, then
/// remapped p -> 0.2 + 0.6p and renormalized); R3 the fixture with the
/// smoker ramp 0.5 -> 0.2.
inline NetworkDef r2_perturbed(const NetworkDef& fixture) {
  NetworkDef net = fixture;
  for (int v = 0; v < net.size(); ++v) {
    if (net.variable(v).name == kLogicalVariable) continue;
    int k = net.state_count(v);
    std::vector<double> col(k);
    for (int j = 0; j < net.config_count(v); ++j) {
      for (int i = 0; i < k; ++i) col[i] = net.cpt_entry(v, i, j);
      std::sort(col.begin(), col.end(), std::greater<>());
      double sum = 0.0;
      for (double& p : col) {
        p = 0.2 + 0.6 * p;
        sum += p;
      }
      for (double& p : col) p /= sum;
      net.set_cpt_column(v, j, col);
    }
  }
  return net;
}

inline GroundTruth experiment_ground_truth(RLevel r, const NetworkDef& fixture,
                                           int n_cases) {
  switch (r) {
    case RLevel::R2: return ground_truth(r2_perturbed(fixture));
    case RLevel::R3:
      return ground_truth(fixture,
                          drift_schedule_smoker(fixture, 0.5, 0.2, n_cases));
    default: return ground_truth(fixture);
  }
}

/// Learner priors sit within about one posterior standard deviation of
/// the truth: each column is blended toward uniform with weight
/// 1/sqrt(ess+1). R2 keeps the unperturbed fixture (the mismatch between
/// prior and truth is the point of that level).
inline double prior_blend_weight(double ess) {
  return 1.0 / std::sqrt(ess + 1.0);
}

inline NetworkDef learner_priors(RLevel r, PLevel p,
                                 const NetworkDef& fixture) {
  NetworkDef net = fixture;
  if (r == RLevel::R2) return net;
  double lambda = prior_blend_weight(ess_for(p));
  for (int v = 0; v < net.size(); ++v) {
    if (net.variable(v).name == kLogicalVariable) continue;
    int k = net.state_count(v);
    double u = 1.0 / k;
    std::vector<double> col(k);
    for (int j = 0; j < net.config_count(v); ++j) {
      for (int i = 0; i < k; ++i)
        col[i] = (1.0 - lambda) * net.cpt_entry(v, i, j) + lambda * u;
      net.set_cpt_column(v, j, col);
    }
  }
  return net;
}

/// Learner model for a cell: blended priors, per-row ess from the P
/// level, every table accumulating except the logical one.
inline Model experiment_learner(RLevel r, PLevel p,
                                const NetworkDef& fixture) {
  Model m;
  m.net = learner_priors(r, p, fixture);
  m.exp = ExperienceSet::from_network(m.net, ess_for(p));
  for (int v = 0; v < m.net.size(); ++v)
    if (m.net.variable(v).name != kLogicalVariable)
      set_mode(m.exp.tables[v], AdaptMode::accumulate);
  return m;
}

/// One tracked CPT entry: (variable, parent config, child state).
struct TrackedEntry {
  int variable = -1;
  int config = 0;
  int state = 0;
};

inline TrackedEntry tracked_entry(
    const NetworkDef& net, const std::string& child,
    const std::vector<std::pair<std::string, std::string>>& parent_states,
    const std::string& state) {
  TrackedEntry te;
  te.variable = net.index_of(child);
  if (te.variable < 0)
    throw std::invalid_argument("unknown variable '" + child + "'");
  te.state = net.variable(te.variable).state_index(state);
  if (te.state < 0)
    throw std::invalid_argument("variable '" + child + "' has no state '" +
                                state + "'");
  std::vector<int> assignment(net.size(), -1);
  for (const auto& [var, st] : parent_states) {
    int p = net.index_of(var);
    if (p < 0) throw std::invalid_argument("unknown variable '" + var + "'");
    int s = net.variable(p).state_index(st);
    if (s < 0)
      throw std::invalid_argument("variable '" + var + "' has no state '" +
                                  st + "'");
    assignment[p] = s;
  }
  for (int p : net.parents(te.variable))
    if (assignment[p] < 0)
      throw std::invalid_argument("tracked entry for '" + child +
                                  "' leaves parent '" + net.variable(p).name +
                                  "' unset");
  int named = static_cast<int>(parent_states.size());
  if (named != static_cast<int>(net.parents(te.variable).size()))
    throw std::invalid_argument("tracked entry for '" + child +
                                "' names a non-parent");
  te.config = net.config_of(te.variable, assignment);
  return te;
}

/// The three entries plotted in the reference experiments.
inline std::vector<TrackedEntry> default_tracked(const NetworkDef& net) {
  return {
      tracked_entry(net, "bronc", {{"smoke", "yes"}}, "yes"),
      tracked_entry(net, "dysp", {{"either", "no"}, {"bronc", "yes"}}, "yes"),
      tracked_entry(net, "smoke", {}, "yes"),
  };
}

struct TrajectoryRecord {
  int case_index = 0;  // 1-based
  int variable = -1;
  int config = 0;
  int state = 0;
  double mean = 0.0;
  double variance = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  double ess = 0.0;

  bool operator==(const TrajectoryRecord&) const = default;
};

inline TrajectoryRecord snapshot_entry(const ExperienceSet& exp,
                                       const TrackedEntry& te,
                                       int case_index) {
  const ExperienceRow& row = exp.tables[te.variable].rows[te.config];
  TrajectoryRecord r;
  r.case_index = case_index;
  r.variable = te.variable;
  r.config = te.config;
  r.state = te.state;
  r.ess = row.ess();
  r.mean = row.counts[te.state] / r.ess;
  r.variance = entry_variance(r.mean, r.ess);
  auto [lo, hi] = posterior_interval(r.mean, r.ess);
  r.lo95 = lo;
  r.hi95 = hi;
  return r;
}

/// Run one cell: sample, mask, adapt, record the tracked entries, case by
/// case. L2/L3 switch every adapting table to fade after mode_switch_case
/// cases. The learner is updated in place to its final state.
inline std::vector<TrajectoryRecord> run_experiment(
    const ExperimentConfig& cfg, const GroundTruth& gt, Model& learner,
    std::span<const TrackedEntry> tracked) {
  if (gt.base.size() != learner.net.size())
    throw std::invalid_argument("ground truth and learner differ in shape");
  std::mt19937_64 rng(cfg.seed);
  std::vector<TrajectoryRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.n_cases) * tracked.size());
  bool fades = cfg.l == LLevel::L2 || cfg.l == LLevel::L3;
  for (int n = 0; n < cfg.n_cases; ++n) {
    if (fades && n == cfg.mode_switch_case)
      for (ExperienceTable& t : learner.exp.tables)
        if (t.mode != AdaptMode::fixed)
          set_mode(t, AdaptMode::fade, mss_for(cfg.l));
    std::vector<int> sample = forward_sample(gt, n, rng);
    EvidenceCase e = mask(learner.net, sample, cfg.o);
    try {
      adapt_case(learner.net, learner.exp, e);
    } catch (const ZeroProbabilityEvidence&) {
      throw ZeroProbabilityEvidence(
          "case " + std::to_string(n + 1) +
          " has probability zero under the learner");
    }
    for (const TrackedEntry& te : tracked)
      records.push_back(snapshot_entry(learner.exp, te, n + 1));
  }
  return records;
}

struct ExperimentResult {
  std::vector<TrajectoryRecord> records;
  Model learner;
};

/// Convenience wrapper building ground truth and learner from the
/// bundled fixture.
inline ExperimentResult run_cell(const ExperimentConfig& cfg,
                                 std::span<const TrackedEntry> tracked = {}) {
  NetworkDef fixture = chest_clinic();
  GroundTruth gt = experiment_ground_truth(cfg.r, fixture, cfg.n_cases);
  ExperimentResult res;
  res.learner = experiment_learner(cfg.r, cfg.p, fixture);
  std::vector<TrackedEntry> fallback;
  if (tracked.empty()) {
    fallback = default_tracked(res.learner.net);
    tracked = fallback;
  }
  res.records = run_experiment(cfg, gt, res.learner, tracked);
  return res;
}

/// Parent configuration rendered as var=state&var=state in declared
/// parent order; empty for a root variable.
inline std::string render_parent_config(const NetworkDef& net, int v,
                                        int config) {
  const auto& parents = net.parents(v);
  std::vector<int> states = net.config_states(v, config);
  std::string out;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (i) out += '&';
    out += net.variable(parents[i]).name + "=" +
           net.variable(parents[i]).states[states[i]];
  }
  return out;
}

inline std::string trajectory_csv(const NetworkDef& net,
                                  std::span<const TrajectoryRecord> records) {
  std::string out = "case,table,parent_config,state,mean,variance,lo95,hi95,ess\n";
  for (const TrajectoryRecord& r : records) {
    out += std::to_string(r.case_index);
    out += ',';
    out += net.variable(r.variable).name;
    out += ',';
    out += render_parent_config(net, r.variable, r.config);
    out += ',';
    out += net.variable(r.variable).states[r.state];
    out += ',';
    out += format_double(r.mean);
    out += ',';
    out += format_double(r.variance);
    out += ',';
    out += format_double(r.lo95);
    out += ',';
    out += format_double(r.hi95);
    out += ',';
    out += format_double(r.ess);
    out += '\n';
  }
  return out;
}

}  // namespace acpn
