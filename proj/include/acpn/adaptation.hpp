#pragma once

#include <acpn/experience.hpp>
#include <acpn/inference.hpp>
#include <acpn/network.hpp>

#include <stdexcept>
#include <vector>

namespace acpn {

/// Process one case: for every non-fixed table, compute the family
/// posterior under the pre-adaptation network, fade (fade mode only),
/// retrieve per row, and disseminate the new frequencies into the
/// network's CPT. Fixed-mode variables are untouched.
///
/// Atomic: a zero-probability case throws and leaves network and tables
/// unmodified. All family posteriors are taken before any table changes.
inline void adapt_case(NetworkDef& net, ExperienceSet& exp,
                       const EvidenceCase& e) {
  if (static_cast<int>(exp.tables.size()) != net.size())
    throw std::invalid_argument("experience set does not match the network");

  std::vector<int> adaptive;
  for (int v = 0; v < net.size(); ++v)
    if (exp.tables[v].mode != AdaptMode::fixed) adaptive.push_back(v);

  bool complete = e.count_observed() == net.size();
  std::vector<FamilyPosterior> posteriors;
  posteriors.reserve(adaptive.size());

  if (complete) {
    // With a fully observed case the family posteriors are indicators;
    // the case probability is a plain product of CPT entries.
    double prob = 1.0;
    for (int v = 0; v < net.size(); ++v)
      prob *= net.cpt_entry(v, e.states[v], net.config_of(v, e.states));
    if (prob <= 0.0)
      throw ZeroProbabilityEvidence("case has probability zero");
    for (int v : adaptive) {
      FamilyPosterior fp;
      fp.child = v;
      fp.n_configs = net.config_count(v);
      fp.table.assign(
          static_cast<std::size_t>(fp.n_configs) * net.state_count(v), 0.0);
      fp.config_mass.assign(fp.n_configs, 0.0);
      int j = net.config_of(v, e.states);
      fp.table[static_cast<std::size_t>(j) * net.state_count(v) +
               e.states[v]] = 1.0;
      fp.config_mass[j] = 1.0;
      posteriors.push_back(std::move(fp));
    }
  } else {
    if (evidence_probability(net, e) <= 0.0)
      throw ZeroProbabilityEvidence("case has probability zero");
    for (int v : adaptive)
      posteriors.push_back(family_posterior(net, e, v));
  }

  // Stage every table's new rows before touching anything.
  std::vector<std::vector<ExperienceRow>> staged(adaptive.size());
  for (std::size_t a = 0; a < adaptive.size(); ++a) {
    const ExperienceTable& t = exp.tables[adaptive[a]];
    const FamilyPosterior& fp = posteriors[a];
    int k = net.state_count(adaptive[a]);
    staged[a].resize(t.rows.size());
    for (std::size_t j = 0; j < t.rows.size(); ++j) {
      ExperienceRow row = t.rows[j];
      if (t.mode == AdaptMode::fade)
        for (double& c : row.counts) c *= t.fading_factor;
      std::vector<double> w(k);
      for (int i = 0; i < k; ++i) w[i] = fp.at(i, static_cast<int>(j));
      double w0 = 1.0 - fp.config_mass[j];
      staged[a][j] = retrieve(row, w, w0).row();
    }
  }

  for (std::size_t a = 0; a < adaptive.size(); ++a) {
    ExperienceTable& t = exp.tables[adaptive[a]];
    t.rows = std::move(staged[a]);
    net.set_cpt(adaptive[a], disseminate(t));
  }
}

/// Type-variable retrieval: the posterior on a root type variable becomes
/// its new prior. Returns the installed distribution.
inline Distribution type_variable_adapt(NetworkDef& net, int type_var,
                                        const EvidenceCase& e) {
  if (!net.parents(type_var).empty())
    throw std::invalid_argument("type variable must be a root variable");
  Distribution d = posterior_marginal(net, e, type_var);
  net.set_cpt(type_var, d.p);
  return d;
}

/// Type-variable dissemination: the conditional for `child` with the type
/// parent summed out against its current prior. The result is a CPT over
/// the remaining parents, in their declared order.
struct TypeMarginalizedCpt {
  std::vector<int> parents;
  std::vector<double> cpt;
};

inline TypeMarginalizedCpt sum_out_type_parent(const NetworkDef& net,
                                               int child, int type_var) {
  const auto& parents = net.parents(child);
  int tpos = -1;
  for (std::size_t i = 0; i < parents.size(); ++i)
    if (parents[i] == type_var) tpos = static_cast<int>(i);
  if (tpos < 0)
    throw std::invalid_argument("type variable is not a parent of child");
  if (!net.parents(type_var).empty())
    throw std::invalid_argument("type variable must be a root variable");

  TypeMarginalizedCpt out;
  for (std::size_t i = 0; i < parents.size(); ++i)
    if (static_cast<int>(i) != tpos) out.parents.push_back(parents[i]);

  int k = net.state_count(child);
  int kt = net.state_count(type_var);
  int reduced_configs = 1;
  for (int p : out.parents) reduced_configs *= net.state_count(p);
  out.cpt.assign(static_cast<std::size_t>(reduced_configs) * k, 0.0);

  std::vector<int> full(parents.size(), 0);
  for (int rj = 0; rj < reduced_configs; ++rj) {
    // decode the reduced config, then reinsert each type state
    int rem = rj;
    for (int i = static_cast<int>(out.parents.size()) - 1; i >= 0; --i) {
      int kc = net.state_count(out.parents[i]);
      int idx = i < tpos ? i : i + 1;
      full[idx] = rem % kc;
      rem /= kc;
    }
    for (int t = 0; t < kt; ++t) {
      full[tpos] = t;
      int fj = 0;
      for (std::size_t i = 0; i < parents.size(); ++i)
        fj = fj * net.state_count(parents[i]) + full[i];
      double prior = net.cpt_entry(type_var, t, 0);
      for (int i = 0; i < k; ++i)
        out.cpt[static_cast<std::size_t>(rj) * k + i] +=
            prior * net.cpt_entry(child, i, fj);
    }
  }
  return out;
}

}  // namespace acpn
