#pragma once

#include <acpn/errors.hpp>
#include <acpn/network.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace acpn {

/// Posterior distribution of one variable.
struct Distribution {
  int variable = -1;
  std::vector<double> p;
};

/// Joint posterior over a child and its full parent configuration:
/// table(i, j) = P(child = i, parents in config j | evidence), laid out
/// config-major like a CPT; config_mass(j) is the column sum.
struct FamilyPosterior {
  int child = -1;
  int n_configs = 0;
  std::vector<double> table;
  std::vector<double> config_mass;

  double at(int state, int config) const {
    return table[static_cast<std::size_t>(config) * k() + state];
  }
  int k() const {
    return n_configs == 0 ? 0 : static_cast<int>(table.size()) / n_configs;
  }
};

namespace detail {

/// Discrete factor; data is row-major over vars with the last varying
/// fastest.
struct Factor {
  std::vector<int> vars;
  std::vector<int> card;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

inline Factor cpt_factor(const NetworkDef& net, int v) {
  Factor f;
  f.vars = net.parents(v);
  f.vars.push_back(v);  // child varies fastest, matching the CPT layout
  for (int u : f.vars) f.card.push_back(net.state_count(u));
  f.data = net.cpt(v);
  return f;
}

/// Fix var = state and drop it from the scope.
inline Factor reduce(const Factor& f, int var, int state) {
  int pos = -1;
  for (std::size_t i = 0; i < f.vars.size(); ++i)
    if (f.vars[i] == var) pos = static_cast<int>(i);
  if (pos < 0) return f;
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (static_cast<int>(i) == pos) continue;
    out.vars.push_back(f.vars[i]);
    out.card.push_back(f.card[i]);
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < pos; ++i) outer *= f.card[i];
  for (std::size_t i = pos + 1; i < f.vars.size(); ++i) inner *= f.card[i];
  out.data.resize(outer * inner);
  std::size_t kc = f.card[pos];
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in)
      out.data[o * inner + in] = f.data[(o * kc + state) * inner + in];
  return out;
}

inline Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  out.vars = a.vars;
  out.card = a.card;
  for (std::size_t i = 0; i < b.vars.size(); ++i) {
    if (std::find(a.vars.begin(), a.vars.end(), b.vars[i]) == a.vars.end()) {
      out.vars.push_back(b.vars[i]);
      out.card.push_back(b.card[i]);
    }
  }
  std::size_t total = 1;
  for (int c : out.card) total *= c;
  // strides of each output digit within a and b
  auto strides_in = [&](const Factor& f) {
    std::vector<std::size_t> s(out.vars.size(), 0);
    std::size_t stride = 1;
    for (int i = static_cast<int>(f.vars.size()) - 1; i >= 0; --i) {
      for (std::size_t j = 0; j < out.vars.size(); ++j)
        if (out.vars[j] == f.vars[i]) s[j] = stride;
      stride *= f.card[i];
    }
    return s;
  };
  std::vector<std::size_t> sa = strides_in(a), sb = strides_in(b);
  std::vector<int> digit(out.vars.size(), 0);
  out.data.resize(total);
  std::size_t ia = 0, ib = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    out.data[idx] = a.data[ia] * b.data[ib];
    for (int d = static_cast<int>(out.vars.size()) - 1; d >= 0; --d) {
      ia += sa[d];
      ib += sb[d];
      if (++digit[d] < out.card[d]) break;
      ia -= sa[d] * out.card[d];
      ib -= sb[d] * out.card[d];
      digit[d] = 0;
    }
  }
  return out;
}

inline Factor sum_out(const Factor& f, int var) {
  int pos = -1;
  for (std::size_t i = 0; i < f.vars.size(); ++i)
    if (f.vars[i] == var) pos = static_cast<int>(i);
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (static_cast<int>(i) == pos) continue;
    out.vars.push_back(f.vars[i]);
    out.card.push_back(f.card[i]);
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < pos; ++i) outer *= f.card[i];
  for (std::size_t i = pos + 1; i < f.vars.size(); ++i) inner *= f.card[i];
  std::size_t kc = f.card[pos];
  out.data.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t s = 0; s < kc; ++s)
      for (std::size_t in = 0; in < inner; ++in)
        out.data[o * inner + in] += f.data[(o * kc + s) * inner + in];
  return out;
}

/// Value at a full assignment (indexed by variable id).
inline double value_at(const Factor& f, std::span<const int> assignment) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < f.vars.size(); ++i)
    idx = idx * f.card[i] + assignment[f.vars[i]];
  return f.data[idx];
}

/// Eliminate every unobserved variable outside `keep` from the
/// evidence-reduced model, in greedy min-fill order. Returns the product
/// of what remains: a factor over the unobserved kept variables whose
/// total mass is P(evidence).
inline Factor eliminate_except(const NetworkDef& net, const EvidenceCase& e,
                               const std::vector<int>& keep) {
  int n = net.size();
  if (static_cast<int>(e.states.size()) != n)
    throw std::invalid_argument("evidence case built for a different network");
  std::vector<Factor> factors;
  factors.reserve(n);
  double constant = 1.0;
  for (int v = 0; v < n; ++v) {
    Factor f = cpt_factor(net, v);
    const std::vector<int> family = f.vars;  // reduce() replaces f.vars
    for (int u : family)
      if (e.states[u] >= 0) f = reduce(f, u, e.states[u]);
    if (f.vars.empty())
      constant *= f.data[0];
    else
      factors.push_back(std::move(f));
  }

  std::vector<bool> eliminable(n, false);
  for (int v = 0; v < n; ++v)
    eliminable[v] = !e.observed(v) &&
                    std::find(keep.begin(), keep.end(), v) == keep.end();

  // interaction graph as adjacency bitmasks (desk scale: <= 64 variables)
  std::vector<std::uint64_t> adj(n, 0);
  auto connect = [&](int u, int w) {
    adj[u] |= std::uint64_t{1} << w;
    adj[w] |= std::uint64_t{1} << u;
  };
  for (const Factor& f : factors)
    for (std::size_t i = 0; i < f.vars.size(); ++i)
      for (std::size_t j = i + 1; j < f.vars.size(); ++j)
        connect(f.vars[i], f.vars[j]);

  std::vector<int> pending;
  for (int v = 0; v < n; ++v)
    if (eliminable[v]) pending.push_back(v);

  while (!pending.empty()) {
    int best = -1, best_fill = -1;
    for (int v : pending) {
      std::vector<int> nb;
      for (int u = 0; u < n; ++u)
        if (u != v && (adj[v] >> u) & 1) nb.push_back(u);
      int fill = 0;
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j)
          if (!((adj[nb[i]] >> nb[j]) & 1)) ++fill;
      if (best < 0 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    // connect neighbors, remove the eliminated vertex
    std::vector<int> nb;
    for (int u = 0; u < n; ++u)
      if (u != best && (adj[best] >> u) & 1) nb.push_back(u);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) connect(nb[i], nb[j]);
    for (int u : nb) adj[u] &= ~(std::uint64_t{1} << best);
    adj[best] = 0;
    pending.erase(std::find(pending.begin(), pending.end(), best));

    Factor prod;
    bool have = false;
    for (std::size_t i = 0; i < factors.size();) {
      if (std::find(factors[i].vars.begin(), factors[i].vars.end(), best) !=
          factors[i].vars.end()) {
        prod = have ? multiply(prod, factors[i]) : std::move(factors[i]);
        have = true;
        factors.erase(factors.begin() + i);
      } else {
        ++i;
      }
    }
    if (have) {
      Factor summed = sum_out(prod, best);
      if (summed.vars.empty())
        constant *= summed.data[0];
      else
        factors.push_back(std::move(summed));
    }
  }

  Factor result;
  result.data = {constant};
  for (const Factor& f : factors) result = multiply(result, f);
  return result;
}

}  // namespace detail

/// P(evidence) under the network.
inline double evidence_probability(const NetworkDef& net,
                                   const EvidenceCase& e) {
  detail::Factor f = detail::eliminate_except(net, e, {});
  return std::accumulate(f.data.begin(), f.data.end(), 0.0);
}

/// Exact P(v | evidence). Throws ZeroProbabilityEvidence when P(e) = 0.
inline Distribution posterior_marginal(const NetworkDef& net,
                                       const EvidenceCase& e, int v) {
  detail::Factor f = detail::eliminate_except(net, e, {v});
  double z = std::accumulate(f.data.begin(), f.data.end(), 0.0);
  if (z <= 0.0)
    throw ZeroProbabilityEvidence("evidence has probability zero (query on " +
                                  net.variable(v).name + ")");
  Distribution d;
  d.variable = v;
  d.p.assign(net.state_count(v), 0.0);
  if (e.observed(v)) {
    d.p[e.states[v]] = 1.0;
  } else {
    for (int i = 0; i < net.state_count(v); ++i) d.p[i] = f.data[i] / z;
  }
  return d;
}

/// Exact joint posterior over child and its full parent configuration.
inline FamilyPosterior family_posterior(const NetworkDef& net,
                                        const EvidenceCase& e, int child) {
  std::vector<int> keep = net.parents(child);
  keep.push_back(child);
  detail::Factor f = detail::eliminate_except(net, e, keep);
  double z = std::accumulate(f.data.begin(), f.data.end(), 0.0);
  if (z <= 0.0)
    throw ZeroProbabilityEvidence(
        "evidence has probability zero (family query on " +
        net.variable(child).name + ")");

  FamilyPosterior fp;
  fp.child = child;
  fp.n_configs = net.config_count(child);
  int k = net.state_count(child);
  fp.table.assign(static_cast<std::size_t>(k) * fp.n_configs, 0.0);
  fp.config_mass.assign(fp.n_configs, 0.0);

  std::vector<int> assignment(net.size(), -1);
  const auto& parents = net.parents(child);
  for (int j = 0; j < fp.n_configs; ++j) {
    std::vector<int> ps = net.config_states(child, j);
    bool consistent = true;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (e.observed(parents[i]) && e.states[parents[i]] != ps[i])
        consistent = false;
      assignment[parents[i]] = ps[i];
    }
    double col_sum = 0.0;
    for (int i = 0; i < k && consistent; ++i) {
      if (e.observed(child) && e.states[child] != i) continue;
      assignment[child] = i;
      double val = detail::value_at(f, assignment) / z;
      fp.table[static_cast<std::size_t>(j) * k + i] = val;
      col_sum += val;
    }
    fp.config_mass[j] = col_sum;
  }
  return fp;
}

/// Exact joint over the unobserved variables, by enumeration of the full
/// state space. Verification oracle; guarded against large networks.
struct JointTable {
  std::vector<int> free_vars;    // unobserved, declared order
  std::vector<int> card;         // cardinality per network variable
  std::vector<int> observed;     // evidence states, -1 where unobserved
  std::vector<double> p;         // over free_vars, last varying fastest

  /// Marginalize onto `vars` (any order, observed variables allowed —
  /// they contribute a degenerate axis). Row-major, last varying fastest.
  std::vector<double> marginal(const std::vector<int>& vars) const {
    std::size_t total = 1;
    for (int v : vars) total *= card[v];
    std::vector<double> out(total, 0.0);
    std::vector<int> assignment = observed;
    std::vector<int> digit(free_vars.size(), 0);
    for (double prob : p) {
      for (std::size_t i = 0; i < free_vars.size(); ++i)
        assignment[free_vars[i]] = digit[i];
      std::size_t idx = 0;
      for (int v : vars) idx = idx * card[v] + assignment[v];
      out[idx] += prob;
      for (int d = static_cast<int>(digit.size()) - 1; d >= 0; --d) {
        if (++digit[d] < card[free_vars[d]]) break;
        digit[d] = 0;
      }
    }
    return out;
  }
};

inline JointTable brute_force_joint(const NetworkDef& net,
                                    const EvidenceCase& e) {
  double full_size = 1.0;
  for (int v = 0; v < net.size(); ++v) full_size *= net.state_count(v);
  if (full_size > 1e7)
    throw StateSpaceTooLarge("state space of " + std::to_string(full_size) +
                             " exceeds the 1e7 enumeration guard");

  JointTable jt;
  jt.observed = e.states;
  jt.observed.resize(net.size(), -1);
  for (int v = 0; v < net.size(); ++v) {
    jt.card.push_back(net.state_count(v));
    if (!e.observed(v)) jt.free_vars.push_back(v);
  }
  std::size_t total = 1;
  for (int v : jt.free_vars) total *= jt.card[v];
  jt.p.assign(total, 0.0);

  std::vector<int> assignment = jt.observed;
  std::vector<int> digit(jt.free_vars.size(), 0);
  double z = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    for (std::size_t i = 0; i < jt.free_vars.size(); ++i)
      assignment[jt.free_vars[i]] = digit[i];
    double prob = 1.0;
    for (int v = 0; v < net.size(); ++v)
      prob *= net.cpt_entry(v, assignment[v], net.config_of(v, assignment));
    jt.p[idx] = prob;
    z += prob;
    for (int d = static_cast<int>(digit.size()) - 1; d >= 0; --d) {
      if (++digit[d] < jt.card[jt.free_vars[d]]) break;
      digit[d] = 0;
    }
  }
  if (z <= 0.0)
    throw ZeroProbabilityEvidence("evidence has probability zero");
  for (double& prob : jt.p) prob /= z;
  return jt;
}

}  // namespace acpn
