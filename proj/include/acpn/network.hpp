#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace acpn {

/// Column sums of a conditional probability table must be within this of 1.
inline constexpr double kCptNormTolerance = 1e-9;

struct Variable {
  std::string name;
  std::vector<std::string> states;

  int state_index(const std::string& label) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == label) return static_cast<int>(i);
    return -1;
  }

  bool operator==(const Variable&) const = default;
};

/// A discrete network: variables in declared order, a parent list per
/// variable, and one conditional probability table per variable.
///
/// CPT layout: for variable v with k states and C parent configurations,
/// cpt(v) holds k*C values with entry (state i, config j) at j*k + i, so
/// one parent configuration is a contiguous column. Configurations are
/// numbered row-major over the declared parent list, last parent varying
/// fastest.
///
/// Construction does not reject invalid content; validate() reports
/// violations as data. Once built and validated the object is treated as
/// immutable except by an owning adaptation session (set_cpt_column).
class NetworkDef {
 public:
  NetworkDef() = default;

  int add_variable(std::string name, std::vector<std::string> states) {
    int id = static_cast<int>(vars_.size());
    index_.emplace(name, id);
    vars_.push_back(Variable{std::move(name), std::move(states)});
    parents_.emplace_back();
    cpts_.emplace_back();
    return id;
  }

  void set_parents(int v, std::vector<int> parent_ids) {
    parents_[v] = std::move(parent_ids);
  }

  void set_cpt(int v, std::vector<double> values) {
    cpts_[v] = std::move(values);
  }

  void set_cpt_column(int v, int config, std::span<const double> column) {
    int k = state_count(v);
    std::copy(column.begin(), column.end(),
              cpts_[v].begin() + static_cast<std::ptrdiff_t>(config) * k);
  }

  int size() const { return static_cast<int>(vars_.size()); }
  const Variable& variable(int v) const { return vars_[v]; }
  const std::vector<int>& parents(int v) const { return parents_[v]; }
  const std::vector<double>& cpt(int v) const { return cpts_[v]; }
  int state_count(int v) const {
    return static_cast<int>(vars_[v].states.size());
  }

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  int config_count(int v) const {
    int c = 1;
    for (int p : parents_[v]) c *= state_count(p);
    return c;
  }

  double cpt_entry(int v, int state, int config) const {
    return cpts_[v][static_cast<std::size_t>(config) * state_count(v) + state];
  }

  /// Configuration index of the given full assignment for v's parents.
  int config_of(int v, std::span<const int> assignment) const {
    int c = 0;
    for (int p : parents_[v]) c = c * state_count(p) + assignment[p];
    return c;
  }

  /// Parent states for configuration j, in declared parent order.
  std::vector<int> config_states(int v, int config) const {
    const auto& ps = parents_[v];
    std::vector<int> out(ps.size());
    for (int i = static_cast<int>(ps.size()) - 1; i >= 0; --i) {
      int k = state_count(ps[i]);
      out[i] = config % k;
      config /= k;
    }
    return out;
  }

  /// Kahn's algorithm over declared order; empty if the graph has a cycle.
  std::optional<std::vector<int>> topological_order() const {
    int n = size();
    std::vector<int> remaining(n, 0);
    for (int v = 0; v < n; ++v)
      remaining[v] = static_cast<int>(parents_[v].size());
    std::vector<std::vector<int>> children(n);
    for (int v = 0; v < n; ++v)
      for (int p : parents_[v]) children[p].push_back(v);
    std::vector<int> order;
    order.reserve(n);
    std::vector<int> ready;
    for (int v = n - 1; v >= 0; --v)
      if (remaining[v] == 0) ready.push_back(v);
    while (!ready.empty()) {
      int v = ready.back();
      ready.pop_back();
      order.push_back(v);
      for (int c : children[v])
        if (--remaining[c] == 0) ready.push_back(c);
      std::sort(ready.rbegin(), ready.rend());
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
  }

  bool operator==(const NetworkDef&) const = default;

 private:
  std::vector<Variable> vars_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<double>> cpts_;
  std::unordered_map<std::string, int> index_;

  friend bool networks_equal(const NetworkDef&, const NetworkDef&, double);
};

/// A case: observed states per variable, -1 where unobserved. Indices are
/// tied to the network the case was built against.
struct EvidenceCase {
  std::vector<int> states;

  explicit EvidenceCase(int n_variables = 0) : states(n_variables, -1) {}

  static EvidenceCase from_pairs(
      const NetworkDef& net,
      const std::vector<std::pair<std::string, std::string>>& findings) {
    EvidenceCase e(net.size());
    for (const auto& [var, state] : findings) {
      int v = net.index_of(var);
      if (v < 0) throw std::invalid_argument("unknown variable '" + var + "'");
      int s = net.variable(v).state_index(state);
      if (s < 0)
        throw std::invalid_argument("variable '" + var + "' has no state '" +
                                    state + "'");
      e.states[v] = s;
    }
    return e;
  }

  bool observed(int v) const { return states[v] >= 0; }
  bool empty() const {
    return std::all_of(states.begin(), states.end(),
                       [](int s) { return s < 0; });
  }
  int count_observed() const {
    return static_cast<int>(std::count_if(states.begin(), states.end(),
                                          [](int s) { return s >= 0; }));
  }
};

struct Violation {
  std::string where;
  std::string message;
};

/// Every invariant violation in the network: bad state sets, unknown or
/// cyclic parent structure, CPT shape mismatches, out-of-range entries,
/// non-normalized columns. An empty result means the network is valid.
inline std::vector<Violation> validate(const NetworkDef& net) {
  std::vector<Violation> out;
  int n = net.size();
  std::unordered_map<std::string, int> seen;
  for (int v = 0; v < n; ++v) {
    const Variable& var = net.variable(v);
    if (auto [it, fresh] = seen.emplace(var.name, v); !fresh)
      out.push_back({var.name, "duplicate variable name"});
    if (var.states.size() < 2)
      out.push_back({var.name, "needs at least 2 states, has " +
                                   std::to_string(var.states.size())});
    for (std::size_t i = 0; i < var.states.size(); ++i)
      for (std::size_t j = i + 1; j < var.states.size(); ++j)
        if (var.states[i] == var.states[j])
          out.push_back(
              {var.name, "duplicate state label '" + var.states[i] + "'"});
    for (int p : net.parents(v)) {
      if (p < 0 || p >= n)
        out.push_back({var.name, "parent index out of range"});
      else if (p == v)
        out.push_back({var.name, "variable is its own parent"});
    }
  }

  if (!net.topological_order()) {
    // Name the variables on some cycle: strip vertices with no remaining
    // parents until only cyclic ones are left.
    std::vector<bool> in_cycle(n, true);
    bool changed = true;
    while (changed) {
      changed = false;
      for (int v = 0; v < n; ++v) {
        if (!in_cycle[v]) continue;
        bool blocked = false;
        for (int p : net.parents(v))
          if (p >= 0 && p < n && in_cycle[p]) blocked = true;
        if (!blocked) {
          in_cycle[v] = false;
          changed = true;
        }
      }
    }
    std::string names;
    for (int v = 0; v < n; ++v)
      if (in_cycle[v]) names += (names.empty() ? "" : ", ") + net.variable(v).name;
    out.push_back({"network", "parent relation has a cycle involving {" + names + "}"});
  }

  for (int v = 0; v < n; ++v) {
    const std::string& name = net.variable(v).name;
    int k = net.state_count(v);
    if (k == 0) continue;
    std::size_t expect = static_cast<std::size_t>(k) * net.config_count(v);
    if (net.cpt(v).size() != expect) {
      out.push_back({name, "cpt has " + std::to_string(net.cpt(v).size()) +
                               " entries, expected " + std::to_string(expect)});
      continue;
    }
    for (int j = 0; j < net.config_count(v); ++j) {
      double sum = 0.0;
      bool bad_entry = false;
      for (int i = 0; i < k; ++i) {
        double p = net.cpt_entry(v, i, j);
        if (p < 0.0 || p > 1.0) bad_entry = true;
        sum += p;
      }
      if (bad_entry)
        out.push_back({name, "cpt column " + std::to_string(j) +
                                 " has an entry outside [0,1]"});
      if (std::abs(sum - 1.0) > kCptNormTolerance)
        out.push_back({name, "cpt column " + std::to_string(j) +
                                 " sums to " + std::to_string(sum)});
    }
  }
  return out;
}

/// Structural equality with entry tolerance; used by round-trip checks.
inline bool networks_equal(const NetworkDef& a, const NetworkDef& b,
                           double tol) {
  if (a.size() != b.size()) return false;
  for (int v = 0; v < a.size(); ++v) {
    if (a.variable(v).name != b.variable(v).name) return false;
    if (a.variable(v).states != b.variable(v).states) return false;
    if (a.parents(v) != b.parents(v)) return false;
    if (a.cpt(v).size() != b.cpt(v).size()) return false;
    for (std::size_t i = 0; i < a.cpt(v).size(); ++i)
      if (std::abs(a.cpt(v)[i] - b.cpt(v)[i]) > tol) return false;
  }
  return true;
}

}  // namespace acpn
