#pragma once

#include <acpn/errors.hpp>
#include <acpn/network.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace acpn {

/// Sample-size cap installed when the posterior mixture is degenerate
/// (all mixture variances zero); keeps tables finite and serializable.
inline constexpr double kEssMax = 1e12;

/// One Dirichlet row: non-negative counts, one per child state.
struct ExperienceRow {
  std::vector<double> counts;

  double ess() const {
    double s = 0.0;
    for (double c : counts) s += c;
    return s;
  }
  std::vector<double> means() const {
    double s = ess();
    std::vector<double> m(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) m[i] = counts[i] / s;
    return m;
  }
};

enum class AdaptMode { fixed, accumulate, fade };

inline std::string to_string(AdaptMode m) {
  switch (m) {
    case AdaptMode::fixed: return "fixed";
    case AdaptMode::accumulate: return "accumulate";
    case AdaptMode::fade: return "fade";
  }
  return "?";
}

/// Per-variable contingency table: one experience row per parent
/// configuration, plus the adaptation mode. In fade mode fading_factor
/// is q in (0,1) and mss the maximal sample size it was derived from;
/// otherwise both are unused.
struct ExperienceTable {
  int child = -1;
  AdaptMode mode = AdaptMode::fixed;
  double fading_factor = 1.0;
  double mss = 0.0;
  std::vector<ExperienceRow> rows;

  int entry_count() const {
    int m = 0;
    for (const auto& r : rows) m += static_cast<int>(r.counts.size());
    return m;
  }
};

/// Variance of one table entry with mean m and equivalent sample size s.
inline double entry_variance(double m, double s) {
  return m * (1.0 - m) / (s + 1.0);
}

/// Approximate 95% posterior interval for an entry, clipped to [0,1].
inline std::pair<double, double> posterior_interval(double m, double s) {
  double half = 1.96 * std::sqrt(entry_variance(m, s));
  return {std::max(0.0, m - half), std::min(1.0, m + half)};
}

/// Translate an elicited probability interval into (mean, equivalent
/// sample size): mean is the stated point (or the midpoint), the half
/// width is read as one standard deviation's worth of spread, and the
/// sample size follows by inverting the entry variance.
inline std::pair<double, double> ess_from_interval(
    double lo, double hi, std::optional<double> point = std::nullopt) {
  if (lo < 0.0 || hi > 1.0 || lo > hi)
    throw std::invalid_argument("interval must satisfy 0 <= lo < hi <= 1");
  if (hi == lo) throw DegenerateInterval("interval has zero width");
  double mean = point ? *point : (lo + hi) / 2.0;
  if (mean < lo || mean > hi)
    throw std::invalid_argument("point estimate outside the interval");
  double sd = (hi - lo) / 2.0;
  double ess = mean * (1.0 - mean) / (sd * sd) - 1.0;
  if (ess <= 0.0)
    throw TooWideInterval("interval implies a non-positive sample size");
  return {mean, ess};
}

/// Row-level elicitation: the row's sample size is the minimum over the
/// per-entry translations.
inline double row_ess_from_intervals(
    const std::vector<std::pair<double, double>>& intervals) {
  if (intervals.empty()) throw std::invalid_argument("no intervals given");
  double ess = kEssMax;
  for (const auto& [lo, hi] : intervals)
    ess = std::min(ess, ess_from_interval(lo, hi).second);
  return ess;
}

/// Fading factor q = (MSS - 1) / MSS.
inline double fading_factor_from_mss(double mss) {
  if (!(mss > 1.0))
    throw std::invalid_argument("maximal sample size must exceed 1");
  return (mss - 1.0) / mss;
}

/// Default equivalent sample size for a row with k states.
inline double default_ess(int k) { return 5.0 * k; }

/// Default maximal sample size, 100 / (number of entries in the table).
inline double default_mss(int table_entries) { return 100.0 / table_entries; }

/// Discount every count in every row by the table's fading factor.
/// Means are unchanged; the equivalent sample size scales by q.
inline void fade(ExperienceTable& t) {
  if (t.mode != AdaptMode::fade)
    throw std::logic_error("fade called on a table not in fade mode");
  for (ExperienceRow& row : t.rows)
    for (double& c : row.counts) c *= t.fading_factor;
}

/// Result of retrieving one case into one row: the moment-matched
/// Dirichlet (means and sample size) plus the exact per-entry mixture
/// variances it was fitted to.
struct RowRetrieval {
  std::vector<double> means;
  std::vector<double> variances;
  double ess = 0.0;

  ExperienceRow row() const {
    ExperienceRow r;
    r.counts.resize(means.size());
    for (std::size_t i = 0; i < means.size(); ++i)
      r.counts[i] = ess * means[i];
    return r;
  }
};

/// Retrieval of experience from one case. The posterior over the row's
/// probabilities is the mixture
///
///   sum_i w_i * Dir(alpha + e_i)  +  w0 * Dir(alpha),
///
/// with w_i = P(child = i, parents in this config | evidence) and
/// w0 = 1 - P(parents in this config | evidence). The returned row is the
/// single Dirichlet with the mixture's exact means whose average variance
/// (mean-weighted) matches the mixture's.
///
/// Internals run in extended precision: the variance extraction cancels
/// nearly equal second moments, and downstream identities hold to 1e-12.
inline RowRetrieval retrieve(const ExperienceRow& row,
                             std::span<const double> w, double w0) {
  std::size_t k = row.counts.size();
  if (w.size() != k)
    throw std::invalid_argument("weight vector does not match row width");
  long double wsum = w0 < 0.0 ? 0.0L : static_cast<long double>(w0);
  for (double wi : w) {
    if (wi < 0.0) throw std::invalid_argument("negative posterior weight");
    wsum += wi;
  }
  if (std::abs(static_cast<double>(wsum) - 1.0) > 1e-9)
    throw std::invalid_argument("posterior weights must sum to 1");
  if (w0 < 0.0) w0 = 0.0;

  long double s = 0.0L;
  for (double c : row.counts) s += c;
  if (!(s > 0.0L)) throw std::logic_error("retrieve on a row with zero ess");

  RowRetrieval out;
  out.means.resize(k);
  out.variances.resize(k);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < k; ++i) {
    long double a = row.counts[i];
    long double m = a / s;
    long double mstar = (m * s + w[i] + m * w0) / (s + 1.0L);
    // coordinate second moment of the mixture
    long double m2 = w0 * (a * (a + 1.0L)) / (s * (s + 1.0L));
    for (std::size_t j = 0; j < k; ++j) {
      long double b = a + (i == j ? 1.0L : 0.0L);
      m2 += w[j] * (b * (b + 1.0L)) / ((s + 1.0L) * (s + 2.0L));
    }
    long double vstar = m2 - mstar * mstar;
    if (vstar < 0.0L) vstar = 0.0L;  // cancellation guard at degeneracy
    out.means[i] = static_cast<double>(mstar);
    out.variances[i] = static_cast<double>(vstar);
    num += mstar * mstar * (1.0L - mstar);
    den += mstar * vstar;
  }
  if (den <= 0.0L) {
    out.ess = kEssMax;
    return out;
  }
  long double sstar = num / den - 1.0L;
  if (!(sstar > 0.0L))
    throw std::logic_error("moment matching produced a non-positive ess");
  out.ess = static_cast<double>(sstar);
  return out;
}

/// The naive scheme: add the posterior mass for each state directly to
/// its count. Kept as a contrast baseline; inflates the sample size on
/// uninformative cases.
inline ExperienceRow fractional_update(const ExperienceRow& row,
                                       std::span<const double> w) {
  if (w.size() != row.counts.size())
    throw std::invalid_argument("weight vector does not match row width");
  double wsum = 0.0;
  for (double wi : w) {
    if (wi < 0.0) throw std::invalid_argument("negative posterior weight");
    wsum += wi;
  }
  if (wsum > 1.0 + 1e-9)
    throw std::invalid_argument("posterior weights exceed 1");
  ExperienceRow out = row;
  for (std::size_t i = 0; i < w.size(); ++i) out.counts[i] += w[i];
  return out;
}

/// Dissemination: convert the table's counts back into CPT columns
/// (relative frequencies per parent configuration).
inline std::vector<double> disseminate(const ExperienceTable& t) {
  std::vector<double> cpt;
  for (const ExperienceRow& row : t.rows) {
    double s = row.ess();
    if (!(s > 0.0))
      throw std::domain_error("cannot disseminate a row with zero ess");
    for (double c : row.counts) cpt.push_back(c / s);
  }
  return cpt;
}

/// Change a table's adaptation mode between cases. Counts are always
/// preserved; switching to fade installs q from the given maximal sample
/// size (default 100/m when none is supplied).
inline void set_mode(ExperienceTable& t, AdaptMode mode,
                     std::optional<double> mss = std::nullopt) {
  if (mode == AdaptMode::fade) {
    double m = mss ? *mss : default_mss(t.entry_count());
    t.fading_factor = fading_factor_from_mss(m);
    t.mss = m;
  } else {
    t.fading_factor = 1.0;
    t.mss = 0.0;
  }
  t.mode = mode;
}

/// The experience tables of one adaptation session, index-aligned with
/// the network's variables.
struct ExperienceSet {
  std::vector<ExperienceTable> tables;

  /// Seed every table from the network's current CPT entries at the given
  /// per-row equivalent sample size (counts = ess * probability). Tables
  /// start in fixed mode.
  static ExperienceSet from_network(const NetworkDef& net,
                                    std::optional<double> ess = std::nullopt) {
    ExperienceSet set;
    set.tables.resize(net.size());
    for (int v = 0; v < net.size(); ++v) {
      ExperienceTable& t = set.tables[v];
      t.child = v;
      int k = net.state_count(v);
      double s = ess ? *ess : default_ess(k);
      t.rows.resize(net.config_count(v));
      for (int j = 0; j < net.config_count(v); ++j) {
        t.rows[j].counts.resize(k);
        for (int i = 0; i < k; ++i)
          t.rows[j].counts[i] = s * net.cpt_entry(v, i, j);
      }
    }
    return set;
  }
};

}  // namespace acpn
