#pragma once

#include <acpn/errors.hpp>
#include <acpn/experience.hpp>
#include <acpn/network.hpp>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace acpn {

/// A network together with its experience tables, as stored in one file.
struct Model {
  NetworkDef net;
  ExperienceSet exp;
};

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

namespace detail {

struct Tok {
  std::string_view text;
  int line = 0;
  int col = 0;
};

inline bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == '{' || c == '}' || c == '#' || c == '=' || c == '&' || c == ',')
      return false;
  return true;
}

/// Split one line into tokens; braces are single-char tokens and `#`
/// starts a comment.
inline void tokenize_line(std::string_view text, int line_no,
                          std::vector<Tok>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') return;
    if (c == '{' || c == '}') {
      out.push_back({text.substr(i, 1), line_no, static_cast<int>(i) + 1});
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size()) {
      char d = text[i];
      if (d == ' ' || d == '\t' || d == '\r' || d == '#' || d == '{' ||
          d == '}')
        break;
      ++i;
    }
    out.push_back({text.substr(start, i - start), line_no,
                   static_cast<int>(start) + 1});
  }
}

struct Stanza {
  std::string_view kind;
  Tok name;
  Tok header;
  std::vector<std::vector<Tok>> rows;
};

inline bool is_stanza_kind(std::string_view s) {
  return s == "variable" || s == "parents" || s == "cpt" || s == "adapt" ||
         s == "experience";
}

/// Group the input into brace-delimited stanzas. Rows keep their line
/// structure: each content line inside a block is one row.
inline std::vector<Stanza> scan_stanzas(std::string_view text) {
  std::vector<Stanza> stanzas;
  std::optional<Stanza> open;

  auto append_row = [&](std::span<const Tok> toks) {
    for (const Tok& t : toks) {
      if (t.text == "{")
        throw ParseError("unexpected '{'", t.line, t.col);
      if (t.text == "}")
        throw ParseError("'}' must end the line", t.line, t.col);
    }
    if (!toks.empty())
      open->rows.emplace_back(toks.begin(), toks.end());
  };

  std::vector<Tok> toks;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, (nl == std::string_view::npos ? text.size() : nl) - pos);
    ++line_no;
    tokenize_line(line, line_no, toks);

    if (!open) {
      if (!toks.empty()) {
        const Tok& kind = toks[0];
        if (!is_stanza_kind(kind.text))
          throw ParseError("unknown directive '" + std::string(kind.text) +
                               "'",
                           kind.line, kind.col);
        if (toks.size() < 2 || toks[1].text == "{" || toks[1].text == "}")
          throw ParseError("expected a variable name after '" +
                               std::string(kind.text) + "'",
                           kind.line, kind.col);
        if (toks.size() < 3 || toks[2].text != "{")
          throw ParseError("expected '{'", toks[1].line,
                           toks[1].col + static_cast<int>(toks[1].text.size()));
        open = Stanza{kind.text, toks[1], kind, {}};
        std::span<const Tok> rest(toks.begin() + 3, toks.end());
        if (!rest.empty() && rest.back().text == "}") {
          append_row(rest.first(rest.size() - 1));
          stanzas.push_back(std::move(*open));
          open.reset();
        } else {
          append_row(rest);
        }
      }
    } else if (!toks.empty()) {
      std::span<const Tok> all(toks.begin(), toks.end());
      if (all.back().text == "}") {
        append_row(all.first(all.size() - 1));
        stanzas.push_back(std::move(*open));
        open.reset();
      } else {
        append_row(all);
      }
    }

    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (open)
    throw ParseError("unterminated block for '" + std::string(open->kind) +
                         " " + std::string(open->name.text) + "'",
                     open->header.line, open->header.col);
  return stanzas;
}

inline double parse_number(const Tok& t) {
  double value = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw ParseError("expected a number, got '" + std::string(t.text) + "'",
                     t.line, t.col);
  if (!std::isfinite(value))
    throw ParseError("number is not finite", t.line, t.col);
  return value;
}

inline int declared_variable(const NetworkDef& net, const Tok& name) {
  int v = net.index_of(std::string(name.text));
  if (v < 0)
    throw ParseError("reference to undeclared variable '" +
                         std::string(name.text) + "'",
                     name.line, name.col);
  return v;
}

}  // namespace detail

/// Parse a network file, optionally carrying adapt stanzas and
/// experience-table snapshots. Variables may be referenced in any stanza
/// order; all declarations are gathered before cross-references resolve.
inline Model parse_model(std::string_view text) {
  using detail::Stanza;
  using detail::Tok;
  std::vector<Stanza> stanzas = detail::scan_stanzas(text);

  Model m;
  NetworkDef& net = m.net;

  for (const Stanza& s : stanzas) {
    if (s.kind != "variable") continue;
    std::string name(s.name.text);
    if (!detail::valid_name(s.name.text))
      throw ParseError("invalid variable name '" + name + "'", s.name.line,
                       s.name.col);
    if (net.index_of(name) >= 0)
      throw ParseError("duplicate declaration of variable '" + name + "'",
                       s.name.line, s.name.col);
    std::vector<std::string> states;
    for (const auto& row : s.rows)
      for (const Tok& t : row) {
        if (!detail::valid_name(t.text))
          throw ParseError("invalid state label '" + std::string(t.text) +
                               "'",
                           t.line, t.col);
        for (const std::string& prev : states)
          if (prev == t.text)
            throw ParseError("duplicate state '" + std::string(t.text) +
                                 "' for variable '" + name + "'",
                             t.line, t.col);
        states.emplace_back(t.text);
      }
    if (states.size() < 2)
      throw ParseError("variable '" + name + "' needs at least two states",
                       s.name.line, s.name.col);
    net.add_variable(std::move(name), std::move(states));
  }
  if (net.size() == 0) throw ParseError("no variables declared", 1, 1);

  std::set<std::string_view> seen_parents;
  for (const Stanza& s : stanzas) {
    if (s.kind != "parents") continue;
    int v = detail::declared_variable(net, s.name);
    if (!seen_parents.insert(s.name.text).second)
      throw ParseError("duplicate parents declaration for '" +
                           std::string(s.name.text) + "'",
                       s.name.line, s.name.col);
    std::vector<int> ids;
    for (const auto& row : s.rows)
      for (const Tok& t : row) {
        int p = detail::declared_variable(net, t);
        for (int q : ids)
          if (q == p)
            throw ParseError("duplicate parent '" + std::string(t.text) +
                                 "' for variable '" +
                                 std::string(s.name.text) + "'",
                             t.line, t.col);
        ids.push_back(p);
      }
    net.set_parents(v, std::move(ids));
  }

  std::set<std::string_view> seen_cpt;
  for (const Stanza& s : stanzas) {
    if (s.kind != "cpt") continue;
    int v = detail::declared_variable(net, s.name);
    if (!seen_cpt.insert(s.name.text).second)
      throw ParseError("duplicate cpt declaration for '" +
                           std::string(s.name.text) + "'",
                       s.name.line, s.name.col);
    int k = net.state_count(v);
    int configs = net.config_count(v);
    if (static_cast<int>(s.rows.size()) != configs)
      throw ParseError("cpt for '" + std::string(s.name.text) + "' has " +
                           std::to_string(s.rows.size()) +
                           " rows, expected " + std::to_string(configs),
                       s.header.line, s.header.col);
    net.set_cpt(v, std::vector<double>(
                       static_cast<std::size_t>(configs) * k, 0.0));
    std::vector<double> column(k);
    for (int j = 0; j < configs; ++j) {
      const auto& row = s.rows[j];
      if (static_cast<int>(row.size()) != k)
        throw ParseError("cpt row for '" + std::string(s.name.text) +
                             "' has " + std::to_string(row.size()) +
                             " entries, expected " + std::to_string(k),
                         row[0].line, row[0].col);
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        column[i] = detail::parse_number(row[i]);
        sum += column[i];
      }
      // Renormalize rounding drift; leave grosser errors for validate().
      if (std::abs(sum - 1.0) > 1e-12 &&
          std::abs(sum - 1.0) <= kCptNormTolerance)
        for (double& e : column) e /= sum;
      net.set_cpt_column(v, j, column);
    }
  }
  for (int v = 0; v < net.size(); ++v)
    if (net.cpt(v).size() !=
        static_cast<std::size_t>(net.config_count(v)) * net.state_count(v)) {
      for (const Stanza& s : stanzas)
        if (s.kind == "variable" && s.name.text == net.variable(v).name)
          throw ParseError("no cpt declared for variable '" +
                               net.variable(v).name + "'",
                           s.name.line, s.name.col);
    }

  m.exp = ExperienceSet::from_network(net);

  std::set<std::string_view> seen_adapt;
  for (const Stanza& s : stanzas) {
    if (s.kind != "adapt") continue;
    int v = detail::declared_variable(net, s.name);
    if (!seen_adapt.insert(s.name.text).second)
      throw ParseError("duplicate adapt declaration for '" +
                           std::string(s.name.text) + "'",
                       s.name.line, s.name.col);
    ExperienceTable& t = m.exp.tables[v];

    std::optional<AdaptMode> mode;
    std::optional<double> ess;
    std::optional<double> mss;
    for (const auto& row : s.rows)
      for (const Tok& tok : row) {
        auto eq = tok.text.find('=');
        if (eq == std::string_view::npos)
          throw ParseError("expected key=value, got '" +
                               std::string(tok.text) + "'",
                           tok.line, tok.col);
        std::string_view key = tok.text.substr(0, eq);
        std::string_view value = tok.text.substr(eq + 1);
        Tok vtok{value, tok.line, tok.col + static_cast<int>(eq) + 1};
        if (key == "mode") {
          if (mode)
            throw ParseError("duplicate key 'mode'", tok.line, tok.col);
          if (value == "fixed")
            mode = AdaptMode::fixed;
          else if (value == "accumulate")
            mode = AdaptMode::accumulate;
          else if (value == "fade")
            mode = AdaptMode::fade;
          else
            throw ParseError("unknown mode '" + std::string(value) + "'",
                             vtok.line, vtok.col);
        } else if (key == "ess") {
          if (ess)
            throw ParseError("duplicate key 'ess'", tok.line, tok.col);
          ess = value == "default" ? default_ess(net.state_count(v))
                                   : detail::parse_number(vtok);
          if (!(*ess > 0.0))
            throw ParseError("ess must be positive", vtok.line, vtok.col);
        } else if (key == "mss") {
          if (mss)
            throw ParseError("duplicate key 'mss'", tok.line, tok.col);
          if (value != "default") {
            mss = detail::parse_number(vtok);
            if (!(*mss > 1.0))
              throw ParseError("maximal sample size must exceed 1",
                               vtok.line, vtok.col);
          }
        } else {
          throw ParseError("unknown key '" + std::string(key) + "'",
                           tok.line, tok.col);
        }
      }
    if (!mode)
      throw ParseError("adapt stanza for '" + std::string(s.name.text) +
                           "' needs mode=",
                       s.header.line, s.header.col);

    if (ess) {
      int k = net.state_count(v);
      for (int j = 0; j < net.config_count(v); ++j)
        for (int i = 0; i < k; ++i)
          t.rows[j].counts[i] = *ess * net.cpt_entry(v, i, j);
    }
    try {
      set_mode(t, *mode, mss);
    } catch (const std::invalid_argument& err) {
      throw ParseError(err.what(), s.header.line, s.header.col);
    }
  }

  std::set<std::string_view> seen_exp;
  for (const Stanza& s : stanzas) {
    if (s.kind != "experience") continue;
    int v = detail::declared_variable(net, s.name);
    if (!seen_exp.insert(s.name.text).second)
      throw ParseError("duplicate experience declaration for '" +
                           std::string(s.name.text) + "'",
                       s.name.line, s.name.col);
    int k = net.state_count(v);
    int configs = net.config_count(v);
    if (static_cast<int>(s.rows.size()) != configs)
      throw ParseError("experience for '" + std::string(s.name.text) +
                           "' has " + std::to_string(s.rows.size()) +
                           " rows, expected " + std::to_string(configs),
                       s.header.line, s.header.col);
    ExperienceTable& t = m.exp.tables[v];
    for (int j = 0; j < configs; ++j) {
      const auto& row = s.rows[j];
      if (static_cast<int>(row.size()) != k)
        throw ParseError("experience row for '" + std::string(s.name.text) +
                             "' has " + std::to_string(row.size()) +
                             " entries, expected " + std::to_string(k),
                         row[0].line, row[0].col);
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        double c = detail::parse_number(row[i]);
        if (c < 0.0)
          throw ParseError("experience counts cannot be negative",
                           row[i].line, row[i].col);
        t.rows[j].counts[i] = c;
        sum += c;
      }
      if (!(sum > 0.0))
        throw ParseError("experience row " + std::to_string(j + 1) +
                             " for '" + std::string(s.name.text) +
                             "' has zero total",
                         row[0].line, row[0].col);
    }
  }

  return m;
}

inline NetworkDef parse_network(std::string_view text) {
  return parse_model(text).net;
}

namespace detail {

inline void append_block(std::string& out, std::string_view kind,
                         const std::string& name,
                         const std::vector<std::string>& rows) {
  if (rows.size() == 1) {
    out += std::string(kind) + " " + name + " { " + rows[0] + " }\n";
    return;
  }
  out += std::string(kind) + " " + name + " {\n";
  for (const std::string& r : rows) out += "  " + r + "\n";
  out += "}\n";
}

inline void append_structure(std::string& out, const NetworkDef& net) {
  for (int v = 0; v < net.size(); ++v) {
    out += "variable " + net.variable(v).name + " {";
    for (const std::string& s : net.variable(v).states) out += " " + s;
    out += " }\n";
  }
  for (int v = 0; v < net.size(); ++v) {
    if (net.parents(v).empty()) continue;
    out += "parents " + net.variable(v).name + " {";
    for (int p : net.parents(v)) out += " " + net.variable(p).name;
    out += " }\n";
  }
  for (int v = 0; v < net.size(); ++v) {
    int k = net.state_count(v);
    std::vector<std::string> rows;
    for (int j = 0; j < net.config_count(v); ++j) {
      std::string row;
      for (int i = 0; i < k; ++i) {
        if (i) row += ' ';
        row += format_double(net.cpt_entry(v, i, j));
      }
      rows.push_back(std::move(row));
    }
    append_block(out, "cpt", net.variable(v).name, rows);
  }
}

}  // namespace detail

/// Emit a plain network file: variables, parents, CPTs.
inline std::string serialize_network(const NetworkDef& net) {
  std::string out;
  detail::append_structure(out, net);
  return out;
}

/// Emit a snapshot: the network plus every table's adapt stanza and
/// experience counts. Parses back to an equal model.
inline std::string serialize_model(const Model& m) {
  std::string out;
  detail::append_structure(out, m.net);
  for (int v = 0; v < m.net.size(); ++v) {
    const ExperienceTable& t = m.exp.tables[v];
    const std::string& name = m.net.variable(v).name;
    std::string adapt_line = "mode=" + to_string(t.mode);
    if (t.mode == AdaptMode::fade) {
      double mss = t.mss > 0.0 ? t.mss : 1.0 / (1.0 - t.fading_factor);
      adapt_line += " mss=" + format_double(mss);
    }
    detail::append_block(out, "adapt", name, {adapt_line});
    std::vector<std::string> rows;
    for (const ExperienceRow& r : t.rows) {
      std::string row;
      for (std::size_t i = 0; i < r.counts.size(); ++i) {
        if (i) row += ' ';
        row += format_double(r.counts[i]);
      }
      rows.push_back(std::move(row));
    }
    detail::append_block(out, "experience", name, rows);
  }
  return out;
}

/// Parse a cases file: one case per line as space-separated `var=state`
/// pairs, a blank line meaning a case with no findings. Lines holding
/// only a comment are skipped.
inline std::vector<EvidenceCase> parse_cases(const NetworkDef& net,
                                             std::string_view text) {
  std::vector<EvidenceCase> cases;
  std::vector<detail::Tok> toks;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, (nl == std::string_view::npos ? text.size() : nl) - pos);
    ++line_no;
    bool comment_only = false;
    auto hash = line.find('#');
    if (hash != std::string_view::npos) {
      std::string_view before = line.substr(0, hash);
      comment_only =
          before.find_first_not_of(" \t\r") == std::string_view::npos;
    }
    detail::tokenize_line(line, line_no, toks);
    if (!comment_only) {
      EvidenceCase e(net.size());
      for (const detail::Tok& t : toks) {
        auto eq = t.text.find('=');
        if (eq == std::string_view::npos)
          throw ParseError("expected var=state, got '" +
                               std::string(t.text) + "'",
                           t.line, t.col);
        detail::Tok vtok{t.text.substr(0, eq), t.line, t.col};
        int v = detail::declared_variable(net, vtok);
        std::string state(t.text.substr(eq + 1));
        int s = net.variable(v).state_index(state);
        if (s < 0)
          throw ParseError("variable '" + std::string(vtok.text) +
                               "' has no state '" + state + "'",
                           t.line, t.col + static_cast<int>(eq) + 1);
        if (e.states[v] >= 0)
          throw ParseError("duplicate finding for '" +
                               std::string(vtok.text) + "'",
                           t.line, t.col);
        e.states[v] = s;
      }
      cases.push_back(std::move(e));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return cases;
}

/// Emit cases in declared-variable order, one per line.
inline std::string serialize_cases(const NetworkDef& net,
                                   std::span<const EvidenceCase> cases) {
  std::string out;
  for (const EvidenceCase& e : cases) {
    bool first = true;
    for (int v = 0; v < net.size(); ++v) {
      if (!e.observed(v)) continue;
      if (!first) out += ' ';
      out += net.variable(v).name + "=" +
             net.variable(v).states[e.states[v]];
      first = false;
    }
    out += '\n';
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed on " + path);
}

}  // namespace acpn
