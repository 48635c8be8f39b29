#include <CLI11.hpp>

#include <acpn/adaptation.hpp>
#include <acpn/chest_clinic.hpp>
#include <acpn/errors.hpp>
#include <acpn/experience.hpp>
#include <acpn/inference.hpp>
#include <acpn/io.hpp>
#include <acpn/network.hpp>
#include <acpn/simulation.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace acpn;

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

std::vector<std::pair<std::string, std::string>> split_findings(
    const std::string& s, char sep) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t end = s.find(sep, pos);
    if (end == std::string::npos) end = s.size();
    std::string item = s.substr(pos, end - pos);
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected var=state in '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    pos = end + 1;
  }
  return out;
}

// table:parentconfig:state, parentconfig as var=state&var=state (empty
// for a root variable).
TrackedEntry parse_track_selector(const NetworkDef& net,
                                  const std::string& s) {
  auto c1 = s.find(':');
  auto c2 = s.rfind(':');
  if (c1 == std::string::npos || c2 == c1)
    throw std::invalid_argument("--track needs table:parentconfig:state, got '" +
                                s + "'");
  std::string table = s.substr(0, c1);
  std::string config = s.substr(c1 + 1, c2 - c1 - 1);
  std::string state = s.substr(c2 + 1);
  std::vector<std::pair<std::string, std::string>> parents;
  if (!config.empty()) parents = split_findings(config, '&');
  return tracked_entry(net, table, parents, state);
}

std::vector<TrackedEntry> resolve_tracked(const NetworkDef& net,
                                          const std::vector<std::string>& sel) {
  std::vector<TrackedEntry> tracked;
  if (sel.empty()) return default_tracked(net);
  for (const std::string& s : sel) tracked.push_back(parse_track_selector(net, s));
  return tracked;
}

struct ModeSwitch {
  int at_case = 0;  // applied after this many cases have been processed
  std::optional<std::string> var;
  AdaptMode mode = AdaptMode::accumulate;
  std::optional<double> mss;
};

std::vector<ModeSwitch> parse_mode_switches(
    const std::vector<std::string>& tokens) {
  std::vector<ModeSwitch> switches;
  for (const std::string& t : tokens) {
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--mode-switch expects key=value tokens");
    std::string key = t.substr(0, eq);
    std::string value = t.substr(eq + 1);
    if (key == "case") {
      switches.emplace_back();
      switches.back().at_case = std::stoi(value);
      if (switches.back().at_case < 0)
        throw std::invalid_argument("case= must be non-negative");
      continue;
    }
    if (switches.empty())
      throw std::invalid_argument("--mode-switch must start with case=");
    ModeSwitch& sw = switches.back();
    if (key == "var") {
      sw.var = value;
    } else if (key == "mode") {
      if (value == "fixed")
        sw.mode = AdaptMode::fixed;
      else if (value == "accumulate")
        sw.mode = AdaptMode::accumulate;
      else if (value == "fade")
        sw.mode = AdaptMode::fade;
      else
        throw std::invalid_argument("unknown mode '" + value + "'");
    } else if (key == "mss") {
      sw.mss = std::stod(value);
    } else {
      throw std::invalid_argument("unknown --mode-switch key '" + key + "'");
    }
  }
  return switches;
}

void apply_mode_switch(Model& m, const ModeSwitch& sw) {
  if (sw.var) {
    int v = m.net.index_of(*sw.var);
    if (v < 0)
      throw std::invalid_argument("unknown variable '" + *sw.var + "'");
    set_mode(m.exp.tables[v], sw.mode, sw.mss);
    return;
  }
  for (ExperienceTable& t : m.exp.tables) set_mode(t, sw.mode, sw.mss);
}

int report_violations(const NetworkDef& net) {
  std::vector<Violation> violations = validate(net);
  for (const Violation& v : violations)
    std::cout << v.where << ": " << v.message << "\n";
  return violations.empty() ? kExitOk : kExitViolation;
}

int cmd_validate(const std::string& path) {
  NetworkDef net = parse_network(read_text_file(path));
  return report_violations(net);
}

int cmd_adapt(const std::string& net_path, const std::string& cases_path,
              const std::string& outdir, bool strict, bool trace,
              const std::vector<std::string>& track_sel,
              const std::vector<std::string>& switch_tokens) {
  Model model = parse_model(read_text_file(net_path));
  if (int rc = report_violations(model.net); rc != kExitOk) return rc;
  std::vector<EvidenceCase> cases =
      parse_cases(model.net, read_text_file(cases_path));
  std::vector<ModeSwitch> switches = parse_mode_switches(switch_tokens);
  std::vector<TrackedEntry> tracked;
  if (trace) tracked = resolve_tracked(model.net, track_sel);

  std::vector<TrajectoryRecord> records;
  for (std::size_t n = 0; n < cases.size(); ++n) {
    for (const ModeSwitch& sw : switches)
      if (static_cast<std::size_t>(sw.at_case) == n)
        apply_mode_switch(model, sw);
    try {
      adapt_case(model.net, model.exp, cases[n]);
    } catch (const ZeroProbabilityEvidence&) {
      std::cerr << "case " << n + 1 << " has probability zero"
                << (strict ? "" : "; skipped") << "\n";
      if (strict) return kExitViolation;
    }
    for (const TrackedEntry& te : tracked)
      records.push_back(snapshot_entry(model.exp, te,
                                       static_cast<int>(n) + 1));
  }

  std::filesystem::create_directories(outdir);
  std::string stem = std::filesystem::path(net_path).stem().string();
  std::filesystem::path base = std::filesystem::path(outdir) / stem;
  write_text_file(base.string() + ".adapted.net",
                  serialize_network(model.net));
  write_text_file(base.string() + ".snapshot.net", serialize_model(model));
  if (trace)
    write_text_file(base.string() + ".trace.csv",
                    trajectory_csv(model.net, records));
  return kExitOk;
}

int cmd_sample(const std::string& net_path, int n, std::uint64_t seed,
               const std::string& out) {
  NetworkDef net = parse_network(read_text_file(net_path));
  if (int rc = report_violations(net); rc != kExitOk) return rc;
  GroundTruth gt = ground_truth(std::move(net));
  std::mt19937_64 rng(seed);
  std::vector<EvidenceCase> cases;
  cases.reserve(n);
  for (int i = 0; i < n; ++i) {
    EvidenceCase e(gt.base.size());
    e.states = forward_sample(gt, i, rng);
    cases.push_back(std::move(e));
  }
  std::string text = serialize_cases(gt.base, cases);
  if (out == "-")
    std::cout << text;
  else
    write_text_file(out, text);
  return kExitOk;
}

std::optional<ExperimentConfig> parse_cell(const std::string& s) {
  std::string norm = s;
  for (char& c : norm)
    if (c == '_') c = ',';
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= norm.size()) {
    std::size_t end = norm.find(',', pos);
    if (end == std::string::npos) end = norm.size();
    parts.push_back(norm.substr(pos, end - pos));
    pos = end + 1;
  }
  if (parts.size() != 4) return std::nullopt;
  ExperimentConfig cfg;
  auto level = [](const std::string& t, char prefix, int max) -> int {
    if (t.size() == 2 && t[0] == prefix && t[1] >= '1' &&
        t[1] <= '0' + max)
      return t[1] - '0';
    return 0;
  };
  int r = level(parts[0], 'R', 3);
  int o = level(parts[1], 'O', 2);
  int p = level(parts[2], 'P', 2);
  int l = level(parts[3], 'L', 3);
  if (!r || !o || !p || !l) return std::nullopt;
  cfg.r = static_cast<RLevel>(r);
  cfg.o = static_cast<OLevel>(o);
  cfg.p = static_cast<PLevel>(p);
  cfg.l = static_cast<LLevel>(l);
  return cfg;
}

int cmd_experiment(bool all, const std::vector<std::string>& cells,
                   std::uint64_t seed, int n_cases, int switch_case,
                   const std::string& outdir, unsigned jobs,
                   const std::vector<std::string>& track_sel) {
  std::vector<ExperimentConfig> cfgs;
  if (all) {
    for (int r = 1; r <= 3; ++r)
      for (int o = 1; o <= 2; ++o)
        for (int p = 1; p <= 2; ++p)
          for (int l = 1; l <= 3; ++l)
            cfgs.push_back({static_cast<RLevel>(r), static_cast<OLevel>(o),
                            static_cast<PLevel>(p), static_cast<LLevel>(l),
                            n_cases, seed, switch_case});
  }
  for (const std::string& s : cells) {
    std::optional<ExperimentConfig> cfg = parse_cell(s);
    if (!cfg) {
      std::cerr << "unknown cell '" << s << "' (expected e.g. R1,O1,P1,L1)\n";
      return kExitUsage;
    }
    cfg->n_cases = n_cases;
    cfg->seed = seed;
    cfg->mode_switch_case = switch_case;
    cfgs.push_back(*cfg);
  }
  if (cfgs.empty()) {
    std::cerr << "no cells selected; pass --all or --cell\n";
    return kExitUsage;
  }

  std::vector<TrackedEntry> tracked =
      resolve_tracked(chest_clinic(), track_sel);

  std::filesystem::create_directories(outdir);
  std::vector<std::string> csvs(cfgs.size());
  std::vector<std::string> failures(cfgs.size());
  std::atomic<std::size_t> next{0};
  if (jobs == 0) jobs = 1;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(jobs, cfgs.size()); ++t)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= cfgs.size()) return;
        try {
          ExperimentResult res = run_cell(cfgs[i], tracked);
          csvs[i] = trajectory_csv(res.learner.net, res.records);
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      }
    });
  for (std::thread& t : pool) t.join();

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    if (!failures[i].empty()) {
      std::cerr << cell_name(cfgs[i]) << ": " << failures[i] << "\n";
      return kExitViolation;
    }
    std::filesystem::path path =
        std::filesystem::path(outdir) / cell_filename(cfgs[i]);
    write_text_file(path.string(), csvs[i]);
    std::cout << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive causal probabilistic networks"};
  app.require_subcommand(1);

  auto* validate_cmd = app.add_subcommand("validate", "check a network file");
  std::string validate_path;
  validate_cmd->add_option("network", validate_path, "network file")
      ->required();

  auto* adapt_cmd =
      app.add_subcommand("adapt", "process a cases file through adaptation");
  std::string adapt_net, adapt_cases, adapt_out = ".";
  bool adapt_strict = false, adapt_trace = false;
  std::vector<std::string> adapt_track, adapt_switches;
  adapt_cmd->add_option("network", adapt_net, "network file")->required();
  adapt_cmd->add_option("cases", adapt_cases, "cases file")->required();
  adapt_cmd->add_option("--out", adapt_out, "output directory");
  adapt_cmd->add_flag("--strict", adapt_strict,
                      "abort on a zero-probability case");
  adapt_cmd->add_flag("--trace", adapt_trace, "write a trajectory CSV");
  adapt_cmd->add_option("--track", adapt_track,
                        "tracked entry table:parentconfig:state");
  adapt_cmd->add_option("--mode-switch", adapt_switches,
                        "case=N [var=NAME] mode=MODE [mss=M], applied after "
                        "N cases");

  auto* sample_cmd = app.add_subcommand("sample", "draw complete cases");
  std::string sample_net, sample_out = "-";
  int sample_n = 0;
  std::uint64_t sample_seed = 1;
  sample_cmd->add_option("network", sample_net, "network file")->required();
  sample_cmd->add_option("--n", sample_n, "number of cases")->required();
  sample_cmd->add_option("--seed", sample_seed, "RNG seed");
  sample_cmd->add_option("--out", sample_out, "output file, - for stdout");

  auto* exp_cmd =
      app.add_subcommand("experiment", "run factorial grid cells");
  bool exp_all = false;
  std::vector<std::string> exp_cells, exp_track;
  std::uint64_t exp_seed = 1;
  int exp_n = 10000, exp_switch = 1000;
  std::string exp_out = ".";
  unsigned exp_jobs = std::max(1u, std::thread::hardware_concurrency());
  exp_cmd->add_flag("--all", exp_all, "run all 36 cells");
  exp_cmd->add_option("--cell", exp_cells, "cell like R1,O1,P1,L1");
  exp_cmd->add_option("--seed", exp_seed, "RNG seed");
  exp_cmd->add_option("--n-cases", exp_n, "cases per cell");
  exp_cmd->add_option("--switch-case", exp_switch,
                      "L2/L3 fade after this many cases");
  exp_cmd->add_option("--out", exp_out, "output directory");
  exp_cmd->add_option("--jobs", exp_jobs, "parallel cells");
  exp_cmd->add_option("--track", exp_track,
                      "tracked entry table:parentconfig:state");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(validate_cmd)) return cmd_validate(validate_path);
    if (app.got_subcommand(adapt_cmd))
      return cmd_adapt(adapt_net, adapt_cases, adapt_out, adapt_strict,
                       adapt_trace, adapt_track, adapt_switches);
    if (app.got_subcommand(sample_cmd))
      return cmd_sample(sample_net, sample_n, sample_seed, sample_out);
    if (app.got_subcommand(exp_cmd))
      return cmd_experiment(exp_all, exp_cells, exp_seed, exp_n, exp_switch,
                            exp_out, exp_jobs, exp_track);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitViolation;
  } catch (const ZeroProbabilityEvidence& e) {
    std::cerr << e.what() << "\n";
    return kExitViolation;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
