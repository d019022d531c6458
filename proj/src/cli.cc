#include "mbandit/cli.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mbandit/config.h"
#include "mbandit/runner.h"

namespace mbandit {

namespace {

constexpr const char* kSeedEnvVar = "MISSING_BANDITS_SEED";
constexpr std::uint64_t kFixtureStream = 0x66697874757265ULL;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void AddCommonOptions(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment file")->required();
  cmd->add_option("--set", o.overrides, "Override KEY=VALUE (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--out", o.out_dir, "Output directory (replaces output.dir)");
  cmd->add_option("--seed", o.seed, "Base seed (replaces run.base_seed)");
  cmd->add_flag("--quiet", o.quiet, "Suppress the summary table");
}

// Loads the config file and applies, in order: file contents, seed fallback
// from the environment, --set overrides, --out and --seed.
ConfigTable LoadTable(const CommonOptions& o) {
  ConfigTable table = ConfigTable::ParseFile(o.config_path);
  if (!table.Contains("run.base_seed")) {
    if (const char* env_seed = std::getenv(kSeedEnvVar)) {
      const std::string_view text(env_seed);
      std::uint64_t seed = 0;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
      if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
        throw ConfigError(std::string(kSeedEnvVar) + " is not a valid seed");
      }
      table.Set("run.base_seed", {std::to_string(seed), false});
    }
  }
  for (const auto& ov : o.overrides) table.ApplyOverride(ov);
  if (!o.out_dir.empty()) table.Set("output.dir", {o.out_dir, true});
  if (o.seed) table.Set("run.base_seed", {std::to_string(*o.seed), false});
  return table;
}

std::string DefaultName(const CommonOptions& o) {
  return std::filesystem::path(o.config_path).stem().string();
}

void PrintSummary(const ExperimentConfig& config,
                  const std::vector<RegretCurve>& curves,
                  const std::vector<std::filesystem::path>& written,
                  std::ostream& out) {
  out << "experiment " << config.name << " (T=" << config.horizon
      << ", replications=" << config.replications
      << ", seed=" << config.base_seed << ")\n";
  std::size_t width = 6;
  for (const auto& c : curves) width = std::max(width, c.policy_name.size());
  out << std::left << std::setw(static_cast<int>(width) + 2) << "policy"
      << std::right << std::setw(16) << "final_mean" << std::setw(16)
      << "final_std" << '\n';
  for (const auto& c : curves) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << c.policy_name
        << std::right << std::fixed << std::setprecision(3) << std::setw(16)
        << c.FinalMean() << std::setw(16) << c.FinalStd() << '\n';
  }
  out.unsetf(std::ios::floatfield);
  for (const auto& p : written) out << "wrote " << p.string() << '\n';
}

int RunOnce(const ExperimentConfig& config, bool quiet, std::ostream& out) {
  const auto curves = RunExperiment(config);
  const auto written = WriteResults(curves, config, config.output_dir);
  if (!quiet) PrintSummary(config, curves, written, out);
  return kExitOk;
}

int CmdRun(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig config =
      BuildExperimentConfig(LoadTable(o), DefaultName(o));
  return RunOnce(config, o.quiet, out);
}

std::vector<std::string> SplitValues(const std::string& csv) {
  std::vector<std::string> values;
  std::string cur;
  std::istringstream in(csv);
  while (std::getline(in, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = cur.find_last_not_of(" \t");
    values.push_back(cur.substr(b, e - b + 1));
  }
  return values;
}

std::string Sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                      c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out;
}

int CmdSweep(const CommonOptions& o, const std::string& param,
             const std::string& values_csv, std::ostream& out) {
  CheckKnownKey(param);
  const std::vector<std::string> values = SplitValues(values_csv);
  if (values.empty()) throw ConfigError("sweep: --values is empty");
  const ConfigTable base = LoadTable(o);
  const std::string base_name =
      BuildExperimentConfig(base, DefaultName(o)).name;
  const std::string suffix_key = param.substr(param.rfind('.') + 1);

  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    ConfigTable table = base;
    table.ApplyOverride(param + "=" + v);
    ExperimentConfig c = BuildExperimentConfig(table, DefaultName(o));
    c.name = base_name + "_" + Sanitize(suffix_key) + "_" + Sanitize(v);
    configs.push_back(std::move(c));
  }
  for (const auto& c : configs) RunOnce(c, o.quiet, out);
  return kExitOk;
}

int CmdBounds(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig config =
      BuildExperimentConfig(LoadTable(o), DefaultName(o));
  const auto env = BuildEnvironment(config.env);
  const BoundTable table = TheoreticalCurves(config, *env);
  if (table.columns.empty()) {
    throw ConfigError("bounds: no reference curves for env.kind = \"" +
                      std::string(EnvKindName(config.env.kind)) + "\"");
  }
  const auto path = WriteBoundTable(
      table, std::filesystem::path(config.output_dir) / (config.name + "_bounds.csv"));
  if (!o.quiet) {
    out << 't';
    for (const auto& c : table.columns) out << '\t' << c;
    out << '\n';
    for (std::size_t i = 0; i < table.times.size(); ++i) {
      out << table.times[i];
      for (double v : table.rows[i]) out << '\t' << FormatNumber(v);
      out << '\n';
    }
    out << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

int CmdIngestPbc(const std::string& csv_path, const std::string& out_config,
                 bool quiet, std::ostream& out) {
  const PbcData data = ReadPbcCsv(csv_path);
  nlohmann::ordered_json summary;
  summary["source"] = csv_path;
  summary["rows_read"] = data.rows_read;
  summary["rows_skipped"] = data.rows_skipped;
  summary["max_x"] = data.max_x;
  summary["arms"] = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < data.pools.size(); ++a) {
    const auto& pool = data.pools[a];
    std::vector<std::size_t> counts(data.num_mediators, 0);
    double sum = 0.0;
    for (const auto& rec : pool) {
      ++counts[rec.mediator.index];
      sum += rec.outcome;
    }
    nlohmann::ordered_json freq = nlohmann::ordered_json::array();
    for (std::size_t c : counts) {
      freq.push_back(static_cast<double>(c) / static_cast<double>(pool.size()));
    }
    summary["arms"].push_back({{"arm", a},
                               {"rows", pool.size()},
                               {"mediator_frequencies", freq},
                               {"mean_outcome", sum / static_cast<double>(pool.size())}});
  }

  if (!out_config.empty()) {
    ExperimentConfig c;
    c.name = std::filesystem::path(out_config).stem().string();
    c.env.kind = EnvKind::kPbc;
    c.env.n = data.pools.size();
    c.env.k = data.num_mediators;
    c.env.pbc_path = std::filesystem::absolute(csv_path).string();
    c.horizon = 10000;
    c.replications = 20;
    c.policies = {{PolicyKind::kMarUcbKnownP, "", false},
                  {PolicyKind::kMarUcbUnknownP, "", false},
                  {PolicyKind::kNaiveUcb, "", false}};
    const std::filesystem::path cfg(out_config);
    if (cfg.has_parent_path()) std::filesystem::create_directories(cfg.parent_path());
    std::ofstream f(cfg, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(out_config + ": cannot open for writing");
    f << RenderConfig(c);
    auto json_path = cfg;
    json_path.replace_extension(".summary.json");
    std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
    if (!js) throw std::runtime_error(json_path.string() + ": cannot open for writing");
    js << summary.dump(2) << '\n';
  }

  if (!quiet) {
    out << "arms: " << data.pools.size() << '\n'
        << "rows read: " << data.rows_read << ", skipped (missing Z1): "
        << data.rows_skipped << '\n';
    for (const auto& arm : summary["arms"]) {
      out << "arm " << arm["arm"].get<std::size_t>()
          << ": rows=" << arm["rows"].get<std::size_t>() << " mediator_freq=[";
      bool first = true;
      for (const auto& f : arm["mediator_frequencies"]) {
        out << (first ? "" : ", ") << FormatNumber(f.get<double>());
        first = false;
      }
      out << "] mean_outcome=" << FormatNumber(arm["mean_outcome"].get<double>())
          << '\n';
    }
    if (!out_config.empty()) out << "wrote " << out_config << '\n';
  }
  return kExitOk;
}

ExperimentConfig FixtureConfig(EnvKind kind) {
  ExperimentConfig c;
  c.name = std::string(EnvKindName(kind));
  c.env.kind = kind;
  c.output_dir = "results";
  switch (kind) {
    case EnvKind::kMcar:
      c.horizon = 10000;
      c.replications = 20;
      c.policies = {{PolicyKind::kMcarUcb, "", false}};
      break;
    case EnvKind::kMar:
      c.horizon = 100000;
      c.replications = 10;
      c.policies = {{PolicyKind::kMarUcbKnownP, "", false},
                    {PolicyKind::kMarUcbUnknownP, "", false},
                    {PolicyKind::kNaiveUcb, "", false}};
      break;
    case EnvKind::kMnar:
      c.horizon = 100000;
      c.replications = 10;
      c.policies = {{PolicyKind::kMnarUcb, "", false},
                    {PolicyKind::kNaiveUcb, "", false}};
      break;
    case EnvKind::kMissingMedMar:
      c.horizon = 100000;
      c.replications = 10;
      c.policies = {{PolicyKind::kMissingMedMarUcb, "", false},
                    {PolicyKind::kNaiveUcb, "", false}};
      break;
    case EnvKind::kMissingMedMnar:
      c.horizon = 100000;
      c.replications = 10;
      c.policies = {{PolicyKind::kMissingMedMnarUcb, "", false},
                    {PolicyKind::kNaiveUcb, "", false}};
      break;
    case EnvKind::kIgnoremed:
      c.env.n = 2;
      c.horizon = 50000;
      c.replications = 10;
      c.policies = {{PolicyKind::kNaiveUcb, "", false},
                    {PolicyKind::kMarUcbUnknownP, "", false}};
      break;
    case EnvKind::kPbc:
      c.env.n = 2;
      c.env.k = 2;
      c.env.pbc_path = "pbc.csv";
      c.policies = {{PolicyKind::kMarUcbKnownP, "", false},
                    {PolicyKind::kMarUcbUnknownP, "", false},
                    {PolicyKind::kNaiveUcb, "", false}};
      break;
  }
  return c;
}

// A CSV with the PBC column layout: `rows` records, the last quarter without a
// treatment assignment, X in days and D a 0/1 status.
std::string SyntheticPbcCsv(std::size_t rows, std::uint64_t seed) {
  RngStream rng(seed, kFixtureStream);
  std::ostringstream os;
  os << "id,Z1,X,D\n";
  const std::size_t assigned = rows - rows / 4;
  for (std::size_t i = 0; i < rows; ++i) {
    os << (i + 1) << ',';
    if (i < assigned) {
      const std::size_t arm = 1 + rng.UniformIndex(2);
      const double base = arm == 1 ? 2200.0 : 1900.0;
      const auto x = static_cast<long>(std::max(41.0, rng.Normal(base, 900.0)));
      const int d = rng.Bernoulli(arm == 1 ? 0.35 : 0.45) ? 1 : 0;
      os << arm << ',' << x << ',' << d << '\n';
    } else {
      const auto x = static_cast<long>(std::max(41.0, rng.Normal(2000.0, 900.0)));
      os << "NA," << x << ',' << (rng.Bernoulli(0.4) ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

void WriteText(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << text;
  if (!f) throw std::runtime_error(path + ": write failed");
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Bandit simulations with missing outcomes", "missing_bandits"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one experiment");
  AddCommonOptions(run, run_opts);

  CommonOptions sweep_opts;
  std::string sweep_param;
  std::string sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value");
  AddCommonOptions(sweep, sweep_opts);
  sweep->add_option("--param", sweep_param, "Config key to vary")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->required();

  CommonOptions bounds_opts;
  auto* bounds = app.add_subcommand("bounds", "Write reference bound curves");
  AddCommonOptions(bounds, bounds_opts);

  std::string pbc_csv;
  std::string pbc_out_config;
  bool pbc_quiet = false;
  auto* ingest = app.add_subcommand("ingest-pbc", "Summarize a PBC CSV");
  ingest->add_option("csv", pbc_csv, "PBC CSV path")->required();
  ingest->add_option("--out-config", pbc_out_config,
                     "Write an experiment file for this dataset");
  ingest->add_flag("--quiet", pbc_quiet, "Suppress the summary");

  std::string fixture_kind;
  std::string fixture_out;
  std::size_t fixture_rows = 418;
  std::uint64_t fixture_seed = 0;
  auto* fixture = app.add_subcommand("fixture", "Write a starter file");
  fixture->require_subcommand(1);
  auto* fixture_config =
      fixture->add_subcommand("config", "Experiment file for an environment kind");
  fixture_config->add_option("--kind", fixture_kind, "Environment kind")
      ->required();
  fixture_config->add_option("--out", fixture_out, "Output path")->required();
  auto* fixture_pbc =
      fixture->add_subcommand("pbc-csv", "Synthetic CSV in the PBC layout");
  fixture_pbc->add_option("--out", fixture_out, "Output path")->required();
  fixture_pbc->add_option("--rows", fixture_rows, "Number of rows");
  fixture_pbc->add_option("--seed", fixture_seed, "Seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return CmdRun(run_opts, out);
    if (*sweep) return CmdSweep(sweep_opts, sweep_param, sweep_values, out);
    if (*bounds) return CmdBounds(bounds_opts, out);
    if (*ingest) return CmdIngestPbc(pbc_csv, pbc_out_config, pbc_quiet, out);
    if (*fixture_config) {
      const auto kind = ParseEnvKind(fixture_kind);
      if (!kind) throw ConfigError("unknown environment kind \"" + fixture_kind + "\"");
      WriteText(fixture_out, RenderConfig(FixtureConfig(*kind)));
      return kExitOk;
    }
    if (*fixture_pbc) {
      if (fixture_rows < 4) throw ConfigError("--rows must be >= 4");
      WriteText(fixture_out, SyntheticPbcCsv(fixture_rows, fixture_seed));
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IngestError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace mbandit
