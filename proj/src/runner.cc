#include "mbandit/runner.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace mbandit {

namespace {

constexpr std::uint64_t kEnvStream = 0x656e7669726f6eULL;

struct EnvKindLabel {
  EnvKind kind;
  std::string_view name;
};

constexpr std::array<EnvKindLabel, 7> kEnvKindNames = {{
    {EnvKind::kMcar, "mcar"},
    {EnvKind::kMar, "mar"},
    {EnvKind::kMnar, "mnar"},
    {EnvKind::kMissingMedMar, "missing_med_mar"},
    {EnvKind::kMissingMedMnar, "missing_med_mnar"},
    {EnvKind::kIgnoremed, "ignoremed"},
    {EnvKind::kPbc, "pbc"},
}};

std::uint64_t UnitStream(std::size_t policy_index, std::size_t replication) {
  return (static_cast<std::uint64_t>(policy_index) << 32) |
         static_cast<std::uint64_t>(replication);
}

template <typename Fn>
std::shared_ptr<const Environment> Guarded(Fn&& build) {
  try {
    return build();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
}

}  // namespace

std::string_view EnvKindName(EnvKind kind) {
  for (const auto& kn : kEnvKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

std::optional<EnvKind> ParseEnvKind(std::string_view name) {
  for (const auto& kn : kEnvKindNames) {
    if (kn.name == name) return kn.kind;
  }
  return std::nullopt;
}

std::string PolicySpec::DisplayName() const {
  return name.empty() ? std::string(PolicyKindName(kind)) : name;
}

std::int64_t ExperimentConfig::EffectiveStride() const {
  if (stride > 0) return stride;
  return std::max<std::int64_t>(1, horizon / 200);
}

void ExperimentConfig::Validate() const {
  if (horizon < 1) throw ConfigError("run.T must be >= 1");
  if (replications < 1) throw ConfigError("run.replications must be >= 1");
  if (!(alpha > 1.0)) throw ConfigError("run.alpha must be > 1");
  if (stride < 0) throw ConfigError("run.stride must be >= 1");
  if (policies.empty()) throw ConfigError("at least one [[policy]] is required");
  if (env.n < 1) throw ConfigError("env.n must be >= 1");
  if (env.k < 1) throw ConfigError("env.K must be >= 1");
  if (env.l < 1) throw ConfigError("env.L must be >= 1");
  if (env.gamma && !(*env.gamma > 0.0 && *env.gamma <= 1.0)) {
    throw ConfigError("env.gamma must lie in (0, 1]");
  }
  if (env.gamma && env.kind != EnvKind::kMcar && env.kind != EnvKind::kMar &&
      env.kind != EnvKind::kPbc) {
    throw ConfigError("env.gamma applies only to mcar, mar and pbc environments");
  }
  if (env.kind == EnvKind::kPbc && env.pbc_path.empty()) {
    throw ConfigError("env.pbc_path is required for env.kind = \"pbc\"");
  }
  std::vector<std::string> names;
  for (const auto& p : policies) {
    const std::string n = p.DisplayName();
    if (std::find(names.begin(), names.end(), n) != names.end()) {
      throw ConfigError("duplicate policy name \"" + n + "\"");
    }
    names.push_back(n);
  }
}

std::shared_ptr<const Environment> BuildEnvironment(const EnvSpec& spec) {
  RngStream rng(spec.seed, kEnvStream);
  switch (spec.kind) {
    case EnvKind::kMcar:
      return Guarded([&]() -> std::shared_ptr<const Environment> {
        McarEnv sampled = SampleMcarConfig(spec.n, rng);
        if (!spec.gamma && spec.noise_std == 1.0) {
          return std::make_shared<McarEnv>(std::move(sampled));
        }
        return std::make_shared<McarEnv>(sampled.mu(),
                                         spec.gamma.value_or(sampled.gamma()),
                                         spec.noise_std);
      });
    case EnvKind::kMar:
      return Guarded([&]() -> std::shared_ptr<const Environment> {
        MarEnv e = SampleMarConfig(spec.n, spec.k, spec.peaked, rng,
                                   spec.peak_concentration);
        Eigen::MatrixXd gamma = e.gamma();
        if (spec.gamma) gamma.setConstant(*spec.gamma);
        return std::make_shared<MarEnv>(e.mu(), std::move(gamma), e.p(),
                                        spec.noise_std);
      });
    case EnvKind::kMnar:
      return Guarded([&]() -> std::shared_ptr<const Environment> {
        return std::make_shared<MnarEnv>(
            SampleMnarConfig(spec.n, spec.k, spec.l, rng, spec.mnar_bias));
      });
    case EnvKind::kMissingMedMar:
    case EnvKind::kMissingMedMnar:
      return Guarded([&]() -> std::shared_ptr<const Environment> {
        const auto variant = spec.kind == EnvKind::kMissingMedMar
                                 ? MissingMedEnv::Variant::kMar
                                 : MissingMedEnv::Variant::kMnar;
        return std::make_shared<MissingMedEnv>(
            SampleMissingMedConfig(spec.n, spec.k, spec.l, variant, rng,
                                   spec.lambda_min, spec.lambda_max,
                                   spec.mnar_bias));
      });
    case EnvKind::kIgnoremed:
      return Guarded([&]() -> std::shared_ptr<const Environment> {
        return std::make_shared<MarEnv>(
            BuildIgnoremedInstance(spec.k, spec.epsilon, spec.noise_std));
      });
    case EnvKind::kPbc:
      return Guarded([&]() -> std::shared_ptr<const Environment> {
        SyntheticGammaSpec range{spec.gamma_min, spec.gamma_max};
        if (spec.gamma) range = {*spec.gamma, *spec.gamma};
        return std::make_shared<BootstrapEnv>(
            IngestPbc(spec.pbc_path, range, rng));
      });
  }
  throw ConfigError("env: unsupported kind");
}

PolicyConfig MakePolicyConfig(const PolicySpec& spec, const Environment& env,
                              std::int64_t horizon, double alpha) {
  PolicyConfig pc;
  pc.kind = spec.kind;
  pc.alpha = alpha;
  pc.horizon = horizon;
  pc.num_arms = env.num_arms();
  pc.num_mediators = env.num_mediators();
  if (env.alphabet()) pc.alphabet = *env.alphabet();

  std::vector<double> kappa;
  if (const auto* e = dynamic_cast<const McarEnv*>(&env)) {
    pc.known_p = Eigen::MatrixXd::Ones(e->num_arms(), 1);
  } else if (const auto* e = dynamic_cast<const MarEnv*>(&env)) {
    pc.known_p = e->p();
  } else if (const auto* e = dynamic_cast<const MnarEnv*>(&env)) {
    pc.known_p = e->p();
    for (std::size_t a = 0; a < e->num_arms(); ++a) {
      kappa.push_back(e->Kappa(ArmId(a)));
    }
  } else if (const auto* e = dynamic_cast<const MissingMedEnv*>(&env)) {
    pc.known_p = e->base().p();
    if (e->variant() == MissingMedEnv::Variant::kMnar) {
      for (std::size_t a = 0; a < e->num_arms(); ++a) {
        kappa.push_back(e->Kappa(ArmId(a)));
      }
    }
  } else if (const auto* e = dynamic_cast<const BootstrapEnv*>(&env)) {
    pc.known_p = e->MediatorLaw();
  }
  if (!kappa.empty() && !spec.estimate_condition) {
    pc.condition_bounds = std::move(kappa);
  }
  return pc;
}

std::vector<std::int64_t> Checkpoints(std::int64_t horizon,
                                      std::int64_t stride) {
  std::vector<std::int64_t> out;
  for (std::int64_t t = stride; t <= horizon; t += stride) out.push_back(t);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

void RegretCurve::Aggregate() {
  const std::size_t reps = per_rep.size();
  mean.assign(times.size(), 0.0);
  std.assign(times.size(), 0.0);
  if (reps == 0) return;
  for (std::size_t c = 0; c < times.size(); ++c) {
    double sum = 0.0;
    for (const auto& row : per_rep) sum += row[c];
    const double m = sum / static_cast<double>(reps);
    double ss = 0.0;
    for (const auto& row : per_rep) ss += (row[c] - m) * (row[c] - m);
    mean[c] = m;
    std[c] = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
  }
}

std::vector<double> RunReplication(const Environment& env,
                                   const PolicyConfig& policy_config,
                                   std::uint64_t base_seed,
                                   std::size_t policy_index,
                                   std::size_t replication,
                                   const std::vector<std::int64_t>& times) {
  RngStream rng(base_seed, UnitStream(policy_index, replication));
  Policy policy(policy_config);
  const double best = env.OptimalMean();
  std::vector<double> gap(env.num_arms());
  for (std::size_t a = 0; a < gap.size(); ++a) {
    gap[a] = best - env.TrueMean(ArmId(a));
  }
  std::vector<double> out;
  out.reserve(times.size());
  double regret = 0.0;
  std::size_t next = 0;
  const std::int64_t horizon = times.empty() ? 0 : times.back();
  for (std::int64_t t = 1; t <= horizon; ++t) {
    const ArmId arm = policy.SelectArm();
    policy.Update(env.Step(arm, rng));
    regret += gap[arm.index];
    if (t == times[next]) {
      out.push_back(regret);
      ++next;
    }
  }
  return out;
}

std::vector<RegretCurve> RunExperiment(const ExperimentConfig& config) {
  config.Validate();
  const auto env = BuildEnvironment(config.env);
  return RunExperiment(config, *env);
}

std::vector<RegretCurve> RunExperiment(const ExperimentConfig& config,
                                       const Environment& env) {
  config.Validate();
  std::vector<PolicyConfig> policy_configs;
  for (const auto& spec : config.policies) {
    PolicyConfig pc = MakePolicyConfig(spec, env, config.horizon, config.alpha);
    try {
      Policy probe(pc);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("policy \"") + spec.DisplayName() +
                        "\": " + e.what());
    }
    policy_configs.push_back(std::move(pc));
  }

  const std::vector<std::int64_t> times =
      Checkpoints(config.horizon, config.EffectiveStride());
  const std::size_t reps = config.replications;
  const std::size_t units = policy_configs.size() * reps;
  std::vector<std::vector<double>> results(units);

  std::size_t workers = config.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, units);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto work = [&]() {
    for (;;) {
      const std::size_t u = next.fetch_add(1);
      if (u >= units) return;
      try {
        results[u] = RunReplication(env, policy_configs[u / reps],
                                    config.base_seed, u / reps, u % reps, times);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(units);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  std::vector<RegretCurve> curves;
  for (std::size_t p = 0; p < policy_configs.size(); ++p) {
    RegretCurve c;
    c.policy_name = config.policies[p].DisplayName();
    c.times = times;
    for (std::size_t r = 0; r < reps; ++r) {
      c.per_rep.push_back(std::move(results[p * reps + r]));
    }
    c.Aggregate();
    curves.push_back(std::move(c));
  }
  return curves;
}

// ---------------------------------------------------------------------------

double ArithmeticMean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double HarmonicMean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += 1.0 / x;
  return static_cast<double>(v.size()) / s;
}

std::size_t BoundTable::Column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::out_of_range("bound table has no column \"" + std::string(name) +
                          "\"");
}

namespace {

void AddMarColumns(BoundTable& table, const std::vector<double>& mass,
                   double alpha) {
  const double n = static_cast<double>(mass.size());
  const double s = ArithmeticMean(mass);
  const double h = HarmonicMean(mass);
  table.columns = {"S", "H", "mar_upper", "mar_lower"};
  for (std::int64_t ti : table.times) {
    const double t = static_cast<double>(ti);
    table.rows.push_back({s, h, std::sqrt(alpha * t * std::log(t) * n * s),
                          std::sqrt(t * n * h)});
  }
}

void AddPerArmColumns(BoundTable& table, const std::vector<double>& s_a,
                      double alpha, const std::string& upper_name) {
  double sum_sq = 0.0;
  for (std::size_t a = 0; a < s_a.size(); ++a) {
    table.columns.push_back("S_" + std::to_string(a));
    sum_sq += s_a[a] * s_a[a];
  }
  table.columns.push_back(upper_name);
  for (std::int64_t ti : table.times) {
    const double t = static_cast<double>(ti);
    std::vector<double> row = s_a;
    row.push_back(std::sqrt(alpha * t * std::log(t) * sum_sq));
    table.rows.push_back(std::move(row));
  }
}

}  // namespace

BoundTable TheoreticalCurves(const ExperimentConfig& config,
                             const Environment& env) {
  BoundTable table;
  table.times = Checkpoints(config.horizon, config.EffectiveStride());
  const double alpha = config.alpha;
  const std::size_t n = env.num_arms();

  if (const auto* e = dynamic_cast<const McarEnv*>(&env)) {
    table.columns = {"mcar_upper", "mcar_lower"};
    const double dn = static_cast<double>(n);
    for (std::int64_t ti : table.times) {
      const double t = static_cast<double>(ti);
      table.rows.push_back({std::sqrt(alpha * dn * t * std::log(t) / e->gamma()),
                            std::sqrt(dn * t / e->gamma())});
    }
  } else if (const auto* e = dynamic_cast<const MarEnv*>(&env)) {
    std::vector<double> mass(n);
    for (std::size_t a = 0; a < n; ++a) {
      mass[a] = e->InverseObservationMass(ArmId(a));
    }
    AddMarColumns(table, mass, alpha);
  } else if (const auto* e = dynamic_cast<const BootstrapEnv*>(&env)) {
    const Eigen::MatrixXd p = e->MediatorLaw();
    std::vector<double> mass(n);
    for (std::size_t a = 0; a < n; ++a) {
      mass[a] = (p.row(a).array() / e->gamma().row(a).array()).sum();
    }
    AddMarColumns(table, mass, alpha);
  } else if (const auto* e = dynamic_cast<const MnarEnv*>(&env)) {
    const double l = static_cast<double>(e->num_outcomes());
    const double k = static_cast<double>(e->num_mediators());
    std::vector<double> s_a(n);
    for (std::size_t a = 0; a < n; ++a) {
      const Eigen::MatrixXd theta = e->Theta(ArmId(a));
      const Eigen::VectorXd law = e->OutcomeLaw(ArmId(a));
      const Eigen::VectorXd g = e->gamma_y().row(a).transpose();
      const double gamma_a = g.minCoeff();
      const double c_a = e->Kappa(ArmId(a));
      const double first =
          l * c_a / (gamma_a * theta.cwiseAbs().rowwise().sum().maxCoeff());
      const double second = k / (gamma_a * std::sqrt(law.dot(g)));
      s_a[a] = std::max(first, second);
    }
    AddPerArmColumns(table, s_a, alpha, "mnar_upper");
  } else if (const auto* e = dynamic_cast<const MissingMedEnv*>(&env)) {
    const MarEnv& base = e->base();
    if (e->variant() == MissingMedEnv::Variant::kMar) {
      std::vector<double> mass(n);
      for (std::size_t a = 0; a < n; ++a) {
        mass[a] = base.InverseObservationMass(ArmId(a)) / e->lambda()(a, 0);
      }
      AddMarColumns(table, mass, alpha);
    } else {
      const double k = static_cast<double>(e->num_mediators());
      std::vector<double> s_a(n);
      for (std::size_t a = 0; a < n; ++a) {
        const Eigen::MatrixXd theta = e->ThetaObserved(ArmId(a));
        const double norm = theta.cwiseAbs().rowwise().sum().maxCoeff();
        const double lambda_a = e->lambda().row(a).minCoeff();
        const double first =
            32.0 * e->Kappa(ArmId(a)) / norm * k / lambda_a + 2.0 / lambda_a;
        double inner = 0.0;
        for (std::size_t m = 0; m < e->num_mediators(); ++m) {
          inner += 32.0 * base.p()(a, m) /
                   (e->lambda()(a, m) * base.gamma()(a, m));
        }
        s_a[a] = std::max(first, std::sqrt(inner));
      }
      AddPerArmColumns(table, s_a, alpha, "missing_med_mnar_upper");
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

std::string FormatNumber(double v) {
  if (v == 0.0) return "0";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), ptr);
}

namespace {

nlohmann::ordered_json ConfigToJson(const ExperimentConfig& c) {
  nlohmann::ordered_json env;
  env["kind"] = std::string(EnvKindName(c.env.kind));
  env["n"] = c.env.n;
  env["K"] = c.env.k;
  env["L"] = c.env.l;
  env["seed"] = c.env.seed;
  env["peaked"] = c.env.peaked;
  env["peak_concentration"] = c.env.peak_concentration;
  env["mnar_bias"] = c.env.mnar_bias;
  if (c.env.gamma) {
    env["gamma"] = *c.env.gamma;
  } else {
    env["gamma"] = nullptr;
  }
  env["noise_std"] = c.env.noise_std;
  env["epsilon"] = c.env.epsilon;
  env["lambda_min"] = c.env.lambda_min;
  env["lambda_max"] = c.env.lambda_max;
  env["pbc_path"] = c.env.pbc_path;
  env["gamma_min"] = c.env.gamma_min;
  env["gamma_max"] = c.env.gamma_max;

  nlohmann::ordered_json run;
  run["name"] = c.name;
  run["T"] = c.horizon;
  run["replications"] = c.replications;
  run["alpha"] = c.alpha;
  run["base_seed"] = c.base_seed;
  run["stride"] = c.EffectiveStride();

  nlohmann::ordered_json policies = nlohmann::ordered_json::array();
  for (const auto& p : c.policies) {
    nlohmann::ordered_json pj;
    pj["kind"] = std::string(PolicyKindName(p.kind));
    pj["name"] = p.DisplayName();
    pj["estimate_condition"] = p.estimate_condition;
    policies.push_back(std::move(pj));
  }

  nlohmann::ordered_json out;
  out["env"] = std::move(env);
  out["run"] = std::move(run);
  out["policy"] = std::move(policies);
  out["output"] = {{"dir", c.output_dir}};
  return out;
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

void FinishWrite(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

std::vector<std::filesystem::path> WriteResults(
    const std::vector<RegretCurve>& curves, const ExperimentConfig& config,
    const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error(dir.string() + ": cannot create directory: " +
                             ec.message());
  }
  std::vector<std::filesystem::path> written;

  if (!curves.empty()) {
    const auto csv_path = dir / (config.name + ".csv");
    std::ofstream csv = OpenForWrite(csv_path);
    csv << "experiment,policy,replication,t,cum_regret\n";
    for (const auto& c : curves) {
      for (std::size_t r = 0; r < c.per_rep.size(); ++r) {
        for (std::size_t i = 0; i < c.times.size(); ++i) {
          csv << config.name << ',' << c.policy_name << ',' << r << ','
              << c.times[i] << ',' << FormatNumber(c.per_rep[r][i]) << '\n';
        }
      }
    }
    FinishWrite(csv, csv_path);
    written.push_back(csv_path);
  }

  nlohmann::ordered_json summary;
  summary["experiment"] = config.name;
  summary["config_echo"] = ConfigToJson(config);
  summary["policies"] = nlohmann::ordered_json::array();
  for (const auto& c : curves) {
    summary["policies"].push_back({{"name", c.policy_name},
                                   {"final_mean", c.FinalMean()},
                                   {"final_std", c.FinalStd()}});
  }
  summary["seed"] = config.base_seed;
  const auto json_path = dir / (config.name + "_summary.json");
  std::ofstream js = OpenForWrite(json_path);
  js << summary.dump(2) << '\n';
  FinishWrite(js, json_path);
  written.push_back(json_path);
  return written;
}

std::filesystem::path WriteBoundTable(const BoundTable& table,
                                      const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out = OpenForWrite(path);
  out << 't';
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < table.times.size(); ++i) {
    out << table.times[i];
    for (double v : table.rows[i]) out << ',' << FormatNumber(v);
    out << '\n';
  }
  FinishWrite(out, path);
  return path;
}

}  // namespace mbandit
