#ifndef MBANDIT_RUNNER_H_
#define MBANDIT_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mbandit/envs.h"
#include "mbandit/policies.h"

namespace mbandit {

// Invalid experiment description. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EnvKind {
  kMcar,
  kMar,
  kMnar,
  kMissingMedMar,
  kMissingMedMnar,
  kIgnoremed,
  kPbc,
};

std::string_view EnvKindName(EnvKind kind);
std::optional<EnvKind> ParseEnvKind(std::string_view name);

struct EnvSpec {
  EnvKind kind = EnvKind::kMcar;
  std::size_t n = 10;
  std::size_t k = 5;
  std::size_t l = 5;
  std::uint64_t seed = 0;
  bool peaked = false;
  double peak_concentration = 5.0;
  double mnar_bias = 5.0;
  // Overrides the sampled observation probabilities with one constant
  // (mcar, mar and pbc environments).
  std::optional<double> gamma;
  double noise_std = 1.0;
  double epsilon = 0.1;  // ignoremed
  double lambda_min = 0.5;
  double lambda_max = 1.0;
  std::string pbc_path;
  double gamma_min = 0.8;  // synthetic PBC masking
  double gamma_max = 1.0;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::kMcarUcb;
  std::string name;  // defaults to the kind name
  // Use kappa(theta_hat) instead of the true kappa(theta) as C_a.
  bool estimate_condition = false;

  std::string DisplayName() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvSpec env;
  std::vector<PolicySpec> policies;
  std::int64_t horizon = 10000;
  std::size_t replications = 20;
  double alpha = 2.0;
  std::uint64_t base_seed = 0;
  std::string output_dir = "results";
  std::int64_t stride = 0;  // 0 selects max(1, T / 200)
  std::size_t workers = 0;  // 0 selects the hardware concurrency

  std::int64_t EffectiveStride() const;
  // Throws ConfigError.
  void Validate() const;
};

// Builds the environment described by `spec`; sampled kinds draw from
// RngStream(spec.seed, kEnvStream). Throws ConfigError or IngestError.
std::shared_ptr<const Environment> BuildEnvironment(const EnvSpec& spec);

// Policy configuration for `spec` against `env`: known mediator law, true
// condition numbers and the outcome alphabet are taken from the environment
// when it has them.
PolicyConfig MakePolicyConfig(const PolicySpec& spec, const Environment& env,
                              std::int64_t horizon, double alpha);

// stride, 2 stride, ..., with T always last.
std::vector<std::int64_t> Checkpoints(std::int64_t horizon, std::int64_t stride);

struct RegretCurve {
  std::string policy_name;
  std::vector<std::int64_t> times;
  std::vector<std::vector<double>> per_rep;  // replication x checkpoint
  std::vector<double> mean;
  std::vector<double> std;  // sample standard deviation, 0 for one replication

  void Aggregate();
  double FinalMean() const { return mean.empty() ? 0.0 : mean.back(); }
  double FinalStd() const { return std.empty() ? 0.0 : std.back(); }
};

// Cumulative pseudo-regret of one replication at the given checkpoints.
std::vector<double> RunReplication(const Environment& env,
                                   const PolicyConfig& policy_config,
                                   std::uint64_t base_seed,
                                   std::size_t policy_index,
                                   std::size_t replication,
                                   const std::vector<std::int64_t>& times);

// Runs every (policy, replication) unit, spreading units over worker threads.
// Results do not depend on the worker count.
std::vector<RegretCurve> RunExperiment(const ExperimentConfig& config);
std::vector<RegretCurve> RunExperiment(const ExperimentConfig& config,
                                       const Environment& env);

// ---------------------------------------------------------------------------
// Reference curves.

double ArithmeticMean(const std::vector<double>& v);
double HarmonicMean(const std::vector<double>& v);

struct BoundTable {
  std::vector<std::string> columns;  // excluding "t"
  std::vector<std::int64_t> times;
  std::vector<std::vector<double>> rows;  // one row per time

  // Column index by name; throws std::out_of_range.
  std::size_t Column(std::string_view name) const;
};

// Unscaled bound shapes for the configured environment at every checkpoint.
BoundTable TheoreticalCurves(const ExperimentConfig& config,
                             const Environment& env);

// ---------------------------------------------------------------------------
// Persistence.

// Shortest decimal that round-trips, independent of locale.
std::string FormatNumber(double v);

// Writes <dir>/<name>.csv (omitted when `curves` is empty) and
// <dir>/<name>_summary.json; returns the written paths. Throws
// std::runtime_error naming the path on I/O failure.
std::vector<std::filesystem::path> WriteResults(
    const std::vector<RegretCurve>& curves, const ExperimentConfig& config,
    const std::filesystem::path& dir);

std::filesystem::path WriteBoundTable(const BoundTable& table,
                                      const std::filesystem::path& path);

}  // namespace mbandit

#endif  // MBANDIT_RUNNER_H_
