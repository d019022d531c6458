#ifndef MBANDIT_POLICIES_H_
#define MBANDIT_POLICIES_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mbandit/core.h"
#include "mbandit/estimators.h"

namespace mbandit {

enum class PolicyKind {
  kMcarUcb,
  kMarUcbKnownP,
  kMarUcbUnknownP,
  kMnarUcb,
  kMissingMedMarUcb,
  kMissingMedMnarUcb,
  kNaiveUcb,
};

std::string_view PolicyKindName(PolicyKind kind);
std::optional<PolicyKind> ParsePolicyKind(std::string_view name);
std::span<const PolicyKind> AllPolicyKinds();

// Whether the kind starts with ceil((ln T)^2) round-robin pulls per arm.
bool HasForcedPhase(PolicyKind kind);
// max(1, ceil((ln T)^2)).
std::int64_t ForcedPhaseLength(std::int64_t horizon);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kMcarUcb;
  double alpha = 2.0;
  std::int64_t horizon = 1;
  std::size_t num_arms = 1;
  std::size_t num_mediators = 1;
  // Required by kMnarUcb and kMissingMedMnarUcb.
  std::optional<OutcomeAlphabet> alphabet;
  // n x K mediator law; required by kMarUcbKnownP.
  std::optional<Eigen::MatrixXd> known_p;
  // Per-arm condition-number bound C_a for the odds-ratio kinds. When absent
  // the estimated kappa(theta_hat) is used.
  std::optional<std::vector<double>> condition_bounds;
};

// Index of the arm to pull given per-arm fits: the lowest-index arm whose fit
// is not ready, else the argmax of mu_hat + width with ties to the lowest
// index.
std::size_t SelectByIndex(std::span<const EstimatorFit> fits);
std::size_t SelectByIndex(std::span<const double> indices);

// Stateful UCB-style arm selector. One instance drives one replication; call
// SelectArm() then Update() with the resulting round, T times.
class Policy {
 public:
  // Throws std::invalid_argument for an inconsistent configuration.
  explicit Policy(PolicyConfig config);

  // Throws std::logic_error once T rounds have been played.
  ArmId SelectArm();
  // Throws std::logic_error unless `round.arm()` is the pending selection.
  void Update(const ObservedRound& round);

  PolicyKind kind() const { return config_.kind; }
  const PolicyConfig& config() const { return config_; }
  std::int64_t t() const { return t_; }
  std::int64_t explore_rounds_per_arm() const { return explore_rounds_; }
  bool in_forced_phase() const;

  // Pulls of `arm`, including rounds the estimator ignores.
  std::int64_t pulls(ArmId arm) const { return pulls_.at(arm.index); }
  const SufficientStats& stats(ArmId arm) const { return stats_.at(arm.index); }
  const EstimatorFit& fit(ArmId arm) const { return fits_.at(arm.index); }

 private:
  EstimatorFit ComputeFit(std::size_t arm) const;

  PolicyConfig config_;
  UcbParams params_;
  std::int64_t explore_rounds_ = 0;
  std::int64_t t_ = 0;
  std::optional<ArmId> pending_;
  std::vector<std::int64_t> pulls_;
  std::vector<SufficientStats> stats_;
  std::vector<EstimatorFit> fits_;
};

}  // namespace mbandit

#endif  // MBANDIT_POLICIES_H_
