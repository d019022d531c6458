#ifndef MBANDIT_ESTIMATORS_H_
#define MBANDIT_ESTIMATORS_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mbandit/core.h"

namespace mbandit {

// Per-arm tallies. Every counter is nondecreasing and only Record() mutates
// them. Mediator-indexed counters only see rounds whose mediator was observed.
class SufficientStats {
 public:
  explicit SufficientStats(std::size_t num_mediators,
                           std::optional<OutcomeAlphabet> alphabet = std::nullopt);

  // Throws std::invalid_argument if the mediator is out of range or an
  // observed outcome is not in the alphabet.
  void Record(const ObservedRound& round);

  std::size_t num_mediators() const { return num_mediators_; }
  std::size_t num_outcomes() const { return alphabet_ ? alphabet_->size() : 0; }
  const std::optional<OutcomeAlphabet>& alphabet() const { return alphabet_; }

  std::int64_t pulls() const { return pulls_; }                        // T_a
  std::int64_t observed() const { return observed_; }                  // O^Y = 1
  double observed_sum() const { return observed_sum_; }
  std::int64_t mediator_observed() const { return mediator_observed_; }  // O^M = 1
  std::int64_t both_observed() const { return both_observed_; }
  // s[m]: rounds with M = m observed.
  std::int64_t mediator_count(std::size_t m) const { return mediator_count_[m]; }
  // T_{m,a,o}: M = m observed and O^Y = 1.
  std::int64_t observed_by_mediator(std::size_t m) const {
    return observed_by_mediator_[m];
  }
  double sum_by_mediator(std::size_t m) const { return sum_by_mediator_[m]; }
  // b[m]: M = m observed and O^Y = 0.
  std::int64_t unobserved_by_mediator(std::size_t m) const {
    return mediator_count_[m] - observed_by_mediator_[m];
  }
  // (m, y, O^M = 1, O^Y = 1) counts; categorical outcomes only.
  std::int64_t joint(std::size_t m, std::size_t y) const {
    return joint_[m * num_outcomes() + y];
  }
  // (y, O^M = 0, O^Y = 1) counts; categorical outcomes only.
  std::int64_t outcome_with_missing_mediator(std::size_t y) const {
    return outcome_missing_mediator_[y];
  }

 private:
  std::size_t num_mediators_;
  std::optional<OutcomeAlphabet> alphabet_;
  std::int64_t pulls_ = 0;
  std::int64_t observed_ = 0;
  double observed_sum_ = 0.0;
  std::int64_t mediator_observed_ = 0;
  std::int64_t both_observed_ = 0;
  std::vector<std::int64_t> mediator_count_;
  std::vector<std::int64_t> observed_by_mediator_;
  std::vector<double> sum_by_mediator_;
  std::vector<std::int64_t> joint_;
  std::vector<std::int64_t> outcome_missing_mediator_;
};

struct UcbParams {
  double alpha = 2.0;
  std::int64_t horizon = 1;

  double LogHorizon() const {
    return std::log(static_cast<double>(horizon));
  }
};

// Estimate of an arm's mean with its confidence radius. A fit that is not
// ready (some denominator is zero) has infinite width.
struct EstimatorFit {
  double mu_hat = 0.0;
  double width = std::numeric_limits<double>::infinity();
  bool ready = false;
  std::optional<double> gamma_hat;
  std::optional<double> lambda_hat;  // mediator observation rate
  std::optional<std::vector<double>> p_hat;
  std::optional<double> kappa_hat;
  int clipped = 0;  // negative odds-ratio entries clipped to zero

  double Index() const {
    return ready ? mu_hat + width : std::numeric_limits<double>::infinity();
  }
};

// Mean of observed rewards with width sqrt(alpha log T / (2 T_{a,o})).
EstimatorFit McarMean(const SufficientStats& stats, const UcbParams& params);

// Mediator-stratified plug-in. With `known_p` the mixture weights are the
// supplied probabilities; otherwise p_hat = s / T_a and the width carries the
// factor 8.
EstimatorFit MarPlugin(const SufficientStats& stats,
                       std::optional<std::span<const double>> known_p,
                       const UcbParams& params);

// Inverse-probability weighted mean over one arm's rounds:
//   (1 / T_a) sum_t Y_t 1{O^Y_t = 1} / gamma[M_t].
// Throws std::invalid_argument for a nonpositive gamma entry or a round with
// an unobserved mediator. `width` is left infinite.
EstimatorFit HtEstimate(std::span<const ObservedRound> rounds,
                        std::span<const double> gamma);

// Augmented IPW with working models gamma_model[m] and outcome_model[m]:
//   (1 / T_a) sum_t (Y_t O_t - (O_t - g[M_t]) mu[M_t]) / g[M_t].
EstimatorFit AipwEstimate(std::span<const ObservedRound> rounds,
                          std::span<const double> gamma_model,
                          std::span<const double> outcome_model);

// Result of the outcome odds-ratio identification step.
struct MnarIdentification {
  Eigen::VectorXd inverse_gamma;  // 1 + OR_y = 1 / gamma_y
  Eigen::VectorXd outcome_law;    // P(Y = y | a)
  double mu = 0.0;
  double gamma_hat = 1.0;         // 1 / max_y inverse_gamma
  double kappa = 1.0;
  int clipped = 0;
};

// theta[m, y] = P(m, y, O^Y = 1 | a), missing[m] = P(m, O^Y = 0 | a).
// Solves theta x = missing, clips x at 0 and recovers P(y | a) and mu_a.
// Propagates IllConditionedError.
MnarIdentification IdentifyMnar(const Eigen::MatrixXd& theta,
                                const Eigen::VectorXd& missing,
                                const OutcomeAlphabet& alphabet);

// Empirical version of IdentifyMnar plus the index width
//   8 L C_a / (|theta|_inf gamma_hat) sqrt(alpha log T / T_a)
//     + K / gamma_hat sqrt(alpha log T / T_{a,o}).
// When `condition_bound` is empty, kappa(theta_hat) stands in for C_a.
EstimatorFit MnarEstimate(const SufficientStats& stats,
                          std::optional<double> condition_bound,
                          const UcbParams& params);

// Plug-in over rounds with an observed mediator: p_hat = s / T_{a,oM},
// width 8 sqrt(alpha log T / 2 sum p_hat^2 / T_{m,a,o}).
EstimatorFit MissingMedMarEstimate(const SufficientStats& stats,
                                   const UcbParams& params);

struct MissingMedIdentification {
  Eigen::VectorXd inverse_lambda;  // 1 + OR_m = 1 / lambda_m
  double lambda_hat = 1.0;         // 1 / max_m inverse_lambda
  double kappa = 1.0;
  int clipped = 0;
};

// theta[m, y] = P(m, y, O^M = 1, O^Y = 1 | a) (K x L),
// missing[y] = P(y, O^M = 0, O^Y = 1 | a) (L). Solves theta^T x = missing.
MissingMedIdentification IdentifyMissingMediator(const Eigen::MatrixXd& theta,
                                                 const Eigen::VectorXd& missing);

// p_hat[m] = (1 + x[m]) P_hat(M = m, O^M = 1 | a), mu_hat = sum p_hat mu_hat_m.
EstimatorFit MissingMedMnarEstimate(const SufficientStats& stats,
                                    std::optional<double> condition_bound,
                                    const UcbParams& params);

}  // namespace mbandit

#endif  // MBANDIT_ESTIMATORS_H_
