#include "mbandit/estimators.h"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mbandit/linalg.h"

namespace mbandit {

SufficientStats::SufficientStats(std::size_t num_mediators,
                                 std::optional<OutcomeAlphabet> alphabet)
    : num_mediators_(num_mediators),
      alphabet_(std::move(alphabet)),
      mediator_count_(num_mediators, 0),
      observed_by_mediator_(num_mediators, 0),
      sum_by_mediator_(num_mediators, 0.0),
      joint_(num_mediators * num_outcomes(), 0),
      outcome_missing_mediator_(num_outcomes(), 0) {
  if (num_mediators_ == 0) {
    throw std::invalid_argument("stats: need at least one mediator value");
  }
}

void SufficientStats::Record(const ObservedRound& round) {
  std::optional<std::size_t> y_index;
  if (round.o_y() && alphabet_) {
    y_index = alphabet_->IndexOf(*round.y_obs());
    if (!y_index) {
      throw std::invalid_argument("stats: observed outcome " +
                                  std::to_string(*round.y_obs()) +
                                  " is not in the alphabet");
    }
  }
  if (round.o_m() && round.m_obs()->index >= num_mediators_) {
    throw std::invalid_argument("stats: mediator out of range");
  }

  ++pulls_;
  if (round.o_y()) {
    ++observed_;
    observed_sum_ += *round.y_obs();
  }
  if (round.o_m()) {
    const std::size_t m = round.m_obs()->index;
    ++mediator_observed_;
    ++mediator_count_[m];
    if (round.o_y()) {
      ++both_observed_;
      ++observed_by_mediator_[m];
      sum_by_mediator_[m] += *round.y_obs();
      if (y_index) ++joint_[m * num_outcomes() + *y_index];
    }
  } else if (round.o_y() && y_index) {
    ++outcome_missing_mediator_[*y_index];
  }
}

EstimatorFit McarMean(const SufficientStats& stats, const UcbParams& params) {
  EstimatorFit fit;
  if (stats.observed() == 0) return fit;
  const double n_obs = static_cast<double>(stats.observed());
  fit.mu_hat = stats.observed_sum() / n_obs;
  fit.width = std::sqrt(params.alpha * params.LogHorizon() / (2.0 * n_obs));
  fit.ready = true;
  return fit;
}

namespace {

// Shared body of the stratified plug-in estimators. `weights` are the mixture
// weights; a cell with positive weight and no observed reward makes the fit
// not ready.
EstimatorFit StratifiedPlugin(const SufficientStats& stats,
                              const std::vector<double>& weights,
                              double width_factor, const UcbParams& params) {
  EstimatorFit fit;
  double mu = 0.0;
  double var = 0.0;
  for (std::size_t m = 0; m < stats.num_mediators(); ++m) {
    if (weights[m] == 0.0) continue;
    const std::int64_t obs = stats.observed_by_mediator(m);
    if (obs == 0) return fit;
    mu += weights[m] * stats.sum_by_mediator(m) / static_cast<double>(obs);
    var += weights[m] * weights[m] / static_cast<double>(obs);
  }
  fit.mu_hat = mu;
  fit.width =
      width_factor * std::sqrt(params.alpha * params.LogHorizon() / 2.0 * var);
  fit.ready = true;
  fit.p_hat = weights;
  return fit;
}

double Ratio(std::int64_t num, std::int64_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EstimatorFit MarPlugin(const SufficientStats& stats,
                       std::optional<std::span<const double>> known_p,
                       const UcbParams& params) {
  const std::size_t k = stats.num_mediators();
  if (known_p) {
    if (known_p->size() != k) {
      throw std::invalid_argument("mar plug-in: known p has wrong length");
    }
    return StratifiedPlugin(stats, {known_p->begin(), known_p->end()}, 1.0,
                            params);
  }
  if (stats.pulls() == 0) return EstimatorFit{};
  std::vector<double> p_hat(k);
  for (std::size_t m = 0; m < k; ++m) {
    p_hat[m] = Ratio(stats.mediator_count(m), stats.pulls());
  }
  return StratifiedPlugin(stats, p_hat, 8.0, params);
}

EstimatorFit HtEstimate(std::span<const ObservedRound> rounds,
                        std::span<const double> gamma) {
  for (double g : gamma) {
    if (!(g > 0.0)) {
      throw std::invalid_argument("HT estimate: positivity violated (gamma <= 0)");
    }
  }
  EstimatorFit fit;
  if (rounds.empty()) return fit;
  double total = 0.0;
  for (const auto& r : rounds) {
    if (!r.o_m()) {
      throw std::invalid_argument("HT estimate: mediator must be observed");
    }
    const std::size_t m = r.m_obs()->index;
    if (m >= gamma.size()) throw std::invalid_argument("HT estimate: mediator out of range");
    if (r.o_y()) total += *r.y_obs() / gamma[m];
  }
  fit.mu_hat = total / static_cast<double>(rounds.size());
  fit.ready = true;
  return fit;
}

EstimatorFit AipwEstimate(std::span<const ObservedRound> rounds,
                          std::span<const double> gamma_model,
                          std::span<const double> outcome_model) {
  if (gamma_model.size() != outcome_model.size()) {
    throw std::invalid_argument("AIPW: model sizes differ");
  }
  for (double g : gamma_model) {
    if (!(g > 0.0)) throw std::invalid_argument("AIPW: gamma model entry <= 0");
  }
  EstimatorFit fit;
  if (rounds.empty()) return fit;
  double total = 0.0;
  for (const auto& r : rounds) {
    if (!r.o_m()) throw std::invalid_argument("AIPW: mediator must be observed");
    const std::size_t m = r.m_obs()->index;
    if (m >= gamma_model.size()) throw std::invalid_argument("AIPW: mediator out of range");
    const double o = r.o_y() ? 1.0 : 0.0;
    const double y = r.o_y() ? *r.y_obs() : 0.0;
    total += (y * o - (o - gamma_model[m]) * outcome_model[m]) / gamma_model[m];
  }
  fit.mu_hat = total / static_cast<double>(rounds.size());
  fit.ready = true;
  return fit;
}

namespace {

// Clips negative odds ratios to zero and returns 1 + x.
Eigen::VectorXd OneplusClipped(const Eigen::VectorXd& x, int& clipped) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) < 0.0) ++clipped;
    out(i) = 1.0 + std::max(0.0, x(i));
  }
  return out;
}

}  // namespace

MnarIdentification IdentifyMnar(const Eigen::MatrixXd& theta,
                                const Eigen::VectorXd& missing,
                                const OutcomeAlphabet& alphabet) {
  if (theta.cols() != static_cast<Eigen::Index>(alphabet.size())) {
    throw std::invalid_argument("MNAR identification: theta must be K x L");
  }
  const PinvSolution sol = PinvSolveInfNorm(theta, missing);
  MnarIdentification out;
  out.kappa = sol.kappa;
  out.inverse_gamma = OneplusClipped(sol.x, out.clipped);
  // P(y | a) = sum_m (1 + OR_y) P(m, y, O^Y = 1 | a).
  out.outcome_law =
      out.inverse_gamma.cwiseProduct(theta.colwise().sum().transpose());
  out.mu = 0.0;
  for (std::size_t y = 0; y < alphabet.size(); ++y) {
    out.mu += alphabet[y] * out.outcome_law(y);
  }
  out.gamma_hat = 1.0 / out.inverse_gamma.maxCoeff();
  return out;
}

EstimatorFit MnarEstimate(const SufficientStats& stats,
                          std::optional<double> condition_bound,
                          const UcbParams& params) {
  if (!stats.alphabet()) {
    throw std::invalid_argument("MNAR estimate: stats need an outcome alphabet");
  }
  EstimatorFit fit;
  // theta_hat only sees rounds with both M and Y observed.
  if (stats.pulls() == 0 || stats.both_observed() == 0) return fit;
  const std::size_t k = stats.num_mediators();
  const std::size_t l = stats.num_outcomes();
  const double t_a = static_cast<double>(stats.pulls());
  Eigen::MatrixXd theta(k, l);
  Eigen::VectorXd missing(k);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t y = 0; y < l; ++y) theta(m, y) = stats.joint(m, y) / t_a;
    missing(m) = stats.unobserved_by_mediator(m) / t_a;
  }
  MnarIdentification id;
  try {
    id = IdentifyMnar(theta, missing, *stats.alphabet());
  } catch (const IllConditionedError& e) {
    fit.kappa_hat = e.kappa();
    return fit;
  }
  const double c_a = condition_bound.value_or(id.kappa);
  const double log_t = params.alpha * params.LogHorizon();
  fit.mu_hat = id.mu;
  fit.gamma_hat = id.gamma_hat;
  fit.kappa_hat = id.kappa;
  fit.clipped = id.clipped;
  fit.width = 8.0 * (static_cast<double>(l) * c_a /
                     (InfNorm(theta) * id.gamma_hat)) *
                  std::sqrt(log_t / t_a) +
              (static_cast<double>(k) / id.gamma_hat) *
                  std::sqrt(log_t / static_cast<double>(stats.observed()));
  fit.ready = true;
  return fit;
}

EstimatorFit MissingMedMarEstimate(const SufficientStats& stats,
                                   const UcbParams& params) {
  if (stats.mediator_observed() == 0) return EstimatorFit{};
  std::vector<double> p_hat(stats.num_mediators());
  for (std::size_t m = 0; m < p_hat.size(); ++m) {
    p_hat[m] = Ratio(stats.mediator_count(m), stats.mediator_observed());
  }
  return StratifiedPlugin(stats, p_hat, 8.0, params);
}

MissingMedIdentification IdentifyMissingMediator(
    const Eigen::MatrixXd& theta, const Eigen::VectorXd& missing) {
  // theta is K x L and the unknowns are indexed by mediator, so the system is
  // theta^T x = missing.
  const PinvSolution sol = PinvSolveInfNorm(theta.transpose(), missing);
  MissingMedIdentification out;
  out.kappa = sol.kappa;
  out.inverse_lambda = OneplusClipped(sol.x, out.clipped);
  out.lambda_hat = 1.0 / out.inverse_lambda.maxCoeff();
  return out;
}

EstimatorFit MissingMedMnarEstimate(const SufficientStats& stats,
                                    std::optional<double> condition_bound,
                                    const UcbParams& params) {
  if (!stats.alphabet()) {
    throw std::invalid_argument(
        "missing-mediator MNAR estimate: stats need an outcome alphabet");
  }
  EstimatorFit fit;
  if (stats.pulls() == 0 || stats.both_observed() == 0) return fit;
  const std::size_t k = stats.num_mediators();
  const std::size_t l = stats.num_outcomes();
  const double t_a = static_cast<double>(stats.pulls());
  Eigen::MatrixXd theta(k, l);
  Eigen::VectorXd missing(l);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t y = 0; y < l; ++y) theta(m, y) = stats.joint(m, y) / t_a;
  }
  for (std::size_t y = 0; y < l; ++y) {
    missing(y) = stats.outcome_with_missing_mediator(y) / t_a;
  }
  MissingMedIdentification id;
  try {
    id = IdentifyMissingMediator(theta, missing);
  } catch (const IllConditionedError& e) {
    fit.kappa_hat = e.kappa();
    return fit;
  }
  std::vector<double> p_hat(k);
  double mu = 0.0;
  double var = 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    p_hat[m] = id.inverse_lambda(m) * stats.mediator_count(m) / t_a;
    if (p_hat[m] == 0.0) continue;
    const std::int64_t obs = stats.observed_by_mediator(m);
    if (obs == 0) return fit;
    mu += p_hat[m] * stats.sum_by_mediator(m) / static_cast<double>(obs);
    var += 4.0 * p_hat[m] * p_hat[m] / static_cast<double>(obs);
  }
  const double c_a = condition_bound.value_or(InfNormConditionNumber(theta));
  const double log_t = params.alpha * params.LogHorizon();
  const double inv_lambda = 1.0 / id.lambda_hat;
  fit.mu_hat = mu;
  fit.lambda_hat = id.lambda_hat;
  fit.kappa_hat = id.kappa;
  fit.clipped = id.clipped;
  fit.width = 2.0 * std::sqrt(log_t / (2.0 * t_a)) *
                  (8.0 * c_a / InfNorm(theta) * static_cast<double>(k) *
                       inv_lambda +
                   inv_lambda) +
              std::sqrt(log_t / 2.0 * var);
  fit.ready = true;
  return fit;
}

}  // namespace mbandit
