#include "mbandit/policies.h"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mbandit {

namespace {

struct KindName {
  PolicyKind kind;
  std::string_view name;
};

constexpr std::array<KindName, 7> kKindNames = {{
    {PolicyKind::kMcarUcb, "mcar_ucb"},
    {PolicyKind::kMarUcbKnownP, "mar_ucb_known_p"},
    {PolicyKind::kMarUcbUnknownP, "mar_ucb_unknown_p"},
    {PolicyKind::kMnarUcb, "mnar_ucb"},
    {PolicyKind::kMissingMedMarUcb, "missing_med_mar_ucb"},
    {PolicyKind::kMissingMedMnarUcb, "missing_med_mnar_ucb"},
    {PolicyKind::kNaiveUcb, "naive_ucb"},
}};

constexpr std::array<PolicyKind, 7> kAllKinds = {
    PolicyKind::kMcarUcb,          PolicyKind::kMarUcbKnownP,
    PolicyKind::kMarUcbUnknownP,   PolicyKind::kMnarUcb,
    PolicyKind::kMissingMedMarUcb, PolicyKind::kMissingMedMnarUcb,
    PolicyKind::kNaiveUcb,
};

bool UsesDegenerateMediator(PolicyKind kind) {
  return kind == PolicyKind::kMcarUcb || kind == PolicyKind::kNaiveUcb;
}

bool NeedsAlphabet(PolicyKind kind) {
  return kind == PolicyKind::kMnarUcb || kind == PolicyKind::kMissingMedMnarUcb;
}

}  // namespace

std::string_view PolicyKindName(PolicyKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

std::optional<PolicyKind> ParsePolicyKind(std::string_view name) {
  for (const auto& kn : kKindNames) {
    if (kn.name == name) return kn.kind;
  }
  return std::nullopt;
}

std::span<const PolicyKind> AllPolicyKinds() { return kAllKinds; }

bool HasForcedPhase(PolicyKind kind) { return !UsesDegenerateMediator(kind); }

std::int64_t ForcedPhaseLength(std::int64_t horizon) {
  const double log_t = std::log(static_cast<double>(horizon));
  const auto len = static_cast<std::int64_t>(std::ceil(log_t * log_t));
  return std::max<std::int64_t>(1, len);
}

std::size_t SelectByIndex(std::span<const EstimatorFit> fits) {
  for (std::size_t a = 0; a < fits.size(); ++a) {
    if (!fits[a].ready) return a;
  }
  std::vector<double> indices(fits.size());
  for (std::size_t a = 0; a < fits.size(); ++a) indices[a] = fits[a].Index();
  return SelectByIndex(indices);
}

std::size_t SelectByIndex(std::span<const double> indices) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < indices.size(); ++a) {
    if (indices[a] > indices[best]) best = a;
  }
  return best;
}

Policy::Policy(PolicyConfig config) : config_(std::move(config)) {
  if (!(config_.alpha > 1.0)) {
    throw std::invalid_argument("policy: alpha must be > 1");
  }
  if (config_.horizon < 1) throw std::invalid_argument("policy: T must be >= 1");
  if (config_.num_arms == 0) throw std::invalid_argument("policy: no arms");
  if (config_.num_mediators == 0) {
    throw std::invalid_argument("policy: K must be >= 1");
  }
  const PolicyKind kind = config_.kind;
  if (kind == PolicyKind::kMarUcbKnownP) {
    if (!config_.known_p ||
        config_.known_p->rows() != static_cast<Eigen::Index>(config_.num_arms) ||
        config_.known_p->cols() !=
            static_cast<Eigen::Index>(config_.num_mediators)) {
      throw std::invalid_argument(
          "policy mar_ucb_known_p: known_p must be an n x K matrix");
    }
  }
  if (NeedsAlphabet(kind) && !config_.alphabet) {
    throw std::invalid_argument(std::string("policy ") +
                                std::string(PolicyKindName(kind)) +
                                ": needs a categorical outcome alphabet");
  }
  if (config_.condition_bounds &&
      config_.condition_bounds->size() != config_.num_arms) {
    throw std::invalid_argument("policy: need one condition bound per arm");
  }

  params_ = UcbParams{config_.alpha, config_.horizon};
  explore_rounds_ = HasForcedPhase(kind) ? ForcedPhaseLength(config_.horizon) : 0;
  pulls_.assign(config_.num_arms, 0);
  const std::size_t k = UsesDegenerateMediator(kind) ? 1 : config_.num_mediators;
  std::optional<OutcomeAlphabet> alphabet =
      NeedsAlphabet(kind) ? config_.alphabet : std::nullopt;
  stats_.assign(config_.num_arms, SufficientStats(k, alphabet));
  fits_.resize(config_.num_arms);
  for (std::size_t a = 0; a < config_.num_arms; ++a) fits_[a] = ComputeFit(a);
}

bool Policy::in_forced_phase() const {
  return t_ < explore_rounds_ * static_cast<std::int64_t>(config_.num_arms);
}

ArmId Policy::SelectArm() {
  if (t_ >= config_.horizon) {
    throw std::logic_error("policy: horizon of " +
                           std::to_string(config_.horizon) +
                           " rounds already reached");
  }
  ArmId arm;
  if (in_forced_phase()) {
    arm = ArmId(static_cast<std::size_t>(t_) % config_.num_arms);
  } else {
    arm = ArmId(SelectByIndex(fits_));
  }
  pending_ = arm;
  return arm;
}

void Policy::Update(const ObservedRound& round) {
  if (!pending_ || round.arm() != *pending_) {
    throw std::logic_error("policy: update for arm " +
                           std::to_string(round.arm().index) +
                           " does not match the pending selection");
  }
  pending_.reset();
  const std::size_t a = round.arm().index;
  ++pulls_[a];
  ++t_;

  switch (config_.kind) {
    case PolicyKind::kMcarUcb:
    case PolicyKind::kNaiveUcb:
      // Mediator is ignored; only (Y, O^Y) enters the estimate.
      stats_[a].Record(ObservedRound(round.arm(), round.y_obs(), MediatorValue(0)));
      break;
    case PolicyKind::kMissingMedMarUcb:
      if (!round.o_m()) return;
      stats_[a].Record(round);
      break;
    default:
      stats_[a].Record(round);
      break;
  }
  fits_[a] = ComputeFit(a);
}

EstimatorFit Policy::ComputeFit(std::size_t arm) const {
  const SufficientStats& s = stats_[arm];
  std::optional<double> bound;
  if (config_.condition_bounds) bound = (*config_.condition_bounds)[arm];
  switch (config_.kind) {
    case PolicyKind::kMcarUcb:
    case PolicyKind::kNaiveUcb:
      return McarMean(s, params_);
    case PolicyKind::kMarUcbKnownP: {
      const Eigen::RowVectorXd row = config_.known_p->row(arm);
      return MarPlugin(s, std::span<const double>(row.data(), row.size()),
                       params_);
    }
    case PolicyKind::kMarUcbUnknownP:
      return MarPlugin(s, std::nullopt, params_);
    case PolicyKind::kMnarUcb:
      return MnarEstimate(s, bound, params_);
    case PolicyKind::kMissingMedMarUcb:
      return MissingMedMarEstimate(s, params_);
    case PolicyKind::kMissingMedMnarUcb:
      return MissingMedMnarEstimate(s, bound, params_);
  }
  return EstimatorFit{};
}

}  // namespace mbandit
