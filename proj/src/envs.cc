#include "mbandit/envs.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mbandit/linalg.h"

namespace mbandit {

namespace {

constexpr double kRowSumTol = 1e-12;

void CheckRowStochastic(const Eigen::MatrixXd& p, const char* name) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    if (std::abs(p.row(r).sum() - 1.0) > kRowSumTol) {
      throw std::invalid_argument(std::string(name) + ": row " +
                                  std::to_string(r) + " does not sum to 1");
    }
    if ((p.row(r).array() < 0.0).any()) {
      throw std::invalid_argument(std::string(name) + ": negative entry");
    }
  }
}

void CheckPositiveProbabilities(const Eigen::MatrixXd& m, const char* name) {
  if ((m.array() <= 0.0).any() || (m.array() > 1.0).any()) {
    throw std::invalid_argument(std::string(name) +
                                ": entries must lie in (0, 1]");
  }
}

void CheckOutcomeLaws(const std::vector<Eigen::MatrixXd>& q, Eigen::Index n,
                      Eigen::Index k, Eigen::Index l) {
  if (static_cast<Eigen::Index>(q.size()) != n) {
    throw std::invalid_argument("q: need one K x L slice per arm");
  }
  for (const auto& slice : q) {
    if (slice.rows() != k || slice.cols() != l) {
      throw std::invalid_argument("q: slice must be K x L");
    }
    CheckRowStochastic(slice, "q");
  }
}

}  // namespace

// --- Environment -----------------------------------------------------------

void Environment::CheckArm(ArmId arm) const {
  if (arm.index >= num_arms()) {
    throw std::out_of_range("arm " + std::to_string(arm.index) +
                            " out of range for " +
                            std::to_string(num_arms()) + " arms");
  }
}

ObservedRound Environment::Step(ArmId arm, RngStream& rng) const {
  CheckArm(arm);
  const FullDraw d = Draw(arm, rng);
  return MakeRound(arm, d.y, d.o_y, d.m, d.o_m);
}

ArmId Environment::OptimalArm() const {
  std::size_t best = 0;
  double best_mean = TrueMean(ArmId(0));
  for (std::size_t a = 1; a < num_arms(); ++a) {
    const double m = TrueMean(ArmId(a));
    if (m > best_mean) {
      best_mean = m;
      best = a;
    }
  }
  return ArmId(best);
}

double Environment::OptimalMean() const { return TrueMean(OptimalArm()); }

// --- McarEnv ---------------------------------------------------------------

McarEnv::McarEnv(std::vector<double> mu, double gamma, double noise_std)
    : mu_(std::move(mu)), gamma_(gamma), noise_std_(noise_std) {
  if (mu_.empty()) throw std::invalid_argument("mcar: need at least one arm");
  if (!(gamma_ > 0.0 && gamma_ <= 1.0)) {
    throw std::invalid_argument("mcar: gamma must lie in (0, 1]");
  }
  if (noise_std_ < 0.0) throw std::invalid_argument("mcar: noise_std < 0");
}

FullDraw McarEnv::Draw(ArmId arm, RngStream& rng) const {
  FullDraw d;
  d.y = rng.Normal(mu_[arm.index], noise_std_);
  d.o_y = rng.Bernoulli(gamma_);
  d.m = MediatorValue(0);
  d.o_m = true;
  return d;
}

double McarEnv::TrueMean(ArmId arm) const {
  CheckArm(arm);
  return mu_[arm.index];
}

// --- MarEnv ----------------------------------------------------------------

MarEnv::MarEnv(Eigen::MatrixXd mu, Eigen::MatrixXd gamma, Eigen::MatrixXd p,
               double noise_std)
    : mu_(std::move(mu)),
      gamma_(std::move(gamma)),
      p_(std::move(p)),
      noise_std_(noise_std) {
  Validate();
}

MarEnv MarEnv::Categorical(OutcomeAlphabet alphabet,
                           std::vector<Eigen::MatrixXd> q,
                           Eigen::MatrixXd gamma, Eigen::MatrixXd p) {
  CheckOutcomeLaws(q, p.rows(), p.cols(), alphabet.size());
  MarEnv env;
  const Eigen::Map<const Eigen::VectorXd> y(alphabet.values().data(),
                                            alphabet.size());
  env.mu_.resize(p.rows(), p.cols());
  for (Eigen::Index a = 0; a < p.rows(); ++a) {
    env.mu_.row(a) = (q[a] * y).transpose();
  }
  env.gamma_ = std::move(gamma);
  env.p_ = std::move(p);
  env.noise_std_ = 0.0;
  env.alphabet_ = std::move(alphabet);
  env.q_ = std::move(q);
  env.Validate();
  return env;
}

void MarEnv::Validate() const {
  if (mu_.rows() == 0 || mu_.cols() == 0) {
    throw std::invalid_argument("mar: need at least one arm and mediator");
  }
  if (gamma_.rows() != mu_.rows() || gamma_.cols() != mu_.cols() ||
      p_.rows() != mu_.rows() || p_.cols() != mu_.cols()) {
    throw std::invalid_argument("mar: mu, gamma and p must all be n x K");
  }
  CheckRowStochastic(p_, "mar p");
  if ((p_.array() <= 0.0).any()) {
    throw std::invalid_argument("mar p: entries must be positive");
  }
  CheckPositiveProbabilities(gamma_, "mar gamma");
  if (noise_std_ < 0.0) throw std::invalid_argument("mar: noise_std < 0");
}

FullDraw MarEnv::DrawLatent(ArmId arm, RngStream& rng) const {
  const auto a = static_cast<Eigen::Index>(arm.index);
  const Eigen::RowVectorXd prow = p_.row(a);
  FullDraw d;
  const std::size_t m =
      rng.Categorical(std::span<const double>(prow.data(), prow.size()));
  d.m = MediatorValue(m);
  if (alphabet_) {
    const Eigen::RowVectorXd qrow = q_[arm.index].row(m);
    const std::size_t yi =
        rng.Categorical(std::span<const double>(qrow.data(), qrow.size()));
    d.y_index = yi;
    d.y = (*alphabet_)[yi];
  } else {
    d.y = rng.Normal(mu_(a, m), noise_std_);
  }
  return d;
}

FullDraw MarEnv::Draw(ArmId arm, RngStream& rng) const {
  FullDraw d = DrawLatent(arm, rng);
  d.o_y = rng.Bernoulli(gamma_(arm.index, d.m.index));
  d.o_m = true;
  return d;
}

double MarEnv::TrueMean(ArmId arm) const {
  CheckArm(arm);
  return p_.row(arm.index).dot(mu_.row(arm.index));
}

double MarEnv::InverseObservationMass(ArmId arm) const {
  CheckArm(arm);
  return (p_.row(arm.index).array() / gamma_.row(arm.index).array()).sum();
}

// --- MnarEnv ---------------------------------------------------------------

MnarEnv::MnarEnv(OutcomeAlphabet alphabet, Eigen::MatrixXd p,
                 std::vector<Eigen::MatrixXd> q, Eigen::MatrixXd gamma_y)
    : alphabet_(std::move(alphabet)),
      p_(std::move(p)),
      q_(std::move(q)),
      gamma_y_(std::move(gamma_y)) {
  if (!alphabet_.IsNormalized()) {
    throw std::invalid_argument("mnar: outcome alphabet must have sum |y| = 1");
  }
  if (p_.rows() == 0 || p_.cols() == 0) {
    throw std::invalid_argument("mnar: need at least one arm and mediator");
  }
  CheckRowStochastic(p_, "mnar p");
  CheckOutcomeLaws(q_, p_.rows(), p_.cols(), alphabet_.size());
  if (gamma_y_.rows() != p_.rows() ||
      gamma_y_.cols() != static_cast<Eigen::Index>(alphabet_.size())) {
    throw std::invalid_argument("mnar: gamma_y must be n x L");
  }
  CheckPositiveProbabilities(gamma_y_, "mnar gamma_y");
  for (std::size_t a = 0; a < num_arms(); ++a) {
    if (!std::isfinite(Kappa(ArmId(a)))) {
      throw std::invalid_argument("mnar: Theta for arm " + std::to_string(a) +
                                  " is rank deficient");
    }
  }
}

FullDraw MnarEnv::Draw(ArmId arm, RngStream& rng) const {
  const Eigen::RowVectorXd prow = p_.row(arm.index);
  const std::size_t m =
      rng.Categorical(std::span<const double>(prow.data(), prow.size()));
  const Eigen::RowVectorXd qrow = q_[arm.index].row(m);
  const std::size_t yi =
      rng.Categorical(std::span<const double>(qrow.data(), qrow.size()));
  FullDraw d;
  d.m = MediatorValue(m);
  d.o_m = true;
  d.y_index = yi;
  d.y = alphabet_[yi];
  d.o_y = rng.Bernoulli(gamma_y_(arm.index, yi));
  return d;
}

Eigen::VectorXd MnarEnv::OutcomeLaw(ArmId arm) const {
  CheckArm(arm);
  return (p_.row(arm.index) * q_[arm.index]).transpose();
}

double MnarEnv::TrueMean(ArmId arm) const {
  const Eigen::VectorXd law = OutcomeLaw(arm);
  double mu = 0.0;
  for (std::size_t y = 0; y < alphabet_.size(); ++y) mu += law(y) * alphabet_[y];
  return mu;
}

Eigen::MatrixXd MnarEnv::Theta(ArmId arm) const {
  CheckArm(arm);
  const auto a = static_cast<Eigen::Index>(arm.index);
  Eigen::MatrixXd theta = q_[arm.index];
  for (Eigen::Index m = 0; m < theta.rows(); ++m) {
    theta.row(m) = p_(a, m) * theta.row(m).cwiseProduct(gamma_y_.row(a));
  }
  return theta;
}

Eigen::VectorXd MnarEnv::MissingMass(ArmId arm) const {
  CheckArm(arm);
  const auto a = static_cast<Eigen::Index>(arm.index);
  const Eigen::VectorXd miss =
      (Eigen::RowVectorXd::Ones(gamma_y_.cols()) - gamma_y_.row(a)).transpose();
  return p_.row(a).transpose().cwiseProduct(q_[arm.index] * miss);
}

double MnarEnv::Kappa(ArmId arm) const {
  return InfNormConditionNumber(Theta(arm));
}

// --- MissingMedEnv ---------------------------------------------------------

MissingMedEnv::MissingMedEnv(MarEnv base, Eigen::MatrixXd lambda,
                             Variant variant)
    : base_(std::move(base)), lambda_(std::move(lambda)), variant_(variant) {
  if (lambda_.rows() != static_cast<Eigen::Index>(base_.num_arms()) ||
      lambda_.cols() != static_cast<Eigen::Index>(base_.num_mediators())) {
    throw std::invalid_argument("missing mediator: lambda must be n x K");
  }
  CheckPositiveProbabilities(lambda_, "missing mediator lambda");
}

MissingMedEnv MissingMedEnv::Mar(MarEnv base, std::vector<double> lambda) {
  if (lambda.size() != base.num_arms()) {
    throw std::invalid_argument("missing mediator: need one lambda per arm");
  }
  Eigen::MatrixXd mat(base.num_arms(), base.num_mediators());
  for (std::size_t a = 0; a < lambda.size(); ++a) mat.row(a).setConstant(lambda[a]);
  return MissingMedEnv(std::move(base), std::move(mat), Variant::kMar);
}

MissingMedEnv MissingMedEnv::Mnar(MarEnv base, Eigen::MatrixXd lambda) {
  if (!base.is_categorical()) {
    throw std::invalid_argument(
        "missing mediator (mnar): base environment must have categorical "
        "outcomes");
  }
  return MissingMedEnv(std::move(base), std::move(lambda), Variant::kMnar);
}

FullDraw MissingMedEnv::Draw(ArmId arm, RngStream& rng) const {
  FullDraw d = base_.DrawLatent(arm, rng);
  d.o_y = rng.Bernoulli(base_.gamma()(arm.index, d.m.index));
  d.o_m = rng.Bernoulli(lambda_(arm.index, d.m.index));
  return d;
}

Eigen::MatrixXd MissingMedEnv::ThetaObserved(ArmId arm) const {
  CheckArm(arm);
  if (!base_.is_categorical()) {
    throw std::logic_error("ThetaObserved needs a categorical base");
  }
  const auto a = static_cast<Eigen::Index>(arm.index);
  Eigen::MatrixXd theta = base_.q(arm);
  for (Eigen::Index m = 0; m < theta.rows(); ++m) {
    theta.row(m) *= base_.p()(a, m) * base_.gamma()(a, m) * lambda_(a, m);
  }
  return theta;
}

Eigen::VectorXd MissingMedEnv::MediatorMissingMass(ArmId arm) const {
  CheckArm(arm);
  if (!base_.is_categorical()) {
    throw std::logic_error("MediatorMissingMass needs a categorical base");
  }
  const auto a = static_cast<Eigen::Index>(arm.index);
  const Eigen::MatrixXd& q = base_.q(arm);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q.cols());
  for (Eigen::Index m = 0; m < q.rows(); ++m) {
    b += base_.p()(a, m) * base_.gamma()(a, m) * (1.0 - lambda_(a, m)) *
         q.row(m).transpose();
  }
  return b;
}

double MissingMedEnv::Kappa(ArmId arm) const {
  return InfNormConditionNumber(ThetaObserved(arm));
}

// --- BootstrapEnv ----------------------------------------------------------

BootstrapEnv::BootstrapEnv(std::vector<std::vector<BootstrapRecord>> pools,
                           std::size_t num_mediators,
                           Eigen::MatrixXd synthetic_gamma)
    : pools_(std::move(pools)),
      num_mediators_(num_mediators),
      gamma_(std::move(synthetic_gamma)) {
  if (pools_.empty()) throw std::invalid_argument("bootstrap: no arms");
  if (gamma_.rows() != static_cast<Eigen::Index>(pools_.size()) ||
      gamma_.cols() != static_cast<Eigen::Index>(num_mediators_)) {
    throw std::invalid_argument("bootstrap: gamma must be n x K");
  }
  CheckPositiveProbabilities(gamma_, "bootstrap gamma");
  for (std::size_t a = 0; a < pools_.size(); ++a) {
    if (pools_[a].empty()) {
      throw std::invalid_argument("bootstrap: arm " + std::to_string(a) +
                                  " has an empty pool");
    }
    double sum = 0.0;
    for (const auto& r : pools_[a]) {
      if (r.outcome < 0.0 || r.outcome > 1.0) {
        throw std::invalid_argument("bootstrap: outcome outside [0, 1]");
      }
      if (r.mediator.index >= num_mediators_) {
        throw std::invalid_argument("bootstrap: mediator out of range");
      }
      sum += r.outcome;
    }
    means_.push_back(sum / static_cast<double>(pools_[a].size()));
  }
}

FullDraw BootstrapEnv::Draw(ArmId arm, RngStream& rng) const {
  const auto& pool = pools_[arm.index];
  const BootstrapRecord& rec = pool[rng.UniformIndex(pool.size())];
  FullDraw d;
  d.y = rec.outcome;
  d.m = rec.mediator;
  d.o_m = true;
  d.o_y = rng.Bernoulli(gamma_(arm.index, rec.mediator.index));
  return d;
}

double BootstrapEnv::TrueMean(ArmId arm) const {
  CheckArm(arm);
  return means_[arm.index];
}

Eigen::MatrixXd BootstrapEnv::MediatorLaw() const {
  Eigen::MatrixXd law = Eigen::MatrixXd::Zero(pools_.size(), num_mediators_);
  for (std::size_t a = 0; a < pools_.size(); ++a) {
    for (const auto& r : pools_[a]) law(a, r.mediator.index) += 1.0;
    law.row(a) /= static_cast<double>(pools_[a].size());
  }
  return law;
}

}  // namespace mbandit
