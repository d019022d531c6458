#ifndef MBANDIT_ENVS_H_
#define MBANDIT_ENVS_H_

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mbandit/core.h"

namespace mbandit {

// One draw of the full generative tuple, before masking. Only tests and the
// environment itself look at the hidden fields.
struct FullDraw {
  double y = 0.0;
  bool o_y = true;
  MediatorValue m;
  bool o_m = true;
  // Index of y in the outcome alphabet for categorical environments.
  std::optional<std::size_t> y_index;
};

// A stochastic bandit with missing outcomes. Environments are immutable after
// construction and take the random stream explicitly, so one instance can
// serve any number of concurrent replications.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t num_arms() const = 0;
  // Mediator alphabet size K (1 for a degenerate mediator).
  virtual std::size_t num_mediators() const = 0;
  // Outcome support for categorical environments, nullptr otherwise.
  virtual const OutcomeAlphabet* alphabet() const { return nullptr; }

  virtual FullDraw Draw(ArmId arm, RngStream& rng) const = 0;
  virtual double TrueMean(ArmId arm) const = 0;

  // Draw and mask. Throws std::out_of_range for an invalid arm.
  ObservedRound Step(ArmId arm, RngStream& rng) const;
  // argmax of TrueMean, lowest index on ties.
  ArmId OptimalArm() const;
  double OptimalMean() const;

 protected:
  void CheckArm(ArmId arm) const;
};

// Gaussian rewards with a single observation probability shared by all arms.
class McarEnv final : public Environment {
 public:
  McarEnv(std::vector<double> mu, double gamma, double noise_std = 1.0);

  std::string_view kind() const override { return "mcar"; }
  std::size_t num_arms() const override { return mu_.size(); }
  std::size_t num_mediators() const override { return 1; }
  FullDraw Draw(ArmId arm, RngStream& rng) const override;
  double TrueMean(ArmId arm) const override;

  const std::vector<double>& mu() const { return mu_; }
  double gamma() const { return gamma_; }
  double noise_std() const { return noise_std_; }

 private:
  std::vector<double> mu_;
  double gamma_;
  double noise_std_;
};

// Outcome missingness driven by (arm, mediator). Matrices are n x K with one
// row per arm. Rewards are Gaussian around mu(a, m) unless a categorical
// outcome law is supplied, in which case Y | (a, m) ~ q[a].row(m) over the
// alphabet and mu is derived from it.
class MarEnv final : public Environment {
 public:
  MarEnv(Eigen::MatrixXd mu, Eigen::MatrixXd gamma, Eigen::MatrixXd p,
         double noise_std = 1.0);

  static MarEnv Categorical(OutcomeAlphabet alphabet,
                            std::vector<Eigen::MatrixXd> q,
                            Eigen::MatrixXd gamma, Eigen::MatrixXd p);

  std::string_view kind() const override { return "mar"; }
  std::size_t num_arms() const override { return mu_.rows(); }
  std::size_t num_mediators() const override { return mu_.cols(); }
  const OutcomeAlphabet* alphabet() const override {
    return alphabet_ ? &*alphabet_ : nullptr;
  }
  FullDraw Draw(ArmId arm, RngStream& rng) const override;
  double TrueMean(ArmId arm) const override;

  // Draws (M, Y) for an arm without the outcome-missingness coin.
  FullDraw DrawLatent(ArmId arm, RngStream& rng) const;

  const Eigen::MatrixXd& mu() const { return mu_; }
  const Eigen::MatrixXd& gamma() const { return gamma_; }
  const Eigen::MatrixXd& p() const { return p_; }
  double noise_std() const { return noise_std_; }
  bool is_categorical() const { return alphabet_.has_value(); }
  // K x L outcome law for arm a; only for categorical environments.
  const Eigen::MatrixXd& q(ArmId arm) const { return q_.at(arm.index); }

  // P_a = sum_m p(a, m) / gamma(a, m).
  double InverseObservationMass(ArmId arm) const;

 private:
  MarEnv() = default;
  void Validate() const;

  Eigen::MatrixXd mu_;
  Eigen::MatrixXd gamma_;
  Eigen::MatrixXd p_;
  double noise_std_ = 1.0;
  std::optional<OutcomeAlphabet> alphabet_;
  std::vector<Eigen::MatrixXd> q_;
};

// Outcome missingness driven by the outcome value itself. The mediator is
// always observed and O^Y depends only on (arm, Y).
class MnarEnv final : public Environment {
 public:
  // p: n x K mediator law; q[a]: K x L outcome law per arm;
  // gamma_y: n x L observation probabilities.
  MnarEnv(OutcomeAlphabet alphabet, Eigen::MatrixXd p,
          std::vector<Eigen::MatrixXd> q, Eigen::MatrixXd gamma_y);

  std::string_view kind() const override { return "mnar"; }
  std::size_t num_arms() const override { return p_.rows(); }
  std::size_t num_mediators() const override { return p_.cols(); }
  const OutcomeAlphabet* alphabet() const override { return &alphabet_; }
  FullDraw Draw(ArmId arm, RngStream& rng) const override;
  double TrueMean(ArmId arm) const override;

  const Eigen::MatrixXd& p() const { return p_; }
  const Eigen::MatrixXd& q(ArmId arm) const { return q_.at(arm.index); }
  const Eigen::MatrixXd& gamma_y() const { return gamma_y_; }
  std::size_t num_outcomes() const { return alphabet_.size(); }

  // Theta_a[m, y] = P(m, y, O^Y = 1 | a).
  Eigen::MatrixXd Theta(ArmId arm) const;
  // b_a[m] = P(m, O^Y = 0 | a).
  Eigen::VectorXd MissingMass(ArmId arm) const;
  // p_{y,a} = P(Y = y | a).
  Eigen::VectorXd OutcomeLaw(ArmId arm) const;
  // kappa_inf(Theta_a).
  double Kappa(ArmId arm) const;

 private:
  OutcomeAlphabet alphabet_;
  Eigen::MatrixXd p_;
  std::vector<Eigen::MatrixXd> q_;
  Eigen::MatrixXd gamma_y_;
};

// Adds mediator missingness on top of a MAR outcome environment.
//  - kMar: O^M ~ Bernoulli(lambda_a), independent of (M, Y, O^Y) given A.
//  - kMnar: O^M ~ Bernoulli(lambda(a, m)), depending on (A, M) only. The
//    base must be categorical so the odds-ratio system is finite.
class MissingMedEnv final : public Environment {
 public:
  enum class Variant { kMar, kMnar };

  static MissingMedEnv Mar(MarEnv base, std::vector<double> lambda);
  static MissingMedEnv Mnar(MarEnv base, Eigen::MatrixXd lambda);

  std::string_view kind() const override {
    return variant_ == Variant::kMar ? "missing_med_mar" : "missing_med_mnar";
  }
  std::size_t num_arms() const override { return base_.num_arms(); }
  std::size_t num_mediators() const override { return base_.num_mediators(); }
  const OutcomeAlphabet* alphabet() const override { return base_.alphabet(); }
  FullDraw Draw(ArmId arm, RngStream& rng) const override;
  double TrueMean(ArmId arm) const override { return base_.TrueMean(arm); }

  Variant variant() const { return variant_; }
  const MarEnv& base() const { return base_; }
  // n x K; rows are constant for the kMar variant.
  const Eigen::MatrixXd& lambda() const { return lambda_; }

  // Theta_a[m, y] = P(m, y, O^M = 1, O^Y = 1 | a); categorical base only.
  Eigen::MatrixXd ThetaObserved(ArmId arm) const;
  // b_a[y] = P(y, O^M = 0, O^Y = 1 | a); categorical base only.
  Eigen::VectorXd MediatorMissingMass(ArmId arm) const;
  double Kappa(ArmId arm) const;

 private:
  MissingMedEnv(MarEnv base, Eigen::MatrixXd lambda, Variant variant);

  MarEnv base_;
  Eigen::MatrixXd lambda_;
  Variant variant_;
};

struct BootstrapRecord {
  double outcome = 0.0;  // normalized to [0, 1]
  MediatorValue mediator;
};

// Replays records sampled with replacement from per-arm pools and imposes
// MAR outcome masking with gamma(a, m).
class BootstrapEnv final : public Environment {
 public:
  BootstrapEnv(std::vector<std::vector<BootstrapRecord>> pools,
               std::size_t num_mediators, Eigen::MatrixXd synthetic_gamma);

  std::string_view kind() const override { return "bootstrap"; }
  std::size_t num_arms() const override { return pools_.size(); }
  std::size_t num_mediators() const override { return num_mediators_; }
  FullDraw Draw(ArmId arm, RngStream& rng) const override;
  double TrueMean(ArmId arm) const override;

  const std::vector<BootstrapRecord>& pool(ArmId arm) const {
    return pools_.at(arm.index);
  }
  const Eigen::MatrixXd& gamma() const { return gamma_; }
  // Empirical P(M = m | a) of the pool.
  Eigen::MatrixXd MediatorLaw() const;

 private:
  std::vector<std::vector<BootstrapRecord>> pools_;
  std::size_t num_mediators_;
  Eigen::MatrixXd gamma_;
  std::vector<double> means_;
};

// ---------------------------------------------------------------------------
// Instance generators.

McarEnv SampleMcarConfig(std::size_t n, RngStream& rng);

// Base rewards U[0, 0.4] with +0.6 on arm 0, gamma U[0.8, 1], p rows
// Dirichlet(1_K). With `peaked`, each arm's row is Dirichlet with
// concentration `peak_concentration` on one uniformly chosen mediator.
// The draw order (mu, gamma, designated mediators, p) is fixed so that the
// peaked and uniform variants share mu and gamma for the same stream.
MarEnv SampleMarConfig(std::size_t n, std::size_t k, bool peaked,
                       RngStream& rng, double peak_concentration = 5.0);

// q slices Dirichlet(1_L); every slice of arm 0 gets `bias` extra
// concentration on the largest outcome. gamma_y U[0.5, 1], p rows
// Dirichlet(1_K). Alphabet = OutcomeAlphabet::Normalized(L).
MnarEnv SampleMnarConfig(std::size_t n, std::size_t k, std::size_t l,
                         RngStream& rng, double bias = 5.0);

// Missing-mediator environment. The kMar variant wraps a uniform
// SampleMarConfig base with lambda_a ~ U[lambda_lo, lambda_hi]. The kMnar
// variant builds a categorical base (q slices Dirichlet(1_L) with the
// SampleMnarConfig bias on arm 0, gamma U[0.8, 1], p Dirichlet(1_K)) and draws
// lambda(a, m) ~ U[lambda_lo, lambda_hi]; it needs L >= K.
MissingMedEnv SampleMissingMedConfig(std::size_t n, std::size_t k,
                                     std::size_t l,
                                     MissingMedEnv::Variant variant,
                                     RngStream& rng, double lambda_lo = 0.5,
                                     double lambda_hi = 1.0, double bias = 5.0);

// Two-arm MAR instance on which every mediator-agnostic policy sees the same
// observed law for both arms. Throws std::invalid_argument for k < 2 or
// epsilon outside (0, 1).
MarEnv BuildIgnoremedInstance(std::size_t k, double epsilon,
                              double noise_std = 1.0);

// n + 1 MCAR instances: instance 0 has all means 0, instance j >= 1 has mean
// delta on arm j - 1.
std::vector<McarEnv> BuildMcarMinimaxFamily(std::size_t n, double delta,
                                            double gamma,
                                            double noise_std = 1.0);

// n + 1 MAR instances sharing (gamma, p): instance j >= 1 sets
// mu(j - 1, m) = delta / (P_{j-1} gamma(j - 1, m)), zero elsewhere. Throws if a
// resulting mean leaves [0, 1].
std::vector<MarEnv> BuildMarMinimaxFamily(double delta,
                                          const Eigen::MatrixXd& gamma,
                                          const Eigen::MatrixXd& p,
                                          double noise_std = 1.0);

// ---------------------------------------------------------------------------
// PBC ingestion.

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PbcData {
  // pools[a] holds (normalized X, D) for rows with Z1 = a + 1.
  std::vector<std::vector<BootstrapRecord>> pools;
  std::size_t num_mediators = 2;
  double max_x = 0.0;
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;  // rows with a missing Z1
};

// Parses a CSV with (case-insensitive) columns Z1, X, D. Throws IngestError
// naming the row and column of the first problem.
PbcData ReadPbcCsv(const std::string& path);

struct SyntheticGammaSpec {
  double lo = 0.8;
  double hi = 1.0;
};

BootstrapEnv MakeBootstrapEnv(const PbcData& data,
                              const SyntheticGammaSpec& gamma_spec,
                              RngStream& rng);

BootstrapEnv IngestPbc(const std::string& csv_path,
                       const SyntheticGammaSpec& gamma_spec, RngStream& rng);

}  // namespace mbandit

#endif  // MBANDIT_ENVS_H_
