#include <stdexcept>
#include <string>
#include <vector>

#include "mbandit/envs.h"

namespace mbandit {

namespace {

void RequirePositive(std::size_t v, const char* name) {
  if (v == 0) throw std::invalid_argument(std::string(name) + " must be >= 1");
}

Eigen::RowVectorXd DirichletRow(RngStream& rng,
                                const std::vector<double>& concentration) {
  const std::vector<double> draw = rng.Dirichlet(concentration);
  return Eigen::Map<const Eigen::RowVectorXd>(draw.data(), draw.size());
}

}  // namespace

McarEnv SampleMcarConfig(std::size_t n, RngStream& rng) {
  RequirePositive(n, "n");
  std::vector<double> mu(n);
  for (double& m : mu) m = rng.Uniform(0.0, 1.0);
  const double gamma = rng.Uniform(0.5, 1.0);
  return McarEnv(std::move(mu), gamma);
}

MarEnv SampleMarConfig(std::size_t n, std::size_t k, bool peaked,
                       RngStream& rng, double peak_concentration) {
  RequirePositive(n, "n");
  RequirePositive(k, "K");
  Eigen::MatrixXd mu(n, k), gamma(n, k), p(n, k);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t m = 0; m < k; ++m) {
      mu(a, m) = rng.Uniform(0.0, 0.4) + (a == 0 ? 0.6 : 0.0);
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t m = 0; m < k; ++m) gamma(a, m) = rng.Uniform(0.8, 1.0);
  }
  // Designated mediators are drawn in both modes to keep the p stream aligned.
  std::vector<std::size_t> designated(n);
  for (auto& d : designated) d = rng.UniformIndex(k);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> conc(k, 1.0);
    if (peaked) conc[designated[a]] = peak_concentration;
    p.row(a) = DirichletRow(rng, conc);
  }
  return MarEnv(std::move(mu), std::move(gamma), std::move(p));
}

MnarEnv SampleMnarConfig(std::size_t n, std::size_t k, std::size_t l,
                         RngStream& rng, double bias) {
  RequirePositive(n, "n");
  RequirePositive(k, "K");
  RequirePositive(l, "L");
  std::vector<Eigen::MatrixXd> q(n, Eigen::MatrixXd(k, l));
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> conc(l, 1.0);
    if (a == 0) conc.back() += bias;
    for (std::size_t m = 0; m < k; ++m) q[a].row(m) = DirichletRow(rng, conc);
  }
  Eigen::MatrixXd gamma_y(n, l);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t y = 0; y < l; ++y) gamma_y(a, y) = rng.Uniform(0.5, 1.0);
  }
  Eigen::MatrixXd p(n, k);
  for (std::size_t a = 0; a < n; ++a) {
    p.row(a) = DirichletRow(rng, std::vector<double>(k, 1.0));
  }
  return MnarEnv(OutcomeAlphabet::Normalized(l), std::move(p), std::move(q),
                 std::move(gamma_y));
}

MissingMedEnv SampleMissingMedConfig(std::size_t n, std::size_t k,
                                     std::size_t l,
                                     MissingMedEnv::Variant variant,
                                     RngStream& rng, double lambda_lo,
                                     double lambda_hi, double bias) {
  RequirePositive(n, "n");
  RequirePositive(k, "K");
  if (!(lambda_lo > 0.0 && lambda_lo <= lambda_hi && lambda_hi <= 1.0)) {
    throw std::invalid_argument(
        "mediator observation range must satisfy 0 < lo <= hi <= 1");
  }
  if (variant == MissingMedEnv::Variant::kMar) {
    MarEnv base = SampleMarConfig(n, k, false, rng);
    std::vector<double> lambda(n);
    for (double& v : lambda) v = rng.Uniform(lambda_lo, lambda_hi);
    return MissingMedEnv::Mar(std::move(base), std::move(lambda));
  }
  RequirePositive(l, "L");
  if (l < k) throw std::invalid_argument("missing_med_mnar needs L >= K");
  std::vector<Eigen::MatrixXd> q(n, Eigen::MatrixXd(k, l));
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> conc(l, 1.0);
    if (a == 0) conc.back() += bias;
    for (std::size_t m = 0; m < k; ++m) q[a].row(m) = DirichletRow(rng, conc);
  }
  Eigen::MatrixXd gamma(n, k), p(n, k), lambda(n, k);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t m = 0; m < k; ++m) gamma(a, m) = rng.Uniform(0.8, 1.0);
  }
  for (std::size_t a = 0; a < n; ++a) {
    p.row(a) = DirichletRow(rng, std::vector<double>(k, 1.0));
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t m = 0; m < k; ++m) {
      lambda(a, m) = rng.Uniform(lambda_lo, lambda_hi);
    }
  }
  MarEnv base = MarEnv::Categorical(OutcomeAlphabet::Normalized(l), std::move(q),
                                    std::move(gamma), std::move(p));
  return MissingMedEnv::Mnar(std::move(base), std::move(lambda));
}

MarEnv BuildIgnoremedInstance(std::size_t k, double epsilon,
                              double noise_std) {
  if (k < 2) throw std::invalid_argument("ignoremed: K must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("ignoremed: epsilon must lie in (0, 1)");
  }
  const double rest = epsilon / static_cast<double>(k - 1);
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, k, rest);
  p(0, 0) = 1.0 - epsilon;  // arm 0 concentrates on the rewarding mediator
  p(1, 1) = 1.0 - epsilon;  // arm 1 concentrates on a zero-reward mediator
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(2, k);
  mu.col(0).setOnes();
  Eigen::MatrixXd gamma(2, k);
  for (Eigen::Index a = 0; a < 2; ++a) {
    const Eigen::RowVectorXd inv = p.row(a).cwiseInverse();
    gamma.row(a) = inv / inv.sum();
  }
  return MarEnv(std::move(mu), std::move(gamma), std::move(p), noise_std);
}

std::vector<McarEnv> BuildMcarMinimaxFamily(std::size_t n, double delta,
                                            double gamma, double noise_std) {
  RequirePositive(n, "n");
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("minimax: delta must lie in (0, 1]");
  }
  std::vector<McarEnv> family;
  family.reserve(n + 1);
  family.emplace_back(std::vector<double>(n, 0.0), gamma, noise_std);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> mu(n, 0.0);
    mu[j] = delta;
    family.emplace_back(std::move(mu), gamma, noise_std);
  }
  return family;
}

std::vector<MarEnv> BuildMarMinimaxFamily(double delta,
                                          const Eigen::MatrixXd& gamma,
                                          const Eigen::MatrixXd& p,
                                          double noise_std) {
  if (!(delta > 0.0)) throw std::invalid_argument("minimax: delta must be > 0");
  const Eigen::Index n = p.rows();
  const Eigen::Index k = p.cols();
  std::vector<MarEnv> family;
  family.reserve(n + 1);
  family.emplace_back(Eigen::MatrixXd::Zero(n, k), gamma, p, noise_std);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mass = (p.row(j).array() / gamma.row(j).array()).sum();
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index m = 0; m < k; ++m) {
      mu(j, m) = delta / (mass * gamma(j, m));
      if (mu(j, m) > 1.0) {
        throw std::invalid_argument(
            "minimax: delta / (P_a gamma) exceeds 1 for arm " +
            std::to_string(j));
      }
    }
    family.emplace_back(std::move(mu), gamma, p, noise_std);
  }
  return family;
}

}  // namespace mbandit
