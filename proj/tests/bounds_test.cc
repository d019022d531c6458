#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mbandit/envs.h"
#include "mbandit/runner.h"

namespace mbandit {
namespace {

ExperimentConfig BoundsConfig(std::int64_t horizon, std::int64_t stride) {
  ExperimentConfig c;
  c.horizon = horizon;
  c.stride = stride;
  c.alpha = 2.0;
  c.policies = {{PolicyKind::kNaiveUcb, "", false}};
  return c;
}

TEST(MeansTest, ArithmeticAndHarmonic) {
  EXPECT_DOUBLE_EQ(ArithmeticMean({1.0, 4.0}), 2.5);
  EXPECT_DOUBLE_EQ(HarmonicMean({1.0, 4.0}), 1.6);
  EXPECT_DOUBLE_EQ(HarmonicMean({3.0, 3.0, 3.0}), 3.0);
}

TEST(BoundsTest, McarShapes) {
  const McarEnv env(std::vector<double>(10, 0.5), 0.5);
  const BoundTable t = TheoreticalCurves(BoundsConfig(10000, 5000), env);
  ASSERT_EQ(t.times, (std::vector<std::int64_t>{5000, 10000}));
  const double upper = t.rows.back()[t.Column("mcar_upper")];
  EXPECT_NEAR(upper, std::sqrt(2.0 * 10 * 10000 * std::log(10000.0) / 0.5), 1e-9);
  EXPECT_NEAR(upper, 1920.0, 1.0);
  EXPECT_NEAR(t.rows.back()[t.Column("mcar_lower")], std::sqrt(10.0 * 10000 / 0.5), 1e-9);
  EXPECT_THROW(t.Column("S"), std::out_of_range);
}

TEST(BoundsTest, UniformGammaMakesSEqualH) {
  Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(3, 2, 0.5);
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Constant(3, 2, 0.7);
  Eigen::MatrixXd p(3, 2);
  p << 0.2, 0.8, 0.5, 0.5, 0.9, 0.1;
  const MarEnv env(mu, gamma, p);
  const BoundTable t = TheoreticalCurves(BoundsConfig(100, 50), env);
  const auto& row = t.rows.front();
  EXPECT_NEAR(row[t.Column("S")], 1.0 / 0.7, 1e-12);
  EXPECT_NEAR(row[t.Column("H")], 1.0 / 0.7, 1e-12);
  EXPECT_NEAR(row[t.Column("mar_upper")],
              std::sqrt(2.0 * 50 * std::log(50.0) * 3 / 0.7), 1e-9);
  EXPECT_NEAR(row[t.Column("mar_lower")], std::sqrt(50.0 * 3 / 0.7), 1e-9);
}

TEST(BoundsTest, MarArithmeticExceedsHarmonic) {
  // P_a = (1, 4): gamma row (1, 1) and (0.25, 0.25).
  Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(2, 2, 0.5);
  Eigen::MatrixXd gamma(2, 2);
  gamma << 1.0, 1.0, 0.25, 0.25;
  const MarEnv env(mu, gamma, Eigen::MatrixXd::Constant(2, 2, 0.5));
  const BoundTable t = TheoreticalCurves(BoundsConfig(10, 10), env);
  EXPECT_NEAR(t.rows[0][t.Column("S")], 2.5, 1e-12);
  EXPECT_NEAR(t.rows[0][t.Column("H")], 1.6, 1e-12);
}

// Independent S_a: Theta built entry by entry, pseudo-inverse from the
// normal equations (K >= L, full column rank).
double OracleMnarS(const MnarEnv& env, std::size_t a) {
  const auto k = static_cast<Eigen::Index>(env.num_mediators());
  const auto l = static_cast<Eigen::Index>(env.num_outcomes());
  const auto ai = static_cast<Eigen::Index>(a);
  Eigen::MatrixXd theta(k, l);
  Eigen::VectorXd py = Eigen::VectorXd::Zero(l);
  for (Eigen::Index m = 0; m < k; ++m) {
    for (Eigen::Index y = 0; y < l; ++y) {
      const double pq = env.p()(ai, m) * env.q(ArmId(a))(m, y);
      theta(m, y) = pq * env.gamma_y()(ai, y);
      py(y) += pq;
    }
  }
  const Eigen::MatrixXd pinv =
      (theta.transpose() * theta).inverse() * theta.transpose();
  auto inf = [](const Eigen::MatrixXd& m) {
    double best = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) best = std::max(best, m.row(r).cwiseAbs().sum());
    return best;
  };
  const double kappa = inf(theta) * inf(pinv);
  double gamma_min = 1.0;
  double observed = 0.0;
  for (Eigen::Index y = 0; y < l; ++y) {
    gamma_min = std::min(gamma_min, env.gamma_y()(ai, y));
    observed += py(y) * env.gamma_y()(ai, y);
  }
  const double first = static_cast<double>(l) * kappa / (gamma_min * inf(theta));
  const double second = static_cast<double>(k) / (gamma_min * std::sqrt(observed));
  return std::max(first, second);
}

TEST(BoundsTest, MnarPerArmColumns) {
  RngStream rng(12, 0);
  const MnarEnv env = SampleMnarConfig(3, 5, 4, rng);
  const BoundTable t = TheoreticalCurves(BoundsConfig(1000, 500), env);
  ASSERT_EQ(t.columns.size(), 4u);
  double sum_sq = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    const double s = OracleMnarS(env, a);
    EXPECT_NEAR(t.rows[0][t.Column("S_" + std::to_string(a))], s, 1e-8 * s);
    sum_sq += s * s;
  }
  EXPECT_NEAR(t.rows.back()[t.Column("mnar_upper")],
              std::sqrt(2.0 * 1000 * std::log(1000.0) * sum_sq),
              1e-8 * std::sqrt(sum_sq) * 1000);
}

TEST(BoundsTest, MissingMediatorMarMass) {
  RngStream rng(13, 0);
  const MissingMedEnv env =
      SampleMissingMedConfig(3, 2, 0, MissingMedEnv::Variant::kMar, rng);
  const BoundTable t = TheoreticalCurves(BoundsConfig(100, 100), env);
  std::vector<double> mass;
  for (Eigen::Index a = 0; a < 3; ++a) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < 2; ++j) {
      m += env.base().p()(a, j) / (env.base().gamma()(a, j) * env.lambda()(a, j));
    }
    mass.push_back(m);
  }
  const double s = (mass[0] + mass[1] + mass[2]) / 3.0;
  const double h = 3.0 / (1.0 / mass[0] + 1.0 / mass[1] + 1.0 / mass[2]);
  EXPECT_NEAR(t.rows[0][t.Column("S")], s, 1e-12);
  EXPECT_NEAR(t.rows[0][t.Column("H")], h, 1e-12);
  EXPECT_GE(s, h);
}

TEST(BoundsTest, MissingMediatorMnarColumns) {
  RngStream rng(14, 0);
  const MissingMedEnv env =
      SampleMissingMedConfig(2, 2, 3, MissingMedEnv::Variant::kMnar, rng);
  const BoundTable t = TheoreticalCurves(BoundsConfig(100, 100), env);
  EXPECT_EQ(t.columns,
            (std::vector<std::string>{"S_0", "S_1", "missing_med_mnar_upper"}));
  for (std::size_t a = 0; a < 2; ++a) EXPECT_GT(t.rows[0][a], 2.0);
}

TEST(BoundsTest, WriteBoundTableCsv) {
  const McarEnv env({0.1, 0.2}, 0.5);
  const BoundTable t = TheoreticalCurves(BoundsConfig(20, 10), env);
  const auto path = std::filesystem::temp_directory_path() / "mbandit_bounds_test" / "b.csv";
  WriteBoundTable(t, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,mcar_upper,mcar_lower");
  std::string row;
  std::getline(in, row);
  EXPECT_EQ(row.rfind("10,", 0), 0u);
  std::filesystem::remove_all(path.parent_path());
}

}  // namespace
}  // namespace mbandit
