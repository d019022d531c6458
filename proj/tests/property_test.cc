// Randomized checks of invariants that hold for every instance, not just the
// hand-worked examples in the per-module tests.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mbandit/core.h"
#include "mbandit/envs.h"
#include "mbandit/estimators.h"
#include "mbandit/linalg.h"
#include "mbandit/policies.h"
#include "mbandit/runner.h"

namespace mbandit {
namespace {

constexpr std::uint64_t kPropertySeed = 20240611;

std::vector<std::shared_ptr<const Environment>> SampleEveryKind(RngStream& rng) {
  std::vector<std::shared_ptr<const Environment>> envs;
  envs.push_back(std::make_shared<McarEnv>(SampleMcarConfig(4, rng)));
  envs.push_back(std::make_shared<MarEnv>(SampleMarConfig(4, 3, false, rng)));
  envs.push_back(std::make_shared<MarEnv>(SampleMarConfig(4, 3, true, rng)));
  envs.push_back(std::make_shared<MnarEnv>(SampleMnarConfig(3, 4, 4, rng)));
  envs.push_back(std::make_shared<MissingMedEnv>(
      SampleMissingMedConfig(3, 3, 3, MissingMedEnv::Variant::kMar, rng)));
  envs.push_back(std::make_shared<MissingMedEnv>(
      SampleMissingMedConfig(3, 3, 4, MissingMedEnv::Variant::kMnar, rng)));
  envs.push_back(std::make_shared<MarEnv>(BuildIgnoremedInstance(4, 0.2)));
  return envs;
}

std::optional<OutcomeAlphabet> AlphabetOf(const Environment& env) {
  if (const OutcomeAlphabet* a = env.alphabet()) return *a;
  return std::nullopt;
}

TEST(RoundProperty, MasksAgreeWithPresenceOnEveryStep) {
  RngStream rng(kPropertySeed, 1);
  for (const auto& env : SampleEveryKind(rng)) {
    std::vector<SufficientStats> stats(env->num_arms(),
                                       SufficientStats(env->num_mediators(), AlphabetOf(*env)));
    for (int t = 0; t < 3000; ++t) {
      const ArmId arm{rng.UniformIndex(env->num_arms())};
      const ObservedRound r = env->Step(arm, rng);
      ASSERT_EQ(r.arm().index, arm.index);
      ASSERT_EQ(r.o_y(), r.y_obs().has_value());
      ASSERT_EQ(r.o_m(), r.m_obs().has_value());
      if (r.o_m()) ASSERT_LT(r.m_obs()->index, env->num_mediators());

      SufficientStats& s = stats[arm.index];
      const SufficientStats before = s;
      s.Record(r);
      ASSERT_EQ(s.pulls(), before.pulls() + 1);
      ASSERT_GE(s.observed(), before.observed());
      ASSERT_LE(s.observed(), s.pulls());
      ASSERT_LE(s.both_observed(), s.mediator_observed());
      std::int64_t med_total = 0;
      for (std::size_t m = 0; m < s.num_mediators(); ++m) {
        ASSERT_LE(s.observed_by_mediator(m), s.mediator_count(m));
        ASSERT_GE(s.mediator_count(m), before.mediator_count(m));
        ASSERT_GE(s.observed_by_mediator(m), before.observed_by_mediator(m));
        med_total += s.mediator_count(m);
      }
      ASSERT_EQ(med_total, s.mediator_observed());
      ASSERT_LE(med_total, s.pulls());
    }
  }
}

TEST(RoundProperty, EqualStreamsGiveIdenticalTraces) {
  RngStream env_rng(kPropertySeed, 2);
  for (const auto& env : SampleEveryKind(env_rng)) {
    RngStream a(99, 7), b(99, 7);
    for (int t = 0; t < 500; ++t) {
      const ArmId arm{static_cast<std::size_t>(t) % env->num_arms()};
      const ObservedRound ra = env->Step(arm, a);
      const ObservedRound rb = env->Step(arm, b);
      ASSERT_EQ(ra.y_obs(), rb.y_obs());
      ASSERT_EQ(ra.o_m(), rb.o_m());
      if (ra.o_m()) ASSERT_EQ(ra.m_obs()->index, rb.m_obs()->index);
    }
  }
}

TEST(SamplerProperty, RowsAreStochastic) {
  RngStream rng(kPropertySeed, 3);
  for (int rep = 0; rep < 30; ++rep) {
    const MarEnv mar = SampleMarConfig(5, 4, rep % 2 == 0, rng);
    for (Eigen::Index a = 0; a < mar.p().rows(); ++a) {
      EXPECT_NEAR(mar.p().row(a).sum(), 1.0, 1e-9);
    }
    const MnarEnv mnar = SampleMnarConfig(3, 3, 4, rng);
    for (std::size_t a = 0; a < mnar.num_arms(); ++a) {
      EXPECT_NEAR(mnar.p().row(a).sum(), 1.0, 1e-9);
      const Eigen::MatrixXd& q = mnar.q(ArmId{a});
      for (Eigen::Index m = 0; m < q.rows(); ++m) EXPECT_NEAR(q.row(m).sum(), 1.0, 1e-9);
      EXPECT_NEAR(mnar.OutcomeLaw(ArmId{a}).sum(), 1.0, 1e-9);
    }
  }
}

// A random trace where every mediator value that shows up has at least one
// observed reward, so the empirical propensities are positive.
std::vector<ObservedRound> RandomTrace(RngStream& rng, std::size_t k, int len) {
  std::vector<ObservedRound> rounds;
  std::vector<bool> seen_obs(k, false), seen(k, false);
  for (int t = 0; t < len; ++t) {
    const std::size_t m = rng.UniformIndex(k);
    const bool o = rng.Bernoulli(0.6);
    seen[m] = true;
    if (o) seen_obs[m] = true;
    rounds.push_back(MakeRound(ArmId{0}, rng.Normal(0.5, 1.0), o, MediatorValue{m}, true));
  }
  for (std::size_t m = 0; m < k; ++m) {
    if (seen[m] && !seen_obs[m]) {
      rounds.push_back(MakeRound(ArmId{0}, rng.Uniform(), true, MediatorValue{m}, true));
    }
  }
  return rounds;
}

TEST(EstimatorProperty, PluginHtAndAipwCoincideOnEmpiricalModels) {
  RngStream rng(kPropertySeed, 4);
  const UcbParams params{2.0, 100};
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = 1 + rng.UniformIndex(3);
    const auto rounds = RandomTrace(rng, k, 1 + static_cast<int>(rng.UniformIndex(50)));
    SufficientStats s(k);
    for (const auto& r : rounds) s.Record(r);
    std::vector<double> gamma_hat(k, 1.0), mu_hat(k, 0.0);
    for (std::size_t m = 0; m < k; ++m) {
      if (s.mediator_count(m) == 0) continue;
      gamma_hat[m] = static_cast<double>(s.observed_by_mediator(m)) /
                     static_cast<double>(s.mediator_count(m));
      mu_hat[m] = s.sum_by_mediator(m) / static_cast<double>(s.observed_by_mediator(m));
    }
    const EstimatorFit plug = MarPlugin(s, std::nullopt, params);
    ASSERT_TRUE(plug.ready);
    EXPECT_NEAR(HtEstimate(rounds, gamma_hat).mu_hat, plug.mu_hat, 1e-10);
    EXPECT_NEAR(AipwEstimate(rounds, gamma_hat, mu_hat).mu_hat, plug.mu_hat, 1e-10);
  }
}

TEST(EstimatorProperty, WidthsNonnegativeAndWeightsNormalized) {
  RngStream rng(kPropertySeed, 5);
  const UcbParams params{2.0, 1000};
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = 1 + rng.UniformIndex(4);
    SufficientStats s(k);
    for (const auto& r : RandomTrace(rng, k, 1 + static_cast<int>(rng.UniformIndex(40)))) {
      s.Record(r);
    }
    for (const EstimatorFit& f : {McarMean(s, params), MarPlugin(s, std::nullopt, params)}) {
      EXPECT_GE(f.width, 0.0);
      if (f.p_hat) {
        EXPECT_NEAR(std::accumulate(f.p_hat->begin(), f.p_hat->end(), 0.0), 1.0, 1e-9);
      }
    }
  }
}

TEST(EstimatorProperty, SingleMediatorUnknownPIsNaiveWithEightfoldWidth) {
  RngStream rng(kPropertySeed, 6);
  const UcbParams params{2.5, 5000};
  for (int rep = 0; rep < 50; ++rep) {
    SufficientStats s(1);
    const int len = 1 + static_cast<int>(rng.UniformIndex(80));
    for (int t = 0; t < len; ++t) {
      s.Record(MakeRound(ArmId{0}, rng.Normal(0.3, 1.0), true, MediatorValue{0}, true));
    }
    const EstimatorFit naive = McarMean(s, params);
    const EstimatorFit mar = MarPlugin(s, std::nullopt, params);
    EXPECT_NEAR(mar.mu_hat, naive.mu_hat, 1e-12);
    EXPECT_NEAR(mar.width, 8.0 * naive.width, 1e-12);
  }
}

// Population where every (m, y) value appears `den` times with `num` of them
// observed, so the empirical propensities and cell means are the truth.
struct Population {
  std::vector<ObservedRound> rounds;
  std::vector<double> gamma;
  std::vector<double> mu;
  double mean = 0.0;
};

Population EnumeratedPopulation(RngStream& rng) {
  Population pop;
  const std::size_t k = 1 + rng.UniformIndex(3);
  const int den = 2 + static_cast<int>(rng.UniformIndex(4));
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t m = 0; m < k; ++m) {
    const int num = 1 + static_cast<int>(rng.UniformIndex(den));
    const std::size_t values = 1 + rng.UniformIndex(3);
    double cell = 0.0;
    for (std::size_t v = 0; v < values; ++v) {
      const double y = static_cast<double>(rng.UniformIndex(9)) / 8.0;
      cell += y;
      for (int c = 0; c < den; ++c) {
        pop.rounds.push_back(MakeRound(ArmId{0}, y, c < num, MediatorValue{m}, true));
        total += y;
        ++count;
      }
    }
    pop.gamma.push_back(static_cast<double>(num) / den);
    pop.mu.push_back(cell / static_cast<double>(values));
  }
  pop.mean = total / static_cast<double>(count);
  return pop;
}

TEST(EstimatorProperty, AipwIsDoublyRobust) {
  RngStream rng(kPropertySeed, 7);
  for (int rep = 0; rep < 50; ++rep) {
    const Population pop = EnumeratedPopulation(rng);
    std::vector<double> bad_gamma = pop.gamma, bad_mu = pop.mu;
    for (auto& g : bad_gamma) g = rng.Uniform(0.05, 1.0);
    for (auto& m : bad_mu) m = rng.Uniform(-3.0, 3.0);
    EXPECT_NEAR(AipwEstimate(pop.rounds, pop.gamma, bad_mu).mu_hat, pop.mean, 1e-12);
    EXPECT_NEAR(AipwEstimate(pop.rounds, bad_gamma, pop.mu).mu_hat, pop.mean, 1e-12);
    EXPECT_NEAR(AipwEstimate(pop.rounds, pop.gamma, pop.mu).mu_hat, pop.mean, 1e-12);
  }
}

TEST(LinalgProperty, PinvRoundTripAndKappaAtLeastOne) {
  RngStream rng(kPropertySeed, 8);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index l = 1 + static_cast<Eigen::Index>(rng.UniformIndex(5));
    const Eigen::Index k = l + static_cast<Eigen::Index>(rng.UniformIndex(3));
    Eigen::MatrixXd theta(k, l);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < l; ++j) theta(i, j) = rng.Uniform(-1.0, 1.0);
    }
    Eigen::VectorXd x_star(l);
    for (Eigen::Index j = 0; j < l; ++j) x_star(j) = rng.Uniform(-2.0, 2.0);
    if (InfNormConditionNumber(theta) > 1e6) continue;
    const PinvSolution sol = PinvSolveInfNorm(theta, theta * x_star);
    EXPECT_LT((sol.x - x_star).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_GE(sol.kappa, 1.0 - 1e-12);
  }
}

TEST(EstimatorProperty, MnarPopulationTablesRecoverTheTruth) {
  RngStream rng(kPropertySeed, 9);
  for (int rep = 0; rep < 30; ++rep) {
    const MnarEnv env = SampleMnarConfig(2, 4, 3, rng);
    for (std::size_t a = 0; a < env.num_arms(); ++a) {
      const ArmId arm{a};
      const MnarIdentification id =
          IdentifyMnar(env.Theta(arm), env.MissingMass(arm), *env.alphabet());
      EXPECT_NEAR(id.mu, env.TrueMean(arm), 1e-8);
      for (std::size_t y = 0; y < env.num_outcomes(); ++y) {
        EXPECT_NEAR(1.0 / id.inverse_gamma(y), env.gamma_y()(a, y), 1e-8);
      }
      EXPECT_EQ(id.clipped, 0);
    }
  }
}

TEST(PolicyProperty, ShiftingEveryIndexKeepsTheChoice) {
  RngStream rng(kPropertySeed, 10);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> idx(1 + rng.UniformIndex(8));
    // Coarse grid so ties occur.
    for (auto& v : idx) v = static_cast<double>(rng.UniformIndex(4)) / 4.0;
    const double shift = rng.Uniform(-10.0, 10.0);
    std::vector<double> shifted = idx;
    for (auto& v : shifted) v += shift;
    EXPECT_EQ(SelectByIndex(idx), SelectByIndex(shifted));
  }
}

TEST(PolicyProperty, PullCountsAreConserved) {
  RngStream env_rng(kPropertySeed, 11);
  const MarEnv env = SampleMarConfig(4, 3, false, env_rng);
  for (PolicyKind kind : {PolicyKind::kMcarUcb, PolicyKind::kMarUcbKnownP,
                          PolicyKind::kMarUcbUnknownP, PolicyKind::kNaiveUcb}) {
    PolicyConfig cfg = MakePolicyConfig({kind, "", false}, env, 3000, 2.0);
    Policy policy(cfg);
    RngStream rng(5, static_cast<std::uint64_t>(kind));
    for (int t = 0; t < 3000; ++t) policy.Update(env.Step(policy.SelectArm(), rng));
    std::int64_t total = 0;
    for (std::size_t a = 0; a < env.num_arms(); ++a) {
      const SufficientStats& s = policy.stats(ArmId{a});
      EXPECT_EQ(s.pulls(), policy.pulls(ArmId{a}));
      std::int64_t by_med = 0;
      for (std::size_t m = 0; m < s.num_mediators(); ++m) by_med += s.observed_by_mediator(m);
      EXPECT_EQ(by_med, s.observed());
      total += policy.pulls(ArmId{a});
    }
    EXPECT_EQ(total, policy.t());
  }
}

TEST(EnvProperty, MinimaxFamiliesHaveTheIntendedUniqueOptimum) {
  const auto mcar = BuildMcarMinimaxFamily(5, 0.1, 0.6);
  for (std::size_t j = 1; j < mcar.size(); ++j) {
    EXPECT_EQ(mcar[j].OptimalArm().index, j - 1);
    for (std::size_t a = 0; a < 5; ++a) {
      if (a != j - 1) EXPECT_LT(mcar[j].TrueMean(ArmId{a}), mcar[j].OptimalMean());
    }
  }
  RngStream rng(kPropertySeed, 12);
  const MarEnv base = SampleMarConfig(4, 3, false, rng);
  const auto mar = BuildMarMinimaxFamily(0.05, base.gamma(), base.p());
  for (std::size_t j = 1; j < mar.size(); ++j) {
    EXPECT_EQ(mar[j].OptimalArm().index, j - 1);
    for (std::size_t a = 0; a < 4; ++a) {
      if (a != j - 1) EXPECT_LT(mar[j].TrueMean(ArmId{a}), mar[j].OptimalMean());
    }
  }
}

ExperimentConfig SmallExperiment(EnvKind kind, std::vector<PolicyKind> kinds,
                                 std::int64_t horizon) {
  ExperimentConfig c;
  c.name = "prop";
  c.env.kind = kind;
  c.env.n = 5;
  c.env.k = 3;
  c.env.l = 3;
  c.env.seed = 1;
  c.horizon = horizon;
  c.replications = 6;
  c.base_seed = 1;
  c.workers = 4;
  for (PolicyKind k : kinds) c.policies.push_back({k, "", false});
  return c;
}

TEST(RunnerProperty, TracesAreMonotoneAndAggregatesConsistent) {
  const ExperimentConfig c =
      SmallExperiment(EnvKind::kMar, {PolicyKind::kMarUcbKnownP, PolicyKind::kNaiveUcb}, 3000);
  for (const RegretCurve& curve : RunExperiment(c)) {
    for (const auto& rep : curve.per_rep) {
      for (std::size_t i = 1; i < rep.size(); ++i) ASSERT_GE(rep[i], rep[i - 1]);
    }
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
      double sum = 0.0;
      for (const auto& rep : curve.per_rep) sum += rep[i];
      EXPECT_NEAR(curve.mean[i], sum / static_cast<double>(curve.per_rep.size()), 1e-9);
    }
  }
}

TEST(RunnerProperty, MeanRegretStaysInsideTenTimesTheUpperShape) {
  struct Case {
    EnvKind env;
    PolicyKind policy;
    const char* column;
  };
  for (const Case& cs : {Case{EnvKind::kMcar, PolicyKind::kMcarUcb, "mcar_upper"},
                         Case{EnvKind::kMar, PolicyKind::kMarUcbKnownP, "mar_upper"},
                         Case{EnvKind::kMar, PolicyKind::kMarUcbUnknownP, "mar_upper"}}) {
    const ExperimentConfig c = SmallExperiment(cs.env, {cs.policy}, 10000);
    const auto env = BuildEnvironment(c.env);
    const auto curves = RunExperiment(c, *env);
    const BoundTable bounds = TheoreticalCurves(c, *env);
    const std::size_t col = bounds.Column(cs.column);
    const std::int64_t forced =
        HasForcedPhase(cs.policy)
            ? static_cast<std::int64_t>(env->num_arms()) * ForcedPhaseLength(c.horizon)
            : 0;
    ASSERT_EQ(bounds.times, curves[0].times);
    for (std::size_t i = 0; i < bounds.times.size(); ++i) {
      if (bounds.times[i] <= forced || bounds.times[i] < 2) continue;
      EXPECT_LT(curves[0].mean[i], 10.0 * bounds.rows[i][col])
          << PolicyKindName(cs.policy) << " at t=" << bounds.times[i];
    }
  }
}

TEST(RunnerProperty, AverageRegretDecreasesAlongTheHorizon) {
  for (const auto& [env, policy] :
       {std::pair{EnvKind::kMcar, PolicyKind::kMcarUcb},
        std::pair{EnvKind::kMar, PolicyKind::kMarUcbKnownP}}) {
    std::vector<double> per_round;
    for (std::int64_t horizon : {5000, 10000, 20000}) {
      const auto curves = RunExperiment(SmallExperiment(env, {policy}, horizon));
      per_round.push_back(curves[0].FinalMean() / static_cast<double>(horizon));
    }
    EXPECT_GT(per_round[0], per_round[1]) << PolicyKindName(policy);
    EXPECT_GT(per_round[1], per_round[2]) << PolicyKindName(policy);
  }
}

}  // namespace
}  // namespace mbandit
