#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "mbandit/core.h"
#include "mbandit/envs.h"

namespace mbandit {
namespace {

namespace fs = std::filesystem;

class PbcTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mbandit_pbc_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Write(const std::string& body) {
    const fs::path p = dir_ / "data.csv";
    std::ofstream(p) << body;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(PbcTest, TwoArmsAndBinaryMediator) {
  const std::string path = Write(
      "id,Z1,X,D\n"
      "1,1,400,0\n"
      "2,2,1000,1\n"
      "3,1,200,1\n"
      "4,2,600,0\n"
      "5,1,800,0\n");
  const PbcData data = ReadPbcCsv(path);
  ASSERT_EQ(data.pools.size(), 2u);
  EXPECT_EQ(data.num_mediators, 2u);
  EXPECT_EQ(data.rows_read, 5u);
  EXPECT_EQ(data.rows_skipped, 0u);
  EXPECT_DOUBLE_EQ(data.max_x, 1000.0);
  ASSERT_EQ(data.pools[0].size(), 3u);
  EXPECT_DOUBLE_EQ(data.pools[0][0].outcome, 0.4);
  EXPECT_EQ(data.pools[0][1].mediator, MediatorValue(1));

  RngStream rng(1, 0);
  const BootstrapEnv env = MakeBootstrapEnv(data, {}, rng);
  EXPECT_EQ(env.num_arms(), 2u);
  EXPECT_EQ(env.num_mediators(), 2u);
  // (0.4 + 0.2 + 0.8) / 3 and (1.0 + 0.6) / 2.
  EXPECT_NEAR(env.TrueMean(ArmId(0)), 1.4 / 3.0, 1e-15);
  EXPECT_NEAR(env.TrueMean(ArmId(1)), 0.8, 1e-15);
  EXPECT_GE(env.gamma().minCoeff(), 0.8);
  EXPECT_LE(env.gamma().maxCoeff(), 1.0);
}

TEST_F(PbcTest, AllEqualOutcomesNormalizeToOne) {
  const std::string path = Write("Z1,X,D\n1,5,0\n2,5,1\n1,5,1\n");
  const PbcData data = ReadPbcCsv(path);
  for (const auto& pool : data.pools) {
    for (const auto& r : pool) EXPECT_DOUBLE_EQ(r.outcome, 1.0);
  }
}

TEST_F(PbcTest, AllZeroOutcomesNormalizeToOne) {
  const std::string path = Write("Z1,X,D\n1,0,0\n2,0,1\n");
  const PbcData data = ReadPbcCsv(path);
  EXPECT_DOUBLE_EQ(data.pools[0][0].outcome, 1.0);
  EXPECT_DOUBLE_EQ(data.pools[1][0].outcome, 1.0);
}

TEST_F(PbcTest, MissingArmValueIsSkippedAndCounted) {
  const std::string path = Write("Z1,X,D\n1,10,0\nNA,20,1\n2,5,1\n,7,0\n");
  const PbcData data = ReadPbcCsv(path);
  EXPECT_EQ(data.rows_read, 4u);
  EXPECT_EQ(data.rows_skipped, 2u);
  EXPECT_DOUBLE_EQ(data.max_x, 10.0);
}

TEST_F(PbcTest, MissingColumnNamesIt) {
  const std::string path = Write("Z1,X\n1,10\n2,5\n");
  try {
    ReadPbcCsv(path);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("\"D\""), std::string::npos) << e.what();
  }
}

TEST_F(PbcTest, NonNumericOutcomeNamesRowAndColumn) {
  const std::string path = Write("Z1,X,D\n1,10,0\n2,abc,1\n");
  try {
    ReadPbcCsv(path);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column X"), std::string::npos) << msg;
  }
}

TEST_F(PbcTest, EmptyArmPoolIsAnError) {
  const std::string path = Write("Z1,X,D\n2,10,0\n2,5,1\n");
  EXPECT_THROW(ReadPbcCsv(path), IngestError);
}

TEST_F(PbcTest, BadMediatorAndUnreadableFile) {
  EXPECT_THROW(ReadPbcCsv(Write("Z1,X,D\n1,10,2\n")), IngestError);
  EXPECT_THROW(ReadPbcCsv((dir_ / "nope.csv").string()), IngestError);
}

TEST_F(PbcTest, BootstrapResamplesFromThePool) {
  const std::string path = Write("Z1,X,D\n1,10,0\n1,5,1\n2,2,1\n");
  RngStream rng(2, 0);
  const BootstrapEnv env = IngestPbc(path, {1.0, 1.0}, rng);
  RngStream draw(2, 1);
  for (int i = 0; i < 200; ++i) {
    const ObservedRound r = env.Step(ArmId(0), draw);
    ASSERT_TRUE(r.o_y());
    const double y = *r.y_obs();
    ASSERT_TRUE(y == 1.0 || y == 0.5);
    ASSERT_EQ(r.m_obs()->index, y == 1.0 ? 0u : 1u);
  }
}

}  // namespace
}  // namespace mbandit
