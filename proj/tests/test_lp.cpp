#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlmilp/error.hpp"
#include "nlmilp/solver.hpp"
#include "oracles.hpp"

using namespace nlmilp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::string& text) {
  try {
    parse_lp(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(LpFormat, RoundTripRandomAnnotatedModels) {
  int with_sos = 0, with_ind = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SCOPED_TRACE(seed);
    GroundModel m = oracle::random_annotated_model(seed);
    with_sos += !m.sos.empty();
    with_ind += !m.indicators.empty();
    std::string text = write_lp(m);
    GroundModel back = parse_lp(text);
    EXPECT_TRUE(back == m) << text;
    EXPECT_EQ(write_lp(back), text);
  }
  // The generator has to exercise both annotation kinds.
  EXPECT_GT(with_sos, 10);
  EXPECT_GT(with_ind, 10);
}

TEST(LpFormat, GoldenFilesAreFixedPoints) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(NLMILP_TEST_DIR) / "golden")) {
    if (e.path().extension() != ".lp") continue;
    SCOPED_TRACE(e.path().filename().string());
    std::string golden = slurp(e.path());
    EXPECT_EQ(write_lp(parse_lp(golden)), golden);
    ++n;
  }
  EXPECT_GE(n, 5);
}

TEST(LpFormat, GoldenFacilityCarriesIndicators) {
  GroundModel m = read_lp_file(std::string(NLMILP_TEST_DIR) + "/golden/facility_annotated.lp");
  EXPECT_EQ(m.indicators.size(), 6u);
  EXPECT_EQ(m.indicators[0].trigger_value, 0);
  EXPECT_EQ(m.num_cols(), 9);
}

TEST(LpFormat, SyntaxErrors) {
  EXPECT_EQ(code_of("Minimize\n obj: x +\nSubject To\n c: x >= 1\nEnd\n"), ErrorCode::kLpSyntaxError);
  EXPECT_EQ(code_of("Subject To\n c: x >= 1\nEnd\n"), ErrorCode::kLpSyntaxError);
  EXPECT_EQ(code_of("Minimize\n obj: x\nSubject To\n c: x >< 1\nEnd\n"), ErrorCode::kLpSyntaxError);
}

TEST(LpFormat, PiecewiseIsUnrepresentable) {
  GroundModel m;
  m.add_column("x", 0, 0, 10, false);
  m.add_column("y", 1, 0, 100, false);
  m.piecewise.push_back({"f", 0, 1, {{0, 0}, {5, 10}, {10, 12}}});
  try {
    write_lp(m);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnrepresentableAnnotation);
  }
}
