#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "stac/experiments.hpp"

namespace stac::experiments {
namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

TEST(SerSweep, SingleNodeColumnsAgree) {
  const auto rows = parse_csv(run_ser_sweep(Json::parse(R"({"K": 1, "sigma": [0.5, 1.0]})")).csv);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "K");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    EXPECT_EQ(rows[r][2], rows[r][6]);
    EXPECT_EQ(rows[r][3], rows[r][7]);
    EXPECT_EQ(rows[r][2], rows[r][3]);
    EXPECT_EQ(rows[r][4], "");
  }
}

TEST(SerSweep, AnalyticColumns) {
  const auto rows = parse_csv(run_ser_sweep(Json::parse(R"({"K": [4], "sigma": 0.5})")).csv);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "4");
  EXPECT_EQ(rows[1][1], "0.5");
  EXPECT_EQ(rows[1][2], "0.0426564974028");
  EXPECT_EQ(rows[1][3], "0.0426564974028");
  EXPECT_EQ(rows[1][6], "0.0849759587596");
}

TEST(SerSweep, GridIsSortedAscending) {
  const auto rows = parse_csv(run_ser_sweep(Json::parse(R"({"K": [3, 2, 3], "sigma": [1.0, 0.2, 0.5]})")).csv);
  ASSERT_EQ(rows.size(), 7u);
  const std::vector<std::pair<std::string, std::string>> expected{
      {"2", "0.2"}, {"2", "0.5"}, {"2", "1"}, {"3", "0.2"}, {"3", "0.5"}, {"3", "1"}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(rows[i + 1][0], expected[i].first);
    EXPECT_EQ(rows[i + 1][1], expected[i].second);
  }
}

TEST(SerSweep, RowsAreRecomputable) {
  const auto rows = parse_csv(run_ser_sweep(Json::parse(R"({"K": [2, 5], "sigma": [0.3, 0.9]})")).csv);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto k = static_cast<std::size_t>(std::stoul(rows[r][0]));
    const double sigma = std::stod(rows[r][1]);
    EXPECT_EQ(rows[r][2], fmt_real(ser_stac_bound(k, sigma)));
    EXPECT_EQ(rows[r][6], fmt_real(ser_sep_bound(k, sigma)));
    EXPECT_EQ(rows[r][7], fmt_real(ser_sep_exact(WeightAssignment::equal(k), sigma)));
  }
}

TEST(SerSweep, MonteCarloIsDeterministicAcrossThreads) {
  const auto cfg = Json::parse(R"({"K": [2, 4], "sigma": [0.5], "trials": 40000, "seed": 9,
                                   "gains": {"generator": "log-uniform", "min": 0.5, "max": 2}})");
  const auto a = run_ser_sweep(cfg, RunOptions{std::nullopt, 1}).csv;
  const auto b = run_ser_sweep(cfg, RunOptions{std::nullopt, 4}).csv;
  EXPECT_EQ(a, b);
  const auto c = run_ser_sweep(cfg, RunOptions{10, 1}).csv;
  EXPECT_NE(a, c);
  const auto rows = parse_csv(a);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double mc = std::stod(rows[r][4]);
    const double ci = std::stod(rows[r][5]);
    EXPECT_LE(std::abs(mc - std::stod(rows[r][3])), 3 * ci + 1e-12);
  }
}

TEST(SerSweep, ConfigErrors) {
  EXPECT_THROW(run_ser_sweep(Json::parse(R"({"sigma": 1})")), ConfigError);
  EXPECT_THROW(run_ser_sweep(Json::parse(R"({"K": 0, "sigma": 1})")), ConfigError);
  EXPECT_THROW(run_ser_sweep(Json::parse(R"({"K": 2, "sigma": -1})")), ConfigError);
  EXPECT_THROW(run_ser_sweep(Json::parse(R"({"K": 2, "sigma": "x"})")), ConfigError);
  EXPECT_THROW(run_ser_sweep(Json::parse(R"({"K": 2, "sigma": []})")), ConfigError);
  EXPECT_THROW(run_ser_sweep(Json::parse(R"({"K": 2, "sigma": 1, "experiment": "grouping"})")), ConfigError);
  EXPECT_THROW(run_ser_sweep(Json::parse(R"([1, 2])")), ConfigError);
  try {
    run_ser_sweep(Json::parse(R"({"K": 2, "sigma": [0.1, "bad"]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "sigma[1]");
  }
}

TEST(EnergyCompare, Rows) {
  const auto out = run_energy_compare(Json::parse(R"({"gains": [[2, 1], [1.5, 1.5, 1.5], [0.7]]})")).csv;
  EXPECT_EQ(out,
            "gains,E_stac,E_sep,ratio\n"
            "2;1,2,3.125,1.5625\n"
            "1.5;1.5;1.5,9.33333333333,9.33333333333,1\n"
            "0.7,2.04081632653,2.04081632653,1\n");
}

TEST(EnergyCompare, LiteralOrder) {
  const auto rows = parse_csv(run_energy_compare(Json::parse(R"({"gains": [[2, 1]], "order": "literal"})")).csv);
  EXPECT_EQ(rows[1][1], "4.25");
  EXPECT_EQ(rows[1][2], "3.125");
}

TEST(EnergyCompare, RandomVectorsNeverFavourSeparate) {
  const auto cfg = Json::parse(R"({"random": {"count": 300, "K": [1, 8]}, "seed": 4})");
  const auto out = run_energy_compare(cfg).csv;
  const auto rows = parse_csv(out);
  ASSERT_EQ(rows.size(), 301u);
  for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_GE(std::stod(rows[r][3]), 1.0 - 1e-12);
  EXPECT_EQ(out, run_energy_compare(cfg).csv);
  EXPECT_THROW(run_energy_compare(Json::parse(R"({})")), ConfigError);
  EXPECT_THROW(run_energy_compare(Json::parse(R"({"gains": [[1, 0]]})")), ConfigError);
  EXPECT_THROW(run_energy_compare(Json::parse(R"({"gains": [[1]], "order": "up"})")), ConfigError);
}

TEST(SessionSim, StarReport) {
  const auto cfg = Json::parse(R"({
    "tree": [{"id": "d", "role": "destination"},
             {"id": "a", "role": "source", "parent": "d", "gain": 2.0},
             {"id": "b", "role": "source", "parent": "d", "gain": 0.5, "phase": 1.0, "delay": 0.3},
             {"id": "c", "role": "source", "parent": "d"}],
    "L": 2, "trials": 500, "sigma": 0})");
  const auto out = run_session_sim(cfg);
  const auto rows = parse_csv(out.csv);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"strategy", "slots", "energy", "error_rate", "ci95", "union_bound", "trials"}));
  EXPECT_EQ(rows[1][0], "saf");
  EXPECT_EQ(rows[1][1], "6");
  EXPECT_EQ(rows[1][3], "0");
  EXPECT_EQ(rows[2][0], "caf_stac");
  EXPECT_EQ(rows[2][1], "2");
  EXPECT_EQ(rows[2][3], "0");
  EXPECT_NE(out.summary.find("ratio 3"), std::string::npos);
}

TEST(SessionSim, Errors) {
  EXPECT_THROW(run_session_sim(Json::parse(R"({})")), ConfigError);
  EXPECT_THROW(run_session_sim(Json::parse(R"({"tree": [{"id": "d", "role": "boss"}]})")), ConfigError);
  EXPECT_THROW(run_session_sim(Json::parse(R"({"tree": [{"id": "d", "role": "destination"}]})")), ConfigError);
  EXPECT_THROW(run_session_sim(Json::parse(
                   R"({"tree": [{"id": "d", "role": "destination"}, {"id": "s", "role": "source", "parent": "d"}],
                       "mode": "analog"})")),
               ConfigError);
  EXPECT_THROW(run_session_sim(Json::parse(
                   R"({"tree": [{"id": "d", "role": "destination"}, {"id": "s", "role": "source", "parent": "d"}],
                       "weights": [1, 2]})")),
               ConfigError);
}

TEST(ExtractDemo, Reports) {
  const auto a = run_extract_demo(Json::parse(R"({"digits": [3, 1, 2], "q": 2})")).csv;
  EXPECT_NE(a.find("encoded s0:   39\n"), std::string::npos);
  EXPECT_NE(a.find("extracted:    3 1 2\n"), std::string::npos);
  EXPECT_NE(a.find("round trip:   ok\n"), std::string::npos);
  const auto z = run_extract_demo(Json::parse(R"({"digits": [0, 0, 0, 0], "q": 3})")).csv;
  EXPECT_NE(z.find("encoded s0:   0\n"), std::string::npos);
  const auto m = run_extract_demo(Json::parse(R"({"digits": [7, 7, 7, 7], "q": 3})")).csv;
  EXPECT_NE(m.find("encoded s0:   4095\n"), std::string::npos);
  EXPECT_NE(m.find("round trip:   ok\n"), std::string::npos);
  EXPECT_THROW(run_extract_demo(Json::parse(R"({"digits": [4], "q": 2})")), ConfigError);
  EXPECT_THROW(run_extract_demo(Json::parse(R"({"digits": [1, 1, 1, 1, 1, 1, 1, 1], "q": 8})")), CapacityError);
}

TEST(Grouping, Rows) {
  const auto rows = parse_csv(run_grouping(Json::parse(R"({"gains": [1, 1, 1]})")).csv);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][0], "1");
  EXPECT_EQ(rows[1][1], "21");
  EXPECT_EQ(rows[2][1], "6");
  EXPECT_EQ(rows[3][1], "3");
  EXPECT_EQ(rows[3][3], "{1}{2}{3}");
  EXPECT_EQ(rows[3][5], "1");
  for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_EQ(rows[r][4], "1");
  EXPECT_THROW(run_grouping(Json::parse(R"({"gains": [1,1,1,1,1,1,1,1,1,1,1]})")), CapacityError);
  EXPECT_THROW(run_grouping(Json::parse(R"({"gains": [1], "max_groups": 0})")), ConfigError);
}

TEST(Dispatch, KindNames) {
  for (const char* n : {"ser-sweep", "energy-compare", "session-sim", "extract-demo", "grouping"}) {
    ASSERT_TRUE(parse_kind(n).has_value());
    EXPECT_STREQ(kind_name(*parse_kind(n)), n);
  }
  EXPECT_FALSE(parse_kind("plot").has_value());
}

}  // namespace
}  // namespace stac::experiments
