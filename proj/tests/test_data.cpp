#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fedval/dataset.hpp"
#include "oracles.hpp"

using namespace fedval;

namespace {

TabularDataset from_text(const std::string& text, const DatasetSchema& schema) {
  std::istringstream in(text);
  return dataset_from_records(csv::parse(in), schema);
}

DatasetSchema simple_schema(std::vector<FeatureColumn> features) {
  DatasetSchema s;
  s.features = std::move(features);
  s.label_column = "y";
  s.positive_value = "1";
  s.sensitive_column = "g";
  s.advantaged_value = "a";
  return s;
}

std::string temp_file(const std::string& name, const std::string& contents) {
  auto p = std::filesystem::temp_directory_path() / ("fedval_test_" + name);
  std::ofstream(p) << contents;
  return p.string();
}

// 200 rows per group, 100 positives in each.
TabularDataset balanced_400() {
  std::vector<fixture::Row> rows;
  for (int i = 0; i < 400; ++i) rows.push_back({{double(i)}, (i / 2) % 2, i % 2 == 0 ? 'a' : 'd'});
  return fixture::rows(rows);
}

std::multiset<std::vector<double>> row_multiset(const TabularDataset& d) {
  std::multiset<std::vector<double>> s;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    auto r = d.row(i);
    std::vector<double> v(r.begin(), r.end());
    v.push_back(d.label(i));
    v.push_back(static_cast<double>(d.group(i)));
    s.insert(v);
  }
  return s;
}

}  // namespace

TEST(Csv, QuotedFieldsAndCrlf) {
  std::istringstream in("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n1,2\n");
  auto recs = csv::parse(in);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1][0], "x, y");
  EXPECT_EQ(recs[1][1], "say \"hi\"");
  EXPECT_EQ(recs[2][1], "2");
}

TEST(LoadCsv, ZeroVarianceColumnStandardizesToZeros) {
  auto d = from_text("v,y,g\n2,1,a\n2,0,d\n", simple_schema({{"v", ColumnKind::kNumeric, {}}}));
  ASSERT_EQ(d.cols(), 1u);
  EXPECT_EQ(d.row(0)[0], 0.0);
  EXPECT_EQ(d.row(1)[0], 0.0);
}

TEST(LoadCsv, CategoricalOneHot) {
  auto d = from_text("c,y,g\nx,1,a\ny,0,d\nx,1,a\n",
                     simple_schema({{"c", ColumnKind::kCategorical, {"x", "y"}}}));
  ASSERT_EQ(d.cols(), 2u);
  const std::vector<double> expected = {1, 0, 0, 1, 1, 0};
  EXPECT_EQ(d.features(), expected);
}

TEST(LoadCsv, AdultStyleLabelsAndGroups) {
  DatasetSchema s;
  s.features = {{"age", ColumnKind::kNumeric, {}}, {"race", ColumnKind::kCategorical, {"White", "Black"}}};
  s.label_column = "income";
  s.positive_value = ">50K";
  s.sensitive_column = "sex";
  s.advantaged_value = "Male";
  const auto path = temp_file("adult.csv",
                              "age,race,sex,income\n"
                              "39, White, Male, <=50K\n"
                              "50, Black, Female, >50K\n"
                              "28, White, Female, >50K\n"
                              "45, Black, Male, <=50K\n");
  auto d = load_csv(path, s);
  EXPECT_EQ(d.labels(), (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(d.group(0), Group::kAdvantaged);
  EXPECT_EQ(d.group(1), Group::kDisadvantaged);
  EXPECT_EQ(d.cols(), 3u);
}

TEST(LoadCsv, StandardizedColumnsHaveZeroMeanUnitStd) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(3.0, 7.0);
  std::ostringstream text;
  text << "v,w,y,g\n";
  for (int i = 0; i < 257; ++i) text << n(rng) << ',' << n(rng) * 100 << ',' << i % 2 << ',' << (i % 3 ? 'a' : 'd') << '\n';
  auto d = from_text(text.str(), simple_schema({{"v", ColumnKind::kNumeric, {}}, {"w", ColumnKind::kNumeric, {}}}));
  for (std::size_t j = 0; j < d.cols(); ++j) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) mean += d.row(i)[j];
    mean /= d.rows();
    for (std::size_t i = 0; i < d.rows(); ++i) var += (d.row(i)[j] - mean) * (d.row(i)[j] - mean);
    EXPECT_LT(std::fabs(mean), 1e-9);
    EXPECT_LT(std::fabs(std::sqrt(var / d.rows()) - 1.0), 1e-9);
  }
}

TEST(LoadCsv, MissingColumnNamesTheColumn) {
  try {
    from_text("v,y\n1,1\n", simple_schema({{"v", ColumnKind::kNumeric, {}}}));
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("'g'"), std::string::npos);
  }
}

TEST(LoadCsv, UnparseableCellReportsRow) {
  try {
    from_text("v,y,g\n1,1,a\nabc,0,d\n", simple_schema({{"v", ColumnKind::kNumeric, {}}}));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(LoadCsv, EmptyInputs) {
  auto schema = simple_schema({{"v", ColumnKind::kNumeric, {}}});
  EXPECT_THROW(from_text("", schema), EmptyInputError);
  EXPECT_THROW(from_text("v,y,g\n", schema), EmptyInputError);
  EXPECT_THROW(load_csv(temp_file("empty.csv", ""), schema), EmptyInputError);
}

TEST(LoadCsv, MissingValueIsAnError) {
  EXPECT_THROW(from_text("v,y,g\n,1,a\n", simple_schema({{"v", ColumnKind::kNumeric, {}}})), ParseError);
}

TEST(Synthetic, DeterministicForSameSeed) {
  SyntheticSpec s{100, 4, 0.5, 0.5, 7};
  EXPECT_EQ(generate_synthetic(s), generate_synthetic(s));
  auto t = s;
  t.seed = 8;
  EXPECT_NE(generate_synthetic(s), generate_synthetic(t));
}

TEST(Synthetic, DegenerateRateGivesAllPositive) {
  auto d = generate_synthetic({100, 4, 1.0, 1.0, 1});
  EXPECT_TRUE(std::all_of(d.labels().begin(), d.labels().end(), [](auto y) { return y == 1; }));
}

TEST(Synthetic, EmpiricalGroupRates) {
  auto d = generate_synthetic({10000, 4, 0.7, 0.3, 3});
  EXPECT_EQ(d.count(Group::kAdvantaged), 5000u);
  EXPECT_NEAR(d.positive_rate(Group::kAdvantaged), 0.7, 0.03);
  EXPECT_NEAR(d.positive_rate(Group::kDisadvantaged), 0.3, 0.03);
}

TEST(Synthetic, RejectsTooFewRows) {
  EXPECT_THROW(generate_synthetic({1, 4, 0.5, 0.5, 0}), InvalidArgumentError);
}

TEST(Skew, IdentityKeepsRatesEqual) {
  auto d = balanced_400();
  auto s = skew(d, {Group::kDisadvantaged, 1.0, 1.0}, 3);
  EXPECT_EQ(s.rows(), d.rows());
  EXPECT_NEAR(s.positive_rate(Group::kDisadvantaged), s.positive_rate(Group::kAdvantaged), 1.0 / 200);
}

TEST(Skew, QuarterRatio) {
  auto s = skew(balanced_400(), {Group::kDisadvantaged, 0.25, 1.0}, 3);
  const double ratio = s.positive_rate(Group::kDisadvantaged) / s.positive_rate(Group::kAdvantaged);
  EXPECT_GE(ratio, 0.2);
  EXPECT_LE(ratio, 0.3);
}

TEST(Skew, NeverFabricatesRows) {
  auto d = balanced_400();
  auto s = skew(d, {Group::kDisadvantaged, 0.3, 0.6}, 11);
  auto in = row_multiset(d);
  for (const auto& r : row_multiset(s)) {
    auto it = in.find(r);
    ASSERT_NE(it, in.end());
    in.erase(it);
  }
  EXPECT_LT(s.rows(), d.rows());
}

TEST(Skew, EmptyGroupIsInfeasible) {
  auto d = fixture::rows({{{0}, 1, 'a'}, {{1}, 0, 'a'}});
  EXPECT_THROW(skew(d, {Group::kDisadvantaged, 0.5, 1.0}, 0), InfeasibleSkewError);
}

TEST(Skew, UnreachableRatioReportsBound) {
  // rate(d) = 0.25, rate(a) = 1.0: ratio 0.5 would need more positives.
  auto d = fixture::rows({{{0}, 1, 'a'}, {{1}, 1, 'a'}, {{2}, 1, 'd'}, {{3}, 0, 'd'}, {{4}, 0, 'd'}, {{5}, 0, 'd'}});
  try {
    skew(d, {Group::kDisadvantaged, 0.5, 1.0}, 0);
    FAIL();
  } catch (const InfeasibleSkewError& e) {
    EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos);
  }
}

TEST(Skew, Deterministic) {
  auto d = balanced_400();
  EXPECT_EQ(skew(d, {Group::kDisadvantaged, 0.4, 0.5}, 9), skew(d, {Group::kDisadvantaged, 0.4, 0.5}, 9));
}

TEST(Partition, EvenAndRemainderSizes) {
  std::vector<fixture::Row> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({{double(i)}, i % 2, i % 2 ? 'a' : 'd'});
  auto d = fixture::rows(rows);

  std::vector<ClientPlan> two(2, ClientPlan{Behavior::kCooperative, std::nullopt});
  auto p2 = partition(d, two, 1);
  EXPECT_EQ(p2[0].n(), 5u);
  EXPECT_EQ(p2[1].n(), 5u);

  std::vector<ClientPlan> three(3);
  auto p3 = partition(d, three, 1);
  EXPECT_EQ(p3[0].n(), 4u);
  EXPECT_EQ(p3[1].n(), 3u);
  EXPECT_EQ(p3[2].n(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(p3[k].id, k);
    EXPECT_EQ(p3[k].seed_key, k);
  }
}

TEST(Partition, ShardsAreDisjointAndCoverInput) {
  auto d = balanced_400();
  std::vector<ClientPlan> plans(7);
  auto parts = partition(d, plans, 3);
  std::multiset<std::vector<double>> all;
  for (const auto& p : parts) {
    auto s = row_multiset(p.data);
    all.insert(s.begin(), s.end());
  }
  EXPECT_EQ(all, row_multiset(d));
  auto [lo, hi] = std::minmax_element(parts.begin(), parts.end(), [](auto& a, auto& b) { return a.n() < b.n(); });
  EXPECT_LE(hi->n() - lo->n(), 1u);
}

TEST(Partition, UncooperativeShardIsSkewed) {
  auto d = generate_synthetic({1000, 4, 0.5, 0.5, 21});
  std::vector<ClientPlan> plans(9, ClientPlan{Behavior::kCooperative, std::nullopt});
  plans.push_back({Behavior::kUncooperative, SkewSpec{Group::kDisadvantaged, 0.2, 1.0}});
  auto parts = partition(d, plans, 5);
  const auto& u = parts.back();
  EXPECT_EQ(u.behavior, Behavior::kUncooperative);
  const double ratio = u.data.positive_rate(Group::kDisadvantaged) / u.data.positive_rate(Group::kAdvantaged);
  EXPECT_GE(ratio, 0.15);
  EXPECT_LE(ratio, 0.25);
  EXPECT_EQ(u.n(), u.data.rows());
  EXPECT_LT(u.n(), 100u);
}

TEST(Partition, MoreProfilesThanRows) {
  auto d = fixture::rows({{{0}, 1, 'a'}, {{1}, 0, 'd'}});
  std::vector<ClientPlan> plans(3);
  EXPECT_THROW(partition(d, plans, 0), InvalidPartitionError);
  EXPECT_THROW(partition(d, std::span<const ClientPlan>{}, 0), InvalidPartitionError);
}

TEST(SplitValidation, SizesAndDeterminism) {
  auto d = generate_synthetic({100, 3, 0.5, 0.5, 2});
  auto a = split_validation(d, 0.2, 17);
  EXPECT_EQ(a.train.rows(), 80u);
  EXPECT_EQ(a.validation.rows(), 20u);
  auto b = split_validation(d, 0.2, 17);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);

  auto whole = row_multiset(a.train);
  auto v = row_multiset(a.validation);
  whole.insert(v.begin(), v.end());
  EXPECT_EQ(whole, row_multiset(d));
}

TEST(SplitValidation, OneGroupInputFails) {
  std::vector<fixture::Row> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({{double(i)}, i % 2, 'a'});
  EXPECT_THROW(split_validation(fixture::rows(rows), 0.2, 1), InvalidValidationSplitError);
}

TEST(SplitValidation, BadFraction) {
  auto d = generate_synthetic({10, 2, 0.5, 0.5, 2});
  EXPECT_THROW(split_validation(d, 0.0, 1), InvalidValidationSplitError);
  EXPECT_THROW(split_validation(d, 0.01, 1), InvalidValidationSplitError);
}
