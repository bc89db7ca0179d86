#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>

#include "strucsim/dataset.hpp"
#include "strucsim/error.hpp"

namespace strucsim {
namespace {

const std::filesystem::path kDataDir = STRUCSIM_DATA_DIR;

Dataset parse(const std::string& text, const CsvOptions& options = {}) {
  std::istringstream in(text);
  return parse_csv(in, options, "t.csv");
}

std::string error_of(const std::string& text, const CsvOptions& options = {}) {
  try {
    parse(text, options);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseCsv, RowsBecomeColumns) {
  const Dataset d = parse("1,2,3\n4,5,6\n");
  ASSERT_EQ(d.dimension(), 3);
  ASSERT_EQ(d.size(), 2);
  EXPECT_EQ(d.points(2, 0), 3.0);
  EXPECT_EQ(d.points(0, 1), 4.0);
  EXPECT_FALSE(d.has_labels());
}

TEST(ParseCsv, HeaderNamedLabelColumn) {
  CsvOptions o;
  o.has_header = true;
  o.label_column = std::string("kind");
  const Dataset d = parse("x, kind ,y\n1,b,2\n3,a,4\n5,b,6\n", o);
  EXPECT_EQ(d.dimension(), 2);
  EXPECT_EQ(d.label_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(*d.labels, (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(d.points(1, 2), 6.0);
}

TEST(ParseCsv, NegativeLabelIndexCountsFromTheEnd) {
  CsvOptions o;
  o.label_column = -1;
  const Dataset d = parse("1,2,g\n3,4,b\n", o);
  EXPECT_EQ(d.dimension(), 2);
  EXPECT_EQ(d.label_names, (std::vector<std::string>{"b", "g"}));
}

TEST(ParseCsv, SkipsBlankLinesAndKeepsLineNumbers) {
  EXPECT_EQ(parse("\n1,2\n\n3,4\n").size(), 2);
  EXPECT_EQ(error_of("1,2\n\n3,x\n"), "t.csv:3: column 2: 'x' is not a number");
}

TEST(ParseCsv, ReportsMalformedInput) {
  EXPECT_EQ(error_of("1,2\n3\n"), "t.csv:2: expected 2 columns, found 1");
  EXPECT_EQ(error_of("1,nan\n"), "t.csv:1: column 2: non-finite value");
  EXPECT_EQ(error_of("1,,2\n"), "t.csv:1: column 2: '' is not a number");
  EXPECT_EQ(error_of(""), "t.csv: file contains no data rows");
  CsvOptions o;
  o.label_column = 5;
  EXPECT_EQ(error_of("1,2\n", o), "t.csv: label column index 5 out of range");
  o.label_column = std::string("y");
  EXPECT_EQ(error_of("1,2\n", o), "t.csv: label column given by name but the file has no header");
  o.has_header = true;
  EXPECT_EQ(error_of("a,b\n1,2\n", o), "t.csv: no column named 'y'");
  EXPECT_EQ(error_of("a,b,c\n1,2\n", o), "t.csv:2: header has 3 columns but data rows have 2");
}

TEST(ParseCsv, LeadingPlusAndExponentsParse) {
  const Dataset d = parse("+1.5,-2e-3\n");
  EXPECT_EQ(d.points(0, 0), 1.5);
  EXPECT_EQ(d.points(1, 0), -2e-3);
}

TEST(Dataset, FingerprintTracksContents) {
  const Dataset a = parse("1,2\n3,4\n");
  const Dataset b = parse("1,2\n3,4\n");
  const Dataset c = parse("1,2\n3,4.0000001\n");
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
}

TEST(Dataset, SubsetKeepsLabelsAndRejectsBadIndices) {
  CsvOptions o;
  o.label_column = 0;
  const Dataset d = parse("a,1\nb,2\nc,3\n", o);
  const std::vector<std::size_t> idx{2, 0};
  const Dataset s = d.subset(idx);
  EXPECT_EQ(s.points(0, 0), 3.0);
  EXPECT_EQ(*s.labels, (std::vector<int>{2, 0}));
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(d.subset(bad), InputError);
}

TEST(Dataset, ValidateRejectsNonFiniteAndMismatchedLabels) {
  Dataset d;
  d.points = Eigen::MatrixXd::Zero(2, 3);
  d.labels = std::vector<int>{0, 1};
  EXPECT_THROW(d.validate(), InputError);
  d.labels = std::vector<int>{0, 1, 1};
  EXPECT_NO_THROW(d.validate());
  d.points(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(d.validate(), InputError);
}

TEST(LoadCsv, IrisHasOneHundredFiftyFourDimensionalRows) {
  const auto path = kDataDir / "iris.csv";
  if (!std::filesystem::exists(path)) GTEST_SKIP() << "run tools/prepare_datasets.py first";
  CsvOptions o;
  o.has_header = true;
  o.label_column = -1;
  const Dataset d = load_csv(path, o);
  EXPECT_EQ(d.dimension(), 4);
  EXPECT_EQ(d.size(), 150);
  EXPECT_EQ(d.label_names.size(), 3u);
}

TEST(LoadCsv, MissingFileIsInputError) {
  EXPECT_THROW(load_csv(kDataDir / "does-not-exist.csv", {}), InputError);
}

TEST(LineCircle, CountsLabelsAndDeterminism) {
  const Dataset a = gen_line_circle(50, 0.03, 9);
  const Dataset b = gen_line_circle(50, 0.03, 9);
  const Dataset c = gen_line_circle(50, 0.03, 10);
  EXPECT_EQ(a.size(), 100);
  EXPECT_EQ(a.dimension(), 2);
  EXPECT_EQ(std::count(a.labels->begin(), a.labels->end(), 1), 50);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(LineCircle, NoiselessPointsLieOnTheirStructures) {
  const LineCircleGeometry g;
  const Dataset d = gen_line_circle(40, 0.0, 1, g);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const Eigen::Vector2d p = d.points.col(i);
    if ((*d.labels)[static_cast<std::size_t>(i)] == 0) {
      EXPECT_EQ(p.y(), g.line_y);
      EXPECT_GE(p.x(), g.line_x_min);
      EXPECT_LE(p.x(), g.line_x_max);
    } else {
      const Eigen::Vector2d center(g.circle_center_x, g.circle_center_y);
      EXPECT_NEAR((p - center).norm(), g.circle_radius, 1e-12);
    }
  }
}

TEST(LineCircle, RejectsBadArguments) {
  EXPECT_THROW(gen_line_circle(0, 0.1, 0), InputError);
  EXPECT_THROW(gen_line_circle(10, -0.1, 0), InputError);
}

TEST(Clusters, CountsAndLabels) {
  const AnomalyCounts counts{30, 10, 15};
  const AnomalyData d = gen_clusters(4, counts);
  EXPECT_EQ(d.train.size(), 30);
  EXPECT_EQ(d.test.size(), 25);
  EXPECT_EQ(std::count(d.test.labels->begin(), d.test.labels->end(), 1), 15);
  EXPECT_EQ(gen_clusters(4, counts).test.points, d.test.points);
}

TEST(Clusters, AnomaliesStayInsideTheBox) {
  const ClustersGeometry g;
  Rng rng(5);
  const Eigen::MatrixXd a = sample_clusters_anomalous(2000, rng, g);
  const double x_lo = std::min(g.first_mean_x - 3 * g.first_std, g.second_mean_x - 3 * g.second_std);
  const double x_hi = std::max(g.first_mean_x + 3 * g.first_std, g.second_mean_x + 3 * g.second_std);
  EXPECT_GE(a.row(0).minCoeff(), x_lo);
  EXPECT_LE(a.row(0).maxCoeff(), x_hi);
}

TEST(LinearSubspace, NominalPointsHugAPlane) {
  const AnomalyData d = gen_linear_subspace(3);
  EXPECT_EQ(d.train.dimension(), 3);
  EXPECT_EQ(d.train.size(), 20);
  // The smallest singular value measures the off-plane spread, which is on
  // the order of the nominal noise.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.train.points);
  EXPECT_LT(svd.singularValues()(2), 0.05 * 3.0 * std::sqrt(20.0));
  EXPECT_GT(svd.singularValues()(1), 1.0);
}

TEST(LinearSubspace, RejectsBadParameters) {
  LinearSubspaceParams p;
  p.ambient_dim = 2;
  EXPECT_THROW(gen_linear_subspace(0, p), InputError);
  p = {};
  p.subspace_dim = 3;
  EXPECT_THROW(gen_linear_subspace(0, p), InputError);
}

TEST(IndependentSubspaces, BlocksHaveTheRequestedRanks) {
  const std::vector<int> ranks{2, 3};
  const Dataset d = gen_independent_subspaces(8, ranks, 25, 6);
  EXPECT_EQ(d.size(), 50);
  EXPECT_EQ(d.dimension(), 8);
  const Eigen::MatrixXd first = d.points.leftCols(25);
  const Eigen::MatrixXd second = d.points.rightCols(25);
  const auto rank_of = [](const Eigen::MatrixXd& m) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    lu.setThreshold(1e-10);
    return lu.rank();
  };
  EXPECT_EQ(rank_of(first), 2);
  EXPECT_EQ(rank_of(second), 3);
  EXPECT_EQ(rank_of(d.points), 5);
  EXPECT_EQ((*d.labels)[24], 0);
  EXPECT_EQ((*d.labels)[25], 1);
}

TEST(IndependentSubspaces, RejectsBadRanks) {
  const std::vector<int> too_many{4, 5};
  const std::vector<int> zero{0, 2};
  EXPECT_THROW(gen_independent_subspaces(8, too_many, 10, 0), InputError);
  EXPECT_THROW(gen_independent_subspaces(8, zero, 10, 0), InputError);
  const std::vector<int> ok{1};
  EXPECT_THROW(gen_independent_subspaces(8, ok, 0, 0), InputError);
}

Dataset fake_ionosphere() {
  Dataset d;
  d.name = "ionosphere";
  d.points = Eigen::MatrixXd::Zero(34, 351);
  std::vector<int> labels(351, 1);
  for (int i = 0; i < 117; ++i) labels[static_cast<std::size_t>(3 * i)] = 0;
  for (int i = 0; i < 351; ++i) d.points(0, i) = i;
  d.labels = labels;
  d.label_names = {"b", "g"};
  return d;
}

TEST(SplitIonosphere, CountsAndDisjointness) {
  const Dataset d = fake_ionosphere();
  EXPECT_EQ(ionosphere_nominal_label(d), 1);
  const SplitPlan plan = split_ionosphere(d, 3);
  EXPECT_EQ(plan.train.size(), 175u);
  EXPECT_EQ(plan.test.size(), 30u);
  EXPECT_EQ(std::count(plan.test_anomalous.begin(), plan.test_anomalous.end(), 1), 15);
  std::set<std::size_t> seen(plan.train.begin(), plan.train.end());
  for (std::size_t i : plan.test) EXPECT_TRUE(seen.insert(i).second);
  for (std::size_t i : plan.train) EXPECT_EQ((*d.labels)[i], 1);
  for (std::size_t t = 0; t < plan.test.size(); ++t) {
    EXPECT_EQ((*d.labels)[plan.test[t]] == 0, plan.test_anomalous[t] == 1);
  }
  EXPECT_EQ(split_ionosphere(d, 3).train, plan.train);
  EXPECT_NE(split_ionosphere(d, 4).train, plan.train);
}

TEST(SplitIonosphere, RejectsWrongShapeAndOversizedCounts) {
  Dataset d = fake_ionosphere();
  IonosphereSplitCounts counts;
  counts.nominal_train = 220;
  EXPECT_THROW(split_ionosphere(d, 0, counts), InputError);
  d.points.conservativeResize(33, Eigen::NoChange);
  EXPECT_THROW(split_ionosphere(d, 0), InputError);
}

TEST(SplitIonosphere, RealFileWhenAvailable) {
  const auto path = kDataDir / "ionosphere.csv";
  if (!std::filesystem::exists(path)) GTEST_SKIP() << "run tools/prepare_datasets.py first";
  CsvOptions o;
  o.has_header = true;
  o.label_column = -1;
  const Dataset d = load_csv(path, o);
  EXPECT_EQ(d.size(), 351);
  EXPECT_EQ(d.dimension(), 34);
  EXPECT_EQ(d.label_names[static_cast<std::size_t>(ionosphere_nominal_label(d))], "g");
  EXPECT_NO_THROW(split_ionosphere(d, 0));
}

}  // namespace
}  // namespace strucsim
