#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dpwate/dataset.hpp"
#include "dpwate/simlab.hpp"

using namespace dpwate;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  fs::path dir = fs::temp_directory_path() / "dpwate_dataset_tests";
  fs::create_directories(dir);
  fs::path path = dir / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

Schema plain_schema() {
  return Schema::parse(R"({
    "outcome": "y", "treatment": "z",
    "covariates": ["x1", "x2"]
  })");
}

}  // namespace

TEST_CASE("load_csv parses a small valid file") {
  auto path = temp_file("ok.csv",
                        "y,z,x1,x2\n"
                        "1,0,0.5,2.0\n"
                        "0,1,-1.5,0.25\n"
                        "1,1,3.0,-2.0\n"
                        "0,0,0.0,1.0\n");
  CausalDataset data = load_csv(path.string(), plain_schema());
  CHECK(data.n() == 4);
  CHECK(data.p() == 2);
  CHECK(data.outcomes == std::vector<int>{1, 0, 1, 0});
  CHECK(data.treatments == std::vector<int>{0, 1, 1, 0});
  CHECK(data.covariates(2, 0) == doctest::Approx(3.0));
  CHECK(data.covariate_names == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("load_csv rejects a non-binary outcome and names the row") {
  auto path = temp_file("bad_y.csv",
                        "y,z,x1,x2\n"
                        "1,0,0.5,2.0\n"
                        "2,1,1.0,1.0\n");
  try {
    load_csv(path.string(), plain_schema());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("load_csv rejects empty files and missing columns") {
  auto empty = temp_file("empty.csv", "");
  CHECK_THROWS_AS(load_csv(empty.string(), plain_schema()), DataError);

  auto header_only = temp_file("header_only.csv", "y,z,x1,x2\n");
  CHECK_THROWS_AS(load_csv(header_only.string(), plain_schema()), DataError);

  auto missing_col = temp_file("missing_col.csv", "y,z,x1\n1,0,0.5\n");
  CHECK_THROWS_AS(load_csv(missing_col.string(), plain_schema()), DataError);

  CHECK_THROWS_AS(load_csv("/nonexistent/nope.csv", plain_schema()),
                  DataError);
}

TEST_CASE("load_csv applies threshold, category, one-hot and indicator rules") {
  auto path = temp_file("rules.csv",
                        "income,education,age,color,country\n"
                        "61000,Masters,31,red,US\n"
                        "20000,HS,45,blue,FR\n"
                        "50000,Doctorate,28,green,US\n"
                        "49999,HS,60,red,DE\n");
  Schema schema = Schema::parse(R"({
    "outcome": {"column": "income", "positive": {"gte": 50000}},
    "treatment": {"column": "education",
                  "positive": {"categories": ["Masters", "Doctorate"]}},
    "covariates": [
      {"column": "age", "type": "numeric"},
      {"column": "color", "type": "onehot"},
      {"column": "country", "type": "indicator", "categories": ["US"]}
    ]
  })");
  CausalDataset data = load_csv(path.string(), schema);
  CHECK(data.n() == 4);
  CHECK(data.outcomes == std::vector<int>{1, 0, 1, 0});
  CHECK(data.treatments == std::vector<int>{1, 0, 1, 0});
  // Sorted colors are blue, green, red; blue is the dropped reference.
  CHECK(data.covariate_names ==
        std::vector<std::string>{"age", "color=green", "color=red",
                                 "country=in_set"});
  CHECK(data.covariates(0, 2) == doctest::Approx(1.0));  // red
  CHECK(data.covariates(1, 1) == doctest::Approx(0.0));
  CHECK(data.covariates(1, 2) == doctest::Approx(0.0));  // blue baseline
  CHECK(data.covariates(3, 3) == doctest::Approx(0.0));  // DE not in set
}

TEST_CASE("missing values are rejected by default and droppable by schema") {
  const std::string body =
      "y,z,x1,x2\n"
      "1,0,0.5,2.0\n"
      "0,1,?,0.25\n"
      "1,1,3.0,-2.0\n";
  auto path = temp_file("missing.csv", body);
  CHECK_THROWS_AS(load_csv(path.string(), plain_schema()), DataError);

  Schema dropping = Schema::parse(R"({
    "outcome": "y", "treatment": "z",
    "covariates": ["x1", "x2"],
    "on_missing": "drop"
  })");
  LoadReport report;
  CausalDataset data = load_csv(path.string(), dropping, &report);
  CHECK(data.n() == 2);
  CHECK(report.rows_read == 3);
  CHECK(report.rows_dropped_missing == 1);
}

TEST_CASE("load then write-back round-trips values") {
  auto path = temp_file("roundtrip_src.csv",
                        "y,z,x1,x2\n"
                        "1,0,0.125,-3.5\n"
                        "0,1,2.25,0.0078125\n"
                        "1,1,-17.75,42.0\n");
  CausalDataset first = load_csv(path.string(), plain_schema());

  std::ostringstream rewritten;
  rewritten << "y,z,x1,x2\n";
  rewritten.precision(17);
  for (int i = 0; i < first.n(); ++i) {
    rewritten << first.outcomes[i] << ',' << first.treatments[i] << ','
              << first.covariates(i, 0) << ',' << first.covariates(i, 1)
              << "\n";
  }
  auto back = temp_file("roundtrip_back.csv", rewritten.str());
  CausalDataset second = load_csv(back.string(), plain_schema());

  REQUIRE(second.n() == first.n());
  CHECK(second.outcomes == first.outcomes);
  CHECK(second.treatments == first.treatments);
  for (int i = 0; i < first.n(); ++i) {
    for (int j = 0; j < first.p(); ++j) {
      CHECK(second.covariates(i, j) ==
            doctest::Approx(first.covariates(i, j)).epsilon(1e-15));
    }
  }
}

namespace {

CausalDataset synthetic(int n, std::uint64_t seed = 7) {
  ScenarioConfig config;
  config.n = n;
  return generate_scenario_data(config, seed).data;
}

}  // namespace

TEST_CASE("random_partition balances sizes and is deterministic") {
  CausalDataset data = synthetic(1000);

  SUBCASE("n=10, M=5 gives five partitions of size 2") {
    CausalDataset small = data.subset(std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7,
                                                       8, 9});
    Partitioning parts = random_partition(small, 5, 123);
    REQUIRE(parts.partition_sizes.size() == 5);
    for (int size : parts.partition_sizes) CHECK(size == 2);
  }

  SUBCASE("identical seeds give identical assignments") {
    Partitioning a = random_partition(data, 7, 99);
    Partitioning b = random_partition(data, 7, 99);
    CHECK(a.assignments == b.assignments);
  }

  SUBCASE("different seeds change assignments but sizes stay balanced") {
    Partitioning a = random_partition(data, 7, 1);
    Partitioning b = random_partition(data, 7, 2);
    CHECK(a.assignments != b.assignments);
    for (int m = 0; m < 7; ++m) {
      CHECK(std::abs(a.partition_sizes[m] - b.partition_sizes[m]) <= 1);
    }
  }

  SUBCASE("every row lands in exactly one partition") {
    for (int m_count : {1, 3, 13, 999, 1000}) {
      Partitioning parts = random_partition(data, m_count, 5);
      std::set<int> seen;
      for (int m = 0; m < parts.partition_count; ++m) {
        for (int row : parts.members[m]) {
          CHECK(parts.assignments[row] == m);
          seen.insert(row);
        }
      }
      CHECK(static_cast<int>(seen.size()) == data.n());
      int max_size = *std::max_element(parts.partition_sizes.begin(),
                                       parts.partition_sizes.end());
      int min_size = *std::min_element(parts.partition_sizes.begin(),
                                       parts.partition_sizes.end());
      CHECK(max_size - min_size <= 1);
    }
  }

  SUBCASE("invalid partition counts are parameter errors") {
    CHECK_THROWS_AS(random_partition(data, 1001, 5), ParameterError);
    CHECK_THROWS_AS(random_partition(data, 0, 5), ParameterError);
    CHECK_THROWS_AS(random_partition(data, -2, 5), ParameterError);
  }
}

TEST_CASE("n=10000 M=100 gives one hundred partitions of size 100") {
  CausalDataset data = synthetic(10000);
  Partitioning parts = random_partition(data, 100, 42);
  REQUIRE(parts.partition_count == 100);
  for (int size : parts.partition_sizes) CHECK(size == 100);
}

TEST_CASE("partition_health flags partitions short of either arm") {
  CausalDataset data;
  data.covariates.setZero(104, 1);
  // First 4 rows: 2 treated + 2 control; rest: 1 treated + 99 control.
  data.treatments = std::vector<int>(104, 0);
  data.treatments[0] = data.treatments[1] = 1;
  data.treatments[4] = 1;
  data.outcomes = std::vector<int>(104, 0);

  Partitioning parts;
  parts.partition_count = 2;
  parts.assignments.assign(104, 1);
  for (int i = 0; i < 4; ++i) parts.assignments[i] = 0;
  parts.partition_sizes = {4, 100};
  parts.members.resize(2);
  for (int i = 0; i < 104; ++i) {
    parts.members[parts.assignments[i]].push_back(i);
  }

  PartitionHealth health = partition_health(data, parts);
  CHECK(health.treated == std::vector<int>{2, 1});
  CHECK(health.control == std::vector<int>{2, 99});
  CHECK_FALSE(health.degenerate[0]);  // exactly two of each is enough
  CHECK(health.degenerate[1]);
  CHECK(health.any_degenerate);
  CHECK(health.degenerate_count == 1);
}

TEST_CASE("no degenerate partitions at the simulation design scale") {
  // Balanced data of n=10000 split 100 ways, across many partition seeds.
  CausalDataset data = synthetic(10000, 31);
  int degenerate = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Partitioning parts = random_partition(data, 100, seed);
    degenerate += partition_health(data, parts).degenerate_count;
  }
  CHECK(degenerate == 0);
}

TEST_CASE("partition export writes one record per row") {
  CausalDataset data = synthetic(20);
  Partitioning parts = random_partition(data, 4, 11);
  fs::path path =
      fs::temp_directory_path() / "dpwate_dataset_tests" / "parts.csv";
  write_partition_csv(path.string(), parts);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "row_index,partition_index");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 20);
}

TEST_CASE("dataset validation catches misaligned and non-binary input") {
  CausalDataset data;
  data.outcomes = {0, 1};
  data.treatments = {0, 1};
  data.covariates.setZero(2, 1);
  CHECK_NOTHROW(data.validate());

  data.treatments = {0};
  CHECK_THROWS_AS(data.validate(), DataError);

  data.treatments = {0, 2};
  CHECK_THROWS_AS(data.validate(), DataError);

  data.treatments = {0, 0};
  CHECK_THROWS_AS(data.validate_for_estimation(), DegenerateError);
}
