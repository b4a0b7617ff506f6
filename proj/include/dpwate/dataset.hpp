#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpwate/errors.hpp"

namespace dpwate {

// The confidential input: binary outcomes y, binary treatments z, and an
// n x p real covariate matrix, all aligned by row.
struct CausalDataset {
  std::vector<int> outcomes;
  std::vector<int> treatments;
  Eigen::MatrixXd covariates;
  std::vector<std::string> covariate_names;

  int n() const { return static_cast<int>(outcomes.size()); }
  int p() const { return static_cast<int>(covariates.cols()); }

  int treated_count() const;
  int control_count() const { return n() - treated_count(); }

  // Checks container alignment and 0/1 coding; throws DataError.
  void validate() const;

  // Additionally requires at least one treated and one control record.
  void validate_for_estimation() const;

  CausalDataset subset(std::span<const int> rows) const;
};

// Declarative binarization of a raw column into {0,1}.
//   - threshold:           numeric value >= threshold maps to 1
//   - positive_categories: membership in the set maps to 1
//   - neither:             the column must already contain literal 0/1
struct BinaryRule {
  std::string column;
  std::optional<double> threshold;
  std::vector<std::string> positive_categories;
};

struct CovariateSpec {
  enum class Kind { kNumeric, kOneHot, kIndicator };
  std::string column;
  Kind kind = Kind::kNumeric;
  // Indicator: the positive category set. OneHot: optional fixed category
  // list; when empty, categories are discovered from the data in sorted
  // order and the first is dropped as the reference level.
  std::vector<std::string> categories;
};

struct Schema {
  BinaryRule outcome;
  BinaryRule treatment;
  std::vector<CovariateSpec> covariates;
  std::string missing_token = "?";
  // Default is to reject a file containing missing values; "drop" removes
  // the affected rows instead (counted in the loader report).
  bool drop_missing = false;

  // Accepts either a JSON object string or a path to a JSON file.
  static Schema parse(const std::string& inline_json_or_path);
  static Schema from_json_text(const std::string& text);
};

struct LoadReport {
  int rows_read = 0;
  int rows_dropped_missing = 0;
};

CausalDataset load_csv(const std::string& path, const Schema& schema,
                       LoadReport* report = nullptr);

// Balanced random split of rows into `partition_count` groups whose sizes
// differ by at most one. Deterministic given the seed.
struct Partitioning {
  std::vector<int> assignments;  // 0-based partition id per row
  int partition_count = 0;
  std::vector<int> partition_sizes;
  std::vector<std::vector<int>> members;
};

Partitioning random_partition(const CausalDataset& data, int partition_count,
                              std::uint64_t seed);

// Per-partition treated/control counts; a partition is degenerate when it
// has fewer than two treated or fewer than two control records.
struct PartitionHealth {
  std::vector<int> treated;
  std::vector<int> control;
  std::vector<bool> degenerate;
  bool any_degenerate = false;
  int degenerate_count = 0;
};

PartitionHealth partition_health(const CausalDataset& data,
                                 const Partitioning& parts);

// Audit export: one (row_index, partition_index) record per row, 1-based.
void write_partition_csv(const std::string& path, const Partitioning& parts);

}  // namespace dpwate
