#include "dpwate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dpwate/rng.hpp"

namespace dpwate {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double* value) {
  try {
    size_t pos = 0;
    *value = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(*value);
  } catch (...) {
    return false;
  }
}

BinaryRule binary_rule_from_json(const nlohmann::json& j,
                                 const std::string& role) {
  BinaryRule rule;
  if (j.is_string()) {
    rule.column = j.get<std::string>();
    return rule;
  }
  if (!j.is_object() || !j.contains("column")) {
    throw DataError("schema: '" + role + "' must be a column name or an "
                    "object with a 'column' field");
  }
  rule.column = j.at("column").get<std::string>();
  if (j.contains("positive")) {
    const auto& pos = j.at("positive");
    if (pos.contains("gte")) rule.threshold = pos.at("gte").get<double>();
    if (pos.contains("categories")) {
      rule.positive_categories =
          pos.at("categories").get<std::vector<std::string>>();
    }
  }
  return rule;
}

int apply_binary_rule(const BinaryRule& rule, const std::string& cell,
                      int row_1based, const std::string& role) {
  if (rule.threshold) {
    double v;
    if (!parse_double(cell, &v)) {
      throw DataError(role + " column '" + rule.column + "' row " +
                      std::to_string(row_1based) + ": non-numeric value '" +
                      cell + "'");
    }
    return v >= *rule.threshold ? 1 : 0;
  }
  if (!rule.positive_categories.empty()) {
    for (const auto& cat : rule.positive_categories) {
      if (cell == cat) return 1;
    }
    return 0;
  }
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw DataError(role + " column '" + rule.column + "' row " +
                  std::to_string(row_1based) + ": value '" + cell +
                  "' is not 0/1 and no binarization rule was declared");
}

}  // namespace

int CausalDataset::treated_count() const {
  int c = 0;
  for (int z : treatments) c += z;
  return c;
}

void CausalDataset::validate() const {
  const auto nn = outcomes.size();
  if (treatments.size() != nn ||
      static_cast<size_t>(covariates.rows()) != nn) {
    throw DataError("dataset containers are not aligned: outcomes=" +
                    std::to_string(nn) + " treatments=" +
                    std::to_string(treatments.size()) + " covariate rows=" +
                    std::to_string(covariates.rows()));
  }
  for (size_t i = 0; i < nn; ++i) {
    if (outcomes[i] != 0 && outcomes[i] != 1) {
      throw DataError("outcome at row " + std::to_string(i + 1) +
                      " is not binary");
    }
    if (treatments[i] != 0 && treatments[i] != 1) {
      throw DataError("treatment at row " + std::to_string(i + 1) +
                      " is not binary");
    }
  }
  if (!covariates.allFinite()) {
    throw DataError("covariate matrix contains non-finite values");
  }
}

void CausalDataset::validate_for_estimation() const {
  validate();
  int t = treated_count();
  if (t == 0 || t == n()) {
    throw DegenerateError(
        "dataset needs at least one treated and one control record");
  }
}

CausalDataset CausalDataset::subset(std::span<const int> rows) const {
  CausalDataset out;
  out.covariate_names = covariate_names;
  out.outcomes.reserve(rows.size());
  out.treatments.reserve(rows.size());
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()),
                        covariates.cols());
  Eigen::Index r = 0;
  for (int i : rows) {
    out.outcomes.push_back(outcomes[i]);
    out.treatments.push_back(treatments[i]);
    out.covariates.row(r++) = covariates.row(i);
  }
  return out;
}

Schema Schema::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("schema: invalid JSON: ") + e.what());
  }
  Schema s;
  if (!j.contains("outcome") || !j.contains("treatment")) {
    throw DataError("schema: 'outcome' and 'treatment' are required");
  }
  s.outcome = binary_rule_from_json(j.at("outcome"), "outcome");
  s.treatment = binary_rule_from_json(j.at("treatment"), "treatment");
  if (j.contains("covariates")) {
    for (const auto& c : j.at("covariates")) {
      CovariateSpec spec;
      if (c.is_string()) {
        spec.column = c.get<std::string>();
      } else {
        spec.column = c.at("column").get<std::string>();
        std::string kind = c.value("type", "numeric");
        if (kind == "numeric") {
          spec.kind = CovariateSpec::Kind::kNumeric;
        } else if (kind == "onehot") {
          spec.kind = CovariateSpec::Kind::kOneHot;
        } else if (kind == "indicator") {
          spec.kind = CovariateSpec::Kind::kIndicator;
        } else {
          throw DataError("schema: unknown covariate type '" + kind + "'");
        }
        if (c.contains("categories")) {
          spec.categories = c.at("categories").get<std::vector<std::string>>();
        }
        if (spec.kind == CovariateSpec::Kind::kIndicator &&
            spec.categories.empty()) {
          throw DataError("schema: indicator covariate '" + spec.column +
                          "' needs a 'categories' list");
        }
      }
      s.covariates.push_back(std::move(spec));
    }
  }
  if (s.covariates.empty()) {
    throw DataError("schema: at least one covariate is required");
  }
  s.missing_token = j.value("missing_token", std::string("?"));
  std::string on_missing = j.value("on_missing", std::string("reject"));
  if (on_missing == "drop") {
    s.drop_missing = true;
  } else if (on_missing != "reject") {
    throw DataError("schema: on_missing must be 'reject' or 'drop'");
  }
  return s;
}

Schema Schema::parse(const std::string& inline_json_or_path) {
  std::string text = trim(inline_json_or_path);
  if (!text.empty() && text.front() == '{') {
    return from_json_text(text);
  }
  std::ifstream in(inline_json_or_path);
  if (!in) {
    throw DataError("schema file not found: " + inline_json_or_path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

CausalDataset load_csv(const std::string& path, const Schema& schema,
                       LoadReport* report) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open input file: " + path);
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("input file is empty: " + path);
  }
  const auto header = split_csv_line(line);
  std::map<std::string, int> col_index;
  for (size_t i = 0; i < header.size(); ++i) {
    col_index[header[i]] = static_cast<int>(i);
  }
  auto require_column = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end()) {
      throw DataError("schema: column '" + name + "' not found in " + path);
    }
    return it->second;
  };

  const int outcome_col = require_column(schema.outcome.column);
  const int treatment_col = require_column(schema.treatment.column);
  std::vector<int> cov_cols;
  for (const auto& spec : schema.covariates) {
    cov_cols.push_back(require_column(spec.column));
  }

  std::vector<std::vector<std::string>> rows;
  int rows_read = 0;
  int dropped = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    ++rows_read;
    bool missing = false;
    for (const auto& c : cells) {
      if (c.empty() || c == schema.missing_token) {
        missing = true;
        break;
      }
    }
    if (missing) {
      if (schema.drop_missing) {
        ++dropped;
        continue;
      }
      throw DataError("row " + std::to_string(line_no) +
                      " contains a missing value; rows with missing values "
                      "are not accepted (schema on_missing=reject)");
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) {
    throw DataError("input file has no data rows: " + path);
  }

  // Resolve one-hot category sets (sorted; first level is the reference).
  std::vector<std::vector<std::string>> onehot_levels(schema.covariates.size());
  for (size_t k = 0; k < schema.covariates.size(); ++k) {
    const auto& spec = schema.covariates[k];
    if (spec.kind != CovariateSpec::Kind::kOneHot) continue;
    if (!spec.categories.empty()) {
      onehot_levels[k] = spec.categories;
    } else {
      std::set<std::string> seen;
      for (const auto& r : rows) seen.insert(r[cov_cols[k]]);
      onehot_levels[k].assign(seen.begin(), seen.end());
    }
    if (onehot_levels[k].size() < 2) {
      throw DataError("one-hot covariate '" + spec.column +
                      "' has fewer than two categories");
    }
  }

  std::vector<std::string> names;
  for (size_t k = 0; k < schema.covariates.size(); ++k) {
    const auto& spec = schema.covariates[k];
    switch (spec.kind) {
      case CovariateSpec::Kind::kNumeric:
        names.push_back(spec.column);
        break;
      case CovariateSpec::Kind::kIndicator:
        names.push_back(spec.column + "=in_set");
        break;
      case CovariateSpec::Kind::kOneHot:
        for (size_t l = 1; l < onehot_levels[k].size(); ++l) {
          names.push_back(spec.column + "=" + onehot_levels[k][l]);
        }
        break;
    }
  }

  CausalDataset data;
  data.covariate_names = names;
  const int n = static_cast<int>(rows.size());
  data.covariates.setZero(n, static_cast<Eigen::Index>(names.size()));
  data.outcomes.reserve(n);
  data.treatments.reserve(n);

  for (int i = 0; i < n; ++i) {
    const auto& cells = rows[i];
    data.outcomes.push_back(
        apply_binary_rule(schema.outcome, cells[outcome_col], i + 1,
                          "outcome"));
    data.treatments.push_back(
        apply_binary_rule(schema.treatment, cells[treatment_col], i + 1,
                          "treatment"));
    Eigen::Index col = 0;
    for (size_t k = 0; k < schema.covariates.size(); ++k) {
      const auto& spec = schema.covariates[k];
      const std::string& cell = cells[cov_cols[k]];
      switch (spec.kind) {
        case CovariateSpec::Kind::kNumeric: {
          double v;
          if (!parse_double(cell, &v)) {
            throw DataError("covariate '" + spec.column + "' row " +
                            std::to_string(i + 1) + ": non-numeric value '" +
                            cell + "'");
          }
          data.covariates(i, col++) = v;
          break;
        }
        case CovariateSpec::Kind::kIndicator: {
          bool hit = std::find(spec.categories.begin(), spec.categories.end(),
                               cell) != spec.categories.end();
          data.covariates(i, col++) = hit ? 1.0 : 0.0;
          break;
        }
        case CovariateSpec::Kind::kOneHot: {
          const auto& levels = onehot_levels[k];
          auto it = std::find(levels.begin(), levels.end(), cell);
          if (it == levels.end()) {
            throw DataError("covariate '" + spec.column + "' row " +
                            std::to_string(i + 1) + ": category '" + cell +
                            "' not in the declared level set");
          }
          size_t idx = static_cast<size_t>(it - levels.begin());
          for (size_t l = 1; l < levels.size(); ++l) {
            data.covariates(i, col++) = (idx == l) ? 1.0 : 0.0;
          }
          break;
        }
      }
    }
  }

  data.validate();
  if (report) {
    report->rows_read = rows_read;
    report->rows_dropped_missing = dropped;
  }
  return data;
}

Partitioning random_partition(const CausalDataset& data, int partition_count,
                              std::uint64_t seed) {
  const int n = data.n();
  if (partition_count < 1) {
    throw ParameterError("partition count must be at least 1");
  }
  if (partition_count > n) {
    throw ParameterError("partition count " + std::to_string(partition_count) +
                         " exceeds record count " + std::to_string(n));
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  RngStream rng(seed, Stream::kPartition);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }

  Partitioning parts;
  parts.partition_count = partition_count;
  parts.assignments.assign(n, -1);
  parts.partition_sizes.resize(partition_count);
  parts.members.resize(partition_count);

  // Contiguous chunks of the shuffled order; the first n % M chunks take the
  // extra record so sizes differ by at most one.
  const int base = n / partition_count;
  const int extra = n % partition_count;
  int cursor = 0;
  for (int m = 0; m < partition_count; ++m) {
    int size = base + (m < extra ? 1 : 0);
    parts.partition_sizes[m] = size;
    parts.members[m].reserve(size);
    for (int k = 0; k < size; ++k) {
      int row = order[cursor++];
      parts.assignments[row] = m;
      parts.members[m].push_back(row);
    }
  }
  return parts;
}

PartitionHealth partition_health(const CausalDataset& data,
                                 const Partitioning& parts) {
  if (static_cast<int>(parts.assignments.size()) != data.n()) {
    throw ParameterError("partitioning does not match dataset size");
  }
  PartitionHealth health;
  health.treated.assign(parts.partition_count, 0);
  health.control.assign(parts.partition_count, 0);
  for (int i = 0; i < data.n(); ++i) {
    int m = parts.assignments[i];
    if (data.treatments[i] == 1) {
      ++health.treated[m];
    } else {
      ++health.control[m];
    }
  }
  health.degenerate.resize(parts.partition_count);
  for (int m = 0; m < parts.partition_count; ++m) {
    bool bad = health.treated[m] < 2 || health.control[m] < 2;
    health.degenerate[m] = bad;
    if (bad) {
      health.any_degenerate = true;
      ++health.degenerate_count;
    }
  }
  return health;
}

void write_partition_csv(const std::string& path, const Partitioning& parts) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open output file: " + path);
  }
  out << "row_index,partition_index\n";
  for (size_t i = 0; i < parts.assignments.size(); ++i) {
    out << (i + 1) << "," << (parts.assignments[i] + 1) << "\n";
  }
}

}  // namespace dpwate
