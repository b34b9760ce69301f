#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedval/csv.hpp"
#include "fedval/error.hpp"
#include "fedval/seed.hpp"

namespace fedval {

enum class Group : std::uint8_t { kAdvantaged = 0, kDisadvantaged = 1 };

inline const char* to_string(Group g) {
  return g == Group::kAdvantaged ? "advantaged" : "disadvantaged";
}

inline Group other(Group g) {
  return g == Group::kAdvantaged ? Group::kDisadvantaged : Group::kAdvantaged;
}

// Dense row-major feature matrix with a binary label and a binary sensitive
// group per row. Immutable after construction.
class TabularDataset {
 public:
  TabularDataset() = default;

  TabularDataset(std::size_t cols, std::vector<double> features,
                 std::vector<std::uint8_t> labels, std::vector<Group> groups)
      : cols_(cols),
        features_(std::move(features)),
        labels_(std::move(labels)),
        groups_(std::move(groups)) {
    if (cols_ == 0) throw ShapeError("dataset needs at least one feature column");
    if (labels_.size() != groups_.size() || features_.size() != labels_.size() * cols_) {
      throw ShapeError("features, labels and groups disagree on the row count");
    }
    for (std::size_t i = 0; i < features_.size(); ++i) {
      if (!std::isfinite(features_[i])) {
        throw ShapeError("non-finite feature at row " + std::to_string(i / cols_) +
                         ", column " + std::to_string(i % cols_));
      }
    }
    for (auto y : labels_) {
      if (y > 1) throw ShapeError("labels must be 0 or 1");
    }
  }

  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * cols_, cols_};
  }
  std::uint8_t label(std::size_t i) const { return labels_[i]; }
  Group group(std::size_t i) const { return groups_[i]; }

  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }
  const std::vector<Group>& groups() const noexcept { return groups_; }

  // Rows in the order given by `idx` (duplicates allowed).
  TabularDataset subset(std::span<const std::size_t> idx) const {
    std::vector<double> f;
    f.reserve(idx.size() * cols_);
    std::vector<std::uint8_t> y;
    std::vector<Group> g;
    y.reserve(idx.size());
    g.reserve(idx.size());
    for (auto i : idx) {
      auto r = row(i);
      f.insert(f.end(), r.begin(), r.end());
      y.push_back(labels_[i]);
      g.push_back(groups_[i]);
    }
    TabularDataset out;
    out.cols_ = cols_;
    out.features_ = std::move(f);
    out.labels_ = std::move(y);
    out.groups_ = std::move(g);
    return out;
  }

  std::size_t count(Group g) const {
    return static_cast<std::size_t>(std::count(groups_.begin(), groups_.end(), g));
  }
  std::size_t count_positive(Group g) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < rows(); ++i) c += (groups_[i] == g && labels_[i] == 1);
    return c;
  }
  // Empirical P(Y=1 | group); NaN when the group is absent.
  double positive_rate(Group g) const {
    auto n = count(g);
    return n == 0 ? std::nan("") : static_cast<double>(count_positive(g)) / static_cast<double>(n);
  }

  friend bool operator==(const TabularDataset&, const TabularDataset&) = default;

 private:
  std::size_t cols_ = 0;
  std::vector<double> features_;
  std::vector<std::uint8_t> labels_;
  std::vector<Group> groups_;
};

// ---------------------------------------------------------------------------
// Schema and CSV ingestion

enum class ColumnKind { kNumeric, kCategorical };

struct FeatureColumn {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> vocabulary;  // categorical only, defines one-hot order
};

struct DatasetSchema {
  std::vector<FeatureColumn> features;
  std::string label_column;
  std::string positive_value;
  std::string sensitive_column;
  std::string advantaged_value;

  void validate() const {
    if (features.empty()) throw SchemaError("schema declares no feature columns");
    if (label_column.empty()) throw SchemaError("schema is missing the label column");
    if (sensitive_column.empty()) throw SchemaError("schema is missing the sensitive column");
    if (label_column == sensitive_column) {
      throw SchemaError("label and sensitive column are both '" + label_column + "'");
    }
    for (const auto& f : features) {
      if (f.name == label_column || f.name == sensitive_column) {
        throw SchemaError("column '" + f.name + "' cannot be both a feature and label/sensitive");
      }
      if (f.kind == ColumnKind::kCategorical && f.vocabulary.empty()) {
        throw SchemaError("categorical column '" + f.name + "' has no vocabulary");
      }
    }
  }

  // Width of the feature matrix after one-hot expansion.
  std::size_t expanded_width() const {
    std::size_t w = 0;
    for (const auto& f : features) w += f.kind == ColumnKind::kNumeric ? 1 : f.vocabulary.size();
    return w;
  }
};

namespace detail {

// Population z-score in place over a strided column; zero-variance columns
// become all zeros.
inline void standardize_column(std::vector<double>& m, std::size_t cols, std::size_t col) {
  const std::size_t n = m.size() / cols;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += m[i * cols + col];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = m[i * cols + col] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i) {
    double& v = m[i * cols + col];
    v = sd > 0.0 ? (v - mean) / sd : 0.0;
  }
}

}  // namespace detail

inline TabularDataset dataset_from_records(const std::vector<csv::Record>& records,
                                           const DatasetSchema& schema) {
  schema.validate();
  if (records.empty()) throw EmptyInputError("CSV input is empty (no header)");
  const auto& header = records.front();
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos.emplace(std::string(csv::trim(header[i])), i);
  auto column = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw SchemaError("missing column '" + name + "' in CSV header");
    return it->second;
  };
  const auto label_col = column(schema.label_column);
  const auto sens_col = column(schema.sensitive_column);
  std::vector<std::size_t> feat_cols;
  for (const auto& f : schema.features) feat_cols.push_back(column(f.name));

  const std::size_t n = records.size() - 1;
  if (n == 0) throw EmptyInputError("CSV input has a header but no data rows");
  const std::size_t width = schema.expanded_width();

  std::vector<double> m(n * width, 0.0);
  std::vector<std::uint8_t> labels(n);
  std::vector<Group> groups(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    const std::size_t row_index = r + 1;  // 0 is the header
    if (rec.size() != header.size()) {
      throw ParseError("row " + std::to_string(row_index) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(rec.size()));
    }
    std::size_t out = 0;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& spec = schema.features[f];
      auto cell = csv::trim(rec[feat_cols[f]]);
      if (spec.kind == ColumnKind::kNumeric) {
        double v;
        if (!csv::parse_double(cell, v) || !std::isfinite(v)) {
          throw ParseError("row " + std::to_string(row_index) + ": column '" + spec.name +
                           "' has unparseable value '" + std::string(cell) + "'");
        }
        m[r * width + out++] = v;
      } else {
        auto it = std::find(spec.vocabulary.begin(), spec.vocabulary.end(), cell);
        if (it == spec.vocabulary.end()) {
          throw ParseError("row " + std::to_string(row_index) + ": column '" + spec.name +
                           "' has value '" + std::string(cell) + "' outside its vocabulary");
        }
        m[r * width + out + static_cast<std::size_t>(it - spec.vocabulary.begin())] = 1.0;
        out += spec.vocabulary.size();
      }
    }
    auto lab = csv::trim(rec[label_col]);
    if (lab.empty()) {
      throw ParseError("row " + std::to_string(row_index) + ": empty label cell");
    }
    labels[r] = lab == schema.positive_value ? 1 : 0;
    auto sen = csv::trim(rec[sens_col]);
    if (sen.empty()) {
      throw ParseError("row " + std::to_string(row_index) + ": empty sensitive cell");
    }
    groups[r] = sen == schema.advantaged_value ? Group::kAdvantaged : Group::kDisadvantaged;
  }

  std::size_t out = 0;
  for (const auto& spec : schema.features) {
    if (spec.kind == ColumnKind::kNumeric) {
      detail::standardize_column(m, width, out++);
    } else {
      out += spec.vocabulary.size();
    }
  }
  return TabularDataset(width, std::move(m), std::move(labels), std::move(groups));
}

inline TabularDataset load_csv(const std::string& path, const DatasetSchema& schema) {
  return dataset_from_records(csv::read_file(path), schema);
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t dim = 4;
  double rate_advantaged = 0.5;
  double rate_disadvantaged = 0.5;
  Seed seed = 0;
};

// Rows alternate a, d, a, d, ... Every feature except the last carries a
// share of the label signal (class means +/-kSyntheticSeparation/2 along the
// signal subspace, so difficulty does not depend on dim); the last one (when
// dim >= 2) is a group proxy (mean +/-1), which is what lets a skewed trainer
// learn a biased model.
inline constexpr double kSyntheticSeparation = 1.6;

inline TabularDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2) throw InvalidArgumentError("synthetic dataset needs n >= 2");
  if (spec.dim < 1) throw InvalidArgumentError("synthetic dataset needs dim >= 1");
  for (double r : {spec.rate_advantaged, spec.rate_disadvantaged}) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgumentError("group positive rates must lie in [0,1]");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<double> m(spec.n * spec.dim);
  std::vector<std::uint8_t> labels(spec.n);
  std::vector<Group> groups(spec.n);
  const std::size_t signal_dims = spec.dim == 1 ? 1 : spec.dim - 1;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Group g = i % 2 == 0 ? Group::kAdvantaged : Group::kDisadvantaged;
    const double rate = g == Group::kAdvantaged ? spec.rate_advantaged : spec.rate_disadvantaged;
    const std::uint8_t y = unif(rng) < rate ? 1 : 0;
    groups[i] = g;
    labels[i] = y;
    const double label_mean = (y ? 0.5 : -0.5) * kSyntheticSeparation / std::sqrt(double(signal_dims));
    for (std::size_t j = 0; j < signal_dims; ++j) m[i * spec.dim + j] = label_mean + noise(rng);
    if (spec.dim >= 2) {
      m[i * spec.dim + spec.dim - 1] = (g == Group::kAdvantaged ? 1.0 : -1.0) + 0.5 * noise(rng);
    }
  }
  return TabularDataset(spec.dim, std::move(m), std::move(labels), std::move(groups));
}

// ---------------------------------------------------------------------------
// Skewing

struct SkewSpec {
  Group target = Group::kDisadvantaged;  // group whose positives are subsampled
  double ratio = 1.0;                    // rate(target) / rate(other) after skewing
  double retain = 1.0;                   // fraction of rows kept afterwards

  void validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgumentError("skew ratio must lie in (0,1]");
    if (!(retain > 0.0 && retain <= 1.0)) throw InvalidArgumentError("skew retain fraction must lie in (0,1]");
  }
};

namespace detail {

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

inline void take_random(std::vector<std::size_t>& pool, std::size_t keep, std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(keep);
}

}  // namespace detail

// Drops positives of `spec.target` until its positive rate is `spec.ratio`
// times the other group's, then keeps `spec.retain` of every (group, label)
// cell. Output rows keep their input order; no row is duplicated.
inline TabularDataset skew(const TabularDataset& data, const SkewSpec& spec, Seed seed) {
  spec.validate();
  const Group t = spec.target;
  const Group o = other(t);
  std::vector<std::size_t> t_pos, t_neg, o_pos, o_neg;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const bool pos = data.label(i) == 1;
    if (data.group(i) == t) {
      (pos ? t_pos : t_neg).push_back(i);
    } else {
      (pos ? o_pos : o_neg).push_back(i);
    }
  }
  if (t_pos.size() + t_neg.size() == 0) {
    throw InfeasibleSkewError(std::string("cannot skew: no rows in the ") + to_string(t) + " group");
  }
  if (o_pos.size() + o_neg.size() == 0) {
    throw InfeasibleSkewError(std::string("cannot skew: no rows in the ") + to_string(o) + " group");
  }
  const double rate_o = static_cast<double>(o_pos.size()) / static_cast<double>(o_pos.size() + o_neg.size());
  const double rate_t = static_cast<double>(t_pos.size()) / static_cast<double>(t_pos.size() + t_neg.size());
  const double target_rate = spec.ratio * rate_o;

  std::size_t keep_pos = t_pos.size();
  bool feasible;
  if (target_rate >= 1.0) {
    feasible = t_neg.empty();
  } else {
    keep_pos = static_cast<std::size_t>(
        std::llround(target_rate * static_cast<double>(t_neg.size()) / (1.0 - target_rate)));
    feasible = keep_pos <= t_pos.size();
  }
  if (!feasible || keep_pos + t_neg.size() == 0) {
    const double bound = rate_o > 0.0 ? rate_t / rate_o : 0.0;
    throw InfeasibleSkewError("cannot reach positive-rate ratio " + csv::format_double(spec.ratio) +
                              " by dropping positives; achievable ratios are at most " +
                              csv::format_double(bound));
  }

  std::mt19937_64 rng(derive_seed(seed, {stream::kSkew}));
  detail::take_random(t_pos, keep_pos, rng);

  std::vector<std::size_t> kept;
  for (auto* cell : {&t_pos, &t_neg, &o_pos, &o_neg}) {
    if (spec.retain < 1.0 && !cell->empty()) {
      auto k = static_cast<std::size_t>(std::llround(spec.retain * static_cast<double>(cell->size())));
      detail::take_random(*cell, std::max<std::size_t>(k, 1), rng);
    }
    kept.insert(kept.end(), cell->begin(), cell->end());
  }
  std::sort(kept.begin(), kept.end());
  return data.subset(kept);
}

// ---------------------------------------------------------------------------
// Client partitioning

using ClientId = std::uint32_t;

enum class Behavior { kCooperative, kNormal, kUncooperative };

inline const char* to_string(Behavior b) {
  switch (b) {
    case Behavior::kCooperative: return "cooperative";
    case Behavior::kNormal: return "normal";
    case Behavior::kUncooperative: return "uncooperative";
  }
  return "?";
}

struct ClientPlan {
  Behavior behavior = Behavior::kNormal;
  std::optional<SkewSpec> skew;
};

struct ClientProfile {
  ClientId id = 0;
  Behavior behavior = Behavior::kNormal;
  TabularDataset data;
  // Key mixed into per-client training seeds. Defaults to `id`; two clients
  // with the same key and data train identically.
  std::uint64_t seed_key = 0;

  std::size_t n() const noexcept { return data.rows(); }
};

// Sizes of `parts` near-equal shards of `n` rows; the remainder goes to the
// lowest-indexed shards.
inline std::vector<std::size_t> shard_sizes(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> sizes(parts, n / parts);
  for (std::size_t i = 0; i < n % parts; ++i) ++sizes[i];
  return sizes;
}

inline std::vector<ClientProfile> partition(const TabularDataset& data,
                                            std::span<const ClientPlan> plans, Seed seed) {
  if (plans.empty()) throw InvalidPartitionError("partition needs at least one client profile");
  if (data.rows() < plans.size()) {
    throw InvalidPartitionError("cannot deal " + std::to_string(data.rows()) + " rows to " +
                                std::to_string(plans.size()) + " clients");
  }
  auto order = detail::iota_indices(data.rows());
  std::mt19937_64 rng(derive_seed(seed, {stream::kPartition}));
  std::shuffle(order.begin(), order.end(), rng);

  const auto sizes = shard_sizes(data.rows(), plans.size());
  std::vector<ClientProfile> out;
  out.reserve(plans.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    std::span<const std::size_t> shard(order.data() + offset, sizes[k]);
    offset += sizes[k];
    ClientProfile c;
    c.id = static_cast<ClientId>(k);
    c.seed_key = k;
    c.behavior = plans[k].behavior;
    c.data = data.subset(shard);
    if (plans[k].skew) c.data = skew(c.data, *plans[k].skew, derive_seed(seed, {stream::kSkew, k}));
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation split

struct TrainValidationSplit {
  TabularDataset train;
  TabularDataset validation;
};

inline constexpr int kValidationSplitAttempts = 32;

// The validation side must hold both groups, both labels, and a positive row
// in each group (so every fairness metric is defined on it).
inline bool validation_coverage_ok(const TabularDataset& v) {
  return v.count_positive(Group::kAdvantaged) > 0 && v.count_positive(Group::kDisadvantaged) > 0 &&
         std::find(v.labels().begin(), v.labels().end(), 0) != v.labels().end();
}

inline TrainValidationSplit split_validation(const TabularDataset& data, double fraction, Seed seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidValidationSplitError("validation fraction must lie in (0,1)");
  }
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.rows())));
  if (m < 1 || m + 1 > data.rows()) {
    throw InvalidValidationSplitError("validation fraction " + csv::format_double(fraction) + " of " +
                                      std::to_string(data.rows()) + " rows leaves an empty side");
  }
  for (int attempt = 0; attempt < kValidationSplitAttempts; ++attempt) {
    auto order = detail::iota_indices(data.rows());
    std::mt19937_64 rng(derive_seed(seed, {stream::kSplit, static_cast<std::uint64_t>(attempt)}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(m), order.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    auto v = data.subset(val);
    if (validation_coverage_ok(v)) return {data.subset(train), std::move(v)};
  }
  throw InvalidValidationSplitError("no validation split with both groups, both labels and positives in each group after " +
                                    std::to_string(kValidationSplitAttempts) + " attempts");
}

}  // namespace fedval
