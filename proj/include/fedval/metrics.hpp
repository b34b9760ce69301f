#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/model.hpp"

namespace fedval {

enum class ObjectiveKind { kAccuracy, kSpd, kEod };

inline constexpr std::array<ObjectiveKind, 3> kAllObjectives = {ObjectiveKind::kAccuracy, ObjectiveKind::kSpd,
                                                                ObjectiveKind::kEod};

inline const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kAccuracy: return "accuracy";
    case ObjectiveKind::kSpd: return "spd";
    case ObjectiveKind::kEod: return "eod";
  }
  return "?";
}

inline ObjectiveKind objective_from_string(std::string_view s) {
  if (s == "accuracy") return ObjectiveKind::kAccuracy;
  if (s == "spd") return ObjectiveKind::kSpd;
  if (s == "eod") return ObjectiveKind::kEod;
  throw ConfigError("unknown objective '" + std::string(s) + "' (expected accuracy, spd or eod)");
}

// How a fairness gap in [0,1] becomes a higher-is-better score in [0,1].
enum class ScoreTransform { kOneMinusGap, kExpNegGap };

inline const char* to_string(ScoreTransform t) {
  return t == ScoreTransform::kOneMinusGap ? "one_minus_gap" : "exp_neg_gap";
}

inline ScoreTransform score_transform_from_string(std::string_view s) {
  if (s == "one_minus_gap") return ScoreTransform::kOneMinusGap;
  if (s == "exp_neg_gap") return ScoreTransform::kExpNegGap;
  throw ConfigError("unknown score transform '" + std::string(s) + "'");
}

inline double gap_to_score(double gap, ScoreTransform t) {
  return t == ScoreTransform::kOneMinusGap ? 1.0 - gap : std::exp(-gap);
}

struct Objective {
  ObjectiveKind kind;
  double weight;

  friend bool operator==(const Objective&, const Objective&) = default;
};

struct ObjectiveSpec {
  std::vector<Objective> entries;
  ScoreTransform transform = ScoreTransform::kOneMinusGap;

  static ObjectiveSpec all_equal() {
    return {{{ObjectiveKind::kAccuracy, 1.0}, {ObjectiveKind::kSpd, 1.0}, {ObjectiveKind::kEod, 1.0}}};
  }

  void validate() const {
    if (entries.empty()) throw InvalidArgumentError("objective spec needs at least one entry");
    double total = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!(entries[i].weight >= 0.0) || !std::isfinite(entries[i].weight)) {
        throw InvalidArgumentError(std::string("objective weight for ") + to_string(entries[i].kind) +
                                   " must be a non-negative finite number");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (entries[j].kind == entries[i].kind) {
          throw InvalidArgumentError(std::string("duplicate objective ") + to_string(entries[i].kind));
        }
      }
      total += entries[i].weight;
    }
    if (!(total > 0.0)) throw InvalidArgumentError("objective weights must not all be zero");
  }

  double total_weight() const {
    double t = 0.0;
    for (const auto& e : entries) t += e.weight;
    return t;
  }

  friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

inline double accuracy_of(const std::vector<std::uint8_t>& pred, const TabularDataset& data) {
  if (data.empty()) throw EmptyInputError("accuracy of an empty dataset");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) hit += pred[i] == data.label(i);
  return static_cast<double>(hit) / static_cast<double>(data.rows());
}

// |P(Yhat=1 | a) - P(Yhat=1 | d)|
inline double spd_of(const std::vector<std::uint8_t>& pred, const TabularDataset& data) {
  std::array<std::size_t, 2> n{}, pos{};
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto g = static_cast<std::size_t>(data.group(i));
    ++n[g];
    pos[g] += pred[i];
  }
  for (Group g : {Group::kAdvantaged, Group::kDisadvantaged}) {
    if (n[static_cast<std::size_t>(g)] == 0) {
      throw MissingGroupError(std::string("SPD undefined: no rows in the ") + to_string(g) + " group");
    }
  }
  return std::abs(static_cast<double>(pos[0]) / static_cast<double>(n[0]) -
                  static_cast<double>(pos[1]) / static_cast<double>(n[1]));
}

// |TPR(a) - TPR(d)|
inline double eod_of(const std::vector<std::uint8_t>& pred, const TabularDataset& data) {
  std::array<std::size_t, 2> n{}, tp{};
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (data.label(i) != 1) continue;
    auto g = static_cast<std::size_t>(data.group(i));
    ++n[g];
    tp[g] += pred[i];
  }
  for (Group g : {Group::kAdvantaged, Group::kDisadvantaged}) {
    if (n[static_cast<std::size_t>(g)] == 0) {
      throw MissingPositivesError(std::string("EOD undefined: no positive-label rows in the ") + to_string(g) +
                                  " group");
    }
  }
  return std::abs(static_cast<double>(tp[0]) / static_cast<double>(n[0]) -
                  static_cast<double>(tp[1]) / static_cast<double>(n[1]));
}

inline double accuracy(const ModelParams& params, const TabularDataset& data) {
  if (data.empty()) throw EmptyInputError("accuracy of an empty dataset");
  return accuracy_of(classify(params, data), data);
}

inline double spd(const ModelParams& params, const TabularDataset& data) {
  return spd_of(classify(params, data), data);
}

inline double eod(const ModelParams& params, const TabularDataset& data) {
  return eod_of(classify(params, data), data);
}

// Raw metric for `kind` mapped to a higher-is-better score in [0,1].
inline double objective_score_of(ObjectiveKind kind, const std::vector<std::uint8_t>& pred,
                                  const TabularDataset& data,
                                  ScoreTransform t = ScoreTransform::kOneMinusGap) {
  switch (kind) {
    case ObjectiveKind::kAccuracy: return accuracy_of(pred, data);
    case ObjectiveKind::kSpd: return gap_to_score(spd_of(pred, data), t);
    case ObjectiveKind::kEod: return gap_to_score(eod_of(pred, data), t);
  }
  return 0.0;
}

inline double objective_score(ObjectiveKind kind, const ModelParams& params, const TabularDataset& validation,
                              ScoreTransform t = ScoreTransform::kOneMinusGap) {
  return objective_score_of(kind, classify(params, validation), validation, t);
}

struct CompositeScore {
  double composite = 0.0;
  std::vector<double> per_objective;  // aligned with ObjectiveSpec::entries
};

inline CompositeScore composite_score_detail(const ModelParams& params, const TabularDataset& validation,
                                             const ObjectiveSpec& spec) {
  spec.validate();
  const auto pred = classify(params, validation);
  CompositeScore out;
  for (const auto& e : spec.entries) {
    const double s = objective_score_of(e.kind, pred, validation, spec.transform);
    out.per_objective.push_back(s);
    out.composite += e.weight * s;
  }
  return out;
}

inline double composite_score(const ModelParams& params, const TabularDataset& validation,
                              const ObjectiveSpec& spec) {
  return composite_score_detail(params, validation, spec).composite;
}

struct GlobalMetrics {
  double accuracy = 0.0;
  double spd = 0.0;
  double eod = 0.0;
};

inline GlobalMetrics evaluate(const ModelParams& params, const TabularDataset& data) {
  const auto pred = classify(params, data);
  return {accuracy_of(pred, data), spd_of(pred, data), eod_of(pred, data)};
}

}  // namespace fedval
