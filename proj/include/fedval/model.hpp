#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/seed.hpp"

namespace fedval {

// Binary logistic-regression parameters.
struct ModelParams {
  std::vector<double> weights;
  double bias = 0.0;

  static ModelParams zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0), 0.0}; }

  std::size_t dim() const noexcept { return weights.size(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  Seed seed = 0;

  void validate() const {
    if (epochs < 1) throw InvalidArgumentError("local epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgumentError("batch size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidArgumentError("learning rate must be a positive finite number");
    }
  }
};

struct Gradient {
  std::vector<double> weights;
  double bias = 0.0;
};

inline constexpr double kLossClamp = 1e-12;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

inline void check_dim(const ModelParams& params, const TabularDataset& data) {
  if (params.dim() != data.cols()) {
    throw ShapeError("model has " + std::to_string(params.dim()) + " weights but dataset has " +
                     std::to_string(data.cols()) + " feature columns");
  }
}

inline double logit(const ModelParams& params, std::span<const double> x) {
  double z = params.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += params.weights[j] * x[j];
  return z;
}

// Mean logistic gradient over the rows listed in `idx`.
inline void batch_gradient(const ModelParams& params, const TabularDataset& data,
                           std::span<const std::size_t> idx, Gradient& g) {
  g.weights.assign(params.dim(), 0.0);
  g.bias = 0.0;
  for (auto i : idx) {
    auto x = data.row(i);
    const double r = sigmoid(logit(params, x)) - static_cast<double>(data.label(i));
    for (std::size_t j = 0; j < x.size(); ++j) g.weights[j] += r * x[j];
    g.bias += r;
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (auto& v : g.weights) v *= inv;
  g.bias *= inv;
}

// Row order that depends only on row contents, so training does not depend on
// how the caller happened to order the dataset.
inline std::vector<std::size_t> canonical_order(const TabularDataset& data) {
  auto order = iota_indices(data.rows());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = data.row(a);
    auto rb = data.row(b);
    for (std::size_t j = 0; j < ra.size(); ++j) {
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    }
    if (data.label(a) != data.label(b)) return data.label(a) < data.label(b);
    return data.group(a) < data.group(b);
  });
  return order;
}

}  // namespace detail

inline std::vector<double> predict_proba(const ModelParams& params, const TabularDataset& data) {
  detail::check_dim(params, data);
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out[i] = sigmoid(detail::logit(params, data.row(i)));
  return out;
}

// Ties at the threshold classify positive.
inline std::vector<std::uint8_t> classify(const ModelParams& params, const TabularDataset& data,
                                          double threshold = 0.5) {
  auto p = predict_proba(params, data);
  std::vector<std::uint8_t> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(), [&](double v) -> std::uint8_t { return v >= threshold ? 1 : 0; });
  return out;
}

// Mean binary cross-entropy; probabilities clamped to [1e-12, 1 - 1e-12].
inline double loss(const ModelParams& params, const TabularDataset& data) {
  if (data.empty()) throw EmptyInputError("loss of an empty dataset");
  detail::check_dim(params, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    double p = std::clamp(sigmoid(detail::logit(params, data.row(i))), kLossClamp, 1.0 - kLossClamp);
    total -= data.label(i) ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(data.rows());
}

inline Gradient gradient(const ModelParams& params, const TabularDataset& data) {
  if (data.empty()) throw EmptyInputError("gradient of an empty dataset");
  detail::check_dim(params, data);
  auto idx = detail::iota_indices(data.rows());
  Gradient g;
  detail::batch_gradient(params, data, idx, g);
  return g;
}

// Local mini-batch SGD: `epochs` passes, each over a freshly shuffled order
// split into batches of `batch_size` (the last one may be smaller).
inline ModelParams client_update(const ModelParams& params, const TabularDataset& local,
                                 const TrainConfig& cfg) {
  cfg.validate();
  if (local.empty()) throw EmptyInputError("client_update on an empty local dataset");
  detail::check_dim(params, local);

  ModelParams w = params;
  const auto base = detail::canonical_order(local);
  std::vector<std::size_t> order;
  std::mt19937_64 rng(derive_seed(cfg.seed, {stream::kTrain}));
  Gradient g;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order = base;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      detail::batch_gradient(w, local, std::span<const std::size_t>(order.data() + start, len), g);
      for (std::size_t j = 0; j < w.dim(); ++j) w.weights[j] -= cfg.learning_rate * g.weights[j];
      w.bias -= cfg.learning_rate * g.bias;
    }
  }
  return w;
}

}  // namespace fedval
