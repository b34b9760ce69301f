#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/metrics.hpp"
#include "fedval/model.hpp"
#include "fedval/round.hpp"

namespace fedval {

// Cumulative rank scores, carried across rounds. Absent ids read as zero.
struct RankState {
  std::map<ClientId, double> rs;

  double get(ClientId id) const {
    auto it = rs.find(id);
    return it == rs.end() ? 0.0 : it->second;
  }

  friend bool operator==(const RankState&, const RankState&) = default;
};

struct RankingConfig {
  bool enabled = false;
  double initial_step = 2.0;  // mu
  double step_size = 1.5;     // rho

  void validate() const {
    if (!(initial_step > 0.0) || !std::isfinite(initial_step)) {
      throw InvalidArgumentError("ranking initial step must be positive");
    }
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw InvalidArgumentError("ranking step size must be positive");
  }
};

struct AggregationWeights {
  std::vector<double> p;
};

struct ClientModel {
  ClientId id;
  ModelParams params;
};

struct ClientScore {
  ClientId id = 0;
  double composite = 0.0;
  std::vector<double> per_objective;
};

struct ScoreVector {
  std::vector<ClientScore> entries;
};

struct FedValConfig {
  ObjectiveSpec objectives = ObjectiveSpec::all_equal();
  double blend = 0.5;  // weight of the client model in the temporary aggregate
  RankingConfig ranking;

  void validate() const {
    objectives.validate();
    if (!(blend >= 0.0 && blend <= 1.0)) throw InvalidArgumentError("blend must lie in [0,1]");
    if (ranking.enabled) ranking.validate();
  }
};

// alpha * client + (1 - alpha) * global
inline ModelParams temp_aggregate(const ModelParams& global, const ModelParams& client, double alpha) {
  if (global.dim() != client.dim()) {
    throw ShapeError("temp_aggregate: global has " + std::to_string(global.dim()) + " weights, client has " +
                     std::to_string(client.dim()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgumentError("blend must lie in [0,1]");
  ModelParams out;
  out.weights.resize(global.dim());
  for (std::size_t j = 0; j < global.dim(); ++j) {
    out.weights[j] = alpha * client.weights[j] + (1.0 - alpha) * global.weights[j];
  }
  out.bias = alpha * client.bias + (1.0 - alpha) * global.bias;
  return out;
}

// Scores every client model, blended with the current global model, on the
// server's validation set.
inline ScoreVector score_clients(const ModelParams& global, std::span<const ClientModel> clients,
                                 const TabularDataset& validation, const ObjectiveSpec& spec, double alpha) {
  if (clients.empty()) throw InvalidArgumentError("score_clients needs at least one client");
  spec.validate();
  ScoreVector out;
  for (const auto& c : clients) {
    try {
      auto s = composite_score_detail(temp_aggregate(global, c.params, alpha), validation, spec);
      out.entries.push_back({c.id, s.composite, std::move(s.per_objective)});
    } catch (const Error& e) {
      throw RoundError("scoring client " + std::to_string(c.id) + " failed: " + e.what());
    }
  }
  return out;
}

// Ascending-score order (worst first); ties by ascending client id.
inline std::vector<std::size_t> ascending_score_order(const ScoreVector& scores) {
  std::vector<std::size_t> order(scores.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = scores.entries[a];
    const auto& y = scores.entries[b];
    if (x.composite != y.composite) return x.composite < y.composite;
    return x.id < y.id;
  });
  return order;
}

// Walks the clients worst to best; each gains the current step, then the
// step is multiplied by rho. Position i therefore gains mu * rho^i.
inline RankState rank_update(const ScoreVector& scores, const RankState& state, const RankingConfig& cfg) {
  if (!cfg.enabled) throw InvalidArgumentError("rank_update called with ranking disabled");
  cfg.validate();
  if (scores.entries.empty()) throw InvalidArgumentError("rank_update needs at least one score");
  RankState next = state;
  double step = cfg.initial_step;
  for (auto i : ascending_score_order(scores)) {
    next.rs[scores.entries[i].id] += step;
    step *= cfg.step_size;
  }
  return next;
}

// p_k proportional to the rank score (when `ranks` is given) or to the
// composite score, in the order of `scores.entries`.
inline AggregationWeights make_weights(const ScoreVector& scores, const RankState* ranks = nullptr) {
  if (scores.entries.empty()) throw InvalidArgumentError("make_weights needs at least one score");
  std::vector<double> chosen;
  for (const auto& e : scores.entries) chosen.push_back(ranks ? ranks->get(e.id) : e.composite);
  double total = 0.0;
  for (double v : chosen) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DegenerateWeightsError("scores must be finite and non-negative");
    total += v;
  }
  if (!(total > 0.0)) {
    throw DegenerateWeightsError(std::string("all ") + (ranks ? "rank" : "composite") +
                                 " scores are zero; refusing to normalize");
  }
  AggregationWeights w;
  for (double v : chosen) w.p.push_back(v / total);
  return w;
}

// sum_k p_k * model_k, accumulated in the order given.
inline ModelParams aggregate(std::span<const ModelParams> models, const AggregationWeights& weights) {
  if (models.empty()) throw ShapeError("aggregate needs at least one model");
  if (models.size() != weights.p.size()) {
    throw ShapeError("aggregate: " + std::to_string(models.size()) + " models but " +
                     std::to_string(weights.p.size()) + " weights");
  }
  const std::size_t dim = models.front().dim();
  ModelParams out = ModelParams::zeros(dim);
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].dim() != dim) throw ShapeError("aggregate: models disagree on dimension");
    const double p = weights.p[k];
    for (std::size_t j = 0; j < dim; ++j) out.weights[j] += p * models[k].weights[j];
    out.bias += p * models[k].bias;
  }
  return out;
}

struct FedValRoundResult {
  ModelParams global;
  RoundReport report;
  RankState state;
};

inline std::optional<double> rank_spread(const RankState& s) {
  if (s.rs.empty()) return std::nullopt;
  auto [lo, hi] = std::minmax_element(s.rs.begin(), s.rs.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
  if (!(lo->second > 0.0)) return std::nullopt;
  return hi->second / lo->second;
}

// One FedVal round: local training from the same global model, validation
// scoring of each blended model, optional ranking, weighted aggregation.
inline FedValRoundResult fedval_round(const ModelParams& global, std::span<const ClientProfile> clients,
                                      const TabularDataset& validation, const FedValConfig& cfg,
                                      const TrainConfig& train_cfg, const RankState& state) {
  cfg.validate();
  auto local = train_clients(global, clients, train_cfg);

  std::vector<ClientModel> models;
  std::vector<ModelParams> params;
  for (const auto& r : local) {
    models.push_back({r.client->id, r.model});
    params.push_back(r.model);
  }
  auto scores = score_clients(global, models, validation, cfg.objectives, cfg.blend);

  FedValRoundResult out;
  out.state = state;
  if (cfg.ranking.enabled) {
    out.state = rank_update(scores, state, cfg.ranking);
    out.report.rank_spread = rank_spread(out.state);
  }
  const auto weights = make_weights(scores, cfg.ranking.enabled ? &out.state : nullptr);
  out.global = aggregate(params, weights);

  out.report.strategy = "fedval";
  for (const auto& e : cfg.objectives.entries) out.report.objectives.push_back(e.kind);
  for (std::size_t k = 0; k < local.size(); ++k) {
    auto rec = base_record(local[k]);
    rec.objective_scores = scores.entries[k].per_objective;
    rec.composite = scores.entries[k].composite;
    rec.weight = weights.p[k];
    if (cfg.ranking.enabled) rec.rank_score = out.state.get(rec.id);
    out.report.clients.push_back(std::move(rec));
  }
  out.report.global = evaluate(out.global, validation);
  return out;
}

}  // namespace fedval
