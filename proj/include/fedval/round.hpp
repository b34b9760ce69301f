#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "fedval/dataset.hpp"
#include "fedval/metrics.hpp"
#include "fedval/model.hpp"
#include "fedval/seed.hpp"

namespace fedval {

// Per-client line of a RoundReport. Optional fields are absent for
// strategies that do not define them (e.g. baselines have no s_jk).
struct ClientRecord {
  ClientId id = 0;
  Behavior behavior = Behavior::kNormal;
  std::size_t n = 0;
  std::vector<double> objective_scores;  // s_jk, aligned with RoundReport::objectives
  std::optional<double> composite;
  std::optional<double> weight;
  std::optional<double> rank_score;
  double local_loss = 0.0;  // loss of the client's updated model on its own data
};

struct RoundReport {
  std::size_t round = 0;
  std::string strategy;
  GlobalMetrics global;  // new global model on the validation set
  std::vector<ObjectiveKind> objectives;
  std::vector<ClientRecord> clients;
  std::optional<double> rank_spread;  // max rs / min rs after this round
};

// Training seed for one client in one round: the round-level seed in `cfg`
// mixed with the client's key.
inline TrainConfig client_train_config(const TrainConfig& cfg, std::uint64_t seed_key) {
  TrainConfig c = cfg;
  c.seed = derive_seed(cfg.seed, {seed_key});
  return c;
}

// Clients in ascending id order; rejects empty or duplicate-id populations.
inline std::vector<const ClientProfile*> sorted_clients(std::span<const ClientProfile> clients) {
  if (clients.empty()) throw InvalidArgumentError("a round needs at least one client");
  std::vector<const ClientProfile*> out;
  for (const auto& c : clients) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->id == out[i - 1]->id) {
      throw InvalidArgumentError("duplicate client id " + std::to_string(out[i]->id));
    }
  }
  return out;
}

struct LocalResult {
  const ClientProfile* client;
  ModelParams model;
};

// ClientUpdate for every client from the same starting model, in id order.
inline std::vector<LocalResult> train_clients(const ModelParams& global, std::span<const ClientProfile> clients,
                                              const TrainConfig& cfg) {
  std::vector<LocalResult> out;
  for (const auto* c : sorted_clients(clients)) {
    try {
      out.push_back({c, client_update(global, c->data, client_train_config(cfg, c->seed_key))});
    } catch (const Error& e) {
      throw RoundError("client " + std::to_string(c->id) + ": " + e.what());
    }
  }
  return out;
}

inline ClientRecord base_record(const LocalResult& r) {
  ClientRecord rec;
  rec.id = r.client->id;
  rec.behavior = r.client->behavior;
  rec.n = r.client->n();
  rec.local_loss = loss(r.model, r.client->data);
  return rec;
}

}  // namespace fedval
