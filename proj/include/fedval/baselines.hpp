#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/fedval.hpp"
#include "fedval/model.hpp"
#include "fedval/round.hpp"

namespace fedval {

struct BaselineRoundResult {
  ModelParams global;
  std::vector<ClientRecord> clients;  // ascending id
};

// ---------------------------------------------------------------------------
// FedAvg

// p_k = n_k / n, in ascending client-id order.
inline AggregationWeights fedavg_weights(std::span<const ClientProfile> clients) {
  AggregationWeights w;
  double total = 0.0;
  for (const auto* c : sorted_clients(clients)) total += static_cast<double>(c->n());
  if (!(total > 0.0)) throw DegenerateWeightsError("FedAvg weights undefined: every client is empty");
  for (const auto* c : sorted_clients(clients)) w.p.push_back(static_cast<double>(c->n()) / total);
  return w;
}

inline BaselineRoundResult fedavg_round(const ModelParams& global, std::span<const ClientProfile> clients,
                                        const TrainConfig& train_cfg) {
  auto local = train_clients(global, clients, train_cfg);
  const auto weights = fedavg_weights(clients);
  std::vector<ModelParams> params;
  for (const auto& r : local) params.push_back(r.model);

  BaselineRoundResult out;
  out.global = aggregate(params, weights);
  for (std::size_t k = 0; k < local.size(); ++k) {
    auto rec = base_record(local[k]);
    rec.weight = weights.p[k];
    out.clients.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// q-FFL family

struct QConfig {
  double q = 0.0;
  double lipschitz = 1.0;  // L; the server step is 1/L at q = 0

  void validate() const {
    if (!(q >= 0.0) || !std::isfinite(q)) throw InvalidArgumentError("q must be a non-negative finite number");
    if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) throw InvalidArgumentError("Lipschitz estimate L must be positive");
  }
};

namespace detail {

inline double squared_norm(const Gradient& g) {
  double s = g.bias * g.bias;
  for (double v : g.weights) s += v * v;
  return s;
}

struct QTerms {
  double loss_q;  // F^q
  double h;       // q F^{q-1} |d|^2 + L F^q
};

inline QTerms q_terms(double f, double dir_norm2, const QConfig& cfg, ClientId id) {
  const double fq = std::pow(f, cfg.q);
  const double fq1 = cfg.q == 0.0 ? 0.0 : cfg.q * std::pow(f, cfg.q - 1.0);
  const double h = fq1 * dir_norm2 + cfg.lipschitz * fq;
  if (!std::isfinite(fq) || !std::isfinite(fq1) || !std::isfinite(h)) {
    throw NumericOverflowError("q-FFL terms overflow for client " + std::to_string(id) + " (loss " +
                               csv::format_double(f) + ", q " + csv::format_double(cfg.q) + ")");
  }
  return {fq, h};
}

// w - sum_k fq_k * dir_k / sum_k h_k
inline ModelParams q_step(const ModelParams& w, const std::vector<Gradient>& dirs, const std::vector<QTerms>& terms) {
  double h_total = 0.0;
  for (const auto& t : terms) h_total += t.h;
  if (!(h_total > 0.0)) throw NumericOverflowError("q-FFL step undefined: sum of h_k underflowed to zero");
  ModelParams out = w;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const double c = terms[k].loss_q / h_total;
    for (std::size_t j = 0; j < w.dim(); ++j) out.weights[j] -= c * dirs[k].weights[j];
    out.bias -= c * dirs[k].bias;
  }
  return out;
}

// Relative share F_k^q / sum F^q of each client's update direction.
inline std::vector<double> q_shares(const std::vector<QTerms>& terms) {
  double total = 0.0;
  for (const auto& t : terms) total += t.loss_q;
  if (!(total > 0.0)) throw NumericOverflowError("q-FFL weights undefined: every F_k^q underflowed to zero");
  std::vector<double> p;
  for (const auto& t : terms) p.push_back(t.loss_q / total);
  return p;
}

}  // namespace detail

// One server step with full local gradients at the current global model:
//   Delta_k = F_k^q grad F_k,  h_k = q F_k^{q-1} |grad F_k|^2 + L F_k^q.
inline BaselineRoundResult qfedsgd_round(const ModelParams& global, std::span<const ClientProfile> clients,
                                         const QConfig& cfg) {
  cfg.validate();
  std::vector<Gradient> dirs;
  std::vector<detail::QTerms> terms;
  BaselineRoundResult out;
  for (const auto* c : sorted_clients(clients)) {
    const double f = loss(global, c->data);
    dirs.push_back(gradient(global, c->data));
    terms.push_back(detail::q_terms(f, detail::squared_norm(dirs.back()), cfg, c->id));
    ClientRecord rec;
    rec.id = c->id;
    rec.behavior = c->behavior;
    rec.n = c->n();
    rec.local_loss = f;
    out.clients.push_back(std::move(rec));
  }
  out.global = detail::q_step(global, dirs, terms);
  const auto p = detail::q_shares(terms);
  for (std::size_t k = 0; k < p.size(); ++k) out.clients[k].weight = p[k];
  return out;
}

// As q-FedSGD but the direction is L (w - wbar_k) from local SGD; F_k is
// evaluated at the pre-round global model.
inline BaselineRoundResult qfedavg_round(const ModelParams& global, std::span<const ClientProfile> clients,
                                         const QConfig& cfg, const TrainConfig& train_cfg) {
  cfg.validate();
  auto local = train_clients(global, clients, train_cfg);
  std::vector<Gradient> dirs;
  std::vector<detail::QTerms> terms;
  BaselineRoundResult out;
  for (const auto& r : local) {
    const double f = loss(global, r.client->data);
    Gradient d;
    d.weights.resize(global.dim());
    for (std::size_t j = 0; j < global.dim(); ++j) d.weights[j] = cfg.lipschitz * (global.weights[j] - r.model.weights[j]);
    d.bias = cfg.lipschitz * (global.bias - r.model.bias);
    terms.push_back(detail::q_terms(f, detail::squared_norm(d), cfg, r.client->id));
    dirs.push_back(std::move(d));
    auto rec = base_record(r);
    out.clients.push_back(std::move(rec));
  }
  out.global = detail::q_step(global, dirs, terms);
  const auto p = detail::q_shares(terms);
  for (std::size_t k = 0; k < p.size(); ++k) out.clients[k].weight = p[k];
  return out;
}

// ---------------------------------------------------------------------------
// AFL

// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidArgumentError("cannot project an empty vector onto the simplex");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

struct AFLState {
  std::vector<double> lambda;  // ascending client-id order; empty means uniform
  double learning_rate = 0.1;

  void validate(std::size_t clients) const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidArgumentError("AFL lambda learning rate must be positive");
    }
    if (lambda.empty()) return;
    if (lambda.size() != clients) {
      throw ShapeError("AFL state has " + std::to_string(lambda.size()) + " mixture weights for " +
                       std::to_string(clients) + " clients");
    }
    double total = 0.0;
    for (double l : lambda) {
      if (!(l >= 0.0)) throw InvalidArgumentError("AFL mixture weights must be non-negative");
      total += l;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgumentError("AFL mixture weights must sum to 1");
  }
};

struct AFLRoundResult {
  ModelParams global;
  std::vector<ClientRecord> clients;
  AFLState state;
};

// Minimax step: descend on w with local updates mixed by lambda, then
// projected gradient ascent on lambda along the per-client losses at the
// pre-round model.
inline AFLRoundResult afl_round(const ModelParams& global, std::span<const ClientProfile> clients,
                                const AFLState& state, const TrainConfig& train_cfg) {
  state.validate(clients.size());
  auto local = train_clients(global, clients, train_cfg);
  const std::size_t k_count = local.size();
  std::vector<double> lambda = state.lambda;
  if (lambda.empty()) lambda.assign(k_count, 1.0 / static_cast<double>(k_count));

  std::vector<ModelParams> params;
  std::vector<double> ascent(k_count);
  AFLRoundResult out;
  for (std::size_t k = 0; k < k_count; ++k) {
    params.push_back(local[k].model);
    ascent[k] = lambda[k] + state.learning_rate * loss(global, local[k].client->data);
    auto rec = base_record(local[k]);
    rec.weight = lambda[k];
    out.clients.push_back(std::move(rec));
  }
  out.global = aggregate(params, AggregationWeights{lambda});
  out.state = state;
  out.state.lambda = project_simplex(ascent);
  return out;
}

}  // namespace fedval
