// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fedval/all.hpp"
#include "oracles.hpp"

using namespace fedval;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ClientProfile make_client(ClientId id, TabularDataset data, std::uint64_t key) {
  return {id, Behavior::kNormal, std::move(data), key};
}

std::vector<ClientProfile> random_clients(std::mt19937_64& rng, std::size_t k, std::size_t dim) {
  std::uniform_int_distribution<std::size_t> n(20, 80);
  std::vector<ClientProfile> cs;
  for (std::size_t i = 0; i < k; ++i) cs.push_back(make_client(ClientId(i), oracle::random_dataset(rng, n(rng), dim), i));
  return cs;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> n(2, 500), dim(1, 8);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const auto d = dim(rng);
    auto data = oracle::random_dataset(rng, n(rng), d);
    auto m = oracle::random_params(rng, d);
    mismatches += accuracy(m, data) != oracle::accuracy(m, data);
    mismatches += spd(m, data) != oracle::spd(m, data);
    mismatches += eod(m, data) != oracle::eod(m, data);
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 300 metric evaluations"};
}

Outcome gradient_check() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> n(5, 200), dim(1, 10);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const auto d = dim(rng);
    auto data = oracle::random_dataset(rng, n(rng), d);
    auto m = oracle::random_params(rng, d, 0.5);
    auto g = gradient(m, data);
    auto fd = oracle::finite_difference([&](const ModelParams& p) { return loss(p, data); }, m, 1e-6);
    for (std::size_t j = 0; j <= d; ++j) {
      const double a = j < d ? g.weights[j] : g.bias;
      worst = std::max(worst, std::fabs(a - fd[j]) / std::max({std::fabs(a), std::fabs(fd[j]), 1.0}));
    }
  }
  return {worst <= 1e-5, "max relative error " + fmt(worst)};
}

Outcome fedavg_reduction() {
  std::mt19937_64 rng(303);
  auto data = oracle::random_dataset(rng, 120, 5);
  auto validation = oracle::random_dataset(rng, 200, 5);
  std::vector<ClientProfile> cs;
  for (ClientId k = 0; k < 5; ++k) cs.push_back(make_client(k, data, 77));
  FedValConfig cfg;  // ranking off
  ModelParams a = ModelParams::zeros(5), b = a;
  double worst = 0;
  for (std::size_t t = 1; t <= 10; ++t) {
    TrainConfig tc{1, 16, 0.1, derive_seed(9, {t})};
    a = fedval_round(a, cs, validation, cfg, tc, {}).global;
    b = fedavg_round(b, cs, tc).global;
    for (std::size_t j = 0; j < 5; ++j) worst = std::max(worst, std::fabs(a.weights[j] - b.weights[j]));
    worst = std::max(worst, std::fabs(a.bias - b.bias));
  }
  return {worst <= 1e-12, "max coordinate difference over 10 rounds " + fmt(worst)};
}

Outcome ranking_arithmetic() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  double worst_step = 0, worst_mass = 0;
  bool accumulated_ok = true;
  for (std::size_t k : {3u, 10u}) {
    for (auto [mu, rho] : {std::pair{2.0, 1.5}, std::pair{0.001, 10.0}}) {
      RankingConfig rc{true, mu, rho};
      RankState state;
      for (int round = 0; round < 25; ++round) {
        ScoreVector s;
        for (std::size_t i = 0; i < k; ++i) s.entries.push_back({ClientId(i), std::floor(u(rng) * 4) / 4, {}});
        auto next = rank_update(s, state, rc);
        // This round's increments, read without subtracting accumulated values.
        auto fresh = rank_update(s, {}, rc);

        // Independent ordering: worst score first, ties by id.
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](auto x, auto y) { return s.entries[x].composite < s.entries[y].composite; });
        double added = 0;
        for (std::size_t i = 0; i < k; ++i) {
          const ClientId id = s.entries[order[i]].id;
          const double gain = fresh.get(id);
          const double want = mu * std::pow(rho, double(i));
          worst_step = std::max(worst_step, std::fabs(gain - want) / want);
          accumulated_ok = accumulated_ok && next.get(id) == state.get(id) + gain;
          added += gain;
        }
        const double closed = mu * (std::pow(rho, double(k)) - 1) / (rho - 1);
        worst_mass = std::max(worst_mass, std::fabs(added - closed) / closed);
        state = next;
      }
    }
  }
  return {worst_step <= 1e-9 && worst_mass <= 1e-9 && accumulated_ok,
          "max relative increment error " + fmt(worst_step) + ", mass error " + fmt(worst_mass) +
              (accumulated_ok ? ", rs accumulates exactly over 25 rounds" : ", rs accumulation mismatch")};
}

Outcome weight_simplex() {
  std::mt19937_64 rng(505);
  double worst_sum = 0, most_negative = 0;
  std::size_t checked = 0;
  auto check = [&](const std::vector<ClientRecord>& recs) {
    double s = 0;
    for (const auto& r : recs) {
      s += *r.weight;
      most_negative = std::min(most_negative, *r.weight);
    }
    worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
    ++checked;
  };
  std::uniform_int_distribution<std::size_t> kd(2, 8);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 3;
    auto cs = random_clients(rng, kd(rng), dim);
    auto validation = oracle::random_dataset(rng, 150, dim);
    auto w = oracle::random_params(rng, dim, 0.5);
    TrainConfig tc{1, 8, 0.1, Seed(t)};

    FedValConfig fv;
    fv.ranking = {t % 2 == 0, 2.0, 1.5};
    RankState rs;
    for (const auto& c : cs) rs.rs[c.id] = std::uniform_real_distribution<double>(0, 5)(rng);
    check(fedval_round(w, cs, validation, fv, tc, rs).report.clients);
    check(fedavg_round(w, cs, tc).clients);
    check(qfedsgd_round(w, cs, {double(t % 6), 1.0}).clients);
    check(qfedavg_round(w, cs, {double(t % 6), 10.0}, tc).clients);

    std::vector<double> raw(cs.size());
    for (auto& x : raw) x = std::uniform_real_distribution<double>(-1, 2)(rng);
    check(afl_round(w, cs, {project_simplex(raw), 0.1}, tc).clients);
  }
  return {worst_sum <= 1e-12 && most_negative >= 0.0,
          std::to_string(checked) + " rounds over 5 strategies; max |sum - 1| " + fmt(worst_sum) + ", min p " +
              fmt(most_negative)};
}

Outcome q_zero_reductions() {
  std::mt19937_64 rng(606);
  double worst_sgd = 0, worst_avg = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t dim = 4;
    auto cs = random_clients(rng, 2 + t % 7, dim);
    auto w = oracle::random_params(rng, dim, 0.5);
    const double L = 1.0 + t;
    const double k = double(cs.size());

    auto sgd = qfedsgd_round(w, cs, {0.0, L});
    ModelParams want = w;
    for (const auto& c : cs) {
      auto g = gradient(w, c.data);
      for (std::size_t j = 0; j < dim; ++j) want.weights[j] -= g.weights[j] / (k * L);
      want.bias -= g.bias / (k * L);
    }
    for (std::size_t j = 0; j < dim; ++j) worst_sgd = std::max(worst_sgd, std::fabs(sgd.global.weights[j] - want.weights[j]));
    worst_sgd = std::max(worst_sgd, std::fabs(sgd.global.bias - want.bias));

    TrainConfig tc{2, 8, 0.05, Seed(t)};
    auto avg = qfedavg_round(w, cs, {0.0, L}, tc);
    ModelParams mean = ModelParams::zeros(dim);
    for (const auto& c : cs) {
      auto m = client_update(w, c.data, client_train_config(tc, c.seed_key));
      for (std::size_t j = 0; j < dim; ++j) mean.weights[j] += m.weights[j] / k;
      mean.bias += m.bias / k;
    }
    for (std::size_t j = 0; j < dim; ++j) worst_avg = std::max(worst_avg, std::fabs(avg.global.weights[j] - mean.weights[j]));
    worst_avg = std::max(worst_avg, std::fabs(avg.global.bias - mean.bias));
  }
  return {worst_sgd <= 1e-10 && worst_avg <= 1e-10,
          "q-FedSGD max diff " + fmt(worst_sgd) + ", q-FedAvg max diff " + fmt(worst_avg)};
}

Outcome gamma_scale_invariance() {
  std::mt19937_64 rng(707);
  double worst = 0;
  int order_changes = 0;
  std::uniform_real_distribution<double> g(0.2, 3.0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t dim = 4;
    auto cs = random_clients(rng, 6, dim);
    auto validation = oracle::random_dataset(rng, 200, dim);
    auto w = oracle::random_params(rng, dim, 0.5);
    TrainConfig tc{1, 8, 0.2, Seed(t)};
    FedValConfig base;
    base.objectives = {{{ObjectiveKind::kAccuracy, g(rng)}, {ObjectiveKind::kSpd, g(rng)}, {ObjectiveKind::kEod, g(rng)}}};

    auto order_of = [](const RoundReport& r) {
      ScoreVector s;
      for (const auto& c : r.clients) s.entries.push_back({c.id, *c.composite, {}});
      return ascending_score_order(s);
    };
    auto plain = fedval_round(w, cs, validation, base, tc, {});
    FedValConfig ranked = base;
    ranked.ranking = {true, 2.0, 1.5};
    auto plain_ranked = fedval_round(w, cs, validation, ranked, tc, {});

    for (double alpha : {0.1, 3.0, 100.0}) {
      FedValConfig scaled = base;
      for (auto& e : scaled.objectives.entries) e.weight *= alpha;
      auto r = fedval_round(w, cs, validation, scaled, tc, {});
      for (std::size_t k = 0; k < cs.size(); ++k) {
        worst = std::max(worst, std::fabs(*r.report.clients[k].weight - *plain.report.clients[k].weight));
      }
      FedValConfig scaled_ranked = scaled;
      scaled_ranked.ranking = ranked.ranking;
      auto rr = fedval_round(w, cs, validation, scaled_ranked, tc, {});
      order_changes += order_of(rr.report) != order_of(plain_ranked.report);
    }
  }
  return {worst <= 1e-12 && order_changes == 0,
          "max p_k change " + fmt(worst) + ", ranking order changes " + std::to_string(order_changes)};
}

// Shared by the trend and down-weighting criteria.
struct TrendSetup {
  SweepSpec spec;
  ExperimentConfig base;
};

TrendSetup trend_setup() {
  TrendSetup s;
  s.base.name = "trend";
  s.base.data.synthetic = SyntheticSpec{4000, 8, 0.5, 0.5, 7};
  s.base.validation_fraction = 0.2;
  s.base.strategy = Strategy::kFedVal;
  s.base.fedval.objectives = ObjectiveSpec::all_equal();
  s.base.fedval.ranking = {true, 2.0, 1.5};
  s.base.train = {1, 32, 0.1, 0};
  s.base.rounds = 60;
  s.spec.clients = 10;
  s.spec.cooperative_counts = {0, 3, 5, 8, 10};
  s.spec.replicates = {1, 2, 3};
  s.spec.uncooperative_skew = {Group::kDisadvantaged, 0.2, 1.0};
  return s;
}

const SweepResult& trend_sweep() {
  static const SweepResult r = [] {
    auto s = trend_setup();
    return run_sweep(s.spec, s.base);
  }();
  return r;
}

Outcome bias_trend() {
  const auto& r = trend_sweep();
  const auto& spec = trend_setup().spec;
  std::ostringstream detail;
  bool ok = true;
  for (const auto& run : r.runs) {
    if (!run.result) return {false, "cell coop=" + std::to_string(run.cooperative) + " failed: " + run.error};
  }
  auto final_spd = [&](std::size_t count, const std::string& variant, Seed seed) -> double {
    for (const auto& run : r.runs) {
      if (run.cooperative == count && run.variant.name == variant && run.seed == seed) {
        return run.result->reports.back().global.spd;
      }
    }
    return NAN;
  };
  auto mean_spd = [&](std::size_t count, const std::string& variant) {
    double m = 0;
    for (auto seed : spec.replicates) m += final_spd(count, variant, seed);
    return m / double(spec.replicates.size());
  };

  // Non-increasing replicate-mean SPD along the sweep (ranking variant).
  detail << "ranking mean SPD by count:";
  for (std::size_t i = 0; i < spec.cooperative_counts.size(); ++i) {
    const auto c = spec.cooperative_counts[i];
    const double m = mean_spd(c, "ranking");
    detail << " " << c << "=" << fmt(m);
    if (i > 0 && m > mean_spd(spec.cooperative_counts[i - 1], "ranking") + 0.02) ok = false;
  }
  detail << "; no-ranking:";
  for (auto c : spec.cooperative_counts) detail << " " << c << "=" << fmt(mean_spd(c, "no-ranking"));

  int drops = 0;
  for (auto seed : spec.replicates) drops += final_spd(0, "ranking", seed) - final_spd(10, "ranking", seed) >= 0.05;
  detail << "; endpoint drop >= 0.05 in " << drops << "/3 replicates";
  ok = ok && drops >= 2;

  const double rank3 = mean_spd(3, "ranking"), plain3 = mean_spd(3, "no-ranking");
  detail << "; count 3 ranking " << fmt(rank3) << " vs no-ranking " << fmt(plain3);
  ok = ok && rank3 <= plain3;
  return {ok, detail.str()};
}

Outcome adversary_downweighting() {
  const auto& r = trend_sweep();
  const double uniform = 1.0 / 10.0;
  bool ok = true;
  std::ostringstream detail;
  for (const auto& run : r.runs) {
    if (run.cooperative != 8 || run.variant.name != "ranking") continue;
    if (!run.result) return {false, "count-8 cell failed: " + run.error};
    const auto& reps = run.result->reports;
    double coop = 0, adv = 0;
    std::size_t nc = 0, na = 0;
    for (std::size_t t = reps.size() - 10; t < reps.size(); ++t) {
      for (const auto& c : reps[t].clients) {
        if (c.behavior == Behavior::kUncooperative) {
          adv += *c.weight;
          ++na;
        } else {
          coop += *c.weight;
          ++nc;
        }
      }
    }
    adv /= double(na);
    coop /= double(nc);
    detail << "seed " << run.seed << ": skewed " << fmt(adv) << " cooperative " << fmt(coop) << "; ";
    ok = ok && adv < uniform && coop > uniform;
  }
  return {ok, detail.str() + "1/K = 0.1"};
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "fedval_acceptance_determinism";
  fs::remove_all(dir);
  int differing = 0, runs = 0;

  std::vector<ExperimentConfig> configs;
  auto trend = trend_setup();
  auto cell = trend.base;
  cell.clients = cooperative_population(10, 3, trend.spec.uncooperative_skew);
  cell.seed = 2;
  configs.push_back(cell);
  for (auto s : {Strategy::kFedAvg, Strategy::kQFedSgd, Strategy::kQFedAvg, Strategy::kAfl}) {
    auto c = cell;
    c.strategy = s;
    c.rounds = 20;
    c.train.learning_rate = 0.01;
    c.q = {s == Strategy::kQFedSgd ? 1.0 : 5.0, s == Strategy::kQFedSgd ? 1.0 : 100.0};
    configs.push_back(c);
  }

  for (auto& c : configs) {
    c.out_dir = (dir / (std::string(to_string(c.strategy)) + "_a")).string();
    run_experiment(c);
    // Second run from the written resolved config.
    auto again = load_config((fs::path(c.out_dir) / "resolved_config.json").string());
    again.out_dir = (dir / (std::string(to_string(c.strategy)) + "_b")).string();
    run_experiment(again);
    differing += slurp(fs::path(c.out_dir) / "rounds.csv") != slurp(fs::path(again.out_dir) / "rounds.csv");
    ++runs;
  }
  fs::remove_all(dir);
  return {differing == 0, std::to_string(runs - differing) + "/" + std::to_string(runs) +
                              " strategies reproduced rounds.csv byte-for-byte from resolved_config.json"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", 5, metric_oracle},
      {2, "gradient check", 5, gradient_check},
      {3, "FedVal reduces to FedAvg", 0, fedavg_reduction},
      {4, "ranking arithmetic", 0, ranking_arithmetic},
      {5, "weight simplex", 0, weight_simplex},
      {6, "q = 0 reductions", 0, q_zero_reductions},
      {7, "objective-weight scale invariance", 0, gamma_scale_invariance},
      {8, "bias-mitigation trend", 180, bias_trend},
      {9, "adversary down-weighting", 0, adversary_downweighting},
      {10, "determinism", 0, determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_s) + " s budget";
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed;
}
