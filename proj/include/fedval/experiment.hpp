#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedval/baselines.hpp"
#include "fedval/config.hpp"
#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/fedval.hpp"
#include "fedval/io.hpp"
#include "fedval/round.hpp"

namespace fedval {

struct PreparedData {
  TabularDataset validation;
  std::vector<ClientProfile> clients;
};

// Loads or generates the data, carves out the server's validation set and
// deals the remainder to the configured clients.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  TabularDataset all = cfg.data.synthetic ? generate_synthetic(*cfg.data.synthetic)
                                          : load_csv(cfg.data.csv->path, cfg.data.csv->schema);
  auto split = split_validation(all, cfg.validation_fraction, derive_seed(cfg.seed, {stream::kSplit}));
  PreparedData out;
  out.validation = std::move(split.validation);
  out.clients = partition(split.train, cfg.clients, derive_seed(cfg.seed, {stream::kPartition}));
  return out;
}

// Round-level training seed; client seeds mix in the client key on top.
inline TrainConfig round_train_config(const ExperimentConfig& cfg, std::size_t round) {
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, {stream::kTrain, round});
  return t;
}

struct ExperimentResult {
  std::vector<RoundReport> reports;
  ModelParams final_model;
  std::vector<std::string> warnings;
};

namespace detail {

class ReportWriter {
 public:
  explicit ReportWriter(const std::string& dir) : dir_(dir) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_);
    jsonl_.open(dir_ / "rounds.jsonl", std::ios::binary | std::ios::trunc);
    csv_.open(dir_ / "rounds.csv", std::ios::binary | std::ios::trunc);
    if (!jsonl_ || !csv_) throw InvalidArgumentError("cannot create report files in '" + dir + "'");
    csv_ << kRoundsCsvHeader;
    csv_.flush();
  }

  void config(const ExperimentConfig& cfg) {
    if (!dir_.empty()) write_text_file((dir_ / "resolved_config.json").string(), to_json(cfg).dump(2) + "\n");
  }

  void round(const RoundReport& r) {
    if (dir_.empty()) return;
    jsonl_ << to_json(r).dump() << '\n';
    csv_ << to_csv_rows(r);
    jsonl_.flush();
    csv_.flush();
  }

  void model(const ModelParams& m) {
    if (!dir_.empty()) write_text_file((dir_ / "final_model.json").string(), to_json(m).dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  std::ofstream jsonl_;
  std::ofstream csv_;
};

}  // namespace detail

// Runs `cfg.rounds` rounds of the configured strategy from a zero model.
// When `cfg.out_dir` is set, writes resolved_config.json, rounds.jsonl,
// rounds.csv and final_model.json there; rounds are flushed as they finish.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.warnings = cfg.validate();

  auto data = prepare_data(cfg);
  detail::ReportWriter writer(cfg.out_dir);
  writer.config(cfg);

  ModelParams global = ModelParams::zeros(data.validation.cols());
  RankState ranks;
  AFLState afl;
  afl.learning_rate = cfg.afl_learning_rate;

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    const auto train = round_train_config(cfg, t);
    RoundReport report;
    ModelParams next;
    try {
      switch (cfg.strategy) {
        case Strategy::kFedVal: {
          auto r = fedval_round(global, data.clients, data.validation, cfg.fedval, train, ranks);
          next = std::move(r.global);
          report = std::move(r.report);
          ranks = std::move(r.state);
          break;
        }
        case Strategy::kFedAvg: {
          auto r = fedavg_round(global, data.clients, train);
          next = std::move(r.global);
          report.clients = std::move(r.clients);
          break;
        }
        case Strategy::kQFedSgd: {
          auto r = qfedsgd_round(global, data.clients, cfg.q);
          next = std::move(r.global);
          report.clients = std::move(r.clients);
          break;
        }
        case Strategy::kQFedAvg: {
          auto r = qfedavg_round(global, data.clients, cfg.q, train);
          next = std::move(r.global);
          report.clients = std::move(r.clients);
          break;
        }
        case Strategy::kAfl: {
          auto r = afl_round(global, data.clients, afl, train);
          next = std::move(r.global);
          report.clients = std::move(r.clients);
          afl = std::move(r.state);
          break;
        }
      }
      report.round = t;
      report.strategy = to_string(cfg.strategy);
      report.global = evaluate(next, data.validation);
    } catch (const Error& e) {
      writer.model(global);
      throw RoundError("round " + std::to_string(t) + " aborted: " + e.what());
    }
    writer.round(report);
    result.reports.push_back(std::move(report));
    global = std::move(next);
  }
  writer.model(global);
  result.final_model = std::move(global);
  return result;
}

// ---------------------------------------------------------------------------
// Cooperative-ratio sweeps

struct SweepVariant {
  std::string name;
  bool ranking = true;
};

struct SweepSpec {
  std::size_t clients = 10;
  std::vector<std::size_t> cooperative_counts;
  std::vector<SweepVariant> variants{{"ranking", true}, {"no-ranking", false}};
  std::vector<Seed> replicates{1};
  SkewSpec uncooperative_skew{Group::kDisadvantaged, 0.2, 1.0};
  std::string out_dir;
  std::size_t jobs = 0;  // 0 = hardware concurrency

  void validate() const {
    if (clients < 1) throw ConfigError("sweep needs at least one client");
    if (cooperative_counts.empty()) throw ConfigError("sweep needs at least one cooperative count");
    for (auto c : cooperative_counts) {
      if (c > clients) {
        throw ConfigError("cooperative count " + std::to_string(c) + " exceeds " + std::to_string(clients) + " clients");
      }
    }
    if (variants.empty()) throw ConfigError("sweep needs at least one variant");
    if (replicates.empty()) throw ConfigError("sweep needs at least one replicate seed");
    try {
      uncooperative_skew.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
};

struct SweepRun {
  std::size_t cooperative = 0;
  SweepVariant variant;
  Seed seed = 0;
  std::optional<ExperimentResult> result;
  std::string error;
};

struct SweepSummaryRow {
  std::size_t cooperative = 0;
  double cooperative_ratio = 0.0;
  SweepVariant variant;
  std::size_t completed = 0;
  std::size_t failed = 0;
  double spd_mean = NAN, spd_std = NAN;
  double eod_mean = NAN, eod_std = NAN;
  double accuracy_mean = NAN, accuracy_std = NAN;
};

struct SweepResult {
  std::vector<SweepRun> runs;  // count-major, then variant, then replicate
  std::vector<SweepSummaryRow> summary;
};

namespace detail {

// Mean and sample standard deviation (0 for a single value).
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {NAN, NAN};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

inline std::string cell_name(const SweepRun& r) {
  return "coop" + std::to_string(r.cooperative) + "_" + r.variant.name + "_seed" + std::to_string(r.seed);
}

}  // namespace detail

inline constexpr const char* kSummaryCsvHeader =
    "cooperative,cooperative_ratio,variant,ranking,completed,failed,spd_mean,spd_std,eod_mean,eod_std,"
    "accuracy_mean,accuracy_std\n";

inline std::string summary_csv(const SweepResult& r) {
  std::ostringstream out;
  out << kSummaryCsvHeader;
  auto num = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
  for (const auto& row : r.summary) {
    out << row.cooperative << ',' << csv::format_double(row.cooperative_ratio) << ',' << csv::quote(row.variant.name)
        << ',' << (row.variant.ranking ? "true" : "false") << ',' << row.completed << ',' << row.failed << ','
        << num(row.spd_mean) << ',' << num(row.spd_std) << ',' << num(row.eod_mean) << ',' << num(row.eod_std) << ','
        << num(row.accuracy_mean) << ',' << num(row.accuracy_std) << '\n';
  }
  return out.str();
}

inline std::string runs_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "cooperative,variant,ranking,seed,status,accuracy,spd,eod,error\n";
  for (const auto& run : r.runs) {
    out << run.cooperative << ',' << csv::quote(run.variant.name) << ',' << (run.variant.ranking ? "true" : "false")
        << ',' << run.seed << ',';
    if (run.result && !run.result->reports.empty()) {
      const auto& g = run.result->reports.back().global;
      out << "ok," << csv::format_double(g.accuracy) << ',' << csv::format_double(g.spd) << ','
          << csv::format_double(g.eod) << ",\n";
    } else {
      out << "failed,,,," << csv::quote(run.error) << '\n';
    }
  }
  return out.str();
}

// Runs every (cooperative count, variant, replicate) cell with freshly dealt
// clients: `count` cooperative, the rest uncooperative. A failing cell is
// recorded and the sweep continues.
inline SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base) {
  spec.validate();
  SweepResult result;
  for (auto count : spec.cooperative_counts) {
    for (const auto& v : spec.variants) {
      for (auto seed : spec.replicates) result.runs.push_back({count, v, seed, std::nullopt, {}});
    }
  }

  auto run_cell = [&](SweepRun& run) {
    ExperimentConfig cfg = base;
    cfg.clients = cooperative_population(spec.clients, run.cooperative, spec.uncooperative_skew);
    cfg.fedval.ranking.enabled = run.variant.ranking;
    cfg.seed = run.seed;
    cfg.out_dir = spec.out_dir.empty() ? std::string()
                                       : (std::filesystem::path(spec.out_dir) / "cells" / detail::cell_name(run)).string();
    try {
      run.result = run_experiment(cfg);
    } catch (const Error& e) {
      run.error = e.what();
    }
  };

  std::size_t jobs = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, result.runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.runs.size(); i = next++) run_cell(result.runs[i]);
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto count : spec.cooperative_counts) {
    for (const auto& v : spec.variants) {
      SweepSummaryRow row;
      row.cooperative = count;
      row.cooperative_ratio = static_cast<double>(count) / static_cast<double>(spec.clients);
      row.variant = v;
      std::vector<double> spd, eod, acc;
      for (const auto& run : result.runs) {
        if (run.cooperative != count || run.variant.name != v.name) continue;
        if (run.result && !run.result->reports.empty()) {
          const auto& g = run.result->reports.back().global;
          spd.push_back(g.spd);
          eod.push_back(g.eod);
          acc.push_back(g.accuracy);
        } else {
          ++row.failed;
        }
      }
      row.completed = spd.size();
      std::tie(row.spd_mean, row.spd_std) = detail::mean_std(spd);
      std::tie(row.eod_mean, row.eod_std) = detail::mean_std(eod);
      std::tie(row.accuracy_mean, row.accuracy_std) = detail::mean_std(acc);
      result.summary.push_back(row);
    }
  }

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    write_text_file((std::filesystem::path(spec.out_dir) / "summary.csv").string(), summary_csv(result));
    write_text_file((std::filesystem::path(spec.out_dir) / "runs.csv").string(), runs_csv(result));
  }
  return result;
}

// {"base": {...experiment config...} | "path/to/config.json",
//  "clients": 10, "cooperative_counts": [0, 3, 5, 8, 10],
//  "variants": [{"name": "ranking", "ranking": true}, ...],
//  "replicates": [1, 2, 3], "uncooperative_skew": {"ratio": 0.2},
//  "out_dir": "sweep-out", "jobs": 0}
struct SweepConfig {
  SweepSpec spec;
  ExperimentConfig base;
};

inline SweepConfig sweep_from_json(const json& j, const std::filesystem::path& relative_to = {}) {
  try {
    SweepConfig out;
    const auto& b = j.at("base");
    if (b.is_string()) {
      std::filesystem::path p = b.get<std::string>();
      if (p.is_relative() && !relative_to.empty()) p = relative_to / p;
      out.base = load_config(p.string());
    } else {
      out.base = config_from_json(b, relative_to);
    }
    auto& s = out.spec;
    s.clients = j.value("clients", out.base.clients.empty() ? std::size_t{10} : out.base.clients.size());
    s.cooperative_counts = j.at("cooperative_counts").get<std::vector<std::size_t>>();
    if (j.contains("variants")) {
      s.variants.clear();
      for (const auto& v : j["variants"]) s.variants.push_back({v.at("name").get<std::string>(), v.value("ranking", true)});
    }
    if (j.contains("replicates")) s.replicates = j["replicates"].get<std::vector<Seed>>();
    if (j.contains("uncooperative_skew")) s.uncooperative_skew = skew_from_json(j["uncooperative_skew"]);
    s.out_dir = j.value("out_dir", out.base.out_dir);
    s.jobs = j.value("jobs", std::size_t{0});
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed sweep config: ") + e.what());
  }
}

}  // namespace fedval
