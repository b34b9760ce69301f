#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedval/baselines.hpp"
#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/fedval.hpp"
#include "fedval/io.hpp"
#include "fedval/metrics.hpp"
#include "fedval/model.hpp"

namespace fedval {

enum class Strategy { kFedVal, kFedAvg, kQFedSgd, kQFedAvg, kAfl };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kFedVal: return "fedval";
    case Strategy::kFedAvg: return "fedavg";
    case Strategy::kQFedSgd: return "qfedsgd";
    case Strategy::kQFedAvg: return "qfedavg";
    case Strategy::kAfl: return "afl";
  }
  return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
  for (auto v : {Strategy::kFedVal, Strategy::kFedAvg, Strategy::kQFedSgd, Strategy::kQFedAvg, Strategy::kAfl}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected fedval, fedavg, qfedsgd, qfedavg or afl)");
}

inline Behavior behavior_from_string(std::string_view s) {
  for (auto b : {Behavior::kCooperative, Behavior::kNormal, Behavior::kUncooperative}) {
    if (s == to_string(b)) return b;
  }
  throw ConfigError("unknown client behavior '" + std::string(s) + "'");
}

struct CsvSource {
  std::string path;
  DatasetSchema schema;
};

struct DataSource {
  std::optional<SyntheticSpec> synthetic;
  std::optional<CsvSource> csv;
};

struct ExperimentConfig {
  std::string name;
  DataSource data;
  std::vector<ClientPlan> clients;
  double validation_fraction = 0.2;
  Strategy strategy = Strategy::kFedVal;
  FedValConfig fedval;
  TrainConfig train;  // seed is ignored; per-round seeds derive from `seed`
  QConfig q;
  double afl_learning_rate = 0.1;
  std::size_t rounds = 1;
  Seed seed = 0;
  std::string out_dir;
  std::string notes;

  // Throws ConfigError; returns human-readable warnings.
  std::vector<std::string> validate() const {
    std::vector<std::string> warnings;
    auto wrap = [](auto&& f) {
      try {
        f();
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    };
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (clients.empty()) throw ConfigError("at least one client is required");
    if (data.synthetic.has_value() == data.csv.has_value()) {
      throw ConfigError("exactly one data source (synthetic or csv) is required");
    }
    if (data.csv) {
      wrap([&] { data.csv->schema.validate(); });
      if (!std::filesystem::exists(data.csv->path)) throw ConfigError("data file '" + data.csv->path + "' does not exist");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw ConfigError("validation_fraction must lie in (0,1)");
    }
    for (const auto& c : clients) {
      if (c.skew) wrap([&] { c.skew->validate(); });
    }
    wrap([&] { train.validate(); });
    switch (strategy) {
      case Strategy::kFedVal:
        wrap([&] { fedval.validate(); });
        if (fedval.ranking.enabled && fedval.ranking.step_size < 1.0) {
          warnings.push_back("ranking step size < 1 rewards the lowest-scoring clients most");
        }
        break;
      case Strategy::kQFedSgd:
      case Strategy::kQFedAvg:
        wrap([&] { q.validate(); });
        break;
      case Strategy::kAfl:
        if (!(afl_learning_rate > 0.0)) throw ConfigError("afl lambda learning rate must be positive");
        break;
      case Strategy::kFedAvg:
        break;
    }
    return warnings;
  }
};

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const SkewSpec& s) {
  return json{{"target", s.target == Group::kAdvantaged ? "advantaged" : "disadvantaged"},
              {"ratio", s.ratio},
              {"retain", s.retain}};
}

inline SkewSpec skew_from_json(const json& j) {
  SkewSpec s;
  const auto target = j.value("target", std::string("disadvantaged"));
  if (target == "advantaged") {
    s.target = Group::kAdvantaged;
  } else if (target == "disadvantaged") {
    s.target = Group::kDisadvantaged;
  } else {
    throw ConfigError("skew target must be 'advantaged' or 'disadvantaged'");
  }
  s.ratio = j.at("ratio").get<double>();
  s.retain = j.value("retain", 1.0);
  return s;
}

// `count` cooperative clients followed by K - count uncooperative ones.
inline std::vector<ClientPlan> cooperative_population(std::size_t k, std::size_t count, const SkewSpec& skew) {
  std::vector<ClientPlan> out;
  for (std::size_t i = 0; i < k; ++i) {
    if (i < count) {
      out.push_back({Behavior::kCooperative, std::nullopt});
    } else {
      out.push_back({Behavior::kUncooperative, skew});
    }
  }
  return out;
}

inline std::vector<ClientPlan> clients_from_json(const json& j) {
  std::vector<ClientPlan> out;
  if (j.is_array()) {
    for (const auto& c : j) {
      ClientPlan p;
      p.behavior = behavior_from_string(c.value("behavior", std::string("normal")));
      if (c.contains("skew") && !c["skew"].is_null()) p.skew = skew_from_json(c["skew"]);
      out.push_back(std::move(p));
    }
    return out;
  }
  // {"cooperative": 3, "normal": 0, "uncooperative": 7, "skew": {...}}
  const auto coop = j.value("cooperative", std::size_t{0});
  const auto normal = j.value("normal", std::size_t{0});
  const auto uncoop = j.value("uncooperative", std::size_t{0});
  std::optional<SkewSpec> skew;
  if (j.contains("skew")) skew = skew_from_json(j["skew"]);
  if (uncoop > 0 && !skew) throw ConfigError("uncooperative clients need a 'skew' block");
  for (std::size_t i = 0; i < coop; ++i) out.push_back({Behavior::kCooperative, std::nullopt});
  for (std::size_t i = 0; i < normal; ++i) out.push_back({Behavior::kNormal, std::nullopt});
  for (std::size_t i = 0; i < uncoop; ++i) out.push_back({Behavior::kUncooperative, skew});
  return out;
}

inline json to_json(const ExperimentConfig& c) {
  json data;
  if (c.data.synthetic) {
    const auto& s = *c.data.synthetic;
    data = json{{"type", "synthetic"},
                {"n", s.n},
                {"dim", s.dim},
                {"rate_advantaged", s.rate_advantaged},
                {"rate_disadvantaged", s.rate_disadvantaged},
                {"seed", s.seed}};
  } else if (c.data.csv) {
    data = json{{"type", "csv"}, {"path", c.data.csv->path}, {"schema", to_json(c.data.csv->schema)}};
  }
  json clients = json::array();
  for (const auto& p : c.clients) {
    clients.push_back(json{{"behavior", to_string(p.behavior)}, {"skew", p.skew ? to_json(*p.skew) : json(nullptr)}});
  }
  json objectives = json::array();
  for (const auto& e : c.fedval.objectives.entries) objectives.push_back(json{{"kind", to_string(e.kind)}, {"weight", e.weight}});
  return json{{"name", c.name},
              {"data", data},
              {"clients", clients},
              {"validation_fraction", c.validation_fraction},
              {"strategy", to_string(c.strategy)},
              {"objectives", objectives},
              {"score_transform", to_string(c.fedval.objectives.transform)},
              {"blend", c.fedval.blend},
              {"ranking",
               {{"enabled", c.fedval.ranking.enabled},
                {"initial_step", c.fedval.ranking.initial_step},
                {"step_size", c.fedval.ranking.step_size}}},
              {"train",
               {{"epochs", c.train.epochs}, {"batch_size", c.train.batch_size}, {"learning_rate", c.train.learning_rate}}},
              {"q", {{"q", c.q.q}, {"lipschitz", c.q.lipschitz}}},
              {"afl", {{"lambda_learning_rate", c.afl_learning_rate}}},
              {"rounds", c.rounds},
              {"seed", c.seed},
              {"out_dir", c.out_dir},
              {"notes", c.notes}};
}

inline ExperimentConfig preset(std::string_view name);

// Keys present in `j` override `base`.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base, const std::filesystem::path& relative_to = {}) {
  try {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    auto& c = base;
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("data")) {
      const auto& d = j["data"];
      const auto type = d.at("type").get<std::string>();
      c.data = {};
      if (type == "synthetic") {
        SyntheticSpec s;
        s.n = d.value("n", s.n);
        s.dim = d.value("dim", s.dim);
        s.rate_advantaged = d.value("rate_advantaged", s.rate_advantaged);
        s.rate_disadvantaged = d.value("rate_disadvantaged", s.rate_disadvantaged);
        s.seed = d.value("seed", s.seed);
        c.data.synthetic = s;
      } else if (type == "csv") {
        CsvSource src;
        std::filesystem::path p = d.at("path").get<std::string>();
        if (p.is_relative() && !relative_to.empty()) p = relative_to / p;
        src.path = std::filesystem::absolute(p).lexically_normal().string();
        if (d.contains("schema")) {
          src.schema = schema_from_json(d["schema"]);
        } else if (d.contains("schema_file")) {
          std::filesystem::path sp = d["schema_file"].get<std::string>();
          if (sp.is_relative() && !relative_to.empty()) sp = relative_to / sp;
          src.schema = schema_from_json(read_json_file(sp.string()));
        } else {
          throw ConfigError("csv data source needs 'schema' or 'schema_file'");
        }
        c.data.csv = std::move(src);
      } else {
        throw ConfigError("unknown data type '" + type + "' (expected synthetic or csv)");
      }
    }
    if (j.contains("clients")) c.clients = clients_from_json(j["clients"]);
    if (j.contains("validation_fraction")) c.validation_fraction = j["validation_fraction"].get<double>();
    if (j.contains("strategy")) c.strategy = strategy_from_string(j["strategy"].get<std::string>());
    if (j.contains("objectives")) {
      c.fedval.objectives.entries.clear();
      for (const auto& o : j["objectives"]) {
        c.fedval.objectives.entries.push_back(
            {objective_from_string(o.at("kind").get<std::string>()), o.value("weight", 1.0)});
      }
    }
    if (j.contains("score_transform")) {
      c.fedval.objectives.transform = score_transform_from_string(j["score_transform"].get<std::string>());
    }
    if (j.contains("blend")) c.fedval.blend = j["blend"].get<double>();
    if (j.contains("ranking")) {
      const auto& r = j["ranking"];
      c.fedval.ranking.enabled = r.value("enabled", c.fedval.ranking.enabled);
      c.fedval.ranking.initial_step = r.value("initial_step", c.fedval.ranking.initial_step);
      c.fedval.ranking.step_size = r.value("step_size", c.fedval.ranking.step_size);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    }
    if (j.contains("q")) {
      c.q.q = j["q"].value("q", c.q.q);
      c.q.lipschitz = j["q"].value("lipschitz", c.q.lipschitz);
    }
    if (j.contains("afl")) c.afl_learning_rate = j["afl"].value("lambda_learning_rate", c.afl_learning_rate);
    if (j.contains("rounds")) c.rounds = j["rounds"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<Seed>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("notes")) c.notes = j["notes"].get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

// Starts from {"preset": name} when present, then applies the other keys.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& relative_to = {}) {
  ExperimentConfig base;
  base.fedval.objectives = ObjectiveSpec::all_equal();
  if (j.is_object() && j.contains("preset")) base = preset(j["preset"].get<std::string>());
  return config_from_json(j, std::move(base), relative_to);
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Presets (hyperparameter tables of the reference experiments). The data
// source is a synthetic stand-in; point "data" at a CSV to use real data.

struct PresetInfo {
  const char* name;
  const char* description;
};

inline constexpr PresetInfo kPresets[] = {
    {"adult-fedval-10", "FedVal, 10 clients, 150 rounds, lr 0.1, ranking mu=2 rho=1.5"},
    {"health-fedval-10", "FedVal, 10 clients, 350 rounds, lr 0.1, ranking mu=0.001 rho=10"},
    {"adult-qfed", "q-FedAvg, 10 clients, 1000 rounds, lr 0.01, q=5"},
    {"health-qfed", "q-FedAvg, 10 clients, 3000 rounds, lr 0.01, q=5"},
    {"adult-afl", "AFL, 10 clients, 1000 rounds, lr 0.01"},
    {"health-afl", "AFL, 10 clients, 3000 rounds, lr 0.01"},
    {"adult-fedavg", "FedAvg, 10 clients, 150 rounds, lr 0.1"},
    {"health-fedavg", "FedAvg, 10 clients, 350 rounds, lr 0.1"},
    {"fedval-100", "FedVal, 100 clients, 150 rounds, lr 0.1, ranking mu=2 rho=1.5"},
};

inline ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  c.data.synthetic = SyntheticSpec{4000, 8, 0.5, 0.5, 7};
  c.validation_fraction = 0.2;
  c.fedval.objectives = ObjectiveSpec::all_equal();
  c.train = TrainConfig{1, 32, 0.1, 0};
  c.seed = 1;
  auto population = [&](std::size_t k) { c.clients.assign(k, ClientPlan{Behavior::kNormal, std::nullopt}); };
  auto fedval_with = [&](std::size_t rounds, double lr, double mu, double rho) {
    c.strategy = Strategy::kFedVal;
    c.rounds = rounds;
    c.train.learning_rate = lr;
    c.fedval.ranking = RankingConfig{true, mu, rho};
  };

  if (name == "adult-fedval-10") {
    population(10);
    fedval_with(150, 0.1, 2.0, 1.5);
  } else if (name == "health-fedval-10") {
    population(10);
    fedval_with(350, 0.1, 0.001, 10.0);
  } else if (name == "fedval-100") {
    population(100);
    c.data.synthetic->n = 40000;
    fedval_with(150, 0.1, 2.0, 1.5);
  } else if (name == "adult-qfed" || name == "health-qfed") {
    population(10);
    c.strategy = Strategy::kQFedAvg;
    c.rounds = name == "adult-qfed" ? 1000 : 3000;
    c.train.learning_rate = 0.01;
    c.q = QConfig{5.0, 1.0};
    c.notes = "q-Fed row covers both q-FedAvg and q-FedSGD; set strategy to qfedsgd for the latter";
  } else if (name == "adult-afl" || name == "health-afl") {
    population(10);
    c.strategy = Strategy::kAfl;
    c.rounds = name == "adult-afl" ? 1000 : 3000;
    c.train.learning_rate = 0.01;
    c.q = QConfig{0.0, 1.0};
    c.notes = "source table lists AFL with q = 0; run here as the minimax procedure, use strategy qfedavg with q 0 for the q-FFL reading";
  } else if (name == "adult-fedavg" || name == "health-fedavg") {
    population(10);
    c.strategy = Strategy::kFedAvg;
    c.rounds = name == "adult-fedavg" ? 150 : 350;
    c.train.learning_rate = 0.1;
  } else {
    std::string known;
    for (const auto& p : kPresets) known += std::string(known.empty() ? "" : ", ") + p.name;
    throw UnknownPresetError("unknown preset '" + std::string(name) + "'; registered presets: " + known);
  }
  return c;
}

}  // namespace fedval
