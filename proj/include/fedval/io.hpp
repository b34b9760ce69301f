#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/metrics.hpp"
#include "fedval/model.hpp"
#include "fedval/round.hpp"

namespace fedval {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// ModelParams: {"weights": [...], "bias": x}

inline json to_json(const ModelParams& m) { return json{{"weights", m.weights}, {"bias", m.bias}}; }

inline ModelParams model_from_json(const json& j) {
  try {
    ModelParams m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    for (double v : m.weights) {
      if (!std::isfinite(v)) throw ShapeError("model weights must be finite");
    }
    if (!std::isfinite(m.bias)) throw ShapeError("model bias must be finite");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgumentError("cannot write '" + path + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// DatasetSchema
//
// {"features": [{"name": "age", "kind": "numeric"},
//               {"name": "race", "kind": "categorical", "vocabulary": [...]}],
//  "label": {"column": "income", "positive": ">50K"},
//  "sensitive": {"column": "sex", "advantaged": "Male"}}

inline DatasetSchema adult_schema();

inline json to_json(const DatasetSchema& s) {
  json feats = json::array();
  for (const auto& f : s.features) {
    json jf{{"name", f.name}, {"kind", f.kind == ColumnKind::kNumeric ? "numeric" : "categorical"}};
    if (f.kind == ColumnKind::kCategorical) jf["vocabulary"] = f.vocabulary;
    feats.push_back(std::move(jf));
  }
  return json{{"features", feats},
              {"label", {{"column", s.label_column}, {"positive", s.positive_value}}},
              {"sensitive", {{"column", s.sensitive_column}, {"advantaged", s.advantaged_value}}}};
}

inline DatasetSchema schema_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "adult") return adult_schema();
    throw SchemaError("unknown built-in schema '" + j.get<std::string>() + "' (known: adult)");
  }
  try {
    DatasetSchema s;
    for (const auto& jf : j.at("features")) {
      FeatureColumn f;
      f.name = jf.at("name").get<std::string>();
      const auto kind = jf.value("kind", std::string("numeric"));
      if (kind == "numeric") {
        f.kind = ColumnKind::kNumeric;
      } else if (kind == "categorical") {
        f.kind = ColumnKind::kCategorical;
        f.vocabulary = jf.at("vocabulary").get<std::vector<std::string>>();
      } else {
        throw SchemaError("column '" + f.name + "' has unknown kind '" + kind + "'");
      }
      s.features.push_back(std::move(f));
    }
    s.label_column = j.at("label").at("column").get<std::string>();
    s.positive_value = j.at("label").at("positive").get<std::string>();
    s.sensitive_column = j.at("sensitive").at("column").get<std::string>();
    s.advantaged_value = j.at("sensitive").at("advantaged").get<std::string>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

// UCI Adult census income.
inline DatasetSchema adult_schema() {
  auto numeric = [](std::string n) { return FeatureColumn{std::move(n), ColumnKind::kNumeric, {}}; };
  auto cat = [](std::string n, std::vector<std::string> v) {
    return FeatureColumn{std::move(n), ColumnKind::kCategorical, std::move(v)};
  };
  DatasetSchema s;
  s.features = {
      numeric("age"),
      cat("workclass", {"Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov", "State-gov",
                        "Without-pay", "Never-worked", "?"}),
      numeric("fnlwgt"),
      cat("education", {"Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm", "Assoc-voc",
                        "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th", "Doctorate", "5th-6th",
                        "Preschool"}),
      numeric("education-num"),
      cat("marital-status", {"Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
                             "Married-spouse-absent", "Married-AF-spouse"}),
      cat("occupation", {"Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                         "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                         "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                         "Armed-Forces", "?"}),
      cat("relationship", {"Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"}),
      cat("race", {"White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"}),
      numeric("capital-gain"),
      numeric("capital-loss"),
      numeric("hours-per-week"),
      cat("native-country",
          {"United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
           "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China", "Cuba", "Iran", "Honduras",
           "Philippines", "Italy", "Poland", "Jamaica", "Vietnam", "Mexico", "Portugal", "Ireland", "France",
           "Dominican-Republic", "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
           "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru", "Hong",
           "Holand-Netherlands", "?"}),
  };
  s.label_column = "income";
  s.positive_value = ">50K";
  s.sensitive_column = "sex";
  s.advantaged_value = "Male";
  return s;
}

// ---------------------------------------------------------------------------
// Writing datasets

// Header x0..x{d-1},label,group with group values "a"/"d". Reads back with
// synthetic_csv_schema().
inline void write_dataset_csv(std::ostream& out, const TabularDataset& d) {
  for (std::size_t j = 0; j < d.cols(); ++j) out << 'x' << j << ',';
  out << "label,group\n";
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (double v : d.row(i)) out << csv::format_double(v) << ',';
    out << int(d.label(i)) << ',' << (d.group(i) == Group::kAdvantaged ? 'a' : 'd') << '\n';
  }
}

inline DatasetSchema synthetic_csv_schema(std::size_t dim) {
  DatasetSchema s;
  for (std::size_t j = 0; j < dim; ++j) s.features.push_back({"x" + std::to_string(j), ColumnKind::kNumeric, {}});
  s.label_column = "label";
  s.positive_value = "1";
  s.sensitive_column = "group";
  s.advantaged_value = "a";
  return s;
}

// ---------------------------------------------------------------------------
// RoundReport: one JSON object per round, and a flat CSV.

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const RoundReport& r) {
  json clients = json::array();
  for (const auto& c : r.clients) {
    json scores = nullptr;
    if (!c.objective_scores.empty()) {
      scores = json::object();
      for (std::size_t j = 0; j < r.objectives.size(); ++j) scores[to_string(r.objectives[j])] = c.objective_scores[j];
    }
    clients.push_back(json{{"id", c.id},
                           {"behavior", to_string(c.behavior)},
                           {"n", c.n},
                           {"scores", scores},
                           {"composite", optional_json(c.composite)},
                           {"weight", optional_json(c.weight)},
                           {"rank_score", optional_json(c.rank_score)},
                           {"local_loss", c.local_loss}});
  }
  return json{{"round", r.round},
              {"strategy", r.strategy},
              {"global", {{"accuracy", r.global.accuracy}, {"spd", r.global.spd}, {"eod", r.global.eod}}},
              {"rank_spread", optional_json(r.rank_spread)},
              {"clients", clients}};
}

inline constexpr const char* kRoundsCsvHeader =
    "round,row,client_id,behavior,n,s_accuracy,s_spd,s_eod,composite,weight,rank_score,local_loss,"
    "accuracy,spd,eod,rank_spread\n";

inline std::string csv_cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

// One "global" row followed by one "client" row per client.
inline std::string to_csv_rows(const RoundReport& r) {
  std::ostringstream out;
  const auto round = std::to_string(r.round);
  out << round << ",global,,,,,,,,,,," << csv::format_double(r.global.accuracy) << ','
      << csv::format_double(r.global.spd) << ',' << csv::format_double(r.global.eod) << ','
      << csv_cell(r.rank_spread) << '\n';
  for (const auto& c : r.clients) {
    std::optional<double> s[3];
    for (std::size_t j = 0; j < c.objective_scores.size() && j < r.objectives.size(); ++j) {
      s[static_cast<std::size_t>(r.objectives[j])] = c.objective_scores[j];
    }
    out << round << ",client," << c.id << ',' << to_string(c.behavior) << ',' << c.n << ',' << csv_cell(s[0]) << ','
        << csv_cell(s[1]) << ',' << csv_cell(s[2]) << ',' << csv_cell(c.composite) << ',' << csv_cell(c.weight)
        << ',' << csv_cell(c.rank_score) << ',' << csv::format_double(c.local_loss) << ",,,,\n";
  }
  return out.str();
}

}  // namespace fedval
