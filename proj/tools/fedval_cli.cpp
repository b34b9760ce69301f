#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedval/all.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<fedval::Seed> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> rounds;

  void apply(fedval::ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (rounds) cfg.rounds = *rounds;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_run(const std::string& path, const Overrides& o) {
  auto cfg = fedval::load_config(path);
  o.apply(cfg);
  if (cfg.out_dir.empty()) cfg.out_dir = "fedval-out";
  print_warnings(cfg.validate());
  auto result = fedval::run_experiment(cfg);
  const auto& g = result.reports.back().global;
  std::cout << "rounds " << result.reports.size() << "  accuracy " << g.accuracy << "  spd " << g.spd << "  eod "
            << g.eod << "\n"
            << "wrote " << cfg.out_dir << "\n";
  return 0;
}

int cmd_sweep(const std::string& path, const Overrides& o) {
  auto sc = fedval::sweep_from_json(fedval::read_json_file(path), std::filesystem::path(path).parent_path());
  if (o.rounds) sc.base.rounds = *o.rounds;
  if (o.out_dir) sc.spec.out_dir = *o.out_dir;
  if (o.seed) sc.spec.replicates = {*o.seed};
  if (sc.spec.out_dir.empty()) sc.spec.out_dir = "fedval-sweep";
  sc.base.validate();
  auto result = fedval::run_sweep(sc.spec, sc.base);
  std::cout << fedval::summary_csv(result);
  std::size_t failed = 0;
  for (const auto& r : result.runs) {
    if (!r.result) {
      ++failed;
      std::cerr << "cell " << r.cooperative << "/" << r.variant.name << "/seed " << r.seed << " failed: " << r.error
                << "\n";
    }
  }
  return failed == 0 ? 0 : kExitRuntime;
}

int cmd_preset(const std::string& action, const std::string& name) {
  if (action == "list") {
    for (const auto& p : fedval::kPresets) std::cout << p.name << "\t" << p.description << "\n";
    return 0;
  }
  if (action == "show") {
    if (name.empty()) throw fedval::ConfigError("preset show needs a name");
    std::cout << fedval::to_json(fedval::preset(name)).dump(2) << "\n";
    return 0;
  }
  throw fedval::ConfigError("preset action must be 'list' or 'show'");
}

// {"n": 1000, "dim": 4, "rate_advantaged": 0.5, "rate_disadvantaged": 0.5, "seed": 0}
int cmd_gen_data(const std::string& spec_path, const std::string& out_path, const Overrides& o) {
  const auto j = fedval::read_json_file(spec_path);
  fedval::SyntheticSpec s;
  try {
    s.n = j.value("n", s.n);
    s.dim = j.value("dim", s.dim);
    s.rate_advantaged = j.value("rate_advantaged", s.rate_advantaged);
    s.rate_disadvantaged = j.value("rate_disadvantaged", s.rate_disadvantaged);
    s.seed = j.value("seed", s.seed);
  } catch (const fedval::json::exception& e) {
    throw fedval::ConfigError(std::string("malformed data spec: ") + e.what());
  }
  if (o.seed) s.seed = *o.seed;
  fedval::TabularDataset d;
  try {
    d = fedval::generate_synthetic(s);
  } catch (const fedval::InvalidArgumentError& e) {
    throw fedval::ConfigError(e.what());
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw fedval::InvalidArgumentError("cannot write '" + out_path + "'");
  fedval::write_dataset_csv(out, d);
  // Schema that reads the file back.
  std::cout << fedval::to_json(fedval::synthetic_csv_schema(s.dim)).dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& schema_path) {
  fedval::ModelParams model;
  fedval::DatasetSchema schema;
  try {
    model = fedval::model_from_json(fedval::read_json_file(model_path));
    schema = fedval::schema_from_json(fedval::read_json_file(schema_path));
  } catch (const fedval::Error& e) {
    throw fedval::ConfigError(e.what());
  }
  const auto data = fedval::load_csv(data_path, schema);
  const auto m = fedval::evaluate(model, data);
  std::cout << "accuracy " << fedval::csv::format_double(m.accuracy) << "\n"
            << "spd " << fedval::csv::format_double(m.spd) << "\n"
            << "eod " << fedval::csv::format_double(m.eod) << "\n";
  return 0;
}

bool is_config_error(const fedval::Error& e) {
  return e.kind() == "config" || e.kind() == "unknown-preset" || e.kind() == "schema";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with validation-weighted aggregation"};
  app.require_subcommand(1);

  Overrides o;
  fedval::Seed seed = 0;
  std::string out_dir;
  std::size_t rounds = 0;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--out-dir", out_dir, "Output directory override");
    sub->add_option("--rounds", rounds, "Round count override")->check(CLI::PositiveNumber);
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", config_path, "Experiment config")->required();
  add_overrides(run);

  std::string sweep_path;
  auto* sweep = app.add_subcommand("sweep", "Run a cooperative-ratio sweep");
  sweep->add_option("config", sweep_path, "Sweep config")->required();
  add_overrides(sweep);

  std::string preset_action, preset_name;
  auto* pre = app.add_subcommand("preset", "List or show built-in presets");
  pre->add_option("action", preset_action, "list | show")->required();
  pre->add_option("name", preset_name, "Preset name (for show)");

  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen->add_option("spec", gen_spec, "Synthetic data spec (JSON)")->required();
  gen->add_option("out", gen_out, "Output CSV")->required();
  gen->add_option("--seed", seed, "Data seed override");

  std::string eval_model, eval_data, eval_schema;
  auto* ev = app.add_subcommand("eval", "Print accuracy/SPD/EOD of a model on a CSV");
  ev->add_option("model", eval_model, "Model JSON")->required();
  ev->add_option("data", eval_data, "Data CSV")->required();
  ev->add_option("schema", eval_schema, "Schema JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  auto* active = app.get_subcommands().front();
  auto given = [&](const char* flag) {
    const auto* opt = active->get_option_no_throw(flag);
    return opt && opt->count() > 0;
  };
  if (given("--seed")) o.seed = seed;
  if (given("--out-dir")) o.out_dir = out_dir;
  if (given("--rounds")) o.rounds = rounds;

  try {
    if (*run) return cmd_run(config_path, o);
    if (*sweep) return cmd_sweep(sweep_path, o);
    if (*pre) return cmd_preset(preset_action, preset_name);
    if (*gen) return cmd_gen_data(gen_spec, gen_out, o);
    if (*ev) return cmd_eval(eval_model, eval_data, eval_schema);
  } catch (const fedval::Error& e) {
    std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
    return is_config_error(e) ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
