#include "bvgae/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "bvgae/benchmark.hpp"
#include "bvgae/io.hpp"
#include "bvgae/report.hpp"
#include "bvgae/serialize.hpp"

namespace bvgae::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kDatasetMeta = "dataset.json";

// Flags that were given on the command line, applied over the config file.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    entries_.push_back({opt, [value, key](Json& cfg) { set(cfg, key, Json(*value)); }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    entries_.push_back({opt, [value, key](Json& cfg) { set(cfg, key, Json(*value)); }});
    return opt;
  }

  void apply(Json& cfg) const {
    for (const auto& e : entries_) {
      if (e.option->count() > 0) e.write(cfg);
    }
  }

  static void set(Json& cfg, const std::string& key, Json value) {
    Json* node = &cfg;
    std::size_t start = 0;
    for (std::size_t dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
      node = &(*node)[key.substr(start, dot - start)];
      start = dot + 1;
    }
    (*node)[key.substr(start)] = std::move(value);
  }

 private:
  struct Entry {
    CLI::Option* option;
    std::function<void(Json&)> write;
  };
  std::vector<Entry> entries_;
};

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  Overrides overrides;
  std::function<int(const Json&, std::ostream&)> run;
};

fs::path output_dir(const Json& cfg, const std::string& command) {
  if (cfg.contains("output")) return cfg.at("output").get<std::string>();
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root != nullptr && *root != '\0' ? root : "bvgae_out") / command;
}

template <typename T>
T get_or(const Json& cfg, const char* key, T fallback) {
  return cfg.contains(key) ? cfg.at(key).get<T>() : fallback;
}

std::uint64_t command_seed(const Json& cfg) { return get_or<std::uint64_t>(cfg, "seed", 0); }

std::vector<Method> parse_methods(const Json& cfg) {
  std::vector<std::string> names;
  if (!cfg.contains("methods")) {
    names = {"grad", "gradinput", "ig", "graphsvx"};
  } else if (cfg.at("methods").is_string()) {
    std::stringstream ss(cfg.at("methods").get<std::string>());
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) names.push_back(item);
    }
  } else {
    names = cfg.at("methods").get<std::vector<std::string>>();
  }
  std::vector<Method> methods;
  for (const auto& n : names) {
    const auto m = parse_method(n);
    if (!m) throw UsageError("unknown method '" + n + "'; valid methods: grad, gradinput, ig, graphsvx");
    if (std::find(methods.begin(), methods.end(), *m) != methods.end()) {
      throw UsageError("method '" + n + "' listed twice");
    }
    methods.push_back(*m);
  }
  return methods;
}

AttributionParams attribution_params(const Json& cfg) {
  AttributionParams p;
  if (!cfg.contains("attribution")) return p;
  const Json& a = cfg.at("attribution");
  p.grad_samples = get_or(a, "grad_samples", p.grad_samples);
  p.ig_steps = get_or(a, "ig_steps", p.ig_steps);
  p.svx_coalitions = get_or(a, "svx_coalitions", p.svx_coalitions);
  const std::string baseline = get_or<std::string>(a, "ig_baseline", "mean");
  if (baseline != "mean" && baseline != "zero") throw UsageError("ig_baseline must be 'mean' or 'zero'");
  p.ig_zero_baseline = baseline == "zero";
  if (p.grad_samples < 1) throw UsageError("grad_samples must be >= 1");
  if (p.ig_steps < 2) throw UsageError("ig_steps must be >= 2");
  if (p.svx_coalitions < 0) throw UsageError("svx_coalitions must be >= 0");
  return p;
}

SimSetting setting_from(const Json& cfg) {
  SimSetting s;
  if (cfg.contains("preset")) {
    s = preset(cfg.at("preset").get<std::string>());
  } else if (!cfg.contains("setting")) {
    throw UsageError("a --preset (or a 'setting' object in the config) is required; valid presets: 1.A, 1.B, 1.C, "
                     "1.D, 2.A, 2.B, 2.C, 2.D, 2.E, 2.F");
  }
  if (cfg.contains("setting")) {
    try {
      s = sim_setting_from_json(cfg.at("setting"), s);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return s;
}

ModelConfig model_from(const Json& cfg, ModelConfig base) {
  if (!cfg.contains("model")) return base;
  try {
    return model_config_from_json(cfg.at("model"), base);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void write_manifest(const fs::path& dir, const std::string& command, const Json& cfg, std::uint64_t seed,
                    const std::vector<std::string>& outputs, Json extra = Json::object()) {
  write_text(dir / "config.json", cfg.dump(2) + "\n");
  Json hashed = cfg;
  hashed.erase("output");
  Json m{{"command", command}, {"config_hash", hex64(config_hash(hashed))}, {"seed", seed}, {"config", cfg}};
  Json files = Json::array();
  for (const auto& o : outputs) files.push_back(o);
  files.push_back("config.json");
  m["outputs"] = files;
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

fs::path require_path(const Json& cfg, const char* key, const char* flag) {
  if (!cfg.contains(key)) throw UsageError(std::string(flag) + " is required");
  return fs::path(cfg.at(key).get<std::string>());
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("input file not found: '" + p.string() + "'");
}

struct Dataset {
  LoadedGraph loaded;
  GroupPartition partition;
  Json meta = Json::object();
  std::optional<Matrix> protected_block;
};

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: '" + dir.string() + "'");
  auto opt_file = [&](const char* name) -> std::optional<fs::path> {
    const fs::path p = dir / name;
    return fs::is_regular_file(p) ? std::optional<fs::path>(p) : std::nullopt;
  };
  require_file(dir / DatasetFiles::kEdges);
  require_file(dir / DatasetFiles::kRowCovariates);
  Dataset d;
  d.loaded = load_graph(dir / DatasetFiles::kEdges, dir / DatasetFiles::kRowCovariates,
                        opt_file(DatasetFiles::kColCovariates), opt_file(DatasetFiles::kPlants));
  if (const auto groups = opt_file(DatasetFiles::kGroups)) {
    d.partition = load_groups(*groups, d.loaded.row_ids);
  } else if (d.loaded.plants) {
    d.partition = GroupPartition(d.loaded.plants->labels(), d.loaded.plants->n_plants(), d.loaded.plant_ids);
  } else {
    d.partition = GroupPartition::single(d.loaded.graph.n1());
  }
  if (const auto meta = opt_file(kDatasetMeta)) d.meta = read_json(*meta);
  if (const auto prot = opt_file(DatasetFiles::kProtected)) {
    const CsvTable t = read_csv(*prot);
    const std::size_t rc = t.column("row_id", prot->string());
    const std::size_t vc = t.column("value", prot->string());
    std::unordered_map<std::string, double> value_of;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      value_of[t.rows[r][rc]] = parse_double(t.rows[r][vc], prot->string() + ":" + std::to_string(r + 2));
    }
    Matrix block(d.loaded.graph.n1(), 1);
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      const auto it = value_of.find(d.loaded.row_ids[static_cast<std::size_t>(i)]);
      if (it == value_of.end()) throw IoError(prot->string() + ": no value for row '" + d.loaded.row_ids[static_cast<std::size_t>(i)] + "'");
      block(i, 0) = it->second;
    }
    d.protected_block = std::move(block);
  }
  return d;
}

int cmd_simulate(const Json& cfg, std::ostream& out) {
  SimSetting s = setting_from(cfg);
  s.seed = command_seed(cfg);
  const fs::path dir = output_dir(cfg, "simulate");
  ensure_dir(dir);
  const SimulatedData data = simulate(s);
  std::vector<std::string> files = write_dataset(dir, data);
  Json protected_features = Json::array();
  for (int c : data.truth.hsic_columns) protected_features.push_back(data.truth.feature_names[static_cast<std::size_t>(c)]);
  Json meta{{"format", "bvgae-dataset"},
            {"setting", to_json(s)},
            {"protected_features", protected_features},
            {"hsic_weight", default_hsic_weight(s)},
            {"d_plus", s.d_plus},
            {"d_minus", s.d_minus()}};
  write_text(dir / kDatasetMeta, meta.dump(2) + "\n");
  files.emplace_back(kDatasetMeta);
  write_manifest(dir, "simulate", cfg, s.seed, files);
  out << "simulated " << s.name << " (seed " << s.seed << "): " << data.graph.n1() << " x " << data.graph.n2()
      << ", d1 = " << data.graph.d1() << ", density " << format_double(data.graph.incidence.mean()) << " -> "
      << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Json& cfg, std::ostream& out) {
  const Dataset d = load_dataset(require_path(cfg, "data", "--data"));
  const BipartiteGraph& g = d.loaded.graph;
  ModelConfig base;
  base.d_plus = get_or(d.meta, "d_plus", base.d_plus);
  base.d_minus = get_or(d.meta, "d_minus", base.d_minus);
  base.hsic_weight = get_or(d.meta, "hsic_weight", 0.0);
  base.recover_bprime = d.loaded.plants.has_value();
  if (d.meta.contains("protected_features")) {
    for (const auto& name : d.meta.at("protected_features")) {
      const auto& names = d.loaded.feature_names;
      const auto it = std::find(names.begin(), names.end(), name.get<std::string>());
      if (it == names.end()) throw IoError("dataset: protected feature '" + name.get<std::string>() + "' not in covariates");
      base.hsic_columns.push_back(static_cast<int>(it - names.begin()));
    }
  }
  ModelConfig c = model_from(cfg, base);
  const PlantAssignment* plants = d.loaded.plants ? &*d.loaded.plants : nullptr;
  if (c.recover_bprime && plants == nullptr) throw UsageError("recover_bprime needs plants.csv in the dataset");
  const Matrix* prot = d.protected_block ? &*d.protected_block : nullptr;

  const fs::path dir = output_dir(cfg, "train");
  ensure_dir(dir);
  TrainedModel m;
  try {
    m = train(g, plants, c, prot);
  } catch (const TrainingDiverged& e) {
    throw std::runtime_error("training diverged at epoch " + std::to_string(e.epoch()) + ": " + e.what());
  }
  save_checkpoint(dir / "checkpoint.json", m);
  std::string trace = "epoch,total,reconstruction,kl,bprime,hsic\n";
  for (const auto& r : m.trace) {
    trace += std::to_string(r.epoch) + ',' + format_double(r.total) + ',' + format_double(r.reconstruction) + ',' +
             format_double(r.kl) + ',' + format_double(r.bprime) + ',' + format_double(r.hsic) + '\n';
  }
  write_text(dir / "trace.csv", trace);
  std::string metrics = "holdout_auc,initial_loss,final_loss,epochs\n";
  const double first = m.trace.empty() ? 0.0 : m.trace.front().total;
  const double last = m.trace.empty() ? 0.0 : m.trace.back().total;
  metrics += format_double(m.holdout_auc) + ',' + format_double(first) + ',' + format_double(last) + ',' +
             std::to_string(c.epochs) + '\n';
  write_text(dir / "metrics.csv", metrics);
  write_manifest(dir, "train", cfg, c.seed, {"checkpoint.json", "trace.csv", "metrics.csv"},
                 Json{{"model", to_json(c)}});
  out << "trained " << c.epochs << " epochs: loss " << format_double(first) << " -> " << format_double(last)
      << ", held-out AUC " << format_double(m.holdout_auc) << " -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_attribute(const Json& cfg, std::ostream& out) {
  const std::vector<Method> methods = parse_methods(cfg);
  const AttributionParams params = attribution_params(cfg);
  const fs::path ckpt = require_path(cfg, "checkpoint", "--checkpoint");
  const Dataset d = load_dataset(require_path(cfg, "data", "--data"));
  require_file(ckpt);
  const TrainedModel m = load_checkpoint(ckpt);
  const PlantAssignment* plants = d.loaded.plants ? &*d.loaded.plants : nullptr;
  const ConnectivityFunctional f(m, d.loaded.graph, plants);
  const std::uint64_t seed = command_seed(cfg);
  const auto results = attribute_all(methods, f.as_functional(), d.loaded.graph.x1, d.partition, params, seed);
  const fs::path dir = output_dir(cfg, "attribute");
  ensure_dir(dir);
  write_text(dir / "attribution.csv", attribution_csv(attribution_rows(results, d.partition, d.loaded.feature_names, seed)));
  write_manifest(dir, "attribute", cfg, seed, {"attribution.csv"});
  out << "attributed " << methods.size() << " method(s) over " << d.partition.k << " group(s) x "
      << d.loaded.graph.d1() << " features -> " << (dir / "attribution.csv").string() << "\n";
  return kExitOk;
}

int cmd_benchmark(const Json& cfg, std::ostream& out) {
  const SimSetting s = setting_from(cfg);
  const std::vector<Method> methods = parse_methods(cfg);
  BenchmarkOptions opts;
  opts.attribution = attribution_params(cfg);
  opts.jobs = get_or(cfg, "jobs", 1);
  if (opts.jobs < 1) throw UsageError("--jobs must be >= 1");
  const int runs = get_or(cfg, "n_runs", 10);
  if (runs < 1) throw UsageError("--runs must be >= 1");
  ModelConfig m = model_from(cfg, ModelConfig{});
  if (cfg.contains("model") && cfg.at("model").contains("hsic_weight")) opts.hsic_weight = m.hsic_weight;
  const std::uint64_t seed = command_seed(cfg);
  const fs::path dir = output_dir(cfg, "benchmark");
  ensure_dir(dir);
  const BenchmarkResult r = run_benchmark(s, m, methods, runs, seed, opts);
  write_text(dir / "scorecard.csv", scorecard_csv(r));
  write_text(dir / "runs.csv", runs_csv(r));
  write_manifest(dir, "benchmark", cfg, seed, {"scorecard.csv", "runs.csv"}, Json{{"excluded_runs", r.n_excluded}});
  out << "benchmark " << s.name << ": " << runs << " run(s), " << r.n_excluded << " excluded\n" << scorecard_csv(r);
  return kExitOk;
}

int cmd_report(const Json& cfg, std::ostream& out) {
  if (!cfg.contains("inputs") || cfg.at("inputs").empty()) throw UsageError("--inputs needs at least one attribution CSV");
  std::vector<std::vector<AttributionRow>> runs;
  for (const auto& p : cfg.at("inputs")) {
    const fs::path path = p.get<std::string>();
    require_file(path);
    runs.push_back(read_attribution_csv(path));
  }
  std::vector<std::string> methods;
  if (cfg.contains("method")) {
    methods.push_back(cfg.at("method").get<std::string>());
  } else {
    for (const auto& row : runs.front()) {
      if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
    }
  }
  const fs::path dir = output_dir(cfg, "report");
  ensure_dir(dir);
  std::vector<std::string> files;
  for (const auto& m : methods) {
    RankReport report;
    try {
      report = median_rank_report(runs, m);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(e.what());
    }
    const std::string csv = "rank_report_" + m + ".csv";
    write_text(dir / csv, rank_report_csv(report));
    write_text(dir / ("strip_" + m + ".svg"), strip_plot_svg(runs, m));
    write_text(dir / ("signs_" + m + ".svg"), sign_grid_svg(runs, m));
    files.insert(files.end(), {csv, "strip_" + m + ".svg", "signs_" + m + ".svg"});
    out << "report " << m << ": " << report.size() << " cells over " << runs.size() << " run(s) -> "
        << (dir / csv).string() << "\n";
  }
  write_manifest(dir, "report", cfg, 0, files);
  return kExitOk;
}

int cmd_ingest(const Json& cfg, std::ostream& out) {
  const fs::path sessions = require_path(cfg, "sessions", "--sessions");
  const fs::path covariates = require_path(cfg, "covariates", "--covariates");
  const fs::path clc = require_path(cfg, "clc", "--clc");
  for (const auto& p : {sessions, covariates, clc}) require_file(p);
  const SpipollData s = spipoll_ingest(sessions, covariates, clc);
  const fs::path dir = output_dir(cfg, "ingest");
  ensure_dir(dir);
  const BipartiteGraph& g = s.graph;
  write_text(dir / DatasetFiles::kEdges, edges_csv(g.incidence, s.row_ids, s.col_ids));
  write_text(dir / DatasetFiles::kRowCovariates, matrix_csv("row_id", s.row_ids, s.feature_names, g.x1));
  write_text(dir / DatasetFiles::kColCovariates, matrix_csv("col_id", s.col_ids, {"ones"}, g.x2));
  std::string plants = "row_id,plant_id\n";
  std::string groups = "row_id,group\n";
  for (std::size_t i = 0; i < s.row_ids.size(); ++i) {
    const std::string& p = s.plant_ids[static_cast<std::size_t>(s.plants.labels()[i])];
    plants += csv_escape(s.row_ids[i]) + ',' + csv_escape(p) + '\n';
    groups += csv_escape(s.row_ids[i]) + ',' + csv_escape(p) + '\n';
  }
  write_text(dir / DatasetFiles::kPlants, plants);
  write_text(dir / DatasetFiles::kGroups, groups);
  write_text(dir / DatasetFiles::kProtected, matrix_csv("row_id", s.row_ids, {"value"}, s.protected_column));
  Json meta{{"format", "bvgae-dataset"},
            {"protected", DatasetFiles::kProtected},
            {"hsic_weight", kDefaultHsicWeight},
            {"dropped_clc", s.dropped_clc}};
  write_text(dir / kDatasetMeta, meta.dump(2) + "\n");
  write_manifest(dir, "ingest", cfg, 0,
                 {DatasetFiles::kEdges, DatasetFiles::kRowCovariates, DatasetFiles::kColCovariates,
                  DatasetFiles::kPlants, DatasetFiles::kGroups, DatasetFiles::kProtected, kDatasetMeta});
  out << "ingested " << g.n1() << " sessions x " << g.n2() << " insects, " << s.plants.n_plants() << " plants, d1 = "
      << g.d1() << " (" << s.dropped_clc.size() << " land-cover column(s) dropped) -> " << dir.string() << "\n";
  return kExitOk;
}

void add_model_flags(Command& c) {
  auto* a = c.app;
  c.overrides.add<int>(a, "--epochs", "model.epochs", "training epochs (default 300)");
  c.overrides.add<double>(a, "--hsic-weight", "model.hsic_weight",
                          "HSIC penalty weight (default 10 when the data has protected columns, else 0)");
  c.overrides.add<double>(a, "--lr", "model.learning_rate", "Adam learning rate (default 0.01)");
  c.overrides.add<int>(a, "--hidden", "model.hidden_dim", "first GCN layer width (default 32)");
  c.overrides.add<int>(a, "--d-plus", "model.d_plus", "latent dimensions with +1 signature (default from data, else 3)");
  c.overrides.add<int>(a, "--d-minus", "model.d_minus", "latent dimensions with -1 signature (default from data, else 3)");
  c.overrides.add<double>(a, "--bprime-weight", "model.bprime_weight", "weight of the plant-network term (default 1)");
  c.overrides.add<double>(a, "--holdout", "model.holdout_fraction", "monitoring split fraction (default 0.1)");
}

void add_attribution_flags(Command& c) {
  auto* a = c.app;
  c.overrides.add<std::string>(a, "--methods", "methods", "comma list of grad,gradinput,ig,graphsvx (default all)");
  c.overrides.add<int>(a, "--grad-samples", "attribution.grad_samples", "SmoothGrad noise samples (default 50)");
  c.overrides.add<int>(a, "--ig-steps", "attribution.ig_steps", "integrated-gradient steps (default 64)");
  c.overrides.add<std::string>(a, "--ig-baseline", "attribution.ig_baseline", "mean or zero (default mean)")
      ->check(CLI::IsMember({"mean", "zero"}));
  c.overrides.add<int>(a, "--coalitions", "attribution.svx_coalitions",
                       "GraphSVX coalitions per group (default min(2^d1, 2048))");
}

void add_setting_flags(Command& c) {
  c.overrides.add<std::string>(c.app, "--preset", "preset", "simulation preset: 1.A-1.D, 2.A-2.F");
  c.overrides.add<int>(c.app, "--n1", "setting.n1", "row count override");
  c.overrides.add<int>(c.app, "--n2", "setting.n2", "column count override (study 1)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature attribution for bipartite variational graph auto-encoders"};
  app.name(args.empty() ? "bvgae" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.footer(std::string("Outputs default to $") + kOutputRootEnv +
             "/<command> (or ./bvgae_out/<command>). Exit codes: 0 ok, 1 usage, 2 runtime error.");

  std::vector<std::unique_ptr<Command>> commands;
  auto make = [&](const char* name, const char* help, std::function<int(const Json&, std::ostream&)> fn) {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, help);
    c->run = std::move(fn);
    c->app->add_option("--config", c->config_path, "JSON experiment config; flags override its keys");
    c->overrides.add<std::string>(c->app, "--out", "output", "output directory");
    commands.push_back(std::move(c));
    return commands.back().get();
  };

  Command* sim = make("simulate", "generate a simulated dataset", cmd_simulate);
  add_setting_flags(*sim);
  sim->overrides.add<std::uint64_t>(sim->app, "--seed", "seed", "generator seed (default 0)");

  Command* tr = make("train", "train a BVGAE on a dataset directory", cmd_train);
  tr->overrides.add<std::string>(tr->app, "--data", "data", "dataset directory");
  tr->overrides.add<std::uint64_t>(tr->app, "--seed", "model.seed", "training seed (default 0)");
  tr->overrides.add<bool>(tr->app, "--recover-bprime", "model.recover_bprime",
                          "add the plant-network term (default: on when plants.csv exists)");
  add_model_flags(*tr);

  Command* at = make("attribute", "attribute connectivity to the row covariates", cmd_attribute);
  at->overrides.add<std::string>(at->app, "--data", "data", "dataset directory");
  at->overrides.add<std::string>(at->app, "--checkpoint", "checkpoint", "checkpoint.json from train");
  at->overrides.add<std::uint64_t>(at->app, "--seed", "seed", "attribution seed (default 0)");
  add_attribution_flags(*at);

  Command* bm = make("benchmark", "replicated simulate/train/attribute/score runs", cmd_benchmark);
  add_setting_flags(*bm);
  bm->overrides.add<int>(bm->app, "--runs", "n_runs", "replicates (default 10)");
  bm->overrides.add<std::uint64_t>(bm->app, "--seed", "seed", "base seed (default 0)");
  bm->overrides.add<int>(bm->app, "--jobs", "jobs", "concurrent replicates (default 1)");
  add_model_flags(*bm);
  add_attribution_flags(*bm);

  Command* rp = make("report", "median-rank report over attribution CSVs", cmd_report);
  rp->overrides.add<std::vector<std::string>>(rp->app, "--inputs", "inputs", "attribution CSVs, one per run");
  rp->overrides.add<std::string>(rp->app, "--method", "method", "method to rank (default: every method present)");

  Command* in = make("ingest", "convert Spipoll-style CSVs into a dataset directory", cmd_ingest);
  in->overrides.add<std::string>(in->app, "--sessions", "sessions", "session-insect edge list (row_id,col_id)");
  in->overrides.add<std::string>(in->app, "--covariates", "covariates",
                                 "row_id,plant_id,user_id,day,year,delta_t");
  in->overrides.add<std::string>(in->app, "--clc", "clc", "row_id plus one land-cover proportion column each");

  std::vector<std::string> argv_tail(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (const auto& c : commands) {
    if (!c->app->parsed()) continue;
    try {
      Json cfg = Json::object();
      if (!c->config_path.empty()) {
        if (!fs::is_regular_file(c->config_path)) throw IoError("config file not found: '" + c->config_path + "'");
        cfg = read_json(c->config_path);
        if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
      }
      c->overrides.apply(cfg);
      return c->run(cfg, out);
    } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const UnknownPreset& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const Json::exception& e) {
      err << "error: bad config value: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace bvgae::cli
