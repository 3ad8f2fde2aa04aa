// sdai: command-line front end for synthetic generation, corruption,
// training, imputation, benchmarking and hyperparameter search.
//
// Every command reads an optional JSON config (--config), applies flag
// overrides on top (flags win), writes its outputs under --out-dir and
// echoes the effective configuration to <out-dir>/config.json.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdai/sdai.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdai;

namespace {

const char* const kCommands[] = {"generate", "corrupt", "train", "impute", "benchmark", "search"};

/// Flag values are copied into the command section of the config at these
/// JSON pointers, but only for flags given on the command line.
struct Overrides {
  std::vector<std::function<void(json&)>> apply;

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(flag, *value, help);
    apply.push_back([value, opt, pointer](json& section) {
      if (opt->count()) section[json::json_pointer(pointer)] = *value;
    });
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, const std::string& pointer, bool set_to,
                        const std::string& help) {
    auto* opt = app->add_flag(flag, help);
    apply.push_back([opt, pointer, set_to](json& section) {
      if (opt->count()) section[json::json_pointer(pointer)] = set_to;
    });
    return opt;
  }
};

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t jobs = default_jobs();
  std::string out_dir = ".";
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw DataError(what + ": cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(what + " '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  writer(out);
}

/// Effective run configuration: globals from the config file and flags,
/// plus the section of the active command.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  fs::path out_dir;
  json section = json::object();

  json echo() const {
    return {{"command", command}, {"seed", seed}, {"jobs", jobs}, {"out_dir", out_dir.string()}, {command, section}};
  }
};

RunConfig resolve(const std::string& command, const Globals& g, const Overrides& ov) {
  json file = json::object();
  if (!g.config_path.empty()) file = read_json_file(g.config_path, "config");
  if (!file.is_object()) throw InvalidArgument("config: expected a JSON object");
  for (const auto& [key, value] : file.items()) {
    (void)value;
    bool known = key == "command" || key == "seed" || key == "jobs" || key == "out_dir";
    for (const char* c : kCommands) known = known || key == c;
    if (!known) throw InvalidArgument("config." + key + ": unknown key");
  }
  RunConfig rc;
  rc.command = command;
  rc.seed = g.seed;
  rc.jobs = g.jobs;
  std::string out = g.out_dir;
  detail::read_field(file, "seed", rc.seed, "config");
  detail::read_field(file, "jobs", rc.jobs, "config");
  detail::read_field(file, "out_dir", out, "config");
  if (g.seed_opt->count()) rc.seed = g.seed;
  if (g.jobs_opt->count()) rc.jobs = g.jobs;
  if (g.out_opt->count()) out = g.out_dir;
  if (rc.jobs < 1) throw InvalidArgument("jobs: must be at least 1");
  rc.out_dir = out;
  if (file.contains(command)) rc.section = file[command];
  if (!rc.section.is_object()) throw InvalidArgument("config." + command + ": expected a JSON object");
  for (const auto& f : ov.apply) f(rc.section);
  return rc;
}

void prepare_out_dir(const RunConfig& rc) {
  std::error_code ec;
  fs::create_directories(rc.out_dir, ec);
  if (ec) throw DataError("out_dir: cannot create '" + rc.out_dir.string() + "': " + ec.message());
  write_text(rc.out_dir / "config.json", rc.echo().dump(2) + "\n");
}

template <class T>
T field(const json& j, const char* key, T fallback, const std::string& ctx) {
  detail::read_field(j, key, fallback, ctx);
  return fallback;
}

std::string required_path(const json& j, const char* key, const std::string& ctx) {
  const auto p = field<std::string>(j, key, "", ctx);
  if (p.empty()) throw InvalidArgument(ctx + "." + key + ": required");
  return p;
}

/// Loads a CSV with its schema; the schema defaults to schema.json next to
/// the CSV.
TabularDataset load_input(const json& section, const std::string& ctx) {
  const auto input = required_path(section, "input", ctx);
  auto schema_path = field<std::string>(section, "schema", "", ctx);
  if (schema_path.empty()) schema_path = (fs::path(input).parent_path() / "schema.json").string();
  Schema schema;
  try {
    schema = load_schema(schema_path);
  } catch (const Error& e) {
    throw DataError(ctx + ".schema: " + e.what());
  }
  try {
    return load_csv(input, schema);
  } catch (const Error& e) {
    throw DataError(ctx + ".input: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Commands

int run_generate(RunConfig& rc) {
  const std::string ctx = "generate";
  auto& s = rc.section;
  detail::require_object(s, ctx, {"kind", "n_samples", "n_features", "frequencies", "noise_sigma", "height", "width"});
  const auto kind = field<std::string>(s, "kind", "sines", ctx);
  s["kind"] = kind;
  const std::uint64_t seed = derive_seed(rc.seed, "generate");
  TabularDataset ds;
  if (kind == "sines") {
    SyntheticSpec spec;
    spec.n_samples = field(s, "n_samples", spec.n_samples, ctx);
    spec.n_features = field(s, "n_features", spec.n_features, ctx);
    spec.frequency_set = field(s, "frequencies", spec.frequency_set, ctx);
    spec.noise_sigma = field(s, "noise_sigma", spec.noise_sigma, ctx);
    spec.seed = seed;
    s.update({{"n_samples", spec.n_samples},
              {"n_features", spec.n_features},
              {"frequencies", spec.frequency_set},
              {"noise_sigma", spec.noise_sigma}});
    ds = generate_synthetic(spec);
  } else if (kind == "blobs") {
    const auto n = field<std::size_t>(s, "n_samples", 1000, ctx);
    const auto h = field<std::size_t>(s, "height", 28, ctx);
    const auto w = field<std::size_t>(s, "width", 28, ctx);
    s.update({{"n_samples", n}, {"height", h}, {"width", w}});
    ds = generate_blob_images(n, h, w, seed);
  } else {
    throw InvalidArgument(ctx + ".kind: unknown generator '" + kind + "' (expected sines or blobs)");
  }
  prepare_out_dir(rc);
  save_csv((rc.out_dir / "data.csv").string(), ds);
  save_schema((rc.out_dir / "schema.json").string(), ds.schema);
  return 0;
}

int run_corrupt(RunConfig& rc) {
  const std::string ctx = "corrupt";
  auto& s = rc.section;
  detail::require_object(s, ctx, {"input", "schema", "pattern", "fraction", "height", "width", "coupling", "sweeps"});
  const auto ds = load_input(s, ctx);
  const auto pattern = field<std::string>(s, "pattern", "cells", ctx);
  const auto fraction = field<double>(s, "fraction", 0.3, ctx);
  const auto height = field<std::size_t>(s, "height", 28, ctx);
  const auto width = field<std::size_t>(s, "width", 28, ctx);
  s.update({{"pattern", pattern}, {"fraction", fraction}});
  if (!(fraction >= 0.0 && fraction < 1.0)) throw InvalidArgument(ctx + ".fraction: must lie in [0, 1)");

  if (pattern != "cells" && height * width != ds.n_columns())
    throw InvalidArgument(ctx + ".height/width: image shape " + std::to_string(height) + "x" + std::to_string(width) +
                          " does not match " + std::to_string(ds.n_columns()) + " columns");
  CorruptionSpec spec;
  spec.seed = derive_seed(rc.seed, "corrupt");
  if (pattern == "cells") {
    spec.kind = CellsCorruption{fraction};
  } else if (pattern == "lines") {
    spec.kind = LinesCorruption{fraction, height, width};
    s.update({{"height", height}, {"width", width}});
  } else if (pattern == "ising") {
    IsingCorruption k{fraction, 0.4, 200, height, width};
    k.coupling = field(s, "coupling", k.coupling, ctx);
    k.sweeps = field(s, "sweeps", k.sweeps, ctx);
    spec.kind = k;
    s.update({{"height", height}, {"width", width}, {"coupling", k.coupling}, {"sweeps", k.sweeps}});
  } else {
    throw InvalidArgument(ctx + ".pattern: unknown pattern '" + pattern + "' (expected cells, lines or ising)");
  }

  // a zero fraction removes nothing
  GoldStandard g{ds, ds, Mask::Constant(ds.missing.rows(), ds.missing.cols(), false), 0};
  json summary{{"pattern", pattern}, {"nominal_fraction", fraction}};
  if (fraction > 0.0) {
    if (const auto* k = std::get_if<IsingCorruption>(&spec.kind)) {
      const auto mask = ising_mask({k->height, k->width, k->target_fraction, k->coupling, k->sweeps, spec.seed});
      summary["ising"] = {{"field", mask.field},
                          {"mask_fraction", mask.achieved_fraction},
                          {"neighbour_agreement", neighbour_agreement(mask.pixels, mask.height, mask.width)}};
      g = corrupt_with_mask(ds, mask);
    } else {
      g = corrupt(ds, spec);
    }
    if (pattern == "lines") {
      const auto [rows, cols] = line_counts(fraction, height, width);
      summary["lines"] = {{"horizontal", rows}, {"vertical", cols}};
    }
  }
  const auto known = static_cast<std::size_t>((!ds.missing.array()).count());
  summary["removed_cells"] = g.removed;
  summary["achieved_fraction"] = known ? static_cast<double>(g.removed) / static_cast<double>(known) : 0.0;
  prepare_out_dir(rc);
  write_text(rc.out_dir / "corruption.json", summary.dump(2) + "\n");
  save_csv((rc.out_dir / "corrupted.csv").string(), g.corrupted);
  save_schema((rc.out_dir / "schema.json").string(), ds.schema);
  write_file(rc.out_dir / "eval_mask.csv", [&](std::ostream& out) { write_mask_csv(out, g.eval_mask, &ds.schema); });
  return 0;
}

int run_train(RunConfig& rc) {
  const std::string ctx = "train";
  auto& s = rc.section;
  detail::require_object(s, ctx, {"input", "schema", "hyperparams"});
  const auto ds = load_input(s, ctx);
  json hpj = s.value("hyperparams", json::object());
  if (hpj.contains("seed")) throw InvalidArgument(ctx + ".hyperparams.seed: derived from the master seed; use --seed");
  Hyperparams hp;
  try {
    hp = hyperparams_from_json(hpj);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(ctx + "." + e.what());
  }
  if (!hpj.contains("dropout_probs") && hp.dropout_probs.size() != hp.encoder_sizes.size()) {
    // default dropout follows the architecture: input rate on the first layer only
    const double input_rate = hp.dropout_probs.empty() ? 0.0 : hp.dropout_probs.front();
    hp.dropout_probs.assign(hp.encoder_sizes.size(), 0.0);
    hp.dropout_probs.front() = input_rate;
  }
  hp.seed = derive_seed(rc.seed, "train");
  try {
    validate_hyperparams(hp, encoded_width(ds.schema));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(ctx + ".hyperparams: " + e.what());
  }
  s["hyperparams"] = hyperparams_to_json(hp);
  s["hyperparams"].erase("seed");
  prepare_out_dir(rc);
  const auto trained = train_sdai(ds, hp);
  save_model((rc.out_dir / "model.json").string(), trained.model);
  write_text(rc.out_dir / "training.json",
             json{{"initial_finetune_loss", trained.report.finetune.initial_loss},
                  {"final_epoch_loss", trained.report.finetune.epoch_loss.empty()
                                           ? trained.report.finetune.initial_loss
                                           : trained.report.finetune.epoch_loss.back()},
                  {"zero_variance_columns", trained.report.zero_variance_columns}}
                     .dump(2) + "\n");
  write_file(rc.out_dir / "loss_history.csv", [&](std::ostream& out) {
    out << "epoch,loss\n0," << format_double(trained.report.finetune.initial_loss) << '\n';
    const auto& losses = trained.report.finetune.epoch_loss;
    for (std::size_t e = 0; e < losses.size(); ++e) out << e + 1 << ',' << format_double(losses[e]) << '\n';
  });
  return 0;
}

int run_impute(RunConfig& rc) {
  const std::string ctx = "impute";
  auto& s = rc.section;
  detail::require_object(s, ctx, {"input", "schema", "method", "model", "k", "lambda", "probabilities"});
  const auto ds = load_input(s, ctx);
  const auto method = field<std::string>(s, "method", "model", ctx);
  const bool probabilities = field(s, "probabilities", false, ctx);
  s.update({{"method", method}, {"probabilities", probabilities}});
  Imputation imp;
  if (method == "model") {
    const auto path = required_path(s, "model", ctx);
    SdaiModel model;
    try {
      model = load_model(path);
    } catch (const Error& e) {
      throw DataError(ctx + ".model: " + e.what());
    }
    try {
      imp = impute(model, ds, probabilities ? DecodeMode::Probabilities : DecodeMode::Hard);
    } catch (const DataError& e) {
      throw DataError(ctx + ".input: " + e.what());
    }
  } else if (method == "mean") {
    imp = impute_mean(ds);
  } else if (method == "knn") {
    KnnParams p;
    p.k = field(s, "k", p.k, ctx);
    p.lambda = field(s, "lambda", p.lambda, ctx);
    s.update({{"k", p.k}, {"lambda", p.lambda}});
    imp = KnnImputer(ds, rc.jobs).impute(p);
  } else {
    throw InvalidArgument(ctx + ".method: unknown method '" + method + "' (expected model, mean or knn)");
  }
  prepare_out_dir(rc);
  save_csv((rc.out_dir / "imputed.csv").string(), imp.data);
  if (probabilities)
    write_file(rc.out_dir / "probabilities.csv", [&](std::ostream& out) {
      write_matrix_csv(out, imp.probabilities, encoded_column_names(ds.schema));
    });
  return 0;
}

Pattern pattern_from_string(const std::string& p, const std::string& ctx) {
  if (p == "cells") return Pattern::Cells;
  if (p == "lines") return Pattern::Lines;
  throw InvalidArgument(ctx + ".pattern: unknown pattern '" + p + "' (expected cells or lines)");
}

int run_benchmark(RunConfig& rc) {
  const std::string ctx = "benchmark";
  auto& s = rc.section;
  detail::require_object(s, ctx,
                         {"input", "schema", "methods", "fractions", "pattern", "height", "width", "cv", "search",
                          "knn_grid"});
  const auto ds = load_input(s, ctx);
  BenchmarkConfig cfg;
  std::vector<std::string> methods{"sdai", "knn", "mean"};
  detail::read_field(s, "methods", methods, ctx);
  cfg.methods.clear();
  try {
    for (const auto& m : methods) cfg.methods.push_back(method_from_string(m));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(ctx + ".methods: " + e.what());
  }
  detail::read_field(s, "fractions", cfg.fractions, ctx);
  cfg.pattern = pattern_from_string(field<std::string>(s, "pattern", "cells", ctx), ctx);
  detail::read_field(s, "height", cfg.height, ctx);
  detail::read_field(s, "width", cfg.width, ctx);
  if (s.contains("cv")) cfg.cv = cv_plan_from_json(s["cv"]);
  if (s.contains("search")) cfg.space = search_space_from_json(s["search"]);
  if (s.contains("knn_grid")) {
    detail::require_object(s["knn_grid"], ctx + ".knn_grid", {"k", "lambda"});
    detail::read_field(s["knn_grid"], "k", cfg.knn.k, ctx + ".knn_grid");
    detail::read_field(s["knn_grid"], "lambda", cfg.knn.lambda, ctx + ".knn_grid");
  }
  cfg.seed = rc.seed;
  cfg.jobs = rc.jobs;
  const auto res = benchmark(ds, cfg);
  auto report = report_json(res);
  json echo = report["config"];
  echo.erase("seed");
  echo["input"] = s["input"];
  if (s.contains("schema")) echo["schema"] = s["schema"];
  s = echo;
  prepare_out_dir(rc);
  write_file(rc.out_dir / "report.csv", [&](std::ostream& out) { write_report_csv(out, res); });
  write_text(rc.out_dir / "report.json", report.dump(2) + "\n");
  for (const auto& fr : res.folds)
    if (fr.failed)
      std::cerr << "sdai: warning: " << to_string(fr.method) << " at fraction " << fr.fraction << " fold " << fr.fold
                << " failed: " << fr.error << '\n';
  return 0;
}

int run_search(RunConfig& rc) {
  const std::string ctx = "search";
  auto& s = rc.section;
  detail::require_object(s, ctx, {"input", "schema", "inner_folds", "space"});
  const auto ds = load_input(s, ctx);
  const auto folds = field<std::size_t>(s, "inner_folds", 5, ctx);
  if (folds < 2) throw InvalidArgument(ctx + ".inner_folds: must be at least 2");
  SearchSpace space;
  if (s.contains("space")) space = search_space_from_json(s["space"]);
  space.seed = derive_seed(rc.seed, "search");
  s["inner_folds"] = folds;
  s["space"] = search_space_to_json(space);
  prepare_out_dir(rc);
  const auto res = random_search(space, ds, folds, rc.jobs);
  write_file(rc.out_dir / "trials.csv", [&](std::ostream& out) { write_trial_log_csv(out, res); });
  json best = hyperparams_to_json(res.best);
  best.erase("seed");
  write_text(rc.out_dir / "best_config.json",
             json{{"trial", res.best_index}, {"mean_error", res.trials[res.best_index].mean_error},
                  {"hyperparams", best}}.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stacked denoising autoencoder imputation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file; flags override its values");
  g.seed_opt = app.add_option("--seed", g.seed, "master seed");
  g.jobs_opt = app.add_option("--jobs", g.jobs, "parallel jobs (default: available cores)");
  g.out_opt = app.add_option("--out-dir", g.out_dir, "output directory");

  std::map<std::string, Overrides> ov;
  std::map<std::string, std::function<int(RunConfig&)>> handlers{
      {"generate", run_generate}, {"corrupt", run_corrupt},     {"train", run_train},
      {"impute", run_impute},     {"benchmark", run_benchmark}, {"search", run_search}};

  auto* gen = app.add_subcommand("generate", "synthetic sine table or blob images -> data.csv, schema.json");
  ov["generate"].add<std::string>(gen, "--kind", "/kind", "sines or blobs");
  ov["generate"].add<std::size_t>(gen, "--samples", "/n_samples", "number of rows");
  ov["generate"].add<std::size_t>(gen, "--features", "/n_features", "number of features (sines)");
  ov["generate"].add<std::vector<int>>(gen, "--frequencies", "/frequencies", "frequency set (sines)");
  ov["generate"].add<double>(gen, "--noise", "/noise_sigma", "additive noise sigma (sines)");
  ov["generate"].add<std::size_t>(gen, "--height", "/height", "image height (blobs)");
  ov["generate"].add<std::size_t>(gen, "--width", "/width", "image width (blobs)");

  auto* cor = app.add_subcommand("corrupt", "remove known cells -> corrupted.csv, eval_mask.csv, corruption.json");
  auto add_io = [&](CLI::App* sub, const std::string& name) {
    ov[name].add<std::string>(sub, "--input", "/input", "input CSV");
    ov[name].add<std::string>(sub, "--schema", "/schema", "schema JSON (default: schema.json beside the input)");
  };
  add_io(cor, "corrupt");
  ov["corrupt"].add<std::string>(cor, "--pattern", "/pattern", "cells, lines or ising");
  ov["corrupt"].add<double>(cor, "--fraction", "/fraction", "fraction to remove; 0 copies the input");
  ov["corrupt"].add<std::size_t>(cor, "--height", "/height", "image height (lines, ising)");
  ov["corrupt"].add<std::size_t>(cor, "--width", "/width", "image width (lines, ising)");
  ov["corrupt"].add<double>(cor, "--coupling", "/coupling", "Ising coupling J/kT");
  ov["corrupt"].add<std::size_t>(cor, "--sweeps", "/sweeps", "Metropolis sweeps");

  auto* tr = app.add_subcommand("train", "train an SDAi model -> model.json, loss_history.csv, training.json");
  add_io(tr, "train");
  auto& t = ov["train"];
  t.add<std::vector<std::size_t>>(tr, "--encoder-sizes", "/hyperparams/encoder_sizes", "encoder layer widths");
  t.add<std::vector<double>>(tr, "--dropout", "/hyperparams/dropout_probs", "dropout per encoder layer input");
  t.add<double>(tr, "--l2", "/hyperparams/l2_lambda", "weight penalty");
  t.add<double>(tr, "--noise", "/hyperparams/pretrain_noise_fraction", "pre-training masking noise");
  t.add<std::string>(tr, "--optimizer", "/hyperparams/optimizer", "sgd, nesterov, rmsprop or adam");
  t.add<double>(tr, "--learning-rate", "/hyperparams/learning_rate", "learning rate");
  t.add<std::size_t>(tr, "--batch-size", "/hyperparams/batch_size", "mini-batch size");
  t.add<std::size_t>(tr, "--pretrain-epochs", "/hyperparams/pretrain_epochs", "epochs per pre-trained layer");
  t.add<std::size_t>(tr, "--finetune-epochs", "/hyperparams/finetune_epochs", "fine-tuning epochs");
  t.add<std::string>(tr, "--activation", "/hyperparams/hidden_activation", "tanh or relu");
  t.add_flag(tr, "--no-pretrain", "/hyperparams/pretrain", false, "random encoder initialisation");

  auto* im = app.add_subcommand("impute", "fill missing cells -> imputed.csv [, probabilities.csv]");
  add_io(im, "impute");
  ov["impute"].add<std::string>(im, "--method", "/method", "model, mean or knn");
  ov["impute"].add<std::string>(im, "--model", "/model", "model artifact (method model)");
  ov["impute"].add<std::size_t>(im, "--k", "/k", "neighbours (method knn)");
  ov["impute"].add<double>(im, "--lambda", "/lambda", "kernel bandwidth (method knn)");
  ov["impute"].add_flag(im, "--probabilities", "/probabilities", true, "also write encoded probabilities");

  auto* be = app.add_subcommand("benchmark", "nested cross-validated comparison -> report.csv, report.json");
  add_io(be, "benchmark");
  ov["benchmark"].add<std::vector<std::string>>(be, "--methods", "/methods", "subset of sdai knn mean");
  ov["benchmark"].add<std::vector<double>>(be, "--fractions", "/fractions", "corruption fractions");
  ov["benchmark"].add<std::string>(be, "--pattern", "/pattern", "cells or lines");
  ov["benchmark"].add<std::size_t>(be, "--height", "/height", "image height");
  ov["benchmark"].add<std::size_t>(be, "--width", "/width", "image width");
  ov["benchmark"].add<std::size_t>(be, "--outer-folds", "/cv/outer_folds", "outer folds");
  ov["benchmark"].add<std::size_t>(be, "--inner-folds", "/cv/inner_folds", "inner folds");
  ov["benchmark"].add<std::size_t>(be, "--trials", "/search/trials", "random-search budget");

  auto* se = app.add_subcommand("search", "random hyperparameter search -> trials.csv, best_config.json");
  add_io(se, "search");
  ov["search"].add<std::size_t>(se, "--inner-folds", "/inner_folds", "validation folds");
  ov["search"].add<std::size_t>(se, "--trials", "/space/trials", "random-search budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      RunConfig rc = resolve(name, g, ov[name]);
      return handlers.at(name)(rc);
    }
  } catch (const std::exception& e) {
    std::cerr << "sdai: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
