#pragma once

// Evaluation protocol: k-fold splits, random hyperparameter search with
// self-masked validation, and the two-loop benchmark over corruption levels.

#include <chrono>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdai/artifact.hpp"
#include "sdai/baselines.hpp"
#include "sdai/corruption.hpp"
#include "sdai/metrics.hpp"
#include "sdai/parallel.hpp"
#include "sdai/training.hpp"

namespace sdai {

// ---------------------------------------------------------------------------
// Splits

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffled k-fold partition of 0..n-1; fold sizes differ by at most one and
/// both index lists of every fold are sorted.
inline std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("kfold_split: k must be at least 2");
  if (n < k) throw InvalidArgument("kfold_split: n (" + std::to_string(n) + ") is smaller than k (" +
                                   std::to_string(k) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "kfold"));
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t begin = f * n / k, end = (f + 1) * n / k;
    for (std::size_t i = 0; i < n; ++i) (i >= begin && i < end ? folds[f].test : folds[f].train).push_back(order[i]);
    std::sort(folds[f].train.begin(), folds[f].train.end());
    std::sort(folds[f].test.begin(), folds[f].test.end());
  }
  return folds;
}

/// Single split with an explicit test list; the rest is training data.
inline Fold fixed_split(std::size_t n, std::vector<std::size_t> test) {
  std::sort(test.begin(), test.end());
  if (test.empty()) throw InvalidArgument("fixed_split: empty test index list");
  if (std::adjacent_find(test.begin(), test.end()) != test.end())
    throw InvalidArgument("fixed_split: duplicate test index");
  if (test.back() >= n) throw InvalidArgument("fixed_split: test index out of range");
  Fold f;
  f.test = std::move(test);
  for (std::size_t i = 0, t = 0; i < n; ++i) {
    if (t < f.test.size() && f.test[t] == i) {
      ++t;
      continue;
    }
    f.train.push_back(i);
  }
  if (f.train.empty()) throw InvalidArgument("fixed_split: no training rows left");
  return f;
}

// ---------------------------------------------------------------------------
// Random search

struct SearchSpace {
  std::vector<std::vector<std::size_t>> encoder_sizes{{100, 20, 4}, {100, 8}, {50, 4}};
  std::vector<double> input_dropout{0.1, 0.2, 0.3};
  std::vector<double> hidden_dropout{0.0, 0.1};
  std::vector<double> l2_lambda{0.0, 1e-5, 1e-4};
  std::vector<double> pretrain_noise{0.1, 0.2, 0.3};
  double learning_rate_min = 5e-4;  // sampled log-uniformly
  double learning_rate_max = 3e-3;
  std::vector<OptimizerKind> optimizers{OptimizerKind::Adam};
  std::vector<std::size_t> batch_sizes{32, 64};
  std::vector<std::size_t> pretrain_epochs{10};
  std::vector<std::size_t> finetune_epochs{100};
  std::vector<ActivationKind> activations{ActivationKind::Tanh};
  std::vector<bool> pretrain{true};
  std::size_t trials = 20;
  std::uint64_t seed = 0;
};

inline void validate_search_space(const SearchSpace& s) {
  using detail::require;
  require(s.trials >= 1, "search space: trials must be at least 1");
  require(!s.encoder_sizes.empty() && !s.input_dropout.empty() && !s.hidden_dropout.empty() &&
              !s.l2_lambda.empty() && !s.pretrain_noise.empty() && !s.optimizers.empty() &&
              !s.batch_sizes.empty() && !s.pretrain_epochs.empty() && !s.finetune_epochs.empty() &&
              !s.activations.empty() && !s.pretrain.empty(),
          "search space: every candidate set must be non-empty");
  require(s.learning_rate_min > 0.0 && s.learning_rate_min <= s.learning_rate_max,
          "search space: need 0 < learning_rate_min <= learning_rate_max");
}

namespace detail {

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

}  // namespace detail

/// Draws one configuration. Architectures whose bottleneck is not narrower
/// than the input are never proposed.
inline Hyperparams sample_hyperparams(const SearchSpace& s, std::size_t input_width, Rng& rng) {
  validate_search_space(s);
  std::vector<const std::vector<std::size_t>*> archs;
  for (const auto& a : s.encoder_sizes)
    if (!a.empty() && a.back() < input_width) archs.push_back(&a);
  if (archs.empty())
    throw InvalidArgument("search space: no architecture has a bottleneck narrower than the input width (" +
                          std::to_string(input_width) + ")");
  Hyperparams hp;
  hp.encoder_sizes = *detail::pick(archs, rng);
  hp.dropout_probs.assign(hp.encoder_sizes.size(), 0.0);
  hp.dropout_probs[0] = detail::pick(s.input_dropout, rng);
  for (std::size_t k = 1; k < hp.dropout_probs.size(); ++k) hp.dropout_probs[k] = detail::pick(s.hidden_dropout, rng);
  hp.l2_lambda = detail::pick(s.l2_lambda, rng);
  hp.pretrain_noise_fraction = detail::pick(s.pretrain_noise, rng);
  hp.optimizer.kind = detail::pick(s.optimizers, rng);
  hp.optimizer.learning_rate =
      std::exp(uniform(rng, std::log(s.learning_rate_min), std::log(s.learning_rate_max)));
  hp.batch_size = detail::pick(s.batch_sizes, rng);
  hp.pretrain_epochs = detail::pick(s.pretrain_epochs, rng);
  hp.finetune_epochs = detail::pick(s.finetune_epochs, rng);
  hp.hidden_activation = detail::pick(s.activations, rng);
  hp.pretrain = s.pretrain[uniform_index(rng, s.pretrain.size())];
  validate_hyperparams(hp, input_width);
  return hp;
}

inline constexpr double kValidationHoldout = 0.1;

struct Trial {
  std::size_t index = 0;
  Hyperparams hyperparams;
  std::vector<double> fold_errors;
  double mean_error = std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string error;
  double seconds = 0.0;
};

struct SearchResult {
  Hyperparams best;
  std::size_t best_index = 0;
  std::vector<Trial> trials;
};

/// Validation error of one configuration on one split: train on `split.train`
/// rows, hide a further 10% of the known cells of the `split.test` rows and
/// score the imputation of those cells.
inline double validation_error(const TabularDataset& ds, const Fold& split, const Hyperparams& hp,
                               std::uint64_t holdout_seed) {
  const auto trained = train_sdai(select_rows(ds, split.train), hp);
  const auto val = select_rows(ds, split.test);
  const auto g = corrupt_cells(val, kValidationHoldout, holdout_seed);
  if (g.removed == 0) throw DataError("validation fold has no known cell to hold out");
  const auto imp = impute(trained.model, g.corrupted, DecodeMode::Probabilities);
  return evaluate(val, imp, g.eval_mask).total_error;
}

/// Random search over `space` scored by the given inner splits of `ds`.
/// Trials and splits run as independent jobs; results do not depend on `jobs`.
inline SearchResult random_search(const SearchSpace& space, const TabularDataset& ds, std::span<const Fold> splits,
                                  std::size_t jobs = 1) {
  validate_search_space(space);
  if (splits.empty()) throw InvalidArgument("random_search: no validation splits");
  const std::size_t width = encoded_width(ds.schema);
  SearchResult res;
  res.trials.resize(space.trials);
  Rng rng(derive_seed(space.seed, "search.sample"));
  for (std::size_t t = 0; t < space.trials; ++t) {
    res.trials[t].index = t;
    res.trials[t].hyperparams = sample_hyperparams(space, width, rng);
    res.trials[t].hyperparams.seed = derive_seed(space.seed, "search.trial", t);
  }
  const std::size_t nf = splits.size();
  std::vector<double> err(space.trials * nf, 0.0), secs(space.trials * nf, 0.0);
  std::vector<std::string> msg(space.trials * nf);
  parallel_for(space.trials * nf, jobs, [&](std::size_t job) {
    const std::size_t t = job / nf, f = job % nf;
    const auto start = std::chrono::steady_clock::now();
    try {
      err[job] = validation_error(ds, splits[f], res.trials[t].hyperparams, derive_seed(space.seed, "search.holdout", f));
      if (!std::isfinite(err[job])) throw TrainingDiverged("validation", 0);
    } catch (const Error& e) {
      msg[job] = e.what();
      err[job] = std::numeric_limits<double>::infinity();
    }
    secs[job] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  bool any = false;
  for (std::size_t t = 0; t < space.trials; ++t) {
    auto& tr = res.trials[t];
    double sum = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      const std::size_t job = t * nf + f;
      tr.fold_errors.push_back(err[job]);
      tr.seconds += secs[job];
      if (!msg[job].empty() && !tr.failed) {
        tr.failed = true;
        tr.error = msg[job];
      }
      sum += err[job];
    }
    tr.mean_error = tr.failed ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(nf);
    if (!tr.failed && (!any || tr.mean_error < res.trials[res.best_index].mean_error)) {
      res.best_index = t;
      any = true;
    }
  }
  if (!any) throw TrainingDiverged("random search: all " + std::to_string(space.trials) + " trials failed", 0);
  res.best = res.trials[res.best_index].hyperparams;
  return res;
}

inline SearchResult random_search(const SearchSpace& space, const TabularDataset& ds, std::size_t inner_folds,
                                  std::size_t jobs = 1) {
  const auto splits = kfold_split(ds.n_samples(), inner_folds, derive_seed(space.seed, "search.folds"));
  return random_search(space, ds, splits, jobs);
}

// ---------------------------------------------------------------------------
// Benchmark

struct CvPlan {
  std::size_t outer_folds = 5;
  std::size_t inner_folds = 5;
  std::uint64_t seed = 0;
  // fixed single split: explicit test rows and, optionally, explicit validation rows
  std::vector<std::size_t> test_indices;
  std::vector<std::size_t> validation_indices;
};

enum class Method { Sdai, Knn, Mean };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Sdai: return "sdai";
    case Method::Knn: return "knn";
    case Method::Mean: return "mean";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  if (s == "sdai") return Method::Sdai;
  if (s == "knn") return Method::Knn;
  if (s == "mean") return Method::Mean;
  throw InvalidArgument("unknown method '" + std::string(s) + "' (expected sdai, knn or mean)");
}

enum class Pattern { Cells, Lines };

struct KnnGrid {
  std::vector<std::size_t> k{1, 3, 5, 10, 20};
  std::vector<double> lambda{0.01, 0.1, 1.0, 10.0};
};

struct KnnTuning {
  KnnParams best;
  std::vector<std::pair<KnnParams, double>> table;  // grid point, self-masked total error
};

/// Chooses (k, lambda) by hiding 10% of the known cells of `ds` and scoring
/// every grid point on them.
inline KnnTuning tune_knn(const TabularDataset& ds, const KnnGrid& grid, std::uint64_t seed, std::size_t jobs = 1) {
  const auto g = corrupt_cells(ds, kValidationHoldout, seed);
  if (g.removed == 0) throw DataError("knn tuning: no known cell to hold out");
  const KnnImputer imputer(g.corrupted, jobs);
  KnnTuning out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k : grid.k) {
    if (k + 1 > ds.n_samples()) continue;
    for (double lambda : grid.lambda) {
      const KnnParams p{k, lambda};
      const double e = evaluate(ds, imputer.impute(p), g.eval_mask).total_error;
      out.table.emplace_back(p, e);
      if (e < best) {
        best = e;
        out.best = p;
      }
    }
  }
  if (out.table.empty()) throw InvalidArgument("knn tuning: no grid point has k < n_samples");
  return out;
}

struct BenchmarkConfig {
  std::vector<Method> methods{Method::Sdai, Method::Knn, Method::Mean};
  std::vector<double> fractions{0.1, 0.3, 0.6};
  Pattern pattern = Pattern::Cells;
  std::size_t height = 0;  // image shape; enables SSIM and is required by line corruption
  std::size_t width = 0;
  CvPlan cv;
  SearchSpace space;
  KnnGrid knn;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct FoldResult {
  Method method = Method::Mean;
  double fraction = 0.0;
  std::size_t fold = 0;
  EvalReport report;
  bool failed = false;
  std::string error;
  std::optional<Hyperparams> selected;  // SDAi: configuration chosen by the inner search
  std::optional<KnnParams> knn;         // KNN: grid point chosen by self-masking
  std::vector<std::size_t> selection_rows;  // SDAi: dataset rows visible to model selection
  std::size_t trials_failed = 0;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  std::vector<FoldResult> folds;
};

namespace detail {

inline std::string corruption_label(const BenchmarkConfig& cfg, double fraction) {
  return std::string(cfg.pattern == Pattern::Cells ? "cells" : "lines") + ":" + format_double(fraction);
}

inline GoldStandard corrupt_for(const TabularDataset& ds, const BenchmarkConfig& cfg, double fraction,
                                std::uint64_t seed) {
  if (cfg.pattern == Pattern::Lines) return corrupt_lines(ds, fraction, cfg.height, cfg.width, seed);
  return corrupt_cells(ds, fraction, seed);
}

inline std::vector<Fold> outer_splits(std::size_t n, const CvPlan& cv, std::uint64_t seed) {
  if (!cv.test_indices.empty()) return {fixed_split(n, cv.test_indices)};
  return kfold_split(n, cv.outer_folds, seed);
}

/// Inner splits over the positions of `train` rows.
inline std::vector<Fold> inner_splits(const std::vector<std::size_t>& train, const CvPlan& cv, std::uint64_t seed) {
  if (cv.validation_indices.empty()) return kfold_split(train.size(), cv.inner_folds, seed);
  std::vector<std::size_t> pos;
  for (std::size_t v : cv.validation_indices) {
    const auto it = std::lower_bound(train.begin(), train.end(), v);
    if (it == train.end() || *it != v) throw InvalidArgument("cv plan: validation index " + std::to_string(v) +
                                                             " is not a training row");
    pos.push_back(static_cast<std::size_t>(it - train.begin()));
  }
  return {fixed_split(train.size(), pos)};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Two-loop benchmark. Per fraction the full dataset is corrupted once and
/// split into outer folds. SDAi selects hyperparameters by random search on
/// the training rows only, is retrained on them and imputes the test rows;
/// the baselines impute the full corrupted data. All methods are scored on
/// the same removed cells of each outer test fold.
inline BenchmarkResult benchmark(const TabularDataset& ds, const BenchmarkConfig& cfg) {
  if (ds.missing_count() != 0) throw InvalidArgument("benchmark: dataset must be fully observed");
  if (cfg.methods.empty() || cfg.fractions.empty()) throw InvalidArgument("benchmark: no methods or fractions");
  const bool images = cfg.height > 0 && cfg.width > 0;
  if (images && cfg.height * cfg.width != ds.n_columns())
    throw InvalidArgument("benchmark: image shape does not match the column count");
  BenchmarkResult res;
  res.config = cfg;
  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
    const double fraction = cfg.fractions[fi];
    const auto gold = detail::corrupt_for(ds, cfg, fraction, derive_seed(cfg.seed, "benchmark.corrupt", fi));
    const auto folds = detail::outer_splits(ds.n_samples(), cfg.cv, derive_seed(cfg.seed, "benchmark.outer", fi));

    // baselines see the whole corrupted dataset once per fraction
    std::optional<Imputation> mean_imp, knn_imp;
    std::optional<KnnParams> knn_choice;
    double mean_secs = 0.0, knn_secs = 0.0;
    std::string mean_err, knn_err;
    for (Method m : cfg.methods) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        if (m == Method::Mean) {
          mean_imp = impute_mean(gold.corrupted);
          mean_secs = detail::seconds_since(t0);
        } else if (m == Method::Knn) {
          const auto tuning = tune_knn(gold.corrupted, cfg.knn, derive_seed(cfg.seed, "benchmark.knn", fi), cfg.jobs);
          knn_choice = tuning.best;
          knn_imp = KnnImputer(gold.corrupted, cfg.jobs).impute(tuning.best);
          knn_secs = detail::seconds_since(t0);
        }
      } catch (const Error& e) {
        (m == Method::Mean ? mean_err : knn_err) = e.what();
      }
    }

    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& fold = folds[f];
      const auto gold_test = select_rows(ds, fold.test);
      Mask eval_test(static_cast<Eigen::Index>(fold.test.size()), gold.eval_mask.cols());
      for (std::size_t i = 0; i < fold.test.size(); ++i)
        eval_test.row(static_cast<Eigen::Index>(i)) = gold.eval_mask.row(static_cast<Eigen::Index>(fold.test[i]));

      auto score = [&](FoldResult& fr, const Imputation& imp, bool whole) {
        // whole: imp covers all rows; otherwise only the test rows in fold order
        if (whole) {
          Imputation sub{select_rows(imp.data, fold.test), DenseMatrix(static_cast<Eigen::Index>(fold.test.size()),
                                                                       imp.probabilities.cols())};
          for (std::size_t i = 0; i < fold.test.size(); ++i)
            sub.probabilities.row(static_cast<Eigen::Index>(i)) =
                imp.probabilities.row(static_cast<Eigen::Index>(fold.test[i]));
          fr.report = evaluate(gold_test, sub, eval_test, std::string(to_string(fr.method)));
          if (images) fr.report.ssim = mean_ssim(gold_test.cells, sub.data.cells, cfg.height, cfg.width);
        } else {
          fr.report = evaluate(gold_test, imp, eval_test, std::string(to_string(fr.method)));
          if (images) fr.report.ssim = mean_ssim(gold_test.cells, imp.data.cells, cfg.height, cfg.width);
        }
        fr.report.corruption = detail::corruption_label(cfg, fraction);
      };

      for (Method m : cfg.methods) {
        FoldResult fr;
        fr.method = m;
        fr.fraction = fraction;
        fr.fold = f;
        try {
          if (m == Method::Mean) {
            if (!mean_imp) throw DataError(mean_err);
            score(fr, *mean_imp, true);
            fr.report.seconds = mean_secs;
          } else if (m == Method::Knn) {
            if (!knn_imp) throw DataError(knn_err);
            score(fr, *knn_imp, true);
            fr.knn = knn_choice;
            fr.report.seconds = knn_secs;
          } else {
            const auto t0 = std::chrono::steady_clock::now();
            const std::size_t job = fi * folds.size() + f;
            const auto train = select_rows(gold.corrupted, fold.train);
            SearchSpace space = cfg.space;
            space.seed = derive_seed(cfg.seed, "benchmark.search", job);
            const auto inner = detail::inner_splits(fold.train, cfg.cv, derive_seed(cfg.seed, "benchmark.inner", job));
            fr.selection_rows = fold.train;
            const auto search = random_search(space, train, inner, cfg.jobs);
            for (const auto& t : search.trials) fr.trials_failed += t.failed;
            Hyperparams hp = search.best;
            hp.seed = derive_seed(cfg.seed, "benchmark.retrain", job);
            fr.selected = hp;
            const auto trained = train_sdai(train, hp);
            const auto imp = impute(trained.model, select_rows(gold.corrupted, fold.test), DecodeMode::Probabilities);
            score(fr, imp, false);
            fr.report.seconds = detail::seconds_since(t0);
          }
        } catch (const Error& e) {
          fr.failed = true;
          fr.error = e.what();
          fr.report.method = std::string(to_string(m));
          fr.report.corruption = detail::corruption_label(cfg, fraction);
        }
        res.folds.push_back(std::move(fr));
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline std::vector<std::pair<std::string, double>> report_metrics(const FoldResult& fr) {
  const auto& r = fr.report;
  std::vector<std::pair<std::string, double>> out;
  if (r.n_continuous) out.emplace_back("rmse_continuous", r.rmse_continuous);
  if (r.n_binary) out.emplace_back("ce_binary", r.ce_binary);
  if (r.n_categorical) out.emplace_back("ce_categorical", r.ce_categorical);
  out.emplace_back("total_error", r.total_error);
  if (r.ssim) out.emplace_back("ssim", *r.ssim);
  out.emplace_back("n_evaluated", static_cast<double>(r.n_continuous + r.n_binary + r.n_categorical));
  return out;
}

}  // namespace detail

/// Long-format report: one row per (method, fraction, fold, metric). Timing
/// is excluded so equal seeds give byte-identical files.
inline void write_report_csv(std::ostream& out, const BenchmarkResult& res) {
  out << "method,fraction,fold,metric,value\n";
  for (const auto& fr : res.folds) {
    if (fr.failed) continue;
    for (const auto& [metric, value] : detail::report_metrics(fr))
      out << to_string(fr.method) << ',' << format_double(fr.fraction) << ',' << fr.fold << ',' << metric << ','
          << format_double(value) << '\n';
  }
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation over folds
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

/// Mean and standard deviation of `metric` over the successful folds of one
/// method at one fraction.
inline Summary summarize(const BenchmarkResult& res, Method m, double fraction, const std::string& metric) {
  std::vector<double> v;
  for (const auto& fr : res.folds) {
    if (fr.failed || fr.method != m || fr.fraction != fraction) continue;
    for (const auto& [name, value] : detail::report_metrics(fr))
      if (name == metric) v.push_back(value);
  }
  return summarize(v);
}

inline nlohmann::json search_space_to_json(const SearchSpace& s) {
  nlohmann::json j;
  j["encoder_sizes"] = s.encoder_sizes;
  j["input_dropout"] = s.input_dropout;
  j["hidden_dropout"] = s.hidden_dropout;
  j["l2_lambda"] = s.l2_lambda;
  j["pretrain_noise"] = s.pretrain_noise;
  j["learning_rate_min"] = s.learning_rate_min;
  j["learning_rate_max"] = s.learning_rate_max;
  j["optimizers"] = nlohmann::json::array();
  for (auto k : s.optimizers) j["optimizers"].push_back(to_string(k));
  j["batch_sizes"] = s.batch_sizes;
  j["pretrain_epochs"] = s.pretrain_epochs;
  j["finetune_epochs"] = s.finetune_epochs;
  j["activations"] = nlohmann::json::array();
  for (auto a : s.activations) j["activations"].push_back(to_string(a));
  j["pretrain"] = s.pretrain;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  return j;
}

inline SearchSpace search_space_from_json(const nlohmann::json& j, SearchSpace s = {}) {
  const std::string ctx = "search";
  detail::require_object(j, ctx,
                         {"encoder_sizes", "input_dropout", "hidden_dropout", "l2_lambda", "pretrain_noise",
                          "learning_rate_min", "learning_rate_max", "optimizers", "batch_sizes", "pretrain_epochs",
                          "finetune_epochs", "activations", "pretrain", "trials", "seed"});
  detail::read_field(j, "encoder_sizes", s.encoder_sizes, ctx);
  detail::read_field(j, "input_dropout", s.input_dropout, ctx);
  detail::read_field(j, "hidden_dropout", s.hidden_dropout, ctx);
  detail::read_field(j, "l2_lambda", s.l2_lambda, ctx);
  detail::read_field(j, "pretrain_noise", s.pretrain_noise, ctx);
  detail::read_field(j, "learning_rate_min", s.learning_rate_min, ctx);
  detail::read_field(j, "learning_rate_max", s.learning_rate_max, ctx);
  detail::read_field(j, "batch_sizes", s.batch_sizes, ctx);
  detail::read_field(j, "pretrain_epochs", s.pretrain_epochs, ctx);
  detail::read_field(j, "finetune_epochs", s.finetune_epochs, ctx);
  detail::read_field(j, "pretrain", s.pretrain, ctx);
  detail::read_field(j, "trials", s.trials, ctx);
  detail::read_field(j, "seed", s.seed, ctx);
  std::vector<std::string> names;
  try {
    if (j.contains("optimizers")) {
      names.clear();
      detail::read_field(j, "optimizers", names, ctx);
      s.optimizers.clear();
      for (const auto& n : names) s.optimizers.push_back(optimizer_from_string(n));
    }
    if (j.contains("activations")) {
      names.clear();
      detail::read_field(j, "activations", names, ctx);
      s.activations.clear();
      for (const auto& n : names) s.activations.push_back(activation_from_string(n));
    }
    validate_search_space(s);
  } catch (const InvalidArgument& e) {
    const std::string what = e.what();
    throw InvalidArgument(what.rfind(ctx, 0) == 0 ? what : ctx + ": " + what);
  }
  return s;
}

inline nlohmann::json cv_plan_to_json(const CvPlan& cv) {
  return {{"outer_folds", cv.outer_folds},
          {"inner_folds", cv.inner_folds},
          {"seed", cv.seed},
          {"test_indices", cv.test_indices},
          {"validation_indices", cv.validation_indices}};
}

inline CvPlan cv_plan_from_json(const nlohmann::json& j, CvPlan cv = {}) {
  const std::string ctx = "cv";
  detail::require_object(j, ctx, {"outer_folds", "inner_folds", "seed", "test_indices", "validation_indices"});
  detail::read_field(j, "outer_folds", cv.outer_folds, ctx);
  detail::read_field(j, "inner_folds", cv.inner_folds, ctx);
  detail::read_field(j, "seed", cv.seed, ctx);
  detail::read_field(j, "test_indices", cv.test_indices, ctx);
  detail::read_field(j, "validation_indices", cv.validation_indices, ctx);
  if (cv.test_indices.empty() && cv.outer_folds < 2) throw InvalidArgument("cv.outer_folds: must be at least 2");
  if (cv.validation_indices.empty() && cv.inner_folds < 2) throw InvalidArgument("cv.inner_folds: must be at least 2");
  return cv;
}

inline nlohmann::json knn_params_to_json(const KnnParams& p) { return {{"k", p.k}, {"lambda", p.lambda}}; }

/// Run summary: configuration echo, validation protocol, per-method
/// mean and standard deviation per fraction, timing and chosen settings.
inline nlohmann::json report_json(const BenchmarkResult& res) {
  const auto& cfg = res.config;
  nlohmann::json j;
  j["config"] = {{"methods", nlohmann::json::array()},
                 {"fractions", cfg.fractions},
                 {"pattern", cfg.pattern == Pattern::Cells ? "cells" : "lines"},
                 {"height", cfg.height},
                 {"width", cfg.width},
                 {"cv", cv_plan_to_json(cfg.cv)},
                 {"search", search_space_to_json(cfg.space)},
                 {"knn_grid", {{"k", cfg.knn.k}, {"lambda", cfg.knn.lambda}}},
                 {"seed", cfg.seed}};
  for (auto m : cfg.methods) j["config"]["methods"].push_back(to_string(m));
  j["validation"] = {{"protocol", "self-masking"},
                     {"holdout_fraction", kValidationHoldout},
                     {"description", "validation error is scored on a random 10% of the known cells of the "
                                     "validation rows, hidden before imputation"}};
  j["results"] = nlohmann::json::array();
  for (double fraction : cfg.fractions) {
    for (auto m : cfg.methods) {
      nlohmann::json r{{"method", to_string(m)}, {"fraction", fraction}};
      std::vector<std::string> metrics;
      double seconds = 0.0;
      nlohmann::json folds = nlohmann::json::array();
      for (const auto& fr : res.folds) {
        if (fr.method != m || fr.fraction != fraction) continue;
        nlohmann::json f{{"fold", fr.fold}, {"seconds", fr.report.seconds}};
        if (fr.failed) f["error"] = fr.error;
        if (fr.selected) f["hyperparams"] = hyperparams_to_json(*fr.selected);
        if (fr.knn) f["knn"] = knn_params_to_json(*fr.knn);
        if (m == Method::Sdai) f["failed_trials"] = fr.trials_failed;
        folds.push_back(f);
        seconds += fr.report.seconds;
        if (!fr.failed && metrics.empty())
          for (const auto& [name, v] : detail::report_metrics(fr)) metrics.push_back(name);
      }
      for (const auto& name : metrics) {
        const auto s = summarize(res, m, fraction, name);
        r["metrics"][name] = {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}};
      }
      r["seconds"] = seconds;
      r["folds"] = folds;
      j["results"].push_back(r);
    }
  }
  return j;
}

/// Trial log as CSV: one row per trial with its mean and per-fold errors.
inline void write_trial_log_csv(std::ostream& out, const SearchResult& res) {
  out << "trial,mean_error,failed,fold_errors,hyperparams\n";
  for (const auto& t : res.trials) {
    std::string folds;
    for (std::size_t i = 0; i < t.fold_errors.size(); ++i)
      folds += (i ? ";" : "") + format_double(t.fold_errors[i]);
    out << t.index << ',' << format_double(t.mean_error) << ',' << (t.failed ? 1 : 0) << ','
        << detail::quote_if_needed(folds) << ',' << detail::quote_if_needed(hyperparams_to_json(t.hyperparams).dump())
        << '\n';
  }
}

}  // namespace sdai
