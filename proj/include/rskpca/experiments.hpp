#pragma once

// Experiment runner behind the `rskpca` CLI: shadow sweeps compared against
// full KPCA and the Nystrom family, RSDE comparisons, and bound checks.
//
// Experiment specs are flat JSON objects with dotted keys, e.g.
//
//   {
//     "experiment": "embedding",
//     "dataset.path": "german.svm",
//     "kernel.family": "gaussian",  "kernel.sigma": 30,
//     "sweep.ell_min": 3.0, "sweep.ell_max": 5.0, "sweep.ell_step": 0.1,
//     "methods": ["full", "shadow", "subsampled", "nystrom", "wnystrom"],
//     "rank": 5, "knn.k": 3, "cv.folds": 10, "repetitions": 10, "seed": 1
//   }
//
// Methods other than full and shadow use m = the mean shadow center count
// at the same ell, recomputed per ell.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rskpca/dataio.hpp"
#include "rskpca/dataset.hpp"
#include "rskpca/error.hpp"
#include "rskpca/eval.hpp"
#include "rskpca/format.hpp"
#include "rskpca/kernels.hpp"
#include "rskpca/kpca.hpp"
#include "rskpca/metrics.hpp"
#include "rskpca/rsde.hpp"

namespace rskpca {

enum class ExperimentKind { Embedding, Classification, RsdeCompare, Bounds };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Embedding: return "embedding";
    case ExperimentKind::Classification: return "classification";
    case ExperimentKind::RsdeCompare: return "rsde_compare";
    case ExperimentKind::Bounds: return "bounds";
  }
  return "unknown";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::Embedding, ExperimentKind::Classification,
                 ExperimentKind::RsdeCompare, ExperimentKind::Bounds}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown experiment '" + std::string(s) + "'");
}

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names = {"full",    "shadow",   "subsampled", "nystrom",
                                                 "wnystrom", "kmeans",  "paring",     "herding"};
  return names;
}

struct DatasetSpec {
  std::string path;
  std::string format;  // "sparse", "csv" or empty for by-extension
  std::optional<std::string> label_column;
  std::string name;
  bool minmax = false;
  // Synthetic blobs instead of a file when `synthetic` is "blobs".
  std::string synthetic;
  Index n = 0, d = 2, clusters = 1;
  double spread = 1.0;
  double center_box = 10.0;
};

struct ExperimentSpec {
  ExperimentKind experiment = ExperimentKind::Embedding;
  DatasetSpec dataset;
  KernelFamily family = KernelFamily::Gaussian;
  std::optional<double> sigma;
  double ell_min = 3.0, ell_max = 5.0, ell_step = 0.1;
  std::vector<std::string> methods;
  int repetitions = 10;
  Index rank = 5;
  Index knn_k = 3;
  int folds = 10;
  double train_fraction = 0.8;
  Index bounds_dim = 1;
  std::uint64_t seed = 0;
  int timing_repeats = 3;  // 0 disables timing
  bool timing_warmup = true;
  int threads = 1;

  std::vector<double> ell_grid() const {
    detail::require(ell_step > 0.0, "sweep.ell_step must be positive");
    detail::require(ell_min > 0.0 && ell_max >= ell_min, "sweep range must satisfy 0 < ell_min <= ell_max");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
      const double ell = std::round((ell_min + i * ell_step) * 1e10) / 1e10;
      if (ell > ell_max + 1e-9) break;
      grid.push_back(ell);
    }
    return grid;
  }

  KernelConfig kernel(const DataSet& ds) const {
    std::optional<double> s = sigma;
    if (!s) s = default_sigma(dataset.name.empty() ? ds.name : dataset.name);
    if (!s) throw InputError("kernel.sigma is required for dataset '" + ds.name + "'");
    return {family, *s};
  }
};

inline std::vector<std::string> default_methods(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Embedding: return {"full", "shadow", "subsampled", "nystrom", "wnystrom"};
    case ExperimentKind::Classification: return {"full", "shadow", "nystrom", "wnystrom"};
    case ExperimentKind::RsdeCompare: return {"shadow", "kmeans", "paring", "herding"};
    case ExperimentKind::Bounds: return {"shadow"};
  }
  return {};
}

/// Parses a flat JSON spec. Unknown keys are rejected so typos surface.
inline ExperimentSpec parse_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("experiment spec must be a JSON object");
  static const std::set<std::string> allowed = {
      "experiment", "dataset.path", "dataset.format", "dataset.label_column", "dataset.name",
      "dataset.minmax", "dataset.synthetic", "dataset.n", "dataset.d", "dataset.clusters",
      "dataset.spread", "dataset.center_box", "kernel.family", "kernel.sigma", "sweep.ell_min",
      "sweep.ell_max", "sweep.ell_step", "methods", "repetitions", "rank", "knn.k", "cv.folds",
      "split.fraction", "bounds.D", "seed", "timing.repeats", "timing.warmup", "threads"};
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw InputError("unknown spec key '" + key + "'");
  }
  ExperimentSpec s;
  try {
    s.experiment = parse_experiment_kind(j.value("experiment", std::string("embedding")));
    s.dataset.path = j.value("dataset.path", std::string());
    s.dataset.format = j.value("dataset.format", std::string());
    if (j.contains("dataset.label_column")) {
      const auto& lc = j.at("dataset.label_column");
      s.dataset.label_column = lc.is_string() ? lc.get<std::string>() : std::to_string(lc.get<long long>());
    }
    s.dataset.name = j.value("dataset.name", std::string());
    s.dataset.minmax = j.value("dataset.minmax", false);
    s.dataset.synthetic = j.value("dataset.synthetic", std::string());
    s.dataset.n = j.value("dataset.n", Index{0});
    s.dataset.d = j.value("dataset.d", Index{2});
    s.dataset.clusters = j.value("dataset.clusters", Index{1});
    s.dataset.spread = j.value("dataset.spread", 1.0);
    s.dataset.center_box = j.value("dataset.center_box", 10.0);
    s.family = parse_kernel_family(j.value("kernel.family", std::string("gaussian")));
    if (j.contains("kernel.sigma")) s.sigma = j.at("kernel.sigma").get<double>();
    s.ell_min = j.value("sweep.ell_min", s.ell_min);
    s.ell_max = j.value("sweep.ell_max", s.ell_max);
    s.ell_step = j.value("sweep.ell_step", s.ell_step);
    s.methods = j.contains("methods") ? j.at("methods").get<std::vector<std::string>>()
                                      : default_methods(s.experiment);
    s.repetitions = j.value("repetitions", s.repetitions);
    s.rank = j.value("rank", s.rank);
    s.knn_k = j.value("knn.k", s.knn_k);
    s.folds = j.value("cv.folds", s.folds);
    s.train_fraction = j.value("split.fraction", s.train_fraction);
    s.bounds_dim = j.value("bounds.D", s.bounds_dim);
    s.seed = j.value("seed", s.seed);
    s.timing_repeats = j.value("timing.repeats", s.timing_repeats);
    s.timing_warmup = j.value("timing.warmup", s.timing_warmup);
    s.threads = j.value("threads", s.threads);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("experiment spec: ") + e.what());
  }
  for (const auto& m : s.methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      throw InputError("unknown method '" + m + "'");
    }
  }
  detail::require(!s.methods.empty(), "experiment spec: no methods");
  detail::require(s.repetitions >= 1, "repetitions must be at least 1");
  detail::require(s.rank >= 1, "rank must be at least 1");
  detail::require(s.timing_repeats >= 0, "timing.repeats must be nonnegative");
  detail::require(s.threads >= 1, "threads must be at least 1");
  (void)s.ell_grid();
  return s;
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("spec '" + path + "': " + e.what());
  }
  return parse_spec(j);
}

inline DataSet load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  DataSet ds;
  if (spec.synthetic == "blobs") {
    detail::require(spec.n >= 1, "dataset.n must be positive for synthetic data");
    ds = synth_blobs(spec.n, spec.d, spec.clusters, spec.spread, seed, spec.center_box);
  } else if (!spec.synthetic.empty()) {
    throw InputError("unknown synthetic dataset '" + spec.synthetic + "'");
  } else {
    detail::require(!spec.path.empty(), "dataset.path is required");
    std::string format = spec.format;
    if (format.empty()) {
      const auto ext = std::filesystem::path(spec.path).extension().string();
      format = ext == ".csv" ? "csv" : "sparse";
    }
    if (format == "csv") {
      ds = load_csv(spec.path, spec.label_column);
    } else if (format == "sparse") {
      ds = load_sparse(spec.path);
    } else {
      throw InputError("unknown dataset format '" + format + "'");
    }
  }
  if (!spec.name.empty()) ds.name = spec.name;
  if (spec.minmax) ds = minmax_scale(ds);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Running one method on one training set

struct MethodOutput {
  KpcaModel model;
  Matrix train_embedding;  // filled when requested
  Matrix test_embedding;
  Index m = 0;
  std::optional<PhaseTiming> timing;
};

struct MethodRequest {
  std::string method;
  double ell = 0.0;      // shadow only
  Index m = 0;           // every method except full and shadow
  Index rank = 5;
  std::uint64_t seed = 0;
  bool embed_train = false;
  std::optional<TimingOptions> timing;
};

/// Fits `req.method` on `train`, embeds `test` (and optionally `train`),
/// timing each phase when requested.
inline MethodOutput run_method(const MethodRequest& req, const Points& train, const Points& test,
                               const KernelConfig& cfg) {
  MethodOutput out;
  ReducedSet rs;
  Points sub;
  Matrix k;
  NystromGrams ng;
  const std::string& method = req.method;
  const bool reduced = method == "shadow" || method == "kmeans" || method == "paring" ||
                       method == "herding";

  Phases phases;
  if (method == "shadow") {
    phases.rsde = [&] { rs = shadow_select(train, cfg, req.ell); };
  } else if (method == "kmeans") {
    phases.rsde = [&] { rs = kmeans_select(train, req.m, req.seed); };
  } else if (method == "paring") {
    phases.rsde = [&] { rs = pare_select(train, req.m, req.seed); };
  } else if (method == "herding") {
    phases.rsde = [&] { rs = herd_select(train, cfg, req.m); };
  } else if (method == "subsampled") {
    phases.rsde = [&] {
      Rng rng(req.seed);
      const auto rows = sample_without_replacement(train.rows(), req.m, rng);
      sub.resize(req.m, train.cols());
      for (Index j = 0; j < req.m; ++j) sub.row(j) = train.row(rows[static_cast<std::size_t>(j)]);
    };
  } else if (method == "nystrom") {
    phases.rsde = [&] { rs = uniform_landmarks(train, req.m, req.seed); };
  } else if (method == "wnystrom") {
    phases.rsde = [&] { rs = kmeans_select(train, req.m, req.seed); };
  } else if (method != "full") {
    throw InputError("unknown method '" + method + "'");
  }

  if (reduced) {
    phases.gram = [&] { k = weighted_gram(cfg, rs); };
    phases.eig = [&] { out.model = fit_reduced_from_gram(rs, cfg, k, req.rank); };
  } else if (method == "full") {
    phases.gram = [&] { k = gram(cfg, train); };
    phases.eig = [&] { out.model = fit_full_from_gram(train, cfg, k, req.rank); };
  } else if (method == "subsampled") {
    phases.gram = [&] { k = gram(cfg, sub); };
    phases.eig = [&] {
      out.model = fit_full_from_gram(sub, cfg, k, req.rank);
      out.model.variant = Variant::Subsampled;
    };
  } else {
    phases.gram = [&] { ng = nystrom_grams(train, rs, cfg); };
    phases.eig = [&] {
      const bool weighted = method == "wnystrom";
      out.model = fit_nystrom_from_grams(train, cfg, ng, req.rank,
                                         weighted ? Variant::WNystrom : Variant::Nystrom,
                                         weighted ? rs.weights : std::vector<double>{});
    };
  }
  if (req.embed_train) phases.embed = [&] { out.train_embedding = project(out.model, train); };
  phases.project = [&] { out.test_embedding = project(out.model, test); };

  if (req.timing) {
    PhaseTiming t = time_phases(phases, *req.timing);
    t.n = train.rows();
    t.r = req.rank;
    out.timing = t;
  } else {
    for (const auto* fn : {&phases.rsde, &phases.gram, &phases.eig, &phases.embed, &phases.project}) {
      if (*fn) (*fn)();
    }
  }

  if (method == "full") {
    out.m = train.rows();
  } else if (method == "subsampled") {
    out.m = sub.rows();
  } else {
    out.m = rs.size();
  }
  if (out.timing) out.timing->m = out.m;
  return out;
}

// ---------------------------------------------------------------------------
// Results

/// One method at one sweep point in one repetition.
struct TrialRecord {
  std::string method;
  double ell = 0.0;
  int rep = 0;
  double m = 0.0;
  double retained = 0.0;  // m / training size
  double accuracy = std::nan("");
  double embedding_error = std::nan("");
  double eigenvalue_error = std::nan("");
  std::optional<Speedup> speedup;
};

struct ExperimentResult {
  ExperimentKind experiment = ExperimentKind::Embedding;
  std::vector<std::string> methods;
  std::vector<double> ells;
  bool timed = false;
  std::vector<TrialRecord> records;
  std::vector<TrialResult> rows;      // per (ell, method), averaged over repetitions
  std::vector<BoundReport> bounds;    // bounds experiment only

  /// True when some theorem whose precondition held was violated.
  bool any_violation() const {
    for (const auto& b : bounds) {
      if (b.satisfied && !*b.satisfied) return true;
    }
    return false;
  }

  const TrialResult* row(const std::string& method, double ell) const {
    for (const auto& r : rows) {
      if (r.method == method && std::abs(r.ell - ell) < 1e-9) return &r;
    }
    return nullptr;
  }
};

namespace detail {

/// Runs fn(i) for i in [0, count) on up to `threads` workers; the first
/// exception is rethrown after all workers finish.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, count); ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::uint64_t method_stream(const std::string& method) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : method) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

/// Mean over repetitions, per (ell, method), in grid-major order.
inline std::vector<TrialResult> summarize(const std::vector<TrialRecord>& records,
                                          const std::vector<double>& ells,
                                          const std::vector<std::string>& methods) {
  std::vector<TrialResult> rows;
  for (const double ell : ells) {
    for (const auto& method : methods) {
      TrialResult r;
      r.method = method;
      r.ell = ell;
      double m = 0.0, retained = 0.0, acc = 0.0, emb = 0.0, eig = 0.0;
      double tr = 0.0, te = 0.0, to = 0.0;
      int count = 0, timed = 0;
      for (const auto& rec : records) {
        if (rec.method != method || std::abs(rec.ell - ell) > 1e-9) continue;
        ++count;
        m += rec.m;
        retained += rec.retained;
        acc += rec.accuracy;
        emb += rec.embedding_error;
        eig += rec.eigenvalue_error;
        if (rec.speedup) {
          ++timed;
          tr += rec.speedup->train;
          te += rec.speedup->test;
          to += rec.speedup->total;
        }
      }
      if (count == 0) continue;
      const double c = count;
      r.m = m / c;
      r.retained_fraction = retained / c;
      r.accuracy = acc / c;
      r.embedding_error = emb / c;
      r.eigenvalue_error = eig / c;
      if (timed > 0) {
        r.train_speedup = tr / timed;
        r.test_speedup = te / timed;
        r.total_speedup = to / timed;
      }
      rows.push_back(r);
    }
  }
  return rows;
}

inline Index matched_m(double mean_m, Index rank, Index n) {
  return std::clamp(static_cast<Index>(std::llround(mean_m)), rank, n);
}

inline std::optional<TimingOptions> timing_options(const ExperimentSpec& spec) {
  if (spec.timing_repeats <= 0) return std::nullopt;
  return TimingOptions{spec.timing_repeats, spec.timing_warmup};
}

}  // namespace detail

/// Eigenembedding fidelity. Per repetition: split 80/20, fit full KPCA on
/// the training part as the reference, then fit every method on the same
/// training part and compare test embeddings after least-squares alignment,
/// plus the Euclidean distance between the top-r eigenvalues.
inline ExperimentResult run_embedding_experiment(const ExperimentSpec& spec, const DataSet& ds) {
  const KernelConfig cfg = spec.kernel(ds);
  const std::vector<double> ells = spec.ell_grid();
  const int reps = spec.repetitions;
  const auto timing = detail::timing_options(spec);
  const int threads = timing ? 1 : spec.threads;

  struct RepState {
    DataSet train, test;
    MethodOutput full;
    std::vector<MethodOutput> shadow;  // per ell
  };
  std::vector<RepState> state(static_cast<std::size_t>(reps));

  detail::parallel_for(reps, threads, [&](int rep) {
    auto& st = state[static_cast<std::size_t>(rep)];
    std::tie(st.train, st.test) = split(ds, spec.train_fraction, derive_seed(spec.seed, static_cast<std::uint64_t>(rep)));
    MethodRequest req{"full", 0.0, 0, spec.rank, 0, false, timing};
    st.full = run_method(req, st.train.points, st.test.points, cfg);
    for (const double ell : ells) {
      MethodRequest sreq{"shadow", ell, 0, spec.rank, 0, false, timing};
      st.shadow.push_back(run_method(sreq, st.train.points, st.test.points, cfg));
    }
  });

  std::vector<double> mean_m(ells.size(), 0.0);
  for (std::size_t e = 0; e < ells.size(); ++e) {
    for (const auto& st : state) mean_m[e] += static_cast<double>(st.shadow[e].m);
    mean_m[e] /= reps;
  }

  std::vector<std::vector<TrialRecord>> per_rep(static_cast<std::size_t>(reps));
  detail::parallel_for(reps, threads, [&](int rep) {
    auto& st = state[static_cast<std::size_t>(rep)];
    const Index n = st.train.size();
    const Matrix& reference = st.full.test_embedding;
    const Vector& reference_eigs = st.full.model.eigenvalues;
    for (std::size_t e = 0; e < ells.size(); ++e) {
      for (const auto& method : spec.methods) {
        MethodOutput alt;
        const MethodOutput* out = nullptr;
        if (method == "full") {
          out = &st.full;
        } else if (method == "shadow") {
          out = &st.shadow[e];
        } else {
          MethodRequest req{method, ells[e], detail::matched_m(mean_m[e], spec.rank, n), spec.rank,
                            derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(rep)),
                                        detail::method_stream(method) + e),
                            false, timing};
          alt = run_method(req, st.train.points, st.test.points, cfg);
          out = &alt;
        }
        TrialRecord rec;
        rec.method = method;
        rec.ell = ells[e];
        rec.rep = rep;
        rec.m = static_cast<double>(out->m);
        rec.retained = rec.m / static_cast<double>(n);
        rec.embedding_error = align_embeddings(reference, out->test_embedding).error;
        rec.eigenvalue_error = (reference_eigs - out->model.eigenvalues).norm();
        if (out->timing && st.full.timing) rec.speedup = speedup(*st.full.timing, *out->timing);
        per_rep[static_cast<std::size_t>(rep)].push_back(rec);
      }
    }
  });

  ExperimentResult result;
  result.experiment = ExperimentKind::Embedding;
  result.methods = spec.methods;
  result.ells = ells;
  result.timed = timing.has_value();
  for (auto& v : per_rep) result.records.insert(result.records.end(), v.begin(), v.end());
  result.rows = detail::summarize(result.records, ells, spec.methods);
  return result;
}

/// k-NN accuracy on KPCA embeddings under stratified k-fold cross
/// validation. Training cost includes embedding the training fold, which the
/// classifier needs.
inline ExperimentResult run_classification_experiment(const ExperimentSpec& spec, const DataSet& ds) {
  detail::require(ds.labeled(), "classification experiment: dataset '" + ds.name + "' has no labels");
  const KernelConfig cfg = spec.kernel(ds);
  const std::vector<double> ells = spec.ell_grid();
  const int reps = spec.repetitions;
  const int folds = spec.folds;
  const auto timing = detail::timing_options(spec);
  const int threads = timing ? 1 : spec.threads;
  const bool want_full =
      timing.has_value() || std::find(spec.methods.begin(), spec.methods.end(), "full") != spec.methods.end();

  struct FoldState {
    DataSet train, test;
    std::optional<MethodOutput> full;
    double full_accuracy = 0.0;
    std::vector<MethodOutput> shadow;
    std::vector<double> shadow_accuracy;
  };
  const auto tasks = reps * folds;
  std::vector<FoldState> state(static_cast<std::size_t>(tasks));

  auto classify = [&](const MethodOutput& out, const FoldState& st) {
    const auto predicted = knn_classify(out.train_embedding, *st.train.labels, out.test_embedding,
                                        std::min(spec.knn_k, st.train.size()));
    return accuracy(predicted, *st.test.labels);
  };

  std::vector<std::vector<int>> fold_of(static_cast<std::size_t>(reps));
  for (int rep = 0; rep < reps; ++rep) {
    fold_of[static_cast<std::size_t>(rep)] =
        make_folds(ds.size(), &*ds.labels, folds, derive_seed(spec.seed, static_cast<std::uint64_t>(rep)));
  }

  detail::parallel_for(tasks, threads, [&](int task) {
    const int rep = task / folds;
    const int f = task % folds;
    auto& st = state[static_cast<std::size_t>(task)];
    std::vector<Index> train_rows, test_rows;
    for (Index i = 0; i < ds.size(); ++i) {
      (fold_of[static_cast<std::size_t>(rep)][static_cast<std::size_t>(i)] == f ? test_rows : train_rows).push_back(i);
    }
    st.train = ds.subset(train_rows);
    st.test = ds.subset(test_rows);
    if (want_full) {
      st.full = run_method({"full", 0.0, 0, spec.rank, 0, true, timing}, st.train.points, st.test.points, cfg);
      st.full_accuracy = classify(*st.full, st);
    }
    for (const double ell : ells) {
      st.shadow.push_back(
          run_method({"shadow", ell, 0, spec.rank, 0, true, timing}, st.train.points, st.test.points, cfg));
      st.shadow_accuracy.push_back(classify(st.shadow.back(), st));
    }
  });

  std::vector<double> mean_m(ells.size(), 0.0);
  for (std::size_t e = 0; e < ells.size(); ++e) {
    for (const auto& st : state) mean_m[e] += static_cast<double>(st.shadow[e].m);
    mean_m[e] /= tasks;
  }

  struct Cell {
    double accuracy = 0.0, m = 0.0;
    Index n = 0;
    Speedup speedup{0.0, 0.0, 0.0};
  };
  // per task, per ell, per method
  std::vector<std::vector<std::vector<Cell>>> cells(
      static_cast<std::size_t>(tasks),
      std::vector<std::vector<Cell>>(ells.size(), std::vector<Cell>(spec.methods.size())));

  detail::parallel_for(tasks, threads, [&](int task) {
    const int rep = task / folds;
    const int f = task % folds;
    auto& st = state[static_cast<std::size_t>(task)];
    for (std::size_t e = 0; e < ells.size(); ++e) {
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        const auto& method = spec.methods[mi];
        MethodOutput alt;
        const MethodOutput* out = nullptr;
        double acc = 0.0;
        if (method == "full") {
          out = &*st.full;
          acc = st.full_accuracy;
        } else if (method == "shadow") {
          out = &st.shadow[e];
          acc = st.shadow_accuracy[e];
        } else {
          const std::uint64_t seed = derive_seed(
              derive_seed(spec.seed, static_cast<std::uint64_t>(rep) * 1000 + static_cast<std::uint64_t>(f)),
              detail::method_stream(method) + e);
          alt = run_method({method, ells[e], detail::matched_m(mean_m[e], spec.rank, st.train.size()),
                            spec.rank, seed, true, timing},
                           st.train.points, st.test.points, cfg);
          out = &alt;
          acc = classify(alt, st);
        }
        Cell& c = cells[static_cast<std::size_t>(task)][e][mi];
        c.accuracy = acc;
        c.m = static_cast<double>(out->m);
        c.n = st.train.size();
        if (out->timing && st.full && st.full->timing) c.speedup = speedup(*st.full->timing, *out->timing);
      }
    }
  });

  ExperimentResult result;
  result.experiment = spec.experiment;
  result.methods = spec.methods;
  result.ells = ells;
  result.timed = timing.has_value();
  for (int rep = 0; rep < reps; ++rep) {
    for (std::size_t e = 0; e < ells.size(); ++e) {
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        TrialRecord rec;
        rec.method = spec.methods[mi];
        rec.ell = ells[e];
        rec.rep = rep;
        double acc = 0.0, m = 0.0, retained = 0.0;
        Speedup sp{0.0, 0.0, 0.0};
        for (int f = 0; f < folds; ++f) {
          const Cell& c = cells[static_cast<std::size_t>(rep * folds + f)][e][mi];
          acc += c.accuracy;
          m += c.m;
          retained += c.m / static_cast<double>(c.n);
          sp.train += c.speedup.train;
          sp.test += c.speedup.test;
          sp.total += c.speedup.total;
        }
        rec.accuracy = acc / folds;
        rec.m = m / folds;
        rec.retained = retained / folds;
        if (timing) rec.speedup = Speedup{sp.train / folds, sp.test / folds, sp.total / folds};
        result.records.push_back(rec);
      }
    }
  }
  result.rows = detail::summarize(result.records, ells, spec.methods);
  return result;
}

/// Per ell: shadow-quantize the full dataset and evaluate all four bounds.
inline ExperimentResult run_bounds_experiment(const ExperimentSpec& spec, const DataSet& ds) {
  const KernelConfig cfg = spec.kernel(ds);
  const std::vector<double> ells = spec.ell_grid();
  std::vector<std::vector<BoundReport>> per_ell(ells.size());
  detail::parallel_for(static_cast<int>(ells.size()), spec.threads, [&](int e) {
    const double ell = ells[static_cast<std::size_t>(e)];
    const ReducedSet rs = shadow_select(ds.points, cfg, ell);
    auto& out = per_ell[static_cast<std::size_t>(e)];
    out.push_back(mmd_report(cfg, ds.points, rs));
    out.push_back(eigen_deviation(cfg, ds.points, rs));
    out.push_back(hs_distance(cfg, ds.points, rs));
    const Index D = std::min(spec.bounds_dim, ds.size());
    try {
      out.push_back(projection_distance(cfg, ds.points, rs, D));
    } catch (const DegenerateGapError&) {
      BoundReport r;
      r.theorem = Theorem::Projection;
      r.empirical = std::nan("");
      r.bound = std::nan("");
      r.ell = ell;
      r.sigma = cfg.sigma();
      r.n = ds.size();
      r.m = rs.size();
      r.D = D;
      r.precondition_met = false;
      out.push_back(r);
    }
  });
  ExperimentResult result;
  result.experiment = ExperimentKind::Bounds;
  result.methods = {"shadow"};
  result.ells = ells;
  for (auto& v : per_ell) result.bounds.insert(result.bounds.end(), v.begin(), v.end());
  return result;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec, const DataSet& ds) {
  switch (spec.experiment) {
    case ExperimentKind::Embedding: return run_embedding_experiment(spec, ds);
    case ExperimentKind::Classification:
    case ExperimentKind::RsdeCompare: return run_classification_experiment(spec, ds);
    case ExperimentKind::Bounds: return run_bounds_experiment(spec, ds);
  }
  throw InputError("unknown experiment");
}

// ---------------------------------------------------------------------------
// Report files
//
//   <experiment>.csv               deterministic trial (or bound) rows
//   <experiment>_timing.csv        speedups; wall-clock, not reproducible
//   <experiment>_<panel>.dat       plot data: "ell <method>..." per line

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

inline void write_panel(const std::filesystem::path& path, const ExperimentResult& r,
                        const std::function<double(const TrialResult&)>& value) {
  std::ofstream out = open_output(path);
  out << "# ell";
  for (const auto& m : r.methods) out << ' ' << m;
  out << '\n';
  for (const double ell : r.ells) {
    out << format_double(ell);
    for (const auto& m : r.methods) {
      const TrialResult* row = r.row(m, ell);
      out << ' ' << (row ? format_double(value(*row)) : "nan");
    }
    out << '\n';
  }
}

}  // namespace detail

/// Writes the report files into `dir` (created if missing) and returns
/// their paths.
inline std::vector<std::filesystem::path> emit_report(const ExperimentResult& r,
                                                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const std::string name(to_string(r.experiment));
  std::vector<std::filesystem::path> written;

  if (r.experiment == ExperimentKind::Bounds) {
    const auto csv = dir / (name + ".csv");
    std::ofstream out = detail::open_output(csv);
    out << bound_csv_header() << '\n';
    for (const auto& b : r.bounds) out << to_csv_row(b) << '\n';
    written.push_back(csv);
    for (const Theorem t : {Theorem::MMD, Theorem::Eigen, Theorem::HS, Theorem::Projection}) {
      const auto dat = dir / (name + "_" + std::string(to_string(t)) + ".dat");
      std::ofstream p = detail::open_output(dat);
      p << "# ell empirical bound\n";
      for (const auto& b : r.bounds) {
        if (b.theorem != t) continue;
        p << detail::format_double(b.ell) << ' ' << detail::format_double(b.empirical) << ' '
          << detail::format_double(b.bound) << '\n';
      }
      written.push_back(dat);
    }
    return written;
  }

  const auto csv = dir / (name + ".csv");
  {
    std::ofstream out = detail::open_output(csv);
    out << trial_csv_header() << '\n';
    for (const auto& row : r.rows) out << to_csv_row(row) << '\n';
  }
  written.push_back(csv);
  if (r.timed) {
    const auto tcsv = dir / (name + "_timing.csv");
    std::ofstream out = detail::open_output(tcsv);
    out << timing_csv_header() << '\n';
    for (const auto& row : r.rows) out << to_timing_csv_row(row) << '\n';
    written.push_back(tcsv);
  }

  std::vector<std::pair<std::string, std::function<double(const TrialResult&)>>> panels;
  if (r.experiment == ExperimentKind::Embedding) {
    panels.emplace_back("eigenvalue_deviation", [](const TrialResult& t) { return t.eigenvalue_error; });
    panels.emplace_back("embedding_error", [](const TrialResult& t) { return t.embedding_error; });
  } else {
    panels.emplace_back("accuracy", [](const TrialResult& t) { return t.accuracy; });
  }
  panels.emplace_back("retained", [](const TrialResult& t) { return t.retained_fraction; });
  if (r.timed) {
    panels.emplace_back("train_speedup", [](const TrialResult& t) { return t.train_speedup; });
    panels.emplace_back("test_speedup", [](const TrialResult& t) { return t.test_speedup; });
    if (r.experiment != ExperimentKind::Embedding) {
      panels.emplace_back("total_speedup", [](const TrialResult& t) { return t.total_speedup; });
    }
  }
  for (const auto& [panel, value] : panels) {
    const auto dat = dir / (name + "_" + panel + ".dat");
    detail::write_panel(dat, r, value);
    written.push_back(dat);
  }
  return written;
}

}  // namespace rskpca
