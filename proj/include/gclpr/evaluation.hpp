#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gclpr/data.hpp"
#include "gclpr/error.hpp"
#include "gclpr/estimator.hpp"
#include "gclpr/parallel.hpp"
#include "gclpr/rng.hpp"

namespace gclpr::evaluation {

/// Point-prediction quality on the raw response scale. r2 is undefined when
/// the truth is constant (zero total sum of squares).
struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  bool r2_defined = false;
  std::size_t count = 0;
};

inline Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw DimensionError("metrics: length mismatch");
  if (y_true.empty()) throw DegenerateError("metrics: no rows");
  double sse = 0.0, sae = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!std::isfinite(y_true[i]) || !std::isfinite(y_pred[i]))
      throw NonFiniteError("metrics: non-finite value");
    const double e = y_pred[i] - y_true[i];
    sse += e * e;
    sae += std::abs(e);
    mean += y_true[i];
  }
  const double n = static_cast<double>(y_true.size());
  mean /= n;
  double sst = 0.0;
  for (double v : y_true) sst += (v - mean) * (v - mean);
  Metrics m;
  m.count = y_true.size();
  m.rmse = std::sqrt(sse / n);
  m.mae = sae / n;
  if (sst > 0.0) {
    m.r2 = 1.0 - sse / sst;
    m.r2_defined = true;
  }
  return m;
}

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Train/test split generator. rolling_origin assumes rows are already in
/// chronological order and produces expanding train windows with strictly
/// later test blocks.
struct SplitPlan {
  enum class Kind { repeated_holdout, kfold, rolling_origin };

  Kind kind = Kind::repeated_holdout;
  std::size_t repetitions = 5;
  double test_fraction = 0.2;
  std::size_t folds = 5;
  std::size_t outer_splits = 5;
  std::uint64_t seed = 0;

  static SplitPlan repeated_holdout(std::size_t reps, double fraction, std::uint64_t seed) {
    SplitPlan p;
    p.kind = Kind::repeated_holdout;
    p.repetitions = reps;
    p.test_fraction = fraction;
    p.seed = seed;
    return p;
  }

  static SplitPlan kfold(std::size_t folds, std::uint64_t seed) {
    SplitPlan p;
    p.kind = Kind::kfold;
    p.folds = folds;
    p.seed = seed;
    return p;
  }

  static SplitPlan rolling_origin(std::size_t outer) {
    SplitPlan p;
    p.kind = Kind::rolling_origin;
    p.outer_splits = outer;
    return p;
  }
};

inline const char* to_string(SplitPlan::Kind k) {
  switch (k) {
    case SplitPlan::Kind::repeated_holdout: return "repeated_holdout";
    case SplitPlan::Kind::kfold: return "kfold";
    case SplitPlan::Kind::rolling_origin: return "rolling_origin";
  }
  return "?";
}

inline SplitPlan::Kind split_kind_from_string(const std::string& s) {
  if (s == "repeated_holdout") return SplitPlan::Kind::repeated_holdout;
  if (s == "kfold") return SplitPlan::Kind::kfold;
  if (s == "rolling_origin") return SplitPlan::Kind::rolling_origin;
  throw ConfigError("unknown split kind '" + s + "'");
}

/// Throws unless train and test are disjoint, non-empty, in range, and free
/// of duplicates.
inline void check_no_leakage(std::size_t n, const IndexSplit& split) {
  if (split.train.empty() || split.test.empty())
    throw Error("split audit: empty train or test set");
  std::vector<char> seen(n, 0);
  for (std::size_t i : split.train) {
    if (i >= n) throw Error("split audit: train index out of range");
    if (seen[i]) throw Error("split audit: duplicate train index");
    seen[i] = 1;
  }
  for (std::size_t i : split.test) {
    if (i >= n) throw Error("split audit: test index out of range");
    if (seen[i] == 1) throw Error("split audit: train/test overlap");
    if (seen[i] == 2) throw Error("split audit: duplicate test index");
    seen[i] = 2;
  }
}

inline std::vector<IndexSplit> make_splits(std::size_t n, const SplitPlan& plan) {
  if (n < 2) throw DegenerateError("make_splits: need at least two rows");
  std::vector<IndexSplit> out;
  switch (plan.kind) {
    case SplitPlan::Kind::repeated_holdout: {
      if (plan.repetitions < 1) throw ConfigError("repeated_holdout: repetitions must be >= 1");
      if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0))
        throw ConfigError("repeated_holdout: test_fraction must be in (0,1)");
      std::size_t test_n =
          static_cast<std::size_t>(std::llround(plan.test_fraction * static_cast<double>(n)));
      test_n = std::min(std::max<std::size_t>(test_n, 1), n - 1);
      for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(mix_seed(plan.seed, rep));
        rng.shuffle(idx);
        IndexSplit s;
        s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_n));
        s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(test_n), idx.end());
        out.push_back(std::move(s));
      }
      break;
    }
    case SplitPlan::Kind::kfold: {
      if (plan.folds < 2 || plan.folds > n)
        throw ConfigError("kfold: folds must be in [2, n]");
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng(mix_seed(plan.seed, 0));
      rng.shuffle(idx);
      std::size_t start = 0;
      for (std::size_t f = 0; f < plan.folds; ++f) {
        const std::size_t size = n / plan.folds + (f < n % plan.folds ? 1 : 0);
        IndexSplit s;
        s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                      idx.begin() + static_cast<std::ptrdiff_t>(start + size));
        for (std::size_t i = 0; i < n; ++i)
          if (i < start || i >= start + size) s.train.push_back(idx[i]);
        start += size;
        out.push_back(std::move(s));
      }
      break;
    }
    case SplitPlan::Kind::rolling_origin: {
      if (plan.outer_splits < 1) throw ConfigError("rolling_origin: outer splits must be >= 1");
      if (n < plan.outer_splits + 1)
        throw DegenerateError("rolling_origin: not enough rows for the requested splits");
      const std::size_t blocks = plan.outer_splits + 1;
      auto edge = [&](std::size_t b) { return b * n / blocks; };
      for (std::size_t s = 1; s <= plan.outer_splits; ++s) {
        IndexSplit split;
        for (std::size_t i = 0; i < edge(s); ++i) split.train.push_back(i);
        for (std::size_t i = edge(s); i < edge(s + 1); ++i) split.test.push_back(i);
        out.push_back(std::move(split));
      }
      break;
    }
  }
  for (const IndexSplit& s : out) check_no_leakage(n, s);
  return out;
}

/// One model candidate in a grid: hyperparameters plus the keys the
/// deterministic tie-break uses (neighborhood size, then degree, then
/// position in the grid).
struct GridPoint {
  estimator::Hyperparameters hp;
  std::string label;
  std::size_t tie_neighbors = 0;
  int tie_degree = 0;
};

/// Fits one candidate on train and returns raw-scale predictions for test.
using FitPredict =
    std::function<std::vector<double>(const Dataset& train, const Dataset& test,
                                      const GridPoint& point)>;

struct GridCell {
  bool ok = false;
  double mean_rmse = std::numeric_limits<double>::infinity();
  std::vector<double> fold_rmse;
  std::string error;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  std::vector<GridCell> cells;
};

/// Inner cross-validated grid search minimizing raw-scale RMSE. Candidates
/// that throw or return non-finite predictions are excluded; if every
/// candidate fails, AllFitsFailedError is thrown.
inline GridSearchResult grid_search(const Dataset& data, const std::vector<GridPoint>& grid,
                                    const SplitPlan& inner, const FitPredict& fit_predict,
                                    unsigned threads = 1) {
  if (grid.empty()) throw ConfigError("grid_search: empty grid");
  const std::vector<IndexSplit> splits = make_splits(data.rows(), inner);
  const std::size_t cells = grid.size() * splits.size();
  std::vector<double> fold_rmse(cells, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> fold_error(cells);
  parallel_for(cells, threads, [&](std::size_t c) {
    const std::size_t g = c / splits.size();
    const std::size_t s = c % splits.size();
    try {
      check_no_leakage(data.rows(), splits[s]);
      const Dataset train = data.subset(splits[s].train);
      const Dataset test = data.subset(splits[s].test);
      const std::vector<double> pred = fit_predict(train, test, grid[g]);
      if (pred.size() != test.rows())
        throw DimensionError("grid_search: candidate returned wrong prediction count");
      const Metrics m = compute_metrics(test.y, pred);
      fold_rmse[c] = m.rmse;
    } catch (const std::exception& e) {
      fold_error[c] = e.what();
    }
  });

  GridSearchResult res;
  res.cells.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    GridCell& cell = res.cells[g];
    cell.ok = true;
    double sum = 0.0;
    for (std::size_t s = 0; s < splits.size(); ++s) {
      const std::size_t c = g * splits.size() + s;
      if (!fold_error[c].empty() || !std::isfinite(fold_rmse[c])) {
        cell.ok = false;
        cell.error = fold_error[c].empty() ? "non-finite fold score" : fold_error[c];
        break;
      }
      cell.fold_rmse.push_back(fold_rmse[c]);
      sum += fold_rmse[c];
    }
    if (cell.ok) cell.mean_rmse = sum / static_cast<double>(splits.size());
  }

  bool any_ok = false;
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!res.cells[g].ok) continue;
    if (!any_ok) {
      any_ok = true;
      best = g;
      continue;
    }
    const GridCell& cand = res.cells[g];
    const GridCell& cur = res.cells[best];
    const bool better =
        cand.mean_rmse < cur.mean_rmse ||
        (cand.mean_rmse == cur.mean_rmse &&
         (grid[g].tie_neighbors < grid[best].tie_neighbors ||
          (grid[g].tie_neighbors == grid[best].tie_neighbors &&
           grid[g].tie_degree < grid[best].tie_degree)));
    if (better) best = g;
  }
  if (!any_ok) throw AllFitsFailedError("grid_search: every candidate failed");
  res.best_index = best;
  return res;
}

}  // namespace gclpr::evaluation
