#pragma once

// Batch outlier scorers over a fleet feature matrix, plus ROC-AUC and a
// two-component PCA projection. Higher score means more anomalous.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "intersad/common.hpp"
#include "intersad/tensor_nn.hpp"

namespace intersad {

// N rows (systems) x d columns (features), row-major.
using FeatureMatrix = nn::Tensor;

inline FeatureMatrix feature_matrix(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty(), "feature matrix needs at least one row");
  const std::size_t d = rows.front().size();
  FeatureMatrix x(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == d, "feature rows must share one length");
    std::copy(rows[i].begin(), rows[i].end(), x.values.begin() + i * d);
  }
  return x;
}

inline void check_features(const FeatureMatrix& x, std::size_t min_rows = 2) {
  require(x.rows >= min_rows, "feature matrix has too few rows");
  require(x.cols >= 1, "feature matrix has no columns");
  require(all_finite(x.values), "feature matrix contains non-finite entries");
}

inline std::span<const double> row(const FeatureMatrix& x, std::size_t i) {
  return std::span<const double>(x.values).subspan(i * x.cols, x.cols);
}

// Per-column (x - mean) / std with the population std; near-constant columns
// become zero.
inline FeatureMatrix zscore_normalize(const FeatureMatrix& x) {
  check_features(x);
  FeatureMatrix out = x;
  const double n = static_cast<double>(x.rows);
  for (std::size_t c = 0; c < x.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t r = 0; r < x.rows; ++r) out(r, c) = sd < 1e-12 ? 0.0 : (x(r, c) - mean) / sd;
  }
  return out;
}

inline std::vector<double> pairwise_distances(const FeatureMatrix& x) {
  const std::size_t n = x.rows;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = row(x, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto b = row(x, j);
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
      d[i * n + j] = d[j * n + i] = std::sqrt(acc);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Isolation forest

// Average unsuccessful-search path length in a binary search tree of n
// points, using H(i) ~ ln(i) + 0.5772156649. c(2) is taken as exactly 1.
inline double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + 0.5772156649) - 2.0 * (m - 1.0) / m;
}

struct IForestConfig {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;
  std::uint64_t seed = 0;
};

namespace detail {

class IsolationTree {
 public:
  IsolationTree(const FeatureMatrix& x, std::span<const std::size_t> sample, std::size_t max_depth,
                Rng& rng) {
    std::vector<std::size_t> idx(sample.begin(), sample.end());
    build(x, idx, 0, max_depth, rng);
  }

  double path_length(std::span<const double> point) const {
    std::size_t node = 0;
    double depth = 0.0;
    while (!nodes_[node].leaf) {
      const Node& n = nodes_[node];
      node = point[n.feature] < n.split ? n.left : n.right;
      depth += 1.0;
    }
    return depth + average_path_length(nodes_[node].size);
  }

 private:
  struct Node {
    bool leaf = true;
    std::size_t feature = 0;
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t size = 0;
  };

  std::size_t build(const FeatureMatrix& x, std::vector<std::size_t>& idx, std::size_t depth,
                    std::size_t max_depth, Rng& rng) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{.leaf = true, .size = idx.size()});
    if (idx.size() <= 1 || depth >= max_depth) return id;

    // Only features that vary inside this node can split it.
    std::vector<std::size_t> candidates;
    std::vector<std::pair<double, double>> ranges;
    for (std::size_t c = 0; c < x.cols; ++c) {
      double lo = x(idx[0], c);
      double hi = lo;
      for (std::size_t i : idx) {
        lo = std::min(lo, x(i, c));
        hi = std::max(hi, x(i, c));
      }
      if (hi > lo) {
        candidates.push_back(c);
        ranges.emplace_back(lo, hi);
      }
    }
    if (candidates.empty()) return id;

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t which = pick(rng);
    const auto [lo, hi] = ranges[which];
    std::uniform_real_distribution<double> cut(lo, hi);
    double split = cut(rng);
    if (split <= lo) split = std::nextafter(lo, hi);
    const std::size_t feature = candidates[which];

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) (x(i, feature) < split ? left : right).push_back(i);

    nodes_[id].leaf = false;
    nodes_[id].feature = feature;
    nodes_[id].split = split;
    const std::size_t l = build(x, left, depth + 1, max_depth, rng);
    const std::size_t r = build(x, right, depth + 1, max_depth, rng);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Node> nodes_;
};

}  // namespace detail

// score(x) = 2^(-E[h(x)] / c(psi)), psi = min(subsample, N).
inline std::vector<double> iforest_scores(const FeatureMatrix& x, const IForestConfig& cfg = {}) {
  check_features(x);
  require(cfg.n_trees >= 1, "isolation forest needs at least one tree");
  const std::size_t psi = std::min(cfg.subsample, x.rows);
  require(psi >= 2, "isolation forest subsample must be at least 2");
  const auto max_depth = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(psi))));

  std::vector<double> total(x.rows, 0.0);
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(cfg.seed, 0x1f0, t));
    std::vector<std::size_t> sample = all;
    std::shuffle(sample.begin(), sample.end(), rng);
    sample.resize(psi);
    const detail::IsolationTree tree(x, sample, max_depth, rng);
    for (std::size_t i = 0; i < x.rows; ++i) total[i] += tree.path_length(row(x, i));
  }
  const double c = average_path_length(psi);
  std::vector<double> scores(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double mean_h = total[i] / static_cast<double>(cfg.n_trees);
    scores[i] = std::pow(2.0, -mean_h / c);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Local outlier factor

// Classic LOF: the k-distance neighborhood includes ties, reachability
// distance is max(k-distance(o), d(p, o)), and lrd is floored by 1e-12 in
// the denominator so duplicate points stay finite.
inline std::vector<double> lof_scores(const FeatureMatrix& x, std::size_t k = 20) {
  check_features(x);
  require(k >= 1 && x.rows > k, "LOF needs more rows than k");
  const std::size_t n = x.rows;
  const std::vector<double> d = pairwise_distances(x);

  std::vector<double> kdist(n);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<double> sorted;
  for (std::size_t p = 0; p < n; ++p) {
    sorted.clear();
    for (std::size_t o = 0; o < n; ++o) {
      if (o != p) sorted.push_back(d[p * n + o]);
    }
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    kdist[p] = sorted[k - 1];
    for (std::size_t o = 0; o < n; ++o) {
      if (o != p && d[p * n + o] <= kdist[p]) neighbors[p].push_back(o);
    }
  }

  std::vector<double> lrd(n);
  for (std::size_t p = 0; p < n; ++p) {
    double reach = 0.0;
    for (std::size_t o : neighbors[p]) reach += std::max(kdist[o], d[p * n + o]);
    reach /= static_cast<double>(neighbors[p].size());
    lrd[p] = 1.0 / std::max(reach, 1e-12);
  }

  std::vector<double> scores(n);
  for (std::size_t p = 0; p < n; ++p) {
    double acc = 0.0;
    for (std::size_t o : neighbors[p]) acc += lrd[o];
    scores[p] = acc / static_cast<double>(neighbors[p].size()) / lrd[p];
  }
  return scores;
}

// ---------------------------------------------------------------------------
// kNN distance

inline std::vector<double> knn_score(const FeatureMatrix& x, std::size_t k = 10) {
  check_features(x);
  require(k >= 1 && x.rows > k, "kNN scorer needs more rows than k");
  const std::size_t n = x.rows;
  const std::vector<double> d = pairwise_distances(x);
  std::vector<double> scores(n);
  std::vector<double> others;
  for (std::size_t p = 0; p < n; ++p) {
    others.clear();
    for (std::size_t o = 0; o < n; ++o) {
      if (o != p) others.push_back(d[p * n + o]);
    }
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += others[i];
    scores[p] = acc / static_cast<double>(k);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Mean-reward ranking

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// |mean(r_i) - median_j mean(r_j)|
inline std::vector<double> mean_reward_score(const FeatureMatrix& rewards) {
  check_features(rewards);
  std::vector<double> means(rewards.rows);
  for (std::size_t i = 0; i < rewards.rows; ++i) {
    const auto r = row(rewards, i);
    means[i] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  }
  const double m = median(means);
  std::vector<double> scores(rewards.rows);
  for (std::size_t i = 0; i < rewards.rows; ++i) scores[i] = std::abs(means[i] - m);
  return scores;
}

// ---------------------------------------------------------------------------
// ROC-AUC

// Mann-Whitney U with midranks: P(score_anom > score_norm) + 0.5 P(tie).
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int l : labels) {
    require(l == 0 || l == 1, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  require(positives > 0 && positives < n, "ROC-AUC needs both classes present");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) rank_sum += rank[i];
  }
  const double np = static_cast<double>(positives);
  const double nn_ = static_cast<double>(n - positives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn_);
}

// ---------------------------------------------------------------------------
// PCA

struct Pca2d {
  FeatureMatrix projection;              // N x 2
  std::vector<double> components;        // 2 x d, row-major
  std::vector<double> explained_variance;  // sample variance along each component
};

inline Pca2d pca_2d(const FeatureMatrix& x) {
  check_features(x, 3);
  require(x.cols >= 2, "PCA projection needs at least two feature columns");
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;

  FeatureMatrix centered = x;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) centered(r, c) -= mean;
  }
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = centered(r, i);
      if (xi == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += xi * centered(r, j);
    }
  }
  for (auto& v : cov) v /= static_cast<double>(n - 1);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
  require(trace > 0.0, "PCA of rank-0 data (all rows identical)");

  auto matvec = [&](const std::vector<double>& v) {
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += cov[i * d + j] * v[j];
      out[i] = acc;
    }
    return out;
  };
  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (auto& x : v) x /= s;
    }
    return s;
  };
  auto orthogonalize = [&](std::vector<double>& v, const std::vector<double>& against) {
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += v[i] * against[i];
    for (std::size_t i = 0; i < d; ++i) v[i] -= dot * against[i];
  };

  Pca2d out;
  out.components.assign(2 * d, 0.0);
  std::vector<std::vector<double>> found;
  Rng rng(0x9ca);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> v(d);
    for (auto& e : v) e = g(rng);
    for (const auto& f : found) orthogonalize(v, f);
    normalize(v);
    for (int it = 0; it < 1000; ++it) {
      std::vector<double> w = matvec(v);
      for (const auto& f : found) orthogonalize(w, f);
      // No variance left outside the found directions: keep v, already orthonormal to them.
      if (normalize(w) <= 1e-12 * trace) break;
      for (const auto& f : found) orthogonalize(w, f);
      normalize(w);
      double delta = 0.0;
      for (std::size_t i = 0; i < d; ++i) delta += (w[i] - v[i]) * (w[i] - v[i]);
      v = std::move(w);
      if (std::sqrt(delta) < 1e-10) break;
    }
    // Sign convention: largest-magnitude loading is positive.
    const auto big = std::max_element(v.begin(), v.end(),
                                      [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*big < 0) {
      for (auto& e : v) e = -e;
    }
    std::copy(v.begin(), v.end(), out.components.begin() + static_cast<std::ptrdiff_t>(comp * d));
    found.push_back(v);
  }

  out.projection = FeatureMatrix(n, 2);
  out.explained_variance.assign(2, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t comp = 0; comp < 2; ++comp) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += centered(r, i) * out.components[comp * d + i];
      out.projection(r, comp) = acc;
      out.explained_variance[comp] += acc * acc;
    }
  }
  for (auto& v : out.explained_variance) v /= static_cast<double>(n - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Scorer dispatch and reports

enum class Scorer { iforest, lof, knn, meanreward };
enum class FeatureSpace { trajectory, reward, embedding };

inline std::string to_string(Scorer s) {
  switch (s) {
    case Scorer::iforest: return "iforest";
    case Scorer::lof: return "lof";
    case Scorer::knn: return "knn";
    case Scorer::meanreward: return "meanreward";
  }
  return "?";
}

inline std::string to_string(FeatureSpace s) {
  switch (s) {
    case FeatureSpace::trajectory: return "trajectory";
    case FeatureSpace::reward: return "reward";
    case FeatureSpace::embedding: return "embedding";
  }
  return "?";
}

inline Scorer scorer_from_string(const std::string& s) {
  if (s == "iforest") return Scorer::iforest;
  if (s == "lof") return Scorer::lof;
  if (s == "knn") return Scorer::knn;
  if (s == "meanreward") return Scorer::meanreward;
  throw ContractViolation("unknown scorer '" + s + "' (expected iforest, lof, knn, meanreward)");
}

inline FeatureSpace space_from_string(const std::string& s) {
  if (s == "trajectory") return FeatureSpace::trajectory;
  if (s == "reward") return FeatureSpace::reward;
  if (s == "embedding") return FeatureSpace::embedding;
  throw ContractViolation("unknown feature space '" + s + "' (expected trajectory, reward, embedding)");
}

struct ScorerOptions {
  bool normalize = true;
  std::size_t lof_k = 20;
  std::size_t knn_k = 10;
  IForestConfig iforest;
};

// Distance/partition scorers see z-scored features unless disabled; the
// mean-reward baseline always ranks raw row means.
inline std::vector<double> score_features(const FeatureMatrix& x, Scorer scorer,
                                          const ScorerOptions& opt = {}) {
  if (scorer == Scorer::meanreward) return mean_reward_score(x);
  const FeatureMatrix z = opt.normalize ? zscore_normalize(x) : x;
  switch (scorer) {
    case Scorer::iforest: return iforest_scores(z, opt.iforest);
    case Scorer::lof: return lof_scores(z, opt.lof_k);
    case Scorer::knn: return knn_score(z, opt.knn_k);
    case Scorer::meanreward: break;
  }
  return {};
}

struct ScoreReport {
  std::vector<double> scores;
  std::vector<int> labels;
  std::optional<double> auc;
  std::string scorer;
  std::string space;
  bool negative_control = false;
};

inline void write_scores_csv(std::ostream& out, const ScoreReport& report) {
  out << "system_id,label,score\n";
  for (std::size_t i = 0; i < report.scores.size(); ++i) {
    out << i << ',' << (i < report.labels.size() ? report.labels[i] : -1) << ','
        << format_double(report.scores[i]) << '\n';
  }
}

inline void write_pca_csv(std::ostream& out, const FeatureMatrix& projection,
                          std::span<const int> labels) {
  out << "system_id,label,pc1,pc2\n";
  for (std::size_t i = 0; i < projection.rows; ++i) {
    out << i << ',' << (i < labels.size() ? labels[i] : -1) << ',' << format_double(projection(i, 0))
        << ',' << format_double(projection(i, 1)) << '\n';
  }
}

}  // namespace intersad
