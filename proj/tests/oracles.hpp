#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. They favour the obvious quadratic formulation over speed.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "intersad/detectors.hpp"

namespace oracle {

using Points = std::vector<std::vector<double>>;

inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

// Breunig et al. LOF written directly from the definitions: sort every
// neighbour list, keep ties at the k-distance, average reachability.
inline std::vector<double> lof(const Points& p, std::size_t k) {
  const std::size_t n = p.size();
  std::vector<double> kdist(n);
  std::vector<std::vector<std::size_t>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) all.emplace_back(dist(p[i], p[j]), j);
    }
    std::sort(all.begin(), all.end());
    kdist[i] = all[k - 1].first;
    for (const auto& [d, j] : all) {
      if (d <= kdist[i]) nbr[i].push_back(j);
    }
  }
  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : nbr[i]) s += std::max(kdist[j], dist(p[i], p[j]));
    lrd[i] = static_cast<double>(nbr[i].size()) / std::max(s, 1e-12 * static_cast<double>(nbr[i].size()));
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : nbr[i]) s += lrd[j] / lrd[i];
    out[i] = s / static_cast<double>(nbr[i].size());
  }
  return out;
}

// 10x10 unit grid plus one point 10 units beyond the far corner.
inline Points lof_grid_fixture() {
  Points p;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) p.push_back({static_cast<double>(i), static_cast<double>(j)});
  }
  p.push_back({19.0, 9.0});
  return p;
}

// Pairwise-concordance AUC: (#anom > norm + 0.5 #ties) / (#anom * #norm).
inline double auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) num += 1.0;
      if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / pairs;
}

// Fixture of 50 uniform points in the unit square and one planted outlier at
// distance 3 to 10 from the square's centre.
inline Points planted_outlier_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Points p;
  for (int i = 0; i < 50; ++i) p.push_back({u(rng), u(rng)});
  const double angle = 2.0 * std::acos(-1.0) * u(rng);
  const double radius = 3.0 + 7.0 * u(rng);
  p.push_back({0.5 + radius * std::cos(angle), 0.5 + radius * std::sin(angle)});
  return p;
}

// Index of the row whose mean distance to its k nearest neighbours is largest.
inline std::size_t knn_top1(const Points& p, std::size_t k) {
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j != i) d.push_back(dist(p[i], p[j]));
    }
    std::sort(d.begin(), d.end());
    double s = 0.0;
    for (std::size_t m = 0; m < k; ++m) s += d[m];
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

// Number of the 100 planted fixtures on which the isolation forest's top
// score lands on the kNN oracle's top row.
inline int iforest_knn_top1_agreement() {
  int agree = 0;
  for (std::uint64_t f = 0; f < 100; ++f) {
    const Points p = planted_outlier_fixture(1000 + f);
    const auto scores = intersad::iforest_scores(intersad::feature_matrix(p), {.seed = f});
    const auto top = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (top == knn_top1(p, 5)) ++agree;
  }
  return agree;
}

}  // namespace oracle
