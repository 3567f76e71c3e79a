#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "hydra/trace.hpp"

namespace hydra {

struct KMeansResult {
  std::vector<std::vector<double>> centers;
  std::vector<int> labels;
  double inertia = 0.0;
  int k_used = 0;
  bool k_reduced = false;
  int iterations = 0;
};

namespace detail {

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Lloyd's iterations with seeded farthest-point initialization. Empty
/// clusters are re-seeded at the point farthest from its nearest center.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                           std::uint64_t seed, int max_iters = 300, double tol = 1e-6) {
  if (k <= 0) throw validation_error("kmeans: k must be > 0");
  if (points.empty()) throw validation_error("kmeans: no points");

  KMeansResult res;
  std::set<std::vector<double>> distinct(points.begin(), points.end());
  res.k_used = int(std::min<std::size_t>(k, distinct.size()));
  res.k_reduced = res.k_used < k;
  const int kk = res.k_used;
  const std::size_t n = points.size();

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng() % n]);
  std::vector<double> nearest(n, std::numeric_limits<double>::max());
  while (int(centers.size()) < kk) {
    std::size_t far_idx = 0;
    double far_d = -1;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], detail::sqdist(points[i], centers.back()));
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far_idx = i;
      }
    }
    centers.push_back(points[far_idx]);
  }

  std::vector<int> labels(n, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int c = 0; c < kk; ++c) {
        double d = detail::sqdist(points[i], centers[c]);
        if (d < best) {
          best = d;
          labels[i] = c;
        }
      }
    }

    std::vector<std::vector<double>> next(kk, std::vector<double>(points[0].size(), 0.0));
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t d = 0; d < points[i].size(); ++d) next[labels[i]][d] += points[i][d];
    }
    for (int c = 0; c < kk; ++c) {
      if (counts[c] == 0) {
        // re-seed at the point farthest from its nearest center
        std::size_t far_idx = 0;
        double far_d = -1;
        for (std::size_t i = 0; i < n; ++i) {
          double d = std::numeric_limits<double>::max();
          for (int c2 = 0; c2 < kk; ++c2)
            if (c2 != c) d = std::min(d, detail::sqdist(points[i], centers[c2]));
          if (d > far_d) {
            far_d = d;
            far_idx = i;
          }
        }
        next[c] = points[far_idx];
        counts[c] = 1;
      } else {
        for (auto& v : next[c]) v /= double(counts[c]);
      }
    }

    double move = 0;
    for (int c = 0; c < kk; ++c) move = std::max(move, detail::sqdist(centers[c], next[c]));
    centers = std::move(next);
    if (std::sqrt(move) < tol) break;
  }

  // final assignment + inertia
  res.inertia = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::max();
    for (int c = 0; c < kk; ++c) {
      double d = detail::sqdist(points[i], centers[c]);
      if (d < best) {
        best = d;
        labels[i] = c;
      }
    }
    res.inertia += best;
  }
  res.centers = std::move(centers);
  res.labels = std::move(labels);
  return res;
}

/// Mean silhouette over all points, Euclidean distances. Points in
/// singleton clusters contribute 0.
inline double silhouette(const std::vector<std::vector<double>>& points,
                         const std::vector<int>& labels) {
  if (points.size() != labels.size()) throw validation_error("silhouette: size mismatch");
  const int kk = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> counts(kk, 0);
  for (int l : labels) {
    if (l < 0) throw validation_error("silhouette: negative label");
    ++counts[l];
  }
  int nonempty = 0;
  for (auto c : counts) nonempty += c > 0;
  if (nonempty < 2) throw validation_error("silhouette: needs at least 2 clusters");

  const std::size_t n = points.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[labels[i]] == 1) continue;  // s(i) = 0
    std::vector<double> sum(kk, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += std::sqrt(detail::sqdist(points[i], points[j]));
    }
    double a = sum[labels[i]] / double(counts[labels[i]] - 1);
    double b = std::numeric_limits<double>::max();
    for (int c = 0; c < kk; ++c)
      if (c != labels[i] && counts[c] > 0) b = std::min(b, sum[c] / double(counts[c]));
    double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / double(n);
}

}  // namespace hydra
