#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "hydra/kmeans.hpp"

using namespace hydra;

TEST_CASE("two separable pairs split cleanly") {
  std::vector<std::vector<double>> pts = {{0}, {0.1}, {10}, {10.1}};
  auto r = kmeans(pts, 2, 42);
  REQUIRE(r.k_used == 2);
  CHECK(r.labels[0] == r.labels[1]);
  CHECK(r.labels[2] == r.labels[3]);
  CHECK(r.labels[0] != r.labels[2]);
}

TEST_CASE("identical points with k=1 give zero inertia") {
  std::vector<std::vector<double>> pts(4, {3.5, 3.5});
  auto r = kmeans(pts, 1, 1);
  CHECK(r.centers[0] == std::vector<double>{3.5, 3.5});
  CHECK(r.inertia == 0.0);
}

TEST_CASE("k reduces to the number of distinct points") {
  std::vector<std::vector<double>> pts = {{1}, {1}, {2}, {2}};
  auto r = kmeans(pts, 4, 9);
  CHECK(r.k_used == 2);
  CHECK(r.k_reduced);
}

TEST_CASE("k=0 and empty input rejected") {
  std::vector<std::vector<double>> pts = {{1}};
  CHECK_THROWS_AS(kmeans(pts, 0, 1), validation_error);
  CHECK_THROWS_AS(kmeans({}, 2, 1), validation_error);
}

TEST_CASE("four seeded gaussians recover the generating partition") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> noise(0.0, 0.3);
  const double means[4][2] = {{0, 0}, {20, 0}, {0, 20}, {20, 20}};
  std::vector<std::vector<double>> pts;
  std::vector<int> truth;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 50; ++i) {
      pts.push_back({means[c][0] + noise(rng), means[c][1] + noise(rng)});
      truth.push_back(c);
    }
  auto r = kmeans(pts, 4, 5);
  REQUIRE(r.k_used == 4);
  // map each result label to the dominant truth component; must be a bijection
  int votes[4][4] = {};
  for (std::size_t i = 0; i < pts.size(); ++i) ++votes[r.labels[i]][truth[i]];
  std::set<int> mapped;
  for (int c = 0; c < 4; ++c) {
    int best = 0;
    for (int t = 1; t < 4; ++t)
      if (votes[c][t] > votes[c][best]) best = t;
    CHECK(votes[c][best] == 50);  // every cluster pure
    mapped.insert(best);
  }
  CHECK(mapped.size() == 4);
}

TEST_CASE("kmeans is deterministic given the seed") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({u(rng), u(rng)});
  auto a = kmeans(pts, 4, 11);
  auto b = kmeans(pts, 4, 11);
  CHECK(a.centers == b.centers);
  CHECK(a.labels == b.labels);
}

TEST_CASE("labels survive uniform affine scaling after min-max normalization") {
  // normalizing both point sets yields identical inputs, so labels match
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> pts, scaled;
  for (int i = 0; i < 100; ++i) {
    double x = u(rng), y = u(rng);
    pts.push_back({x, y});
    scaled.push_back({x * 7 + 3, y * 7 + 3});
  }
  auto norm = [](std::vector<std::vector<double>> p) {
    for (int d = 0; d < 2; ++d) {
      double lo = p[0][d], hi = p[0][d];
      for (auto& v : p) {
        lo = std::min(lo, v[d]);
        hi = std::max(hi, v[d]);
      }
      for (auto& v : p) v[d] = (v[d] - lo) / (hi - lo);
    }
    return p;
  };
  CHECK(kmeans(norm(pts), 4, 2).labels == kmeans(norm(scaled), 4, 2).labels);
}

TEST_CASE("silhouette matches a brute-force oracle and conventions") {
  // two singleton clusters: s(i) = 0 by convention
  CHECK(silhouette({{0}, {5}}, {0, 1}) == 0.0);

  // tight far-apart blobs score high
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 0.05);
  for (int i = 0; i < 30; ++i) {
    pts.push_back({n(rng)});
    labels.push_back(0);
    pts.push_back({10 + n(rng)});
    labels.push_back(1);
  }
  CHECK(silhouette(pts, labels) > 0.9);

  // interleaved alternating labels score negative
  std::vector<std::vector<double>> line;
  std::vector<int> alt;
  for (int i = 0; i < 20; ++i) {
    line.push_back({double(i)});
    alt.push_back(i % 2);
  }
  CHECK(silhouette(line, alt) < 0.0);

  // single cluster undefined
  CHECK_THROWS_AS(silhouette({{0}, {1}}, {0, 0}), validation_error);

  // brute-force recomputation on a small random instance
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> rpts;
  std::vector<int> rlab;
  for (int i = 0; i < 24; ++i) {
    rpts.push_back({u(rng), u(rng)});
    rlab.push_back(i % 3);
  }
  double expected = 0;
  for (std::size_t i = 0; i < rpts.size(); ++i) {
    double sum[3] = {};
    int cnt[3] = {};
    for (std::size_t j = 0; j < rpts.size(); ++j) {
      if (i == j) continue;
      double dx = rpts[i][0] - rpts[j][0], dy = rpts[i][1] - rpts[j][1];
      sum[rlab[j]] += std::sqrt(dx * dx + dy * dy);
      ++cnt[rlab[j]];
    }
    double a = sum[rlab[i]] / cnt[rlab[i]];
    double b = 1e300;
    for (int c = 0; c < 3; ++c)
      if (c != rlab[i]) b = std::min(b, sum[c] / cnt[c]);
    expected += (b - a) / std::max(a, b);
  }
  expected /= double(rpts.size());
  CHECK_THAT(silhouette(rpts, rlab), Catch::Matchers::WithinAbs(expected, 1e-12));
}
