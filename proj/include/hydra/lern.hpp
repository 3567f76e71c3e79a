#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hydra/hash.hpp"
#include "hydra/kmeans.hpp"
#include "hydra/trace.hpp"

namespace hydra {

/// Occurrence positions of one cache line and the derived reuse
/// intervals; the final interval is always -1.
struct ReuseVector {
  std::vector<std::uint64_t> occurrences;  // 1-based access numbers, strictly increasing
  std::vector<std::int64_t> intervals;     // same length, last entry -1

  std::size_t reuse_count() const { return occurrences.size(); }
};

struct LineSignature {
  std::uint64_t key = 0;       // line address, or table index under hashed training
  std::uint64_t rep_addr = 0;  // first block address mapped to this key
  ReuseVector rv;
};

struct SignatureTrace {
  unsigned block_bits = 6;
  std::vector<LineSignature> lines;  // ordered by first occurrence
  std::size_t m_total = 0;

  std::size_t n_unique() const { return lines.size(); }
};

/// RI histogram of one line over the bins [1,10], (10,100], (100,500], (500,inf).
struct RIFeature {
  std::uint64_t f1 = 0, f2 = 0, f3 = 0, f4 = 0;
  bool operator==(const RIFeature&) const = default;
};

enum class RcClass : int { Cold = 0, Light = 1, Moderate = 2, Hot = 3 };
enum class RiClass : int { Immediate = 0, Near = 1, Far = 2, Remote = 3 };

inline const char* to_string(RcClass c) {
  switch (c) {
    case RcClass::Cold: return "Cold";
    case RcClass::Light: return "Light";
    case RcClass::Moderate: return "Moderate";
    case RcClass::Hot: return "Hot";
  }
  return "?";
}
inline const char* to_string(RiClass c) {
  switch (c) {
    case RiClass::Immediate: return "Immediate";
    case RiClass::Near: return "Near";
    case RiClass::Far: return "Far";
    case RiClass::Remote: return "Remote";
  }
  return "?";
}

struct annotation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline SignatureTrace build_reuse_signature(
    const AccessSequence& seq, unsigned block_bits,
    std::function<std::uint64_t(std::uint64_t)> key_of = {}, std::size_t begin = 0,
    std::size_t end = std::size_t(-1)) {
  SignatureTrace tr;
  tr.block_bits = block_bits;
  if (end == std::size_t(-1)) end = seq.accesses.size();
  tr.m_total = end - begin;
  std::unordered_map<std::uint64_t, std::size_t> index;
  for (std::size_t i = begin; i < end; ++i) {
    const std::uint64_t block = seq.accesses[i].address >> block_bits;
    const std::uint64_t key = key_of ? key_of(block) : block;
    auto [it, inserted] = index.emplace(key, tr.lines.size());
    if (inserted) tr.lines.push_back({key, block, {}});
    tr.lines[it->second].rv.occurrences.push_back(i - begin + 1);  // 1-based
  }
  for (auto& line : tr.lines) {
    auto& rv = line.rv;
    rv.intervals.resize(rv.occurrences.size());
    for (std::size_t j = 0; j + 1 < rv.occurrences.size(); ++j)
      rv.intervals[j] = std::int64_t(rv.occurrences[j + 1] - rv.occurrences[j]);
    rv.intervals.back() = -1;
  }
  return tr;
}

inline RIFeature bin_intervals(const std::vector<std::int64_t>& intervals) {
  RIFeature f;
  for (std::size_t j = 0; j + 1 < intervals.size() + 1; ++j) {
    std::int64_t ri = intervals[j];
    if (ri < 0) continue;  // final -1 excluded
    if (ri <= 10)
      ++f.f1;
    else if (ri <= 100)
      ++f.f2;
    else if (ri <= 500)
      ++f.f3;
    else
      ++f.f4;
  }
  return f;
}

inline void extract_features(const SignatureTrace& tr, std::vector<RIFeature>& f_ri,
                             std::vector<std::uint64_t>& f_rc) {
  f_ri.clear();
  f_rc.clear();
  f_ri.reserve(tr.lines.size());
  f_rc.reserve(tr.lines.size());
  for (const auto& line : tr.lines) {
    f_rc.push_back(line.rv.reuse_count());
    f_ri.push_back(bin_intervals(line.rv.intervals));
  }
}

/// Centers sorted ascending map to Cold, Light, Moderate, Hot; ties keep
/// the lower center index first.
inline std::vector<RcClass> annotate_rc_clusters(const std::vector<double>& rc_centers) {
  std::vector<int> order(rc_centers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rc_centers[a] < rc_centers[b]; });
  std::vector<RcClass> ann(rc_centers.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    ann[order[rank]] = RcClass(int(rank));
  return ann;
}

inline constexpr double kDominanceRatio = 3.0;  // f1 must be 3x the runner-up for Immediate

/// Dominance-rule annotation of de-normalized RI centers. Duplicate
/// labels are resolved by ranking on f1 share so the result stays a
/// bijection over the centers.
inline std::vector<RiClass> annotate_ri_clusters(
    const std::vector<std::array<double, 4>>& ri_centers) {
  const std::size_t k = ri_centers.size();
  std::vector<int> preferred(k);
  std::vector<double> f1_share(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& f = ri_centers[c];
    double total = f[0] + f[1] + f[2] + f[3];
    if (total <= 0) throw annotation_error("empty RI cluster center; re-run with a new seed");
    f1_share[c] = f[0] / total;
    int argmax = 0;
    for (int d = 1; d < 4; ++d)
      if (f[d] > f[argmax]) argmax = d;
    double second = -1;
    for (int d = 0; d < 4; ++d)
      if (d != argmax) second = std::max(second, f[d]);
    if (argmax == 0)
      preferred[c] = f[0] >= kDominanceRatio * second ? int(RiClass::Immediate)
                                                      : int(RiClass::Near);
    else if (argmax == 1)
      preferred[c] = int(RiClass::Far);
    else
      preferred[c] = int(RiClass::Remote);
  }

  // Rank by preferred label, then f1 share (higher share = nearer label).
  std::vector<int> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (preferred[a] != preferred[b]) return preferred[a] < preferred[b];
    return f1_share[a] > f1_share[b];
  });
  std::vector<RiClass> ann(k, RiClass::Immediate);
  std::vector<bool> used(4, false);
  int last = -1;
  std::vector<int> assigned(k, -1);
  for (int idx : order) {
    int lbl = std::max(preferred[idx], last + 1);
    if (lbl > 3) {  // cascade overflow; take the largest free label
      for (int d = 3; d >= 0; --d)
        if (!used[d]) {
          lbl = d;
          break;
        }
    }
    assigned[idx] = lbl;
    used[lbl] = true;
    last = std::max(last, lbl);
  }
  for (std::size_t i = 0; i < k; ++i) ann[i] = RiClass(assigned[i]);
  return ann;
}

struct ClusterAssignment {
  int rc = -1;  // -1 = No Reuse
  int ri = -1;
  bool operator==(const ClusterAssignment&) const = default;
};

struct ClusterModel {
  std::vector<double> rc_centers;
  std::vector<std::array<double, 4>> ri_centers;  // de-normalized
  std::vector<RcClass> rc_annotation;
  std::vector<RiClass> ri_annotation;
  std::unordered_map<std::uint64_t, ClusterAssignment> assignments;  // by block address
  std::array<double, 4> ri_min{}, ri_max{};  // per-dimension normalization ranges
  double rc_silhouette = 0, ri_silhouette = 0;
  HashScheme training_hash;
  bool hashed = false;
  std::uint32_t layer_id = 0;

  /// RC center annotated Cold, in raw reuse-count units.
  double cold_center() const {
    for (std::size_t c = 0; c < rc_centers.size(); ++c)
      if (rc_annotation[c] == RcClass::Cold) return rc_centers[c];
    return 0;
  }

  ClusterAssignment lookup(std::uint64_t block_addr) const {
    auto it = assignments.find(block_addr);
    return it == assignments.end() ? ClusterAssignment{} : it->second;
  }
};

/// Fraction of non-final intervals that fall inside the RI range of the
/// line's annotated cluster (Immediate [1,10], Near [1,100], Far
/// (10,500], Remote (100,inf)).
inline double prediction_accuracy(const SignatureTrace& tr, const ClusterModel& model) {
  std::uint64_t total = 0, correct = 0;
  for (const auto& line : tr.lines) {
    auto as = model.lookup(line.rep_addr);
    if (as.ri < 0) continue;  // No Reuse lines have no non-final intervals
    for (std::int64_t ri : line.rv.intervals) {
      if (ri < 0) continue;
      ++total;
      bool ok = false;
      switch (RiClass(as.ri)) {
        case RiClass::Immediate: ok = ri >= 1 && ri <= 10; break;
        case RiClass::Near: ok = ri >= 1 && ri <= 100; break;
        case RiClass::Far: ok = ri > 10 && ri <= 500; break;
        case RiClass::Remote: ok = ri > 100; break;
      }
      correct += ok;
    }
  }
  return total == 0 ? 1.0 : double(correct) / double(total);
}

namespace detail {

inline ClusterModel train_from_signature(const SignatureTrace& tr, std::uint64_t seed,
                                         int k) {
  std::vector<RIFeature> f_ri;
  std::vector<std::uint64_t> f_rc;
  extract_features(tr, f_ri, f_rc);

  // Single-occurrence lines go to the No Reuse cluster; cluster the rest.
  std::vector<std::size_t> multi;
  for (std::size_t i = 0; i < tr.lines.size(); ++i)
    if (f_rc[i] > 1) multi.push_back(i);

  ClusterModel model;
  for (const auto& line : tr.lines) model.assignments[line.rep_addr] = {-1, -1};
  if (multi.empty()) return model;

  // RC clustering on raw reuse counts.
  std::vector<std::vector<double>> rc_pts;
  rc_pts.reserve(multi.size());
  for (auto i : multi) rc_pts.push_back({double(f_rc[i])});
  auto rc_res = kmeans(rc_pts, k, seed);
  model.rc_centers.resize(rc_res.k_used);
  for (int c = 0; c < rc_res.k_used; ++c) model.rc_centers[c] = rc_res.centers[c][0];
  model.rc_annotation = annotate_rc_clusters(model.rc_centers);
  if (rc_res.k_used >= 2) model.rc_silhouette = silhouette(rc_pts, rc_res.labels);

  // RI clustering on min-max normalized histograms.
  for (int d = 0; d < 4; ++d) {
    model.ri_min[d] = std::numeric_limits<double>::max();
    model.ri_max[d] = std::numeric_limits<double>::lowest();
  }
  auto dims = [&](const RIFeature& f) {
    return std::array<double, 4>{double(f.f1), double(f.f2), double(f.f3), double(f.f4)};
  };
  for (auto i : multi) {
    auto v = dims(f_ri[i]);
    for (int d = 0; d < 4; ++d) {
      model.ri_min[d] = std::min(model.ri_min[d], v[d]);
      model.ri_max[d] = std::max(model.ri_max[d], v[d]);
    }
  }
  std::vector<std::vector<double>> ri_pts;
  ri_pts.reserve(multi.size());
  for (auto i : multi) {
    auto v = dims(f_ri[i]);
    std::vector<double> p(4);
    for (int d = 0; d < 4; ++d) {
      double range = model.ri_max[d] - model.ri_min[d];
      p[d] = range > 0 ? (v[d] - model.ri_min[d]) / range : 0.0;
    }
    ri_pts.push_back(std::move(p));
  }
  auto ri_res = kmeans(ri_pts, k, seed + 1);
  model.ri_centers.resize(ri_res.k_used);
  for (int c = 0; c < ri_res.k_used; ++c)
    for (int d = 0; d < 4; ++d)
      model.ri_centers[c][d] =
          ri_res.centers[c][d] * (model.ri_max[d] - model.ri_min[d]) + model.ri_min[d];
  model.ri_annotation = annotate_ri_clusters(model.ri_centers);
  if (ri_res.k_used >= 2) model.ri_silhouette = silhouette(ri_pts, ri_res.labels);

  for (std::size_t j = 0; j < multi.size(); ++j) {
    const auto& line = tr.lines[multi[j]];
    model.assignments[line.rep_addr] = {int(model.rc_annotation[rc_res.labels[j]]),
                                        int(model.ri_annotation[ri_res.labels[j]])};
  }
  return model;
}

}  // namespace detail

inline ClusterModel train_layer(const AccessSequence& seq, std::uint32_t layer_id,
                                unsigned block_bits, std::uint64_t seed, int k = 4) {
  auto [begin, end] = seq.layer_range(layer_id);
  auto tr = build_reuse_signature(seq, block_bits, {}, begin, end);
  auto model = detail::train_from_signature(tr, seed, k);
  model.layer_id = layer_id;
  return model;
}

/// Same pipeline, but lines are merged by their reduced table index so
/// the model learns under the runtime aliasing conditions.
inline ClusterModel train_layer_hashed(const AccessSequence& seq, std::uint32_t layer_id,
                                       unsigned block_bits, std::uint64_t seed,
                                       const HashScheme& hash, int k = 4) {
  auto [begin, end] = seq.layer_range(layer_id);
  auto tr = build_reuse_signature(
      seq, block_bits, [&](std::uint64_t block) { return hash.index(block); }, begin, end);
  auto model = detail::train_from_signature(tr, seed, k);
  model.layer_id = layer_id;
  model.hashed = true;
  model.training_hash = hash;
  return model;
}

// ---- model export / import (the L-RPT load image) ----

inline void save_model(const ClusterModel& model, const std::string& csv_path) {
  {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write model export: " + csv_path);
    out << "line_addr_hex,rc_cluster,ri_cluster\n";
    std::map<std::uint64_t, ClusterAssignment> sorted(model.assignments.begin(),
                                                      model.assignments.end());
    char buf[64];
    for (const auto& [addr, as] : sorted) {
      std::snprintf(buf, sizeof buf, "0x%llx,%d,%d\n", (unsigned long long)addr, as.rc,
                    as.ri);
      out << buf;
    }
  }
  nlohmann::json j;
  j["layer_id"] = model.layer_id;
  j["rc_centers"] = model.rc_centers;
  j["ri_centers"] = model.ri_centers;
  std::vector<int> rc_ann, ri_ann;
  for (auto a : model.rc_annotation) rc_ann.push_back(int(a));
  for (auto a : model.ri_annotation) ri_ann.push_back(int(a));
  j["rc_annotation"] = rc_ann;
  j["ri_annotation"] = ri_ann;
  j["ri_min"] = model.ri_min;
  j["ri_max"] = model.ri_max;
  j["rc_silhouette"] = model.rc_silhouette;
  j["ri_silhouette"] = model.ri_silhouette;
  j["hashed"] = model.hashed;
  j["training_hash"] = model.training_hash.to_string();
  std::ofstream out(csv_path + ".json");
  out << j.dump(2) << '\n';
}

inline ClusterModel load_model(const std::string& csv_path) {
  ClusterModel model;
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open model export: " + csv_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || lineno == 1) continue;
    unsigned long long addr = 0;
    int rc = 0, ri = 0;
    if (std::sscanf(line.c_str(), "0x%llx,%d,%d", &addr, &rc, &ri) != 3)
      throw parse_error(csv_path + ": malformed record at line " + std::to_string(lineno));
    model.assignments[addr] = {rc, ri};
  }
  std::ifstream jin(csv_path + ".json");
  if (jin) {
    nlohmann::json j = nlohmann::json::parse(jin);
    model.layer_id = j["layer_id"];
    model.rc_centers = j["rc_centers"].get<std::vector<double>>();
    model.ri_centers = j["ri_centers"].get<std::vector<std::array<double, 4>>>();
    for (int a : j["rc_annotation"].get<std::vector<int>>())
      model.rc_annotation.push_back(RcClass(a));
    for (int a : j["ri_annotation"].get<std::vector<int>>())
      model.ri_annotation.push_back(RiClass(a));
    model.ri_min = j["ri_min"];
    model.ri_max = j["ri_max"];
    model.rc_silhouette = j["rc_silhouette"];
    model.ri_silhouette = j["ri_silhouette"];
    model.hashed = j["hashed"];
    model.training_hash = HashScheme::from_string(j["training_hash"]);
  }
  return model;
}

}  // namespace hydra
