#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>

#include "hydra/lern.hpp"

using namespace hydra;

namespace {

AccessSequence seq_of(const std::vector<std::uint64_t>& addrs) {
  AccessSequence s;
  std::uint64_t t = 0;
  for (auto a : addrs) s.accesses.push_back({++t, 0, a, AccessKind::Read, 0});
  return s;
}

// the table's 8-access example: a1 a2 a1 a3 a4 a1 a2 a3,
// {a1,a2} share one 64B line, {a3,a4} share another
const std::uint64_t a1 = 0x100, a2 = 0x120, a3 = 0x140, a4 = 0x160;
AccessSequence worked_example() { return seq_of({a1, a2, a1, a3, a4, a1, a2, a3}); }

// independent O(M^2) oracle: next occurrence by forward re-scan
SignatureTrace brute_force_signature(const AccessSequence& seq, unsigned block_bits) {
  SignatureTrace tr;
  tr.block_bits = block_bits;
  tr.m_total = seq.accesses.size();
  const std::size_t m = seq.accesses.size();
  std::vector<std::uint64_t> blocks(m);
  for (std::size_t i = 0; i < m; ++i) blocks[i] = seq.accesses[i].address >> block_bits;
  std::vector<bool> seen(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (seen[i]) continue;
    LineSignature line;
    line.key = blocks[i];
    line.rep_addr = blocks[i];
    for (std::size_t j = i; j < m; ++j) {
      if (blocks[j] != blocks[i]) continue;
      seen[j] = true;
      line.rv.occurrences.push_back(j + 1);
    }
    for (std::size_t j = 0; j + 1 < line.rv.occurrences.size(); ++j)
      line.rv.intervals.push_back(
          std::int64_t(line.rv.occurrences[j + 1] - line.rv.occurrences[j]));
    line.rv.intervals.push_back(-1);
    tr.lines.push_back(std::move(line));
  }
  return tr;
}

bool same_signature(const SignatureTrace& a, const SignatureTrace& b) {
  if (a.lines.size() != b.lines.size() || a.m_total != b.m_total) return false;
  for (std::size_t i = 0; i < a.lines.size(); ++i) {
    if (a.lines[i].key != b.lines[i].key) return false;
    if (a.lines[i].rv.occurrences != b.lines[i].rv.occurrences) return false;
    if (a.lines[i].rv.intervals != b.lines[i].rv.intervals) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("worked example: cache-line reuse vectors") {
  auto tr = build_reuse_signature(worked_example(), 6);
  REQUIRE(tr.n_unique() == 2);
  CHECK(tr.m_total == 8);
  CHECK(tr.lines[0].rv.occurrences == std::vector<std::uint64_t>{1, 2, 3, 6, 7});
  CHECK(tr.lines[0].rv.intervals == std::vector<std::int64_t>{1, 1, 3, 1, -1});
  CHECK(tr.lines[1].rv.occurrences == std::vector<std::uint64_t>{4, 5, 8});
  CHECK(tr.lines[1].rv.intervals == std::vector<std::int64_t>{1, 3, -1});
}

TEST_CASE("worked example: address-level rows reproduced entry for entry") {
  // with block_bits=0 each address is its own line
  auto tr = build_reuse_signature(worked_example(), 0);
  REQUIRE(tr.n_unique() == 4);
  // per-access RI (interval to next same-address occurrence) and running RC
  std::vector<std::int64_t> ri(8);
  std::vector<std::uint64_t> rc(8);
  for (const auto& line : tr.lines)
    for (std::size_t j = 0; j < line.rv.occurrences.size(); ++j) {
      ri[line.rv.occurrences[j] - 1] = line.rv.intervals[j];
      rc[line.rv.occurrences[j] - 1] = j + 1;
    }
  CHECK(ri == std::vector<std::int64_t>{2, 5, 3, 4, -1, -1, -1, -1});
  CHECK(rc == std::vector<std::uint64_t>{1, 1, 2, 1, 1, 3, 2, 2});
}

TEST_CASE("single access and unit-stride reuse") {
  auto one = build_reuse_signature(seq_of({0x40}), 6);
  REQUIRE(one.n_unique() == 1);
  CHECK(one.lines[0].rv.occurrences == std::vector<std::uint64_t>{1});
  CHECK(one.lines[0].rv.intervals == std::vector<std::int64_t>{-1});

  auto k = build_reuse_signature(seq_of({0x40, 0x40, 0x40, 0x40}), 6);
  CHECK(k.lines[0].rv.intervals == std::vector<std::int64_t>{1, 1, 1, -1});
}

TEST_CASE("feature extraction on the worked example") {
  auto tr = build_reuse_signature(worked_example(), 6);
  std::vector<RIFeature> f_ri;
  std::vector<std::uint64_t> f_rc;
  extract_features(tr, f_ri, f_rc);
  CHECK(f_rc == std::vector<std::uint64_t>{5, 3});
  CHECK(f_ri == std::vector<RIFeature>{{4, 0, 0, 0}, {2, 0, 0, 0}});
}

TEST_CASE("binning boundaries") {
  CHECK(bin_intervals({5, 20, 9, 6, -1}) == RIFeature{3, 1, 0, 0});
  CHECK(bin_intervals({500, 501, -1}) == RIFeature{0, 0, 1, 1});
  CHECK(bin_intervals({10, 11, 100, 101, -1}) == RIFeature{1, 2, 1, 0});
  CHECK(bin_intervals({-1}) == RIFeature{0, 0, 0, 0});
}

TEST_CASE("signature invariants hold on random traces") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    std::uniform_int_distribution<std::uint64_t> addr(0, 63);
    std::vector<std::uint64_t> addrs;
    for (int i = 0; i < 500; ++i) addrs.push_back(addr(rng) * 64);
    auto tr = build_reuse_signature(seq_of(addrs), 6);
    std::size_t total = 0;
    for (const auto& line : tr.lines) {
      total += line.rv.reuse_count();
      CHECK(line.rv.intervals.back() == -1);
      for (std::size_t j = 0; j + 1 < line.rv.intervals.size(); ++j)
        CHECK(line.rv.intervals[j] >= 1);
      auto f = bin_intervals(line.rv.intervals);
      CHECK(f.f1 + f.f2 + f.f3 + f.f4 == line.rv.reuse_count() - 1);
    }
    CHECK(total == tr.m_total);
  }
}

TEST_CASE("signature matches the brute-force oracle") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    std::uniform_int_distribution<std::uint64_t> addr(0, 200);
    std::vector<std::uint64_t> addrs;
    for (int i = 0; i < 2000; ++i) addrs.push_back(addr(rng) * 32);
    auto seq = seq_of(addrs);
    CHECK(same_signature(build_reuse_signature(seq, 6), brute_force_signature(seq, 6)));
  }
}

TEST_CASE("rc annotation is order-isomorphic to center values") {
  CHECK(annotate_rc_clusters({2.1, 50.3, 9.8, 400.0}) ==
        std::vector<RcClass>{RcClass::Cold, RcClass::Moderate, RcClass::Light,
                             RcClass::Hot});
  CHECK(annotate_rc_clusters({1, 2, 3, 4}) ==
        std::vector<RcClass>{RcClass::Cold, RcClass::Light, RcClass::Moderate,
                             RcClass::Hot});
  auto tied = annotate_rc_clusters({3, 3, 9, 20});
  CHECK(tied[0] == RcClass::Cold);  // first index wins the tie
  CHECK(tied[1] == RcClass::Light);
}

TEST_CASE("ri annotation dominance rules") {
  CHECK(annotate_ri_clusters({{{90, 5, 3, 2}},
                              {{40, 35, 15, 10}},
                              {{10, 70, 15, 5}},
                              {{5, 10, 40, 45}}}) ==
        std::vector<RiClass>{RiClass::Immediate, RiClass::Near, RiClass::Far,
                             RiClass::Remote});
  CHECK(annotate_ri_clusters({{{100, 0, 0, 0}}}) ==
        std::vector<RiClass>{RiClass::Immediate});
  CHECK(annotate_ri_clusters({{{0, 0, 0, 100}}}) == std::vector<RiClass>{RiClass::Remote});
  CHECK_THROWS_AS(annotate_ri_clusters({{{0, 0, 0, 0}}}), annotation_error);

  // duplicate preferred labels stay a bijection, weaker f1-share demoted
  auto dup = annotate_ri_clusters(
      {{{95, 2, 2, 1}}, {{90, 10, 0, 0}}, {{10, 70, 15, 5}}, {{5, 10, 40, 45}}});
  std::set<RiClass> labels(dup.begin(), dup.end());
  CHECK(labels.size() == 4);
  CHECK(dup[0] == RiClass::Immediate);  // higher f1 share keeps Immediate
  CHECK(dup[1] == RiClass::Near);
}

TEST_CASE("prediction accuracy rules") {
  auto make_model = [](RiClass ri) {
    ClusterModel m;
    m.assignments[1] = {int(RcClass::Hot), int(ri)};
    return m;
  };
  auto make_tr = [](std::vector<std::int64_t> intervals) {
    SignatureTrace tr;
    LineSignature line;
    line.key = line.rep_addr = 1;
    for (std::size_t j = 0; j <= intervals.size(); ++j)
      line.rv.occurrences.push_back(j + 1);  // lengths only matter
    line.rv.intervals = intervals;
    line.rv.intervals.push_back(-1);
    tr.lines.push_back(line);
    return tr;
  };
  CHECK(prediction_accuracy(make_tr({5, 20, 9, 6}), make_model(RiClass::Immediate)) ==
        0.75);
  CHECK(prediction_accuracy(make_tr({5, 20, 9, 6}), make_model(RiClass::Near)) == 1.0);
  CHECK(prediction_accuracy(make_tr({2}), make_model(RiClass::Remote)) == 0.0);
}

TEST_CASE("train_layer end-to-end on toy traces") {
  // all-unique layer: everything No Reuse
  AccessSequence uniq = seq_of({0x000, 0x040, 0x080, 0x0c0});
  uniq.layer_marks = {{0, 0}};
  auto m0 = train_layer(uniq, 0, 6, 1);
  for (const auto& [addr, as] : m0.assignments) CHECK(as == ClusterAssignment{-1, -1});

  // worked example: both lines are f1-pure, so they share the RI cluster
  AccessSequence ex = worked_example();
  ex.layer_marks = {{0, 0}};
  auto m1 = train_layer(ex, 0, 6, 1);
  auto c1 = m1.lookup(a1 >> 6), c2 = m1.lookup(a3 >> 6);
  REQUIRE(c1.ri >= 0);
  REQUIRE(c2.ri >= 0);
  // both centers are f1-pure, so both land in bin-1-dominant labels
  for (const auto& center : m1.ri_centers) {
    CHECK(center[0] > 0);
    CHECK(center[1] + center[2] + center[3] == 0);
  }
  CHECK(RiClass(c1.ri) <= RiClass::Near);
  CHECK(RiClass(c2.ri) <= RiClass::Near);

  auto m2 = train_layer(ex, 0, 6, 1);
  CHECK(m2.assignments.at(a1 >> 6) == m1.assignments.at(a1 >> 6));
  CHECK(m2.rc_centers == m1.rc_centers);
}

TEST_CASE("hashed training merges colliding lines") {
  // identity-width hash reproduces plain training
  AccessSequence ex = worked_example();
  ex.layer_marks = {{0, 0}};
  HashScheme wide{HashKind::Bitmask, 30};
  auto plain = train_layer(ex, 0, 6, 1);
  auto hashed = train_layer_hashed(ex, 0, 6, 1, wide);
  CHECK(hashed.assignments.at(a1 >> 6).ri == plain.assignments.at(a1 >> 6).ri);
  CHECK(hashed.hashed);

  // 1-bit hash: lines 4 and 5 collide (both odd/even merge into 2 keys)
  HashScheme tiny{HashKind::Bitmask, 1};
  auto tr = build_reuse_signature(
      ex, 6, [&](std::uint64_t b) { return tiny.index(b); });
  CHECK(tr.n_unique() == 2);  // 0x4 and 0x5 -> indices 0 and 1
}

TEST_CASE("model export round trips through csv + json") {
  AccessSequence ex = worked_example();
  ex.layer_marks = {{0, 0}};
  auto model = train_layer(ex, 0, 6, 1);
  auto path = (std::filesystem::temp_directory_path() / "hydra_model.csv").string();
  save_model(model, path);
  auto back = load_model(path);
  CHECK(back.assignments.size() == model.assignments.size());
  for (const auto& [addr, as] : model.assignments) CHECK(back.assignments.at(addr) == as);
  CHECK(back.rc_centers == model.rc_centers);
  CHECK(back.ri_annotation == model.ri_annotation);
  CHECK(back.training_hash == model.training_hash);
}
