#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hydra/hash.hpp"
#include "hydra/lern.hpp"

namespace hydra {

struct LRPTConfig {
  std::uint64_t entries = std::uint64_t(1) << 19;  // 512K
  HashScheme hash{HashKind::Bitmask, 19};

  void validate() const {
    if (entries == 0 || (entries & (entries - 1)) != 0)
      throw config_error("L-RPT entries must be a power of two");
    if (hash.entries() != entries)
      throw config_error("L-RPT hash bits do not match entry count");
  }
};

/// Tagless direct-mapped reuse predictor table: 5 bits per entry
/// (valid + 2-bit RC cluster + 2-bit RI cluster). Colliding loads
/// overwrite; training under the same hash internalizes the aliasing.
class LRPT {
 public:
  explicit LRPT(LRPTConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    table_.resize(cfg_.entries);
  }

  const LRPTConfig& config() const { return cfg_; }

  void clear() { std::fill(table_.begin(), table_.end(), Entry{}); }

  /// Populate from a per-layer cluster model; replaces current contents.
  void load(const ClusterModel& model) {
    if (model.hashed && !(model.training_hash == cfg_.hash))
      throw config_error("model export hash " + model.training_hash.to_string() +
                         " does not match L-RPT hash " + cfg_.hash.to_string());
    clear();
    // sorted order keeps collision outcomes stable across export round-trips
    std::map<std::uint64_t, ClusterAssignment> sorted(model.assignments.begin(),
                                                      model.assignments.end());
    for (const auto& [block, as] : sorted) {
      if (as.rc < 0 || as.ri < 0) continue;  // No Reuse stays invalid
      Entry& e = table_[cfg_.hash.index(block)];
      e.valid = true;
      e.rc = std::uint8_t(as.rc);
      e.ri = std::uint8_t(as.ri);
    }
  }

  /// nullopt = invalid entry = No Reuse.
  std::optional<ClusterAssignment> lookup(std::uint64_t byte_address) const {
    const Entry& e = table_[cfg_.hash.index(byte_address >> 6)];
    if (!e.valid) return std::nullopt;
    return ClusterAssignment{int(e.rc), int(e.ri)};
  }

  std::uint64_t footprint_bits() const { return cfg_.entries * 5; }

  void dump_csv(std::ostream& out) const {
    out << "index,valid,rc,ri\n";
    for (std::uint64_t i = 0; i < table_.size(); ++i) {
      const Entry& e = table_[i];
      out << i << ',' << int(e.valid) << ',' << int(e.rc) << ',' << int(e.ri) << '\n';
    }
  }

 private:
  struct Entry {
    bool valid = false;
    std::uint8_t rc = 0;
    std::uint8_t ri = 0;
  };
  LRPTConfig cfg_;
  std::vector<Entry> table_;
};

enum class ShipEvent { InsertEvictNoReuse, HitReref };
enum class ReusePrediction { Reuse, NoReuse };

/// SHiP-style signature predictor: saturating counters indexed by the
/// low signature bits of the PC tag (cores) or block address
/// (accelerator). Counter 0 predicts no reuse.
class ShipTable {
 public:
  explicit ShipTable(std::size_t entries = 4096, int counter_bits = 3)
      : mask_(entries - 1),
        max_(std::uint8_t((1u << counter_bits) - 1)),
        counters_(entries, std::uint8_t((1u << counter_bits) / 2 - 1)) {
    if (entries == 0 || (entries & (entries - 1)) != 0)
      throw config_error("SHIP table entries must be a power of two");
  }

  void observe(std::uint64_t signature, ShipEvent event) {
    std::uint8_t& c = counters_[signature & mask_];
    if (event == ShipEvent::HitReref) {
      if (c < max_) ++c;
    } else {
      if (c > 0) --c;
    }
  }

  ReusePrediction predict(std::uint64_t signature) const {
    return counters_[signature & mask_] == 0 ? ReusePrediction::NoReuse
                                             : ReusePrediction::Reuse;
  }

  std::uint8_t counter(std::uint64_t signature) const { return counters_[signature & mask_]; }

 private:
  std::uint64_t mask_;
  std::uint8_t max_;
  std::vector<std::uint8_t> counters_;
};

}  // namespace hydra
