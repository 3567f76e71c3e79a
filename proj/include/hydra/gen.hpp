#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hydra/trace.hpp"

namespace hydra {

enum class Dataflow { OS, WS, IS };

struct LayerSpec {
  int ifmap_h = 0, ifmap_w = 0;
  int filt_h = 0, filt_w = 0;
  int channels = 1;
  int num_filters = 1;
  int stride = 1;
  Dataflow dataflow = Dataflow::OS;

  int out_h() const { return (ifmap_h - filt_h) / stride + 1; }
  int out_w() const { return (ifmap_w - filt_w) / stride + 1; }

  void validate() const {
    if (ifmap_h <= 0 || ifmap_w <= 0 || filt_h <= 0 || filt_w <= 0 || channels <= 0 ||
        num_filters <= 0)
      throw validation_error("layer dimensions must be positive");
    if (filt_h > ifmap_h || filt_w > ifmap_w)
      throw validation_error("filter larger than ifmap");
    if (stride < 1) throw validation_error("stride must be >= 1");
  }
};

struct AcceleratorSpec {
  int pe_rows = 0, pe_cols = 0;
  int sram_ifmap_kb = 0, sram_ofmap_kb = 0, sram_filter_kb = 0;
  std::vector<LayerSpec> layers;

  void validate() const {
    if (pe_rows <= 0 || pe_cols <= 0) throw validation_error("PE array must be positive");
    if (sram_ifmap_kb <= 0 || sram_ofmap_kb <= 0 || sram_filter_kb <= 0)
      throw validation_error("SRAM sizes must be positive");
    for (const auto& l : layers) l.validate();
  }
};

namespace detail {

inline constexpr std::uint64_t kIfmapBase = 0x1'0000'0000ull;
inline constexpr std::uint64_t kFilterBase = 0x2'0000'0000ull;
inline constexpr std::uint64_t kOfmapBase = 0x3'0000'0000ull;
inline constexpr std::uint64_t kLayerStride = 0x0100'0000ull;
inline constexpr std::uint64_t kElemBytes = 4;

// Tile schedule shared by all dataflows; the dataflow only permutes the
// emission order, so OS and WS produce the same address multiset.
struct TileSchedule {
  int tile_h = 0, tile_w = 0;  // output tile dims
  int filters_per_group = 0;
  int tiles_y = 0, tiles_x = 0, groups = 0;
};

inline TileSchedule plan_tiles(const AcceleratorSpec& spec, const LayerSpec& l) {
  // Double buffering: half the SRAM holds the working tile.
  const std::uint64_t if_half = std::uint64_t(spec.sram_ifmap_kb) * 1024 / 2;
  const std::uint64_t of_half = std::uint64_t(spec.sram_ofmap_kb) * 1024 / 2;
  const std::uint64_t fl_half = std::uint64_t(spec.sram_filter_kb) * 1024 / 2;

  const std::uint64_t filt_bytes = std::uint64_t(l.filt_h) * l.filt_w * l.channels * kElemBytes;
  if (filt_bytes > fl_half)
    throw validation_error(
        "one filter does not fit the filter SRAM; use a smaller layer or larger SRAM");
  TileSchedule ts;
  ts.filters_per_group = int(std::min<std::uint64_t>(l.num_filters, fl_half / filt_bytes));

  auto fits = [&](int th, int tw, int gf) {
    std::uint64_t patch = std::uint64_t((th - 1) * l.stride + l.filt_h) *
                          std::uint64_t((tw - 1) * l.stride + l.filt_w) * l.channels *
                          kElemBytes;
    std::uint64_t otile = std::uint64_t(th) * tw * gf * kElemBytes;
    return patch <= if_half && otile <= of_half;
  };
  while (ts.filters_per_group > 1 && !fits(1, 1, ts.filters_per_group))
    --ts.filters_per_group;
  if (!fits(1, 1, ts.filters_per_group))
    throw validation_error(
        "a 1x1 output tile does not fit the ifmap/ofmap SRAM; use a smaller layer");

  // Grow a square-ish output tile as far as the SRAMs allow.
  ts.tile_h = ts.tile_w = 1;
  bool grew = true;
  while (grew) {
    grew = false;
    if (ts.tile_w < l.out_w() && fits(ts.tile_h, ts.tile_w + 1, ts.filters_per_group)) {
      ++ts.tile_w;
      grew = true;
    }
    if (ts.tile_h < l.out_h() && fits(ts.tile_h + 1, ts.tile_w, ts.filters_per_group)) {
      ++ts.tile_h;
      grew = true;
    }
  }
  ts.tiles_y = (l.out_h() + ts.tile_h - 1) / ts.tile_h;
  ts.tiles_x = (l.out_w() + ts.tile_w - 1) / ts.tile_w;
  ts.groups = (l.num_filters + ts.filters_per_group - 1) / ts.filters_per_group;
  return ts;
}

}  // namespace detail

/// Off-chip access trace of a double-buffered systolic accelerator.
/// Per SRAM refill, each distinct tile address is read once; PE compute
/// gaps separate refills. IFMAP/FILTER/OFMAP live in disjoint regions.
inline AccessSequence generate_systolic_trace(const AcceleratorSpec& spec,
                                              std::uint64_t seed) {
  spec.validate();
  AccessSequence seq;
  seq.meta = "systolic seed=" + std::to_string(seed);
  std::uint64_t t = 0;

  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    const auto ts = detail::plan_tiles(spec, l);
    seq.layer_marks.push_back({seq.accesses.size(), std::uint32_t(li)});

    const std::uint64_t if_base = detail::kIfmapBase + li * detail::kLayerStride;
    const std::uint64_t fl_base = detail::kFilterBase + li * detail::kLayerStride;
    const std::uint64_t of_base = detail::kOfmapBase + li * detail::kLayerStride;

    auto read = [&](std::uint64_t addr) {
      seq.accesses.push_back({t++, 0, addr, AccessKind::Read, 0});
    };
    auto write = [&](std::uint64_t addr) {
      seq.accesses.push_back({t++, 0, addr, AccessKind::Write, 0});
    };

    const bool weight_major = l.dataflow != Dataflow::OS;  // IS reuses WS scheduling

    // One refill + compute + drain for output tile (ty,tx) and filter group g.
    auto emit_unit = [&](int ty, int tx, int g) {
      const int oy0 = ty * ts.tile_h, ox0 = tx * ts.tile_w;
      const int oy1 = std::min(oy0 + ts.tile_h, l.out_h());
      const int ox1 = std::min(ox0 + ts.tile_w, l.out_w());
      const int f0 = g * ts.filters_per_group;
      const int f1 = std::min(f0 + ts.filters_per_group, l.num_filters);

      const int iy0 = oy0 * l.stride, ix0 = ox0 * l.stride;
      const int iy1 = (oy1 - 1) * l.stride + l.filt_h;
      const int ix1 = (ox1 - 1) * l.stride + l.filt_w;

      auto ifmap_addr = [&](int c, int y, int x) {
        return if_base +
               (std::uint64_t(c) * l.ifmap_h * l.ifmap_w + std::uint64_t(y) * l.ifmap_w + x) *
                   detail::kElemBytes;
      };
      auto emit_filters = [&] {
        for (int f = f0; f < f1; ++f)
          for (int c = 0; c < l.channels; ++c)
            for (int y = 0; y < l.filt_h; ++y)
              for (int x = 0; x < l.filt_w; ++x)
                read(fl_base + (((std::uint64_t(f) * l.channels + c) * l.filt_h + y) *
                                    l.filt_w +
                                x) *
                                   detail::kElemBytes);
      };
      auto emit_ifmap = [&] {
        if (weight_major) {  // column-major streaming under WS/IS
          for (int c = 0; c < l.channels; ++c)
            for (int x = ix0; x < ix1; ++x)
              for (int y = iy0; y < iy1; ++y) read(ifmap_addr(c, y, x));
        } else {
          for (int c = 0; c < l.channels; ++c)
            for (int y = iy0; y < iy1; ++y)
              for (int x = ix0; x < ix1; ++x) read(ifmap_addr(c, y, x));
        }
      };

      if (weight_major) {
        emit_filters();
        emit_ifmap();
      } else {
        emit_ifmap();
        emit_filters();
      }

      const std::uint64_t macs = std::uint64_t(oy1 - oy0) * (ox1 - ox0) * (f1 - f0) *
                                 l.filt_h * l.filt_w * l.channels;
      t += (macs + std::uint64_t(spec.pe_rows) * spec.pe_cols - 1) /
           (std::uint64_t(spec.pe_rows) * spec.pe_cols);

      for (int f = f0; f < f1; ++f)
        for (int y = oy0; y < oy1; ++y)
          for (int x = ox0; x < ox1; ++x)
            write(of_base +
                  (std::uint64_t(f) * l.out_h() * l.out_w() + std::uint64_t(y) * l.out_w() +
                   x) *
                      detail::kElemBytes);
    };

    if (weight_major) {
      for (int g = 0; g < ts.groups; ++g)
        for (int tx = 0; tx < ts.tiles_x; ++tx)
          for (int ty = 0; ty < ts.tiles_y; ++ty) emit_unit(ty, tx, g);
    } else {
      for (int ty = 0; ty < ts.tiles_y; ++ty)
        for (int tx = 0; tx < ts.tiles_x; ++tx)
          for (int g = 0; g < ts.groups; ++g) emit_unit(ty, tx, g);
    }
  }
  return seq;
}

enum class CoreProfile { CI, LI, MI };

inline CoreProfile core_profile_from_string(const std::string& s) {
  if (s == "CI") return CoreProfile::CI;
  if (s == "LI") return CoreProfile::LI;
  if (s == "MI") return CoreProfile::MI;
  throw config_error("unknown core profile: " + s);
}

/// Synthetic core access stream. CI: sparse, private-cache-resident.
/// LI: dense with a footprint between private cache and LLC. MI: dense
/// streaming over a footprint far beyond the LLC.
inline AccessSequence generate_core_trace(CoreProfile profile, std::size_t length,
                                          std::uint64_t footprint_bytes,
                                          std::uint64_t seed,
                                          std::uint64_t base_address = 0x4000'0000ull) {
  if (length == 0) throw validation_error("trace length must be > 0");
  if (footprint_bytes == 0) throw validation_error("footprint must be > 0");
  std::mt19937_64 rng(seed);
  const std::uint64_t lines = std::max<std::uint64_t>(1, footprint_bytes / 64);

  std::uint64_t gap_lo, gap_hi;
  switch (profile) {
    case CoreProfile::CI: gap_lo = 160; gap_hi = 240; break;
    case CoreProfile::LI: gap_lo = 12; gap_hi = 20; break;
    case CoreProfile::MI: gap_lo = 12; gap_hi = 20; break;
  }
  std::uniform_int_distribution<std::uint64_t> gap(gap_lo, gap_hi);
  std::uniform_int_distribution<std::uint64_t> line(0, lines - 1);
  std::uniform_int_distribution<int> wr(0, 9);

  AccessSequence seq;
  seq.meta = "core profile seed=" + std::to_string(seed);
  seq.accesses.reserve(length);
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < length; ++i) {
    t += gap(rng);
    MemoryAccess a;
    a.timestamp = t;
    a.address = base_address + line(rng) * 64 + (rng() & 0x38);
    a.kind = wr(rng) < 3 ? AccessKind::Write : AccessKind::Read;
    a.tag = 0x400000 + 8 * (i % 16);  // synthetic PC surrogates
    seq.accesses.push_back(a);
  }
  return seq;
}

}  // namespace hydra
