#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hydra {

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AccessKind : std::uint8_t { Read, Write };

/// One timed read/write event from a requester. Timestamps are
/// requester-local issue cycles; addresses are byte addresses.
struct MemoryAccess {
  std::uint64_t timestamp = 0;
  std::uint32_t requester = 0;
  std::uint64_t address = 0;
  AccessKind kind = AccessKind::Read;
  std::uint64_t tag = 0;  // PC surrogate for cores, zero for the accelerator

  bool operator==(const MemoryAccess&) const = default;
};

struct LayerMark {
  std::size_t pos = 0;
  std::uint32_t layer = 0;
  bool operator==(const LayerMark&) const = default;
};

struct AccessSequence {
  std::vector<MemoryAccess> accesses;
  std::string meta;
  std::vector<LayerMark> layer_marks;  // accelerator traces only

  std::size_t size() const { return accesses.size(); }
  bool empty() const { return accesses.empty(); }

  // [begin, end) access range of a layer; end = next mark or sequence end.
  std::pair<std::size_t, std::size_t> layer_range(std::uint32_t layer) const {
    for (std::size_t i = 0; i < layer_marks.size(); ++i) {
      if (layer_marks[i].layer == layer) {
        std::size_t end =
            i + 1 < layer_marks.size() ? layer_marks[i + 1].pos : accesses.size();
        return {layer_marks[i].pos, end};
      }
    }
    throw validation_error("layer " + std::to_string(layer) + " not present in trace");
  }
};

/// Merge consecutive accesses to the same block into one access (the
/// first of each run survives with its timestamp and kind), modeling a
/// coalescing front-end that issues one request per cache block. Layer
/// marks are remapped and always start a fresh run.
inline AccessSequence coalesce_trace(const AccessSequence& seq, std::uint64_t block_bytes) {
  AccessSequence out;
  out.meta = seq.meta;
  std::uint64_t prev_block = ~0ull;
  std::size_t next_mark = 0;
  for (std::size_t i = 0; i < seq.accesses.size(); ++i) {
    bool at_mark = false;
    while (next_mark < seq.layer_marks.size() && seq.layer_marks[next_mark].pos == i) {
      out.layer_marks.push_back({out.accesses.size(), seq.layer_marks[next_mark].layer});
      ++next_mark;
      at_mark = true;
    }
    const std::uint64_t block = seq.accesses[i].address / block_bytes;
    if (at_mark || block != prev_block) out.accesses.push_back(seq.accesses[i]);
    prev_block = block;
  }
  while (next_mark < seq.layer_marks.size())
    out.layer_marks.push_back({out.accesses.size(), seq.layer_marks[next_mark++].layer});
  return out;
}

enum class TraceFormat { CSV, Binary };

namespace detail {

inline constexpr char kTraceMagic[4] = {'H', 'T', 'R', 'C'};
inline constexpr std::uint8_t kTraceVersion = 1;
inline constexpr std::size_t kBinaryRecordSize = 26;  // ts:8 req:1 kind:1 addr:8 tag:8

inline void check_monotone(const AccessSequence& seq) {
  std::unordered_map<std::uint32_t, std::uint64_t> last_ts;
  for (std::size_t i = 0; i < seq.accesses.size(); ++i) {
    const auto& a = seq.accesses[i];
    auto it = last_ts.find(a.requester);
    if (it != last_ts.end() && a.timestamp < it->second)
      throw validation_error("non-monotone timestamp for requester " +
                             std::to_string(a.requester) + " at record " +
                             std::to_string(i + 1));
    last_ts[a.requester] = a.timestamp;
  }
}

inline AccessSequence parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open trace file: " + path);
  AccessSequence seq;
  seq.meta = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("ts,", 0) == 0) continue;  // header
    MemoryAccess a;
    char kind = 0;
    unsigned long long ts = 0, addr = 0, tag = 0;
    unsigned req = 0;
    int matched = std::sscanf(line.c_str(), "%llu,%u,%c,%llx,%llu", &ts, &req, &kind,
                              &addr, &tag);
    // addr must carry the 0x prefix; sscanf %llx also eats it, so check it exists
    if (matched != 5 || line.find(",0x") == std::string::npos)
      throw parse_error(path + ": malformed record at line " + std::to_string(lineno));
    if (kind != 'R' && kind != 'W')
      throw parse_error(path + ": bad access kind '" + std::string(1, kind) +
                        "' at line " + std::to_string(lineno));
    a.timestamp = ts;
    a.requester = req;
    a.kind = kind == 'R' ? AccessKind::Read : AccessKind::Write;
    a.address = addr;
    a.tag = tag;
    seq.accesses.push_back(a);
  }
  return seq;
}

inline AccessSequence parse_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open trace file: " + path);
  char magic[4];
  std::uint8_t version = 0;
  if (!in.read(magic, 4) || !in.read(reinterpret_cast<char*>(&version), 1))
    throw parse_error(path + ": truncated header");
  if (std::string(magic, 4) != std::string(kTraceMagic, 4))
    throw parse_error(path + ": bad magic");
  if (version != kTraceVersion)
    throw parse_error(path + ": unsupported version " + std::to_string(version));
  AccessSequence seq;
  seq.meta = path;
  char rec[kBinaryRecordSize];
  std::size_t n = 0;
  while (in.read(rec, kBinaryRecordSize)) {
    ++n;
    MemoryAccess a;
    auto rd = [&](std::size_t off, std::size_t len) {
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < len; ++i)
        v |= std::uint64_t(std::uint8_t(rec[off + i])) << (8 * i);
      return v;
    };
    a.timestamp = rd(0, 8);
    a.requester = std::uint32_t(rd(8, 1));
    std::uint8_t kind = std::uint8_t(rd(9, 1));
    if (kind > 1)
      throw parse_error(path + ": bad access kind at record " + std::to_string(n));
    a.kind = kind ? AccessKind::Write : AccessKind::Read;
    a.address = rd(10, 8);
    a.tag = rd(18, 8);
    seq.accesses.push_back(a);
  }
  if (in.gcount() != 0)
    throw parse_error(path + ": truncated record at offset " +
                      std::to_string(5 + n * kBinaryRecordSize));
  return seq;
}

inline std::string layers_sidecar_path(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string dir = slash == std::string::npos ? "" : path.substr(0, slash + 1);
  return dir + "layers.csv";
}

inline void load_layer_marks(AccessSequence& seq, const std::string& sidecar) {
  std::ifstream in(sidecar);
  if (!in) return;  // sidecar is optional
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("pos,", 0) == 0) continue;
    unsigned long long pos = 0;
    unsigned layer = 0;
    if (std::sscanf(line.c_str(), "%llu,%u", &pos, &layer) != 2)
      throw parse_error(sidecar + ": malformed record at line " + std::to_string(lineno));
    seq.layer_marks.push_back({std::size_t(pos), layer});
  }
}

}  // namespace detail

inline AccessSequence parse_trace(const std::string& path, TraceFormat format,
                                  bool load_layers = true) {
  AccessSequence seq = format == TraceFormat::CSV ? detail::parse_csv(path)
                                                  : detail::parse_binary(path);
  detail::check_monotone(seq);
  if (load_layers) detail::load_layer_marks(seq, detail::layers_sidecar_path(path));
  return seq;
}

inline void write_trace(const AccessSequence& seq, const std::string& path,
                        TraceFormat format) {
  if (format == TraceFormat::CSV) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << "ts,req,kind,addr,tag\n";
    char buf[96];
    for (const auto& a : seq.accesses) {
      std::snprintf(buf, sizeof buf, "%llu,%u,%c,0x%llx,%llu\n",
                    (unsigned long long)a.timestamp, a.requester,
                    a.kind == AccessKind::Read ? 'R' : 'W',
                    (unsigned long long)a.address, (unsigned long long)a.tag);
      out << buf;
    }
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out.write(detail::kTraceMagic, 4);
    out.put(char(detail::kTraceVersion));
    for (const auto& a : seq.accesses) {
      char rec[detail::kBinaryRecordSize];
      auto wr = [&](std::size_t off, std::size_t len, std::uint64_t v) {
        for (std::size_t i = 0; i < len; ++i) rec[off + i] = char((v >> (8 * i)) & 0xff);
      };
      wr(0, 8, a.timestamp);
      wr(8, 1, a.requester);
      wr(9, 1, a.kind == AccessKind::Write ? 1 : 0);
      wr(10, 8, a.address);
      wr(18, 8, a.tag);
      out.write(rec, detail::kBinaryRecordSize);
    }
  }
  if (!seq.layer_marks.empty()) {
    std::ofstream out(detail::layers_sidecar_path(path));
    out << "pos,layer\n";
    for (const auto& m : seq.layer_marks) out << m.pos << ',' << m.layer << '\n';
  }
}

}  // namespace hydra
