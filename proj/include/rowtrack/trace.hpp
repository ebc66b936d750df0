#pragma once

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rowtrack/error.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/geometry.hpp"

namespace rowtrack {

// ---------------------------------------------------------------------------
// Text trace files

enum class TraceKind : std::uint8_t { access, activation };

struct Trace {
  TraceKind kind = TraceKind::access;
  std::vector<MemoryAccess> accesses;
  std::vector<ActivationEvent> activations;

  std::size_t size() const noexcept { return kind == TraceKind::access ? accesses.size() : activations.size(); }
};

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::string read_file(const std::string& path) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw Error(Errc::Io, "cannot open " + path);
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw Error(Errc::Io, "corrupt gzip stream in " + path);
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw Error(Errc::Io, "cannot create " + path);
    const int n = data.empty() ? 0 : gzwrite(f, data.data(), static_cast<unsigned>(data.size()));
    gzclose(f);
    if (!data.empty() && n <= 0) throw Error(Errc::Io, "gzip write failed for " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot create " + path);
  out << data;
  if (!out) throw Error(Errc::Io, "write failed for " + path);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s, int base = 10) {
  if (base == 16) {
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
    else return std::nullopt;
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses trace text. The format (access or activation) is detected from
/// the first record's kind letter.
inline Trace parse_trace(std::string_view text) {
  Trace t;
  bool kind_known = false;
  std::uint64_t last = 0;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    auto bad = [&](const std::string& why) {
      return Error(Errc::MalformedTrace, "line " + std::to_string(lineno) + ": " + why);
    };
    if (tok.size() != 3 || tok[2].size() != 1) throw bad("expected '<time_ns> <addr|row> <kind>'");
    const char k = tok[2][0];
    const bool is_access = k == 'R' || k == 'W';
    if (!is_access && k != 'D' && k != 'V' && k != 'M') throw bad("unknown kind '" + std::string(tok[2]) + "'");
    if (!kind_known) {
      t.kind = is_access ? TraceKind::access : TraceKind::activation;
      kind_known = true;
    } else if (is_access != (t.kind == TraceKind::access)) {
      throw bad("access and activation records mixed");
    }
    const auto time = detail::parse_u64(tok[0]);
    if (!time) throw bad("bad timestamp '" + std::string(tok[0]) + "'");
    if (*time < last) {
      throw Error(Errc::NonMonotonicTime, "line " + std::to_string(lineno) + ": time " + std::to_string(*time) +
                                              " after " + std::to_string(last));
    }
    last = *time;
    if (is_access) {
      const auto addr = detail::parse_u64(tok[1], 16);
      if (!addr) throw bad("bad hex address '" + std::string(tok[1]) + "'");
      t.accesses.push_back({*time, *addr, k == 'W' ? AccessKind::write : AccessKind::read});
    } else {
      const auto row = detail::parse_u64(tok[1]);
      if (!row) throw bad("bad row id '" + std::string(tok[1]) + "'");
      const Cause c = k == 'D' ? Cause::demand : k == 'V' ? Cause::victim_refresh : Cause::metadata;
      t.activations.push_back({*time, *row, c});
    }
  }
  return t;
}

inline Trace read_trace(const std::string& path) { return parse_trace(detail::read_file(path)); }

inline std::string format_trace(const std::vector<MemoryAccess>& accesses) {
  std::string out;
  out.reserve(accesses.size() * 24);
  char buf[64];
  for (const auto& a : accesses) {
    const int n = std::snprintf(buf, sizeof buf, "%llu 0x%llx %c\n", static_cast<unsigned long long>(a.time_ns),
                                static_cast<unsigned long long>(a.addr), a.kind == AccessKind::write ? 'W' : 'R');
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

inline std::string format_trace(const std::vector<ActivationEvent>& events) {
  std::string out;
  out.reserve(events.size() * 20);
  char buf[64];
  for (const auto& e : events) {
    const int n = std::snprintf(buf, sizeof buf, "%llu %llu %c\n", static_cast<unsigned long long>(e.time_ns),
                                static_cast<unsigned long long>(e.row_id), cause_letter(e.cause));
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

inline void write_trace(const std::vector<MemoryAccess>& accesses, const std::string& path) {
  detail::write_file(path, format_trace(accesses));
}

inline void write_trace(const std::vector<ActivationEvent>& events, const std::string& path) {
  detail::write_file(path, format_trace(events));
}

/// Access stream as seen by a tracker that observes every access (no cache).
inline std::vector<ActivationEvent> to_activations(const Geometry& geo, const std::vector<MemoryAccess>& accesses) {
  std::vector<ActivationEvent> out;
  out.reserve(accesses.size());
  for (const auto& a : accesses) out.push_back({a.time_ns, geo.map_address(a.addr).row_id, Cause::demand});
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic workloads

enum class Pattern : std::uint8_t {
  uniform,
  zipf,
  stream,
  single_sided,
  double_sided,
  many_sided,
  decoy_rotation,
  mtt_thrash,
};

inline constexpr Pattern kAllPatterns[] = {Pattern::uniform,      Pattern::zipf,         Pattern::stream,
                                           Pattern::single_sided, Pattern::double_sided, Pattern::many_sided,
                                           Pattern::decoy_rotation, Pattern::mtt_thrash};

constexpr std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::uniform: return "uniform";
    case Pattern::zipf: return "zipf";
    case Pattern::stream: return "stream";
    case Pattern::single_sided: return "single_sided";
    case Pattern::double_sided: return "double_sided";
    case Pattern::many_sided: return "many_sided";
    case Pattern::decoy_rotation: return "decoy_rotation";
    case Pattern::mtt_thrash: return "mtt_thrash";
  }
  return "?";
}

inline Pattern parse_pattern(std::string_view s) {
  const auto n = detail::normalize_name(s);
  for (auto p : kAllPatterns) {
    if (n == detail::normalize_name(to_string(p))) return p;
  }
  throw Error(Errc::InvalidValue, "unknown pattern '" + std::string(s) + "'");
}

/// Hammering patterns: meaningful only when every access reaches DRAM.
constexpr bool is_adversarial(Pattern p) {
  return p != Pattern::uniform && p != Pattern::zipf && p != Pattern::stream;
}

struct PatternSpec {
  Pattern pattern = Pattern::uniform;
  std::vector<std::uint64_t> row_pool;
  std::uint32_t aggressor_rows = 1;
  std::uint32_t decoy_count = 8;
  std::uint64_t duration_ns = 0;   // 0: bounded by access_count only
  std::uint64_t access_count = 0;  // 0: bounded by duration only
  std::uint64_t spacing_ns = 0;    // 0: one access per tRC
  std::uint64_t start_ns = 0;
  double zipf_s = 1.0;
  double write_fraction = 0.0;
  bool refresh_discount = false;
  std::uint32_t thrash_multiple = 2;
  std::uint32_t thrash_sets = 0;  // 0: every eligible set
  std::uint64_t seed = 1;
};

/// `n` distinct rows drawn uniformly, optionally avoiding the last bank
/// (where the memory-mapped tracking table lives).
inline std::vector<std::uint64_t> random_pool(const Geometry& geo, std::uint64_t n, std::uint64_t seed,
                                              bool exclude_last_bank = true) {
  const std::uint64_t limit = exclude_last_bank && geo.config().bank_count > 1
                                  ? geo.row_count() - geo.layout().rows_per_bank
                                  : geo.row_count();
  if (n > limit) throw Error(Errc::InvalidValue, "pool larger than the eligible rows");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, limit - 1);
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::uint64_t> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto r = pick(rng);
    if (seen.insert(r).second) out.push_back(r);
  }
  return out;
}

/// Rows for mtt_thrash: for each targeted set and each of its 8 hashed
/// ways, `multiple` times the tagged slots of one line. Sets that share
/// rows with the last bank are skipped.
inline std::vector<std::uint64_t> thrash_pool(const Geometry& geo, std::uint32_t multiple, std::uint32_t max_sets,
                                              std::uint64_t seed) {
  const auto& L = geo.layout();
  if (L.tag_bits < 3) throw Error(Errc::TagTooNarrow, "thrash pool needs 8 hashed ways");
  const std::uint64_t per_way = std::uint64_t{multiple} * L.entries_per_line;
  const std::uint64_t tags_per_way = L.rows_per_set / 8;
  if (per_way > tags_per_way) throw Error(Errc::InvalidValue, "set too small for the requested thrash multiple");
  const std::uint64_t first_last_bank = geo.row_count() - L.rows_per_bank;
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out;
  std::uint32_t used = 0;
  for (std::uint32_t s = 0; s < geo.sets() && (max_sets == 0 || used < max_sets); ++s) {
    bool eligible = true;
    for (std::uint64_t t = 0; t < L.rows_per_set && eligible; ++t) {
      if (geo.row_of(s, static_cast<std::uint32_t>(t)) >= first_last_bank) eligible = false;
    }
    if (!eligible) continue;
    ++used;
    for (std::uint32_t w = 0; w < 8; ++w) {
      std::vector<std::uint32_t> tags(tags_per_way);
      std::iota(tags.begin(), tags.end(), static_cast<std::uint32_t>(w * tags_per_way));
      std::shuffle(tags.begin(), tags.end(), rng);
      for (std::uint64_t i = 0; i < per_way; ++i) out.push_back(geo.row_of(s, tags[i]));
    }
  }
  if (out.empty()) throw Error(Errc::EmptyPool, "no set eligible for mtt_thrash");
  return out;
}

/// Lazily produces the access stream for a PatternSpec.
class AccessGenerator {
 public:
  AccessGenerator(const Geometry& geo, PatternSpec spec) : geo_(&geo), spec_(std::move(spec)), rng_(spec_.seed) {
    const auto trc = geo.config().trc_ns;
    spacing_ = spec_.spacing_ns == 0 ? trc : spec_.spacing_ns;
    if (spacing_ < trc) {
      throw Error(Errc::InfeasibleRate, "spacing " + std::to_string(spacing_) + "ns is below tRC " + std::to_string(trc) + "ns");
    }
    if (spec_.duration_ns == 0 && spec_.access_count == 0) {
      throw Error(Errc::InvalidValue, "pattern needs a duration or an access count");
    }
    act_max_ = geo.act_max_per_window(true);
    if (spec_.refresh_discount && spec_.duration_ns != 0 && spec_.access_count != 0) {
      const std::uint64_t windows = (spec_.duration_ns + geo.config().window_ns - 1) / geo.config().window_ns;
      if (spec_.access_count > act_max_ * windows) {
        throw Error(Errc::InfeasibleRate, "requested activations exceed ACT_max per bank per window");
      }
    }
    build_targets();
    now_ = spec_.start_ns;
  }

  const std::vector<std::uint64_t>& targets() const noexcept { return rows_; }

  std::optional<MemoryAccess> next() {
    if (spec_.access_count != 0 && emitted_ >= spec_.access_count) return std::nullopt;
    const std::uint64_t row = next_row();
    const std::uint32_t bank = geo_->bank_of(row);
    if (spec_.refresh_discount) {
      const std::uint64_t W = geo_->config().window_ns;
      const std::uint64_t win = now_ / W;
      if (win != window_) {
        window_ = win;
        per_bank_.clear();
      }
      if (per_bank_[bank] >= act_max_) {
        now_ = (win + 1) * W;
        window_ = win + 1;
        per_bank_.clear();
      }
    }
    if (spec_.duration_ns != 0 && now_ + spacing_ > spec_.start_ns + spec_.duration_ns) return std::nullopt;
    ++per_bank_[bank];
    std::uint64_t column = 0;
    if (spec_.pattern == Pattern::stream) {
      column = stream_col_;
    } else {
      column = visits_[row]++;
    }
    MemoryAccess a{now_, geo_->row_address(row, column), AccessKind::read};
    if (spec_.write_fraction > 0.0 && std::bernoulli_distribution(spec_.write_fraction)(rng_)) a.kind = AccessKind::write;
    now_ += spacing_;
    ++emitted_;
    return a;
  }

  std::vector<MemoryAccess> generate() {
    std::vector<MemoryAccess> out;
    while (auto a = next()) out.push_back(*a);
    return out;
  }

 private:
  void require_same_bank(std::uint64_t lo, std::uint64_t hi) const {
    if (hi >= geo_->row_count() || geo_->bank_of(lo) != geo_->bank_of(hi)) {
      throw Error(Errc::InvalidValue, "aggressor rows fall outside the victim's bank");
    }
  }

  void build_targets() {
    const auto& pool = spec_.row_pool;
    for (auto r : pool) {
      if (r >= geo_->row_count()) throw Error(Errc::RowOutOfRange, "pool row " + std::to_string(r));
    }
    if (pool.empty() && spec_.pattern != Pattern::mtt_thrash) throw Error(Errc::EmptyPool, "row pool is empty");
    switch (spec_.pattern) {
      case Pattern::uniform:
      case Pattern::stream:
        rows_ = pool;
        break;
      case Pattern::zipf: {
        rows_ = pool;
        std::vector<double> w(pool.size());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = 1.0 / std::pow(static_cast<double>(k + 1), spec_.zipf_s);
        zipf_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
        break;
      }
      case Pattern::single_sided: {
        const std::size_t n = std::min<std::size_t>(std::max<std::uint32_t>(1, spec_.aggressor_rows), pool.size());
        rows_.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
        break;
      }
      case Pattern::double_sided: {
        const std::uint64_t v = pool[0];
        if (v == 0) throw Error(Errc::InvalidValue, "victim row 0 has no lower neighbour");
        require_same_bank(v - 1, v + 1);
        rows_ = {v - 1, v + 1};
        break;
      }
      case Pattern::many_sided: {
        const std::uint64_t v = pool[0];
        const std::uint32_t n = std::max<std::uint32_t>(2, spec_.aggressor_rows);
        if (v == 0) throw Error(Errc::InvalidValue, "victim row 0 has no lower neighbour");
        require_same_bank(v - 1, v - 1 + 2ull * (n - 1));
        for (std::uint32_t k = 0; k < n; ++k) rows_.push_back(v - 1 + 2ull * k);
        break;
      }
      case Pattern::decoy_rotation: {
        const std::size_t a = std::max<std::uint32_t>(1, spec_.aggressor_rows);
        if (pool.size() <= a) throw Error(Errc::EmptyPool, "decoy_rotation needs rows beyond the aggressors");
        rows_.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(a));
        decoys_.assign(pool.begin() + static_cast<std::ptrdiff_t>(a), pool.end());
        burst_ = std::max<std::uint32_t>(1, spec_.decoy_count);
        break;
      }
      case Pattern::mtt_thrash:
        rows_ = pool.empty() ? thrash_pool(*geo_, spec_.thrash_multiple, spec_.thrash_sets, spec_.seed) : pool;
        std::shuffle(rows_.begin(), rows_.end(), rng_);
        break;
    }
  }

  std::uint64_t next_row() {
    switch (spec_.pattern) {
      case Pattern::uniform: {
        if (rows_.size() == 1) return rows_[0];
        std::uniform_int_distribution<std::size_t> d(0, rows_.size() - 1);
        return rows_[d(rng_)];
      }
      case Pattern::zipf:
        return rows_.size() == 1 ? rows_[0] : rows_[zipf_(rng_)];
      case Pattern::stream: {
        const std::uint64_t lpr = geo_->layout().lines_per_row;
        const std::uint64_t i = cursor_++;
        stream_col_ = i % lpr;
        return rows_[(i / lpr) % rows_.size()];
      }
      case Pattern::decoy_rotation: {
        const std::uint64_t phase = cursor_ / burst_;
        const std::uint64_t within = cursor_ % burst_;
        ++cursor_;
        if (phase % 2 == 0) return rows_[(phase / 2 * burst_ + within) % rows_.size()];
        return decoys_[decoy_next_++ % decoys_.size()];
      }
      default:
        return rows_[cursor_++ % rows_.size()];
    }
  }

  const Geometry* geo_;
  PatternSpec spec_;
  std::mt19937_64 rng_;
  std::uint64_t spacing_ = 0;
  std::uint64_t act_max_ = 0;
  std::uint64_t now_ = 0;
  std::uint64_t emitted_ = 0;
  std::uint64_t cursor_ = 0;
  std::uint64_t stream_col_ = 0;
  std::uint64_t decoy_next_ = 0;
  std::uint64_t burst_ = 1;
  std::uint64_t window_ = 0;
  std::vector<std::uint64_t> rows_;
  std::vector<std::uint64_t> decoys_;
  std::discrete_distribution<std::size_t> zipf_;
  std::unordered_map<std::uint64_t, std::uint64_t> visits_;
  std::unordered_map<std::uint32_t, std::uint64_t> per_bank_;
};

inline std::vector<MemoryAccess> generate(const PatternSpec& spec, const Geometry& geo) {
  return AccessGenerator(geo, spec).generate();
}

}  // namespace rowtrack
