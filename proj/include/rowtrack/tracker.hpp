#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rowtrack/config.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/frontend.hpp"
#include "rowtrack/geometry.hpp"
#include "rowtrack/line_codec.hpp"
#include "rowtrack/mtt.hpp"
#include "rowtrack/sac.hpp"

namespace rowtrack {

struct TrackerOutcome {
  std::optional<std::uint64_t> mitigated;
  // Rows activated by tracking-table traffic, in issue order.
  std::vector<std::uint64_t> metadata_rows;
  std::uint32_t mtt_reads = 0;
  std::uint32_t mtt_writes = 0;
  std::uint32_t escalations = 0;
};

struct TrackerStats {
  std::uint64_t activations = 0;
  std::uint64_t mitigations = 0;
  std::uint64_t escalations = 0;
  std::uint64_t mtt_evictions = 0;
};

using CountSnapshot = std::vector<std::pair<std::uint64_t, std::uint32_t>>;

class Tracker {
 public:
  virtual ~Tracker() = default;

  virtual Variant variant() const = 0;
  virtual TrackerOutcome on_activation(const ActivationEvent& e) = 0;
  virtual void window_reset(std::uint64_t now_ns) = 0;

  /// Count the tracker currently attributes to `row` (0 when untracked).
  virtual std::uint32_t count_of(std::uint64_t row) const = 0;
  /// Every row with a nonzero count, sorted by row id.
  virtual CountSnapshot snapshot() const = 0;

  virtual std::uint64_t reserved_ways() const { return 0; }
  virtual std::array<std::uint64_t, 4> sac_histogram() const { return {}; }
  virtual MttStats mtt_stats() const { return {}; }

  const TrackerStats& stats() const noexcept { return stats_; }

 protected:
  TrackerStats stats_;
};

/// One counter per row; the exact reference every START variant must match.
class IdealTracker final : public Tracker {
 public:
  explicit IdealTracker(const Geometry& geo)
      : threshold_(geo.layout().effective_threshold), row_count_(geo.row_count()) {}

  Variant variant() const override { return Variant::ideal; }

  TrackerOutcome on_activation(const ActivationEvent& e) override {
    if (e.row_id >= row_count_) throw Error(Errc::RowOutOfRange, "row " + std::to_string(e.row_id));
    if (counts_.empty()) counts_.assign(row_count_, 0);
    ++stats_.activations;
    TrackerOutcome out;
    auto& c = counts_[e.row_id];
    if (c == 0) touched_.push_back(e.row_id);
    if (++c >= threshold_) {
      c = 0;
      out.mitigated = e.row_id;
      ++stats_.mitigations;
    }
    return out;
  }

  void window_reset(std::uint64_t) override {
    for (auto r : touched_) counts_[r] = 0;
    touched_.clear();
  }

  std::uint32_t count_of(std::uint64_t row) const override { return counts_.empty() ? 0 : counts_.at(row); }

  CountSnapshot snapshot() const override {
    CountSnapshot out;
    for (auto r : touched_) {
      if (counts_[r] != 0) out.emplace_back(r, counts_[r]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  std::uint32_t threshold_;
  std::uint64_t row_count_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint64_t> touched_;
};

/// The START family: counters live in LLC ways leased per set according
/// to the SAC state, optionally backed by a memory-mapped table.
class StartTracker final : public Tracker {
 public:
  struct SlotView {
    unsigned way = 0;
    unsigned slot = 0;  // byte offset for untagged sets
    std::uint64_t row = 0;
    std::uint32_t counter = 0;
  };

  struct EscalationReport {
    SacState from = SacState::s0;
    SacState to = SacState::s0;
    std::vector<std::uint64_t> metadata_rows;
    std::uint32_t mtt_writes = 0;
  };

  StartTracker(const Geometry& geo, ReservationPort* port)
      : geo_(&geo),
        cfg_(geo.tracker()),
        L_(geo.layout()),
        line_bytes_(geo.config().line_bytes),
        codec_(L_, line_bytes_),
        port_(port),
        sac_(geo.sets(), cfg_.variant == Variant::start_s ? SacState::s3 : cfg_.max_state()),
        lines_(std::size_t{geo.sets()} * 8 * line_bytes_, 0),
        untagged_(geo.sets(), 0),
        touched_(geo.sets(), 0),
        cursor_(std::size_t{geo.sets()} * 8, 0),
        free_on_mitigate_(cfg_.free_on_mitigate || !L_.valid_bit) {
    if (cfg_.variant == Variant::ideal) throw Error(Errc::InvalidValue, "StartTracker cannot model the ideal variant");
    if (cfg_.has_mtt()) mtt_.emplace(geo);
    if (cfg_.variant == Variant::start_s) {
      for (std::uint32_t s = 0; s < geo.sets(); ++s) {
        while (sac_.get(s) != SacState::s3) reserve(s, sac_.escalate(s).ways_added);
        untagged_[s] = 1;
      }
    }
  }

  Variant variant() const override { return cfg_.variant; }

  TrackerOutcome on_activation(const ActivationEvent& e) override {
    ++stats_.activations;
    const RowMapping m = geo_->map_row(e.row_id);
    TrackerOutcome out;
    touched_[m.set_index] = 1;
    if (untagged_[m.set_index]) {
      bump_untagged(m, e.row_id, out);
      return out;
    }

    const std::uint32_t set = m.set_index;
    SacState st = sac_.get(set);
    if (st != SacState::s0) {
      const unsigned w = hashed_way(st, m.row_tag);
      if (auto slot = find(set, w, m.row_tag)) {
        auto line = line_span(set, w);
        TrackingEntry ent = codec_.decode(line, *slot);
        ++ent.counter;
        if (ent.counter >= L_.effective_threshold) {
          mitigate(e.row_id, out);
          ent.counter = 0;
          if (free_on_mitigate_) ent.valid = false;
        }
        codec_.encode(line, *slot, ent);
        return out;
      }
    }

    // Miss: grow the allocation until the hashed way has room or the cap is hit.
    std::optional<unsigned> slot;
    unsigned w = 0;
    for (;;) {
      if (st != SacState::s0) {
        w = hashed_way(st, m.row_tag);
        slot = find_free(set, w);
        if (slot) break;
      }
      if (!sac_.can_escalate(set)) break;
      auto rep = escalate_set(set);
      ++out.escalations;
      out.mtt_writes += rep.mtt_writes;
      append(out.metadata_rows, rep.metadata_rows);
      st = rep.to;
      if (untagged_[set]) {
        bump_untagged(m, e.row_id, out);
        return out;
      }
    }

    std::uint32_t count = 1;
    if (slot) {
      if (mtt_ && mtt_->active(set)) count = fetch(set, e.row_id, out) + 1;
    } else {
      if (!mtt_) throw Error(Errc::InvalidValue, "tagged way exhausted without a backing table");
      if (!mtt_->active(set)) append(out.metadata_rows, mtt_->lazy_reset(set, cfg_.mtt_reset));
      slot = pick_victim(set, w);
      auto line = line_span(set, w);
      const TrackingEntry victim = codec_.decode(line, *slot);
      write_back(set, geo_->row_of(set, victim.tag), victim.counter, out);
      codec_.encode(line, *slot, TrackingEntry{});
      ++stats_.mtt_evictions;
      count = fetch(set, e.row_id, out) + 1;
    }

    TrackingEntry ent{true, m.row_tag, count};
    if (count >= L_.effective_threshold) {
      mitigate(e.row_id, out);
      ent.counter = 0;
      if (free_on_mitigate_) ent.valid = false;
    }
    codec_.encode(line_span(set, w), *slot, ent);
    return out;
  }

  void window_reset(std::uint64_t) override {
    if (cfg_.variant == Variant::start_s) {
      std::fill(lines_.begin(), lines_.end(), std::uint8_t{0});
      return;
    }
    for (std::uint32_t s = 0; s < geo_->sets(); ++s) {
      if (!touched_[s]) continue;
      auto first = lines_.begin() + static_cast<std::ptrdiff_t>(std::size_t{s} * 8 * line_bytes_);
      std::fill(first, first + 8 * line_bytes_, std::uint8_t{0});
      untagged_[s] = 0;
      touched_[s] = 0;
    }
    sac_.reset_all();
    reserved_total_ = 0;
    if (port_) port_->release_all_reservations();
    if (mtt_) mtt_->window_reset();
  }

  std::uint32_t count_of(std::uint64_t row) const override {
    const RowMapping m = geo_->map_row(row);
    const std::uint32_t set = m.set_index;
    if (untagged_[set]) return line_span(set, m.untagged_way)[m.untagged_byte];
    const SacState st = sac_.get(set);
    if (st != SacState::s0) {
      const unsigned w = hashed_way(st, m.row_tag);
      if (auto slot = find(set, w, m.row_tag)) return codec_.decode(line_span(set, w), *slot).counter;
    }
    return mtt_ ? mtt_->peek(set, row) : 0;
  }

  CountSnapshot snapshot() const override {
    CountSnapshot out;
    for (std::uint32_t s = 0; s < geo_->sets(); ++s) {
      for (const auto& v : entries(s)) {
        if (v.counter != 0) out.emplace_back(v.row, v.counter);
      }
    }
    if (mtt_) append(out, mtt_->resident());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::uint64_t reserved_ways() const override { return reserved_total_; }
  std::array<std::uint64_t, 4> sac_histogram() const override { return sac_.histogram(); }
  MttStats mtt_stats() const override { return mtt_ ? mtt_->stats() : MttStats{}; }

  const SacTable& sac() const noexcept { return sac_; }
  const Mtt* mtt() const noexcept { return mtt_ ? &*mtt_ : nullptr; }
  const TaggedLineCodec& codec() const noexcept { return codec_; }
  bool untagged(std::uint32_t set) const { return untagged_.at(set) != 0; }

  /// Valid entries held for `set`, in way/slot order.
  std::vector<SlotView> entries(std::uint32_t set) const {
    std::vector<SlotView> out;
    if (untagged_[set]) {
      const unsigned shift = L_.tag_bits >= 3 ? L_.tag_bits - 3 : 0;
      const unsigned per_way = 1u << shift;
      for (unsigned w = 0; w < 8; ++w) {
        auto line = line_span(set, w);
        for (unsigned b = 0; b < per_way; ++b) {
          if (line[b] != 0) out.push_back({w, b, geo_->row_of_untagged(set, w, b), line[b]});
        }
      }
      return out;
    }
    const unsigned ways = rowtrack::reserved_ways(sac_.get(set));
    for (unsigned w = 0; w < ways; ++w) {
      auto line = line_span(set, w);
      for (unsigned s = 0; s < codec_.slots(); ++s) {
        const TrackingEntry e = codec_.decode(line, s);
        if (e.valid) out.push_back({w, s, geo_->row_of(set, e.tag), e.counter});
      }
    }
    return out;
  }

  /// Places a (row, counter) entry through the normal allocation path
  /// without escalating. Used to build fixtures; throws when no slot is free.
  void seed_entry(std::uint64_t row, std::uint32_t counter) {
    const RowMapping m = geo_->map_row(row);
    const std::uint32_t set = m.set_index;
    if (counter == 0 || counter >= L_.effective_threshold) throw Error(Errc::InvalidValue, "seed counter out of range");
    touched_[set] = 1;
    if (untagged_[set]) {
      UntaggedLineCodec::encode(line_span(set, m.untagged_way), m.untagged_byte, counter);
      return;
    }
    const SacState st = sac_.get(set);
    if (st == SacState::s0) throw Error(Errc::InvalidValue, "set holds no tracking ways");
    const unsigned w = hashed_way(st, m.row_tag);
    auto slot = find(set, w, m.row_tag);
    if (!slot) slot = find_free(set, w);
    if (!slot) throw Error(Errc::InvalidValue, "hashed way full");
    codec_.encode(line_span(set, w), *slot, TrackingEntry{true, m.row_tag, counter});
  }

  /// One SAC step for `set` plus the matching reorganization of its entries.
  EscalationReport escalate_set(std::uint32_t set) {
    EscalationReport rep;
    rep.from = sac_.get(set);
    std::vector<TrackingEntry> held;
    for (unsigned w = 0; w < rowtrack::reserved_ways(rep.from); ++w) {
      auto line = line_span(set, w);
      for (unsigned s = 0; s < codec_.slots(); ++s) {
        const TrackingEntry e = codec_.decode(line, s);
        if (e.valid) held.push_back(e);
      }
    }
    const auto esc = sac_.escalate(set);
    rep.to = esc.state;
    reserve(set, esc.ways_added);
    ++stats_.escalations;
    touched_[set] = 1;

    if (rep.to == SacState::s2) {
      // Even tags keep their slots in way 0; odd tags move to way 1.
      auto w0 = line_span(set, 0);
      for (unsigned s = 0; s < codec_.slots(); ++s) {
        const TrackingEntry e = codec_.decode(w0, s);
        if (e.valid && (e.tag & 1u)) {
          codec_.encode(w0, s, TrackingEntry{});
          codec_.encode(line_span(set, 1), *find_free(set, 1), e);
        }
      }
    } else if (rep.to == SacState::s3) {
      for (unsigned w = 0; w < 8; ++w) std::ranges::fill(line_span(set, w), std::uint8_t{0});
      if (cfg_.terminal_untagged()) {
        untagged_[set] = 1;
        const unsigned shift = L_.tag_bits - 3;
        for (const auto& e : held) {
          UntaggedLineCodec::encode(line_span(set, e.tag >> shift), e.tag & ((1u << shift) - 1), e.counter);
        }
      } else {
        rehash_tagged(set, held, rep);
      }
    }
    return rep;
  }

 private:
  std::span<std::uint8_t> line_span(std::uint32_t set, unsigned way) {
    return {lines_.data() + (std::size_t{set} * 8 + way) * line_bytes_, line_bytes_};
  }
  std::span<const std::uint8_t> line_span(std::uint32_t set, unsigned way) const {
    return {lines_.data() + (std::size_t{set} * 8 + way) * line_bytes_, line_bytes_};
  }

  unsigned hashed_way(SacState st, std::uint32_t tag) const {
    switch (st) {
      case SacState::s2: return tag & 1u;
      case SacState::s3: return tag >> (L_.tag_bits - 3);
      default: return 0;
    }
  }

  std::optional<unsigned> find(std::uint32_t set, unsigned w, std::uint32_t tag) const {
    auto line = line_span(set, w);
    for (unsigned s = 0; s < codec_.slots(); ++s) {
      const TrackingEntry e = codec_.decode(line, s);
      if (e.valid && e.tag == tag) return s;
    }
    return std::nullopt;
  }

  std::optional<unsigned> find_free(std::uint32_t set, unsigned w) const {
    auto line = line_span(set, w);
    for (unsigned s = 0; s < codec_.slots(); ++s) {
      if (!codec_.decode(line, s).valid) return s;
    }
    return std::nullopt;
  }

  /// Smallest counter wins; equal counters rotate so no single slot churns.
  unsigned pick_victim(std::uint32_t set, unsigned w) {
    auto line = line_span(set, w);
    auto& cur = cursor_[std::size_t{set} * 8 + w];
    const unsigned n = codec_.slots();
    unsigned best = cur % n;
    std::uint32_t best_count = codec_.decode(line, best).counter;
    for (unsigned i = 1; i < n; ++i) {
      const unsigned s = (cur + i) % n;
      const std::uint32_t c = codec_.decode(line, s).counter;
      if (c < best_count) {
        best = s;
        best_count = c;
      }
    }
    cur = static_cast<std::uint16_t>((best + 1) % n);
    return best;
  }

  void rehash_tagged(std::uint32_t set, std::vector<TrackingEntry>& held, EscalationReport& rep) {
    const unsigned shift = L_.tag_bits - 3;
    std::array<std::vector<TrackingEntry>, 8> buckets;
    for (const auto& e : held) buckets[e.tag >> shift].push_back(e);
    for (unsigned w = 0; w < 8; ++w) {
      auto& b = buckets[w];
      std::stable_sort(b.begin(), b.end(), [](const auto& a, const auto& c) { return a.counter > c.counter; });
      auto line = line_span(set, w);
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (i < codec_.slots()) {
          codec_.encode(line, static_cast<unsigned>(i), b[i]);
          continue;
        }
        if (!mtt_->active(set)) append(rep.metadata_rows, mtt_->lazy_reset(set, cfg_.mtt_reset));
        const std::uint64_t row = geo_->row_of(set, b[i].tag);
        mtt_->write(set, row, b[i].counter);
        rep.metadata_rows.push_back(mtt_->mtt_row_of(row));
        ++rep.mtt_writes;
        ++stats_.mtt_evictions;
      }
    }
  }

  void bump_untagged(const RowMapping& m, std::uint64_t row, TrackerOutcome& out) {
    auto line = line_span(m.set_index, m.untagged_way);
    std::uint32_t c = UntaggedLineCodec::decode(line, m.untagged_byte) + 1;
    if (c >= L_.effective_threshold) {
      mitigate(row, out);
      c = 0;
    }
    UntaggedLineCodec::encode(line, m.untagged_byte, c);
  }

  std::uint32_t fetch(std::uint32_t set, std::uint64_t row, TrackerOutcome& out) {
    const std::uint32_t v = mtt_->fetch(set, row);
    ++out.mtt_reads;
    out.metadata_rows.push_back(mtt_->mtt_row_of(row));
    return v;
  }

  void write_back(std::uint32_t set, std::uint64_t row, std::uint32_t value, TrackerOutcome& out) {
    mtt_->write(set, row, value);
    ++out.mtt_writes;
    out.metadata_rows.push_back(mtt_->mtt_row_of(row));
  }

  void mitigate(std::uint64_t row, TrackerOutcome& out) {
    out.mitigated = row;
    ++stats_.mitigations;
  }

  void reserve(std::uint32_t set, const std::vector<unsigned>& ways) {
    for (unsigned w : ways) {
      if (port_) port_->reserve_way(set, w);
      ++reserved_total_;
    }
  }

  template <class T>
  static void append(std::vector<T>& dst, const std::vector<T>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  }

  const Geometry* geo_;
  TrackerConfig cfg_;
  DerivedLayout L_;
  std::uint32_t line_bytes_;
  TaggedLineCodec codec_;
  ReservationPort* port_;
  SacTable sac_;
  std::optional<Mtt> mtt_;
  std::vector<std::uint8_t> lines_;
  std::vector<std::uint8_t> untagged_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint16_t> cursor_;
  std::uint64_t reserved_total_ = 0;
  bool free_on_mitigate_;
};

/// Builds the tracker selected by the geometry's tracker config. `port`
/// may be null when no cache model is attached.
inline std::unique_ptr<Tracker> make_tracker(const Geometry& geo, ReservationPort* port) {
  if (geo.tracker().variant == Variant::ideal) return std::make_unique<IdealTracker>(geo);
  return std::make_unique<StartTracker>(geo, port);
}

}  // namespace rowtrack
