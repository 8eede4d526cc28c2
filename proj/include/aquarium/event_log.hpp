#pragma once

// Append-only NDJSON event log split into segments at power boundaries, the
// replay reader used by the evaluator and the service, and the clock model
// that turns monotonic uptime into corrected wall time.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aquarium/domain.hpp"
#include "aquarium/serialization.hpp"

namespace aquarium {

// ---------------------------------------------------------------------------
// Clock
// ---------------------------------------------------------------------------

struct SyncEvent {
  Millis monotonic{0};
  Millis offset{0};
  bool operator==(const SyncEvent&) const = default;
};

/// corrected wall time = monotonic + current offset. Without any sync the
/// offset is zero and timestamps are monotonic-only.
struct ClockModel {
  std::vector<SyncEvent> sync_events;

  bool synced() const { return !sync_events.empty(); }
  Millis offset() const { return synced() ? sync_events.back().offset : Millis{0}; }
  Timestamp corrected(Millis monotonic) const { return Timestamp{} + monotonic + offset(); }

  bool operator==(const ClockModel&) const = default;
};

inline ClockModel sync_clock(ClockModel model, Timestamp reference, Millis now_monotonic) {
  model.sync_events.push_back({now_monotonic, reference.time_since_epoch() - now_monotonic});
  return model;
}

// ---------------------------------------------------------------------------
// Segments
// ---------------------------------------------------------------------------

inline std::string segment_file_name(const std::string& run_id, std::uint32_t index) {
  return run_id + ".segment-" + std::to_string(index) + ".ndjson";
}

/// One contiguous run of records between power boundaries. When backed by a
/// file, every append is written and flushed before it returns.
class LogSegment {
 public:
  LogSegment(std::string run_id, std::uint32_t index, std::uint64_t first_sequence = 1,
             std::optional<std::filesystem::path> directory = std::nullopt)
      : run_id_(std::move(run_id)), index_(index), next_sequence_(first_sequence) {
    if (directory) {
      std::filesystem::create_directories(*directory);
      path_ = *directory / segment_file_name(run_id_, index_);
      out_.open(*path_, std::ios::out | std::ios::trunc | std::ios::binary);
      if (!out_) throw Error("cannot open log segment " + path_->string());
    }
  }

  LogSegment(LogSegment&&) = default;
  LogSegment& operator=(LogSegment&&) = default;

  /// Assigns the next sequence number and persists the record.
  /// A record that already carries a sequence number must continue the
  /// segment contiguously.
  const EventRecord& append(EventRecord record) {
    if (closed_) throw SegmentClosed("segment " + std::to_string(index_) + " of " + run_id_ + " is closed");
    if (record.sequence_number != 0 && record.sequence_number != next_sequence_)
      throw Error("sequence " + std::to_string(record.sequence_number) + " does not continue segment at " +
                  std::to_string(next_sequence_));
    record.sequence_number = next_sequence_++;
    if (out_.is_open()) {
      out_ << to_line(record) << '\n';
      out_.flush();
      if (!out_) throw Error("write failed on " + path_->string());
    }
    records_.push_back(std::move(record));
    return records_.back();
  }

  void close() {
    closed_ = true;
    if (out_.is_open()) out_.close();
  }

  bool closed() const { return closed_; }
  std::uint32_t index() const { return index_; }
  const std::string& run_id() const { return run_id_; }
  std::uint64_t next_sequence() const { return next_sequence_; }
  const std::vector<EventRecord>& records() const { return records_; }
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  std::string run_id_;
  std::uint32_t index_;
  std::uint64_t next_sequence_;
  bool closed_ = false;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  std::vector<EventRecord> records_;
};

struct EventPage {
  std::vector<EventRecord> records;
  std::optional<std::uint64_t> next_cursor;  // sequence number to resume from
};

/// All segments of one run. Single writer; readers take consistent copies
/// under the internal lock.
class EventLog {
 public:
  explicit EventLog(std::string run_id = "aquarium",
                    std::optional<std::filesystem::path> directory = std::nullopt)
      : run_id_(std::move(run_id)), directory_(std::move(directory)) {
    segments_.emplace_back(run_id_, 1, 1, directory_);
  }

  EventRecord append(EventRecord record) {
    std::lock_guard lock(mutex_);
    return segments_.back().append(std::move(record));
  }

  std::uint64_t next_sequence() const {
    std::lock_guard lock(mutex_);
    return segments_.back().next_sequence();
  }

  /// Closes the current segment and opens the next one, whose first record
  /// will carry `first_sequence`. Numbers skipped in between belong to
  /// records that never reached storage.
  void open_next_segment(std::uint64_t first_sequence) {
    std::lock_guard lock(mutex_);
    auto& current = segments_.back();
    if (first_sequence < current.next_sequence())
      throw Error("next segment cannot reuse sequence numbers");
    current.close();
    segments_.emplace_back(run_id_, static_cast<std::uint32_t>(segments_.size() + 1), first_sequence,
                           directory_);
  }

  bool writable() const {
    std::lock_guard lock(mutex_);
    return !segments_.back().closed();
  }

  void close() {
    std::lock_guard lock(mutex_);
    segments_.back().close();
  }

  std::size_t segment_count() const {
    std::lock_guard lock(mutex_);
    return segments_.size();
  }

  std::vector<EventRecord> all_records() const {
    std::lock_guard lock(mutex_);
    std::vector<EventRecord> out;
    for (const auto& s : segments_) out.insert(out.end(), s.records().begin(), s.records().end());
    return out;
  }

  /// Chronological page of records at or after `since`, resuming at sequence
  /// `cursor` when given.
  EventPage page(Timestamp since, std::size_t limit, std::optional<std::uint64_t> cursor = {}) const {
    if (limit < 1) throw std::invalid_argument("limit must be >= 1");
    std::lock_guard lock(mutex_);
    EventPage page;
    for (const auto& s : segments_) {
      for (const auto& r : s.records()) {
        if (r.timestamp < since) continue;
        if (cursor && r.sequence_number < *cursor) continue;
        if (page.records.size() == limit) {
          page.next_cursor = r.sequence_number;
          return page;
        }
        page.records.push_back(r);
      }
    }
    return page;
  }

  const std::string& run_id() const { return run_id_; }
  const std::optional<std::filesystem::path>& directory() const { return directory_; }

 private:
  std::string run_id_;
  std::optional<std::filesystem::path> directory_;
  mutable std::mutex mutex_;
  std::vector<LogSegment> segments_;
};

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct CorruptRecord {
  std::string source;
  std::uint64_t byte_offset = 0;
  std::string reason;
};

struct ReplayResult {
  std::vector<EventRecord> records;
  std::vector<CorruptRecord> corrupt;
};

namespace detail {

inline bool in_window(const EventRecord& r, std::optional<Timestamp> from, std::optional<Timestamp> to) {
  return (!from || r.timestamp >= *from) && (!to || r.timestamp <= *to);
}

inline void check_window(std::optional<Timestamp> from, std::optional<Timestamp> to) {
  if (from && to && *from > *to) throw std::invalid_argument("replay: from must not be after to");
}

}  // namespace detail

/// Reads one NDJSON file. Malformed lines, including a torn final line, are
/// reported with their byte offset and skipped.
inline void replay_file_into(const std::filesystem::path& path, std::optional<Timestamp> from,
                             std::optional<Timestamp> to, ReplayResult& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const bool terminated = !in.eof();
    const std::uint64_t line_offset = offset;
    offset += line.size() + (terminated ? 1 : 0);
    if (line.empty() && terminated) continue;
    try {
      if (!terminated) throw std::runtime_error("truncated final record");
      auto record = Json::parse(line).get<EventRecord>();
      if (detail::in_window(record, from, to)) out.records.push_back(std::move(record));
    } catch (const std::exception& e) {
      out.corrupt.push_back({path.string(), line_offset, e.what()});
    }
  }
}

inline ReplayResult replay_file(const std::filesystem::path& path, std::optional<Timestamp> from = {},
                                std::optional<Timestamp> to = {}) {
  detail::check_window(from, to);
  ReplayResult out;
  replay_file_into(path, from, to, out);
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const auto& a, const auto& b) { return a.sequence_number < b.sequence_number; });
  return out;
}

/// Segment files of a run, ordered by segment index.
inline std::vector<std::filesystem::path> segment_files(const std::filesystem::path& directory,
                                                        const std::string& run_id) {
  std::vector<std::pair<std::uint32_t, std::filesystem::path>> found;
  const std::string prefix = run_id + ".segment-";
  const std::string suffix = ".ndjson";
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    const auto file = entry.path().filename().string();
    if (file.size() <= prefix.size() + suffix.size() || file.rfind(prefix, 0) != 0 ||
        file.compare(file.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    const auto digits = file.substr(prefix.size(), file.size() - prefix.size() - suffix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    found.emplace_back(static_cast<std::uint32_t>(std::stoul(digits)), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

inline ReplayResult replay_run(const std::filesystem::path& directory, const std::string& run_id,
                               std::optional<Timestamp> from = {}, std::optional<Timestamp> to = {}) {
  detail::check_window(from, to);
  ReplayResult out;
  for (const auto& path : segment_files(directory, run_id)) replay_file_into(path, from, to, out);
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const auto& a, const auto& b) { return a.sequence_number < b.sequence_number; });
  return out;
}

/// In-memory source: the records of `source` inside [from, to] in sequence order.
inline std::vector<EventRecord> replay(std::vector<EventRecord> source, std::optional<Timestamp> from = {},
                                       std::optional<Timestamp> to = {}) {
  detail::check_window(from, to);
  std::erase_if(source, [&](const EventRecord& r) { return !detail::in_window(r, from, to); });
  std::stable_sort(source.begin(), source.end(),
                   [](const auto& a, const auto& b) { return a.sequence_number < b.sequence_number; });
  return source;
}

}  // namespace aquarium
