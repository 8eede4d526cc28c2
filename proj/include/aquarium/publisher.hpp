#pragma once

// Outbound cloud path. The transport is pluggable; the publisher owns the
// bounded retry queue and the reconnect/backoff policy.

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <vector>

#include "aquarium/domain.hpp"
#include "aquarium/serialization.hpp"

namespace aquarium {

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns false when the record could not be delivered.
  virtual bool deliver(const EventRecord& record) = 0;
};

/// Test double: collects delivered records and can be switched off.
class InMemoryTransport : public Transport {
 public:
  bool deliver(const EventRecord& record) override {
    std::lock_guard lock(mutex_);
    if (!up_) return false;
    delivered_.push_back(record);
    return true;
  }

  void set_up(bool up) {
    std::lock_guard lock(mutex_);
    up_ = up;
  }

  std::vector<EventRecord> delivered() const {
    std::lock_guard lock(mutex_);
    return delivered_;
  }

 private:
  mutable std::mutex mutex_;
  bool up_ = true;
  std::vector<EventRecord> delivered_;
};

/// Local file sink, one canonical JSON line per delivered record.
class FileTransport : public Transport {
 public:
  explicit FileTransport(const std::filesystem::path& path) : out_(path, std::ios::out | std::ios::trunc) {
    if (!out_) throw Error("cannot open publisher sink " + path.string());
  }

  bool deliver(const EventRecord& record) override {
    out_ << to_line(record) << '\n';
    return static_cast<bool>(out_);
  }

 private:
  std::ofstream out_;
};

/// Wraps a transport behind a simulated uplink that fault injection can cut.
class SimulatedLink : public Transport {
 public:
  explicit SimulatedLink(Transport& inner) : inner_(inner) {}

  bool deliver(const EventRecord& record) override { return up_ && inner_.deliver(record); }
  void set_up(bool up) { up_ = up; }
  bool up() const { return up_; }

 private:
  Transport& inner_;
  bool up_ = true;
};

struct PublisherState {
  bool connected = true;
  std::deque<EventRecord> pending;
  std::size_t capacity = 1024;
  std::optional<Timestamp> last_success;
  Millis backoff{1000};
  std::optional<Timestamp> next_retry;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
};

class Publisher {
 public:
  static constexpr Millis kInitialBackoff{1000};
  static constexpr Millis kMaxBackoff{30'000};

  explicit Publisher(Transport& transport, std::size_t capacity = 1024) : transport_(transport) {
    if (capacity < 1) throw ConfigError("publisher queue capacity must be >= 1");
    state_.capacity = capacity;
  }

  /// Delivers immediately when connected and nothing is queued; otherwise
  /// queues, dropping the oldest record on overflow. Returns a drain report
  /// when this call completed the first delivery after an outage.
  std::optional<PublisherDrain> publish(const EventRecord& record, Timestamp now) {
    if (state_.connected && link_up_ && state_.pending.empty()) {
      if (transport_.deliver(record)) {
        ++state_.delivered;
        state_.last_success = now;
        return finish_recovery(1);
      }
      mark_failed(now);
    }
    enqueue(record);
    if (link_up_ && state_.next_retry && now >= *state_.next_retry) return drain(now);
    return std::nullopt;
  }

  void on_network_down(Timestamp) {
    link_up_ = false;
    state_.connected = false;
    state_.next_retry.reset();
    recovering_ = true;
  }

  /// Link restored: reset the backoff and drain immediately.
  std::optional<PublisherDrain> on_network_up(Timestamp now) {
    link_up_ = true;
    state_.backoff = kInitialBackoff;
    return drain(now);
  }

  /// Retries a failed drain once its backoff deadline has passed.
  std::optional<PublisherDrain> tick(Timestamp now) {
    if (!link_up_ || state_.pending.empty() || !state_.next_retry || now < *state_.next_retry)
      return std::nullopt;
    return drain(now);
  }

  /// Queue contents live in RAM and are lost on power failure.
  std::size_t reset() {
    const auto lost = state_.pending.size();
    state_.pending.clear();
    state_.next_retry.reset();
    return lost;
  }

  const PublisherState& state() const { return state_; }
  bool link_up() const { return link_up_; }

 private:
  void enqueue(const EventRecord& record) {
    if (state_.pending.size() >= state_.capacity) {
      state_.pending.pop_front();
      ++state_.dropped;
      ++dropped_in_outage_;
    }
    state_.pending.push_back(record);
  }

  void mark_failed(Timestamp now) {
    state_.connected = false;
    recovering_ = true;
    state_.next_retry = now + state_.backoff;
    state_.backoff = std::min(state_.backoff * 2, kMaxBackoff);
  }

  std::optional<PublisherDrain> drain(Timestamp now) {
    std::uint64_t sent = 0;
    while (!state_.pending.empty()) {
      if (!transport_.deliver(state_.pending.front())) {
        mark_failed(now);
        if (sent > 0) state_.last_success = now;
        return sent > 0 ? finish_recovery(sent) : std::nullopt;
      }
      state_.pending.pop_front();
      ++state_.delivered;
      ++sent;
    }
    state_.connected = true;
    state_.next_retry.reset();
    state_.backoff = kInitialBackoff;
    if (sent > 0) state_.last_success = now;
    return sent > 0 ? finish_recovery(sent) : std::nullopt;
  }

  std::optional<PublisherDrain> finish_recovery(std::uint64_t sent) {
    if (!recovering_) return std::nullopt;
    recovering_ = false;
    PublisherDrain report{sent, dropped_in_outage_};
    dropped_in_outage_ = 0;
    return report;
  }

  Transport& transport_;
  PublisherState state_;
  bool link_up_ = true;
  bool recovering_ = false;
  std::uint64_t dropped_in_outage_ = 0;
};

}  // namespace aquarium
