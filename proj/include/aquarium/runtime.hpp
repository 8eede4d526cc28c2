#pragma once

// The edge device: drives the simulated tank tick by tick, polls sensors on
// its own boot-aligned grid, runs the control engine, stages records for the
// event log and pushes them to the cloud publisher. Fault windows from the
// scenario cut the uplink or the power.

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aquarium/control.hpp"
#include "aquarium/event_log.hpp"
#include "aquarium/plant.hpp"
#include "aquarium/publisher.hpp"
#include "aquarium/signal.hpp"
#include "aquarium/trace.hpp"

namespace aquarium {

// ---------------------------------------------------------------------------
// Readings snapshot
// ---------------------------------------------------------------------------

enum class Status : std::uint8_t { Ok, Alert };

struct ReadingsSnapshot {
  std::uint64_t cycle = 0;
  Timestamp server_time{};
  std::vector<ParameterReading> readings;  // at most one per kind, all from `cycle`
  std::vector<std::pair<ParameterKind, Status>> statuses;
  PumpState pump;
  FeederState feeder;
  bool feeding_allowed = false;
};

inline ReadingsSnapshot make_snapshot(std::uint64_t cycle, Timestamp now,
                                      std::vector<ParameterReading> readings,
                                      const std::vector<ThresholdRule>& rules, const PumpState& pump,
                                      const FeederState& feeder, bool feeding_allowed) {
  ReadingsSnapshot s{cycle, now, std::move(readings), {}, pump, feeder, feeding_allowed};
  for (const auto& r : s.readings) {
    Status status = Status::Ok;
    for (const auto& rule : rules)
      if (rule.kind == r.kind && violates(rule, r.value)) status = Status::Alert;
    s.statuses.emplace_back(r.kind, status);
  }
  return s;
}

inline void to_json(Json& j, const PumpState& p) {
  j = Json{{"on", p.on}, {"last_toggle", nullptr}};
  if (p.last_toggle) j["last_toggle"] = *p.last_toggle;
}

inline void to_json(Json& j, const FeederState& f) {
  j = Json{{"portion_mass_g", f.portion_mass_g},
           {"total_dispensed_g", f.total_dispensed_g},
           {"jam_flag", f.jam_flag}};
}

inline void to_json(Json& j, const ReadingsSnapshot& s) {
  Json statuses = Json::object();
  for (const auto& [kind, status] : s.statuses)
    statuses[std::string(name(kind))] = status == Status::Ok ? "ok" : "alert";
  j = Json{{"cycle", s.cycle},   {"server_time", s.server_time},         {"readings", s.readings},
           {"statuses", statuses}, {"pump", s.pump},                     {"feeder", s.feeder},
           {"feeding_allowed", s.feeding_allowed}};
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RuntimeOptions {
  std::string run_id = "aquarium";
  std::optional<std::filesystem::path> log_dir;  // nullopt: in-memory only
  Timestamp epoch = kDefaultEpoch;
  double duration_s = 72 * 3600.0;
  std::optional<double> speedup;  // nullopt: as fast as possible
  ScenarioScript script;
  PlantConfig plant;
  ControlConfig control;
  CalibrationSet calibration;
  NoiseModel noise = NoiseModel::standard();
  double jam_probability = 0.0;
  std::uint64_t jam_after_cycles = 0;
  std::uint32_t flush_every_cycles = 6;
  std::size_t publisher_capacity = 1024;
  bool write_trace = true;
};

struct RunStats {
  std::uint64_t ticks = 0;
  std::uint64_t poll_cycles = 0;
  std::uint64_t records = 0;
  std::uint64_t staged_lost = 0;
  std::uint64_t queue_lost = 0;
  std::uint32_t segments = 1;
  double max_cycle_wall_s = 0.0;
  double total_cycle_wall_s = 0.0;

  double mean_cycle_wall_s() const { return poll_cycles ? total_cycle_wall_s / poll_cycles : 0.0; }
};

struct Health {
  std::string status;  // starting | running | power_off | stopped
  double uptime_s = 0.0;
  bool clock_synced = false;
};

inline void to_json(Json& j, const Health& h) {
  j = Json{{"status", h.status}, {"uptime_s", h.uptime_s}, {"clock_synced", h.clock_synced}};
}

struct CommandReply {
  std::optional<FeedResult> feed;
  std::optional<PumpState> pump;
};

// ---------------------------------------------------------------------------
// Runtime
// ---------------------------------------------------------------------------

class Runtime {
 public:
  static constexpr std::chrono::milliseconds kCommandWait{2000};

  explicit Runtime(RuntimeOptions options)
      : options_(std::move(options)),
        runner_(options_.script, options_.duration_s, options_.plant, 1.0, options_.speedup),
        pipeline_(options_.calibration),
        feeder_actuator_(options_.jam_probability, options_.jam_after_cycles, options_.noise.seed + 1),
        engine_(options_.control, &feeder_actuator_, [this](bool on) { runner_.set_pump(on); }),
        log_(options_.run_id, options_.log_dir),
        rng_(options_.noise.seed),
        scheduler_(options_.control.feed_schedule) {
    options_.noise.check();
    if (options_.flush_every_cycles < 1) throw ConfigError("flush interval must be >= 1 cycle");
    if (options_.log_dir) {
      inner_ = std::make_unique<FileTransport>(*options_.log_dir / (options_.run_id + ".published.ndjson"));
      if (options_.write_trace)
        trace_ = std::make_unique<TraceWriter>(*options_.log_dir / trace_file_name(options_.run_id));
    } else {
      inner_ = std::make_unique<InMemoryTransport>();
    }
    link_ = std::make_unique<SimulatedLink>(*inner_);
    publisher_ = std::make_unique<Publisher>(*link_, options_.publisher_capacity);
    feeder_actuator_.set_on_dispense([this] {
      try {
        runner_.feed(1);
      } catch (const HopperEmpty&) {
        // the servo turned but nothing fell out
      }
    });
    if (trace_) {
      for (const auto& p : options_.script.perturbations) {
        if (p.start_s > options_.duration_s) continue;
        if (p.is<NetworkOutage>())
          trace_->fault({FaultWindowKind::NetworkOutage, at(p.start_s), at(p.end_s())});
        if (p.is<PowerCycle>()) trace_->fault({FaultWindowKind::PowerCycle, at(p.start_s), at(p.end_s())});
      }
    }
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Runs the scenario to completion or until stop() is called. Returns the
  /// accumulated statistics; the log is flushed and closed on return.
  RunStats run() {
    state_ = State::Running;
    boot(0.0);
    while (!stop_requested_.load()) {
      auto frame = runner_.next();
      if (!frame) break;
      tick(*frame);
    }
    shutdown();
    return stats_;
  }

  void stop() { stop_requested_.store(true); }

  // --- service-facing, thread-safe ---------------------------------------

  std::shared_ptr<const ReadingsSnapshot> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  Health health() const {
    std::lock_guard lock(snapshot_mutex_);
    return health_;
  }

  /// Queues a command for the control loop. The future resolves once the
  /// loop has applied it.
  std::future<CommandReply> submit(ActuatorCommand command) {
    if (const auto* feed = std::get_if<FeedCommand>(&command.action); feed && feed->portions < 1)
      throw InvalidPortions("portions must be >= 1");
    std::lock_guard lock(command_mutex_);
    if (state_.load() != State::Running) throw ControlUnavailable("control loop is not running");
    commands_.push_back({std::move(command), {}});
    return commands_.back().reply.get_future();
  }

  FeedResult feed_now(int portions, std::chrono::milliseconds wait = kCommandWait) {
    return await(submit({FeedCommand{portions}, CommandSource::Manual, {}}), wait).feed.value();
  }

  PumpState set_pump(bool on, std::chrono::milliseconds wait = kCommandWait) {
    return await(submit({PumpCommand{on}, CommandSource::Manual, {}}), wait).pump.value();
  }

  const EventLog& log() const { return log_; }
  const Publisher& publisher() const { return *publisher_; }
  const RuntimeOptions& options() const { return options_; }
  const ControlEngine& engine() const { return engine_; }
  const RunStats& stats() const { return stats_; }
  /// Only meaningful when running without a log directory.
  const InMemoryTransport* memory_transport() const {
    return dynamic_cast<const InMemoryTransport*>(inner_.get());
  }

 private:
  enum class State { Idle, Running, Stopped };

  struct PendingCommand {
    ActuatorCommand command;
    std::promise<CommandReply> reply;
  };

  static CommandReply await(std::future<CommandReply> f, std::chrono::milliseconds wait) {
    if (f.wait_for(wait) != std::future_status::ready)
      throw ControlUnavailable("control loop did not answer in time");
    return f.get();
  }

  Timestamp at(double sim_s) const { return at_sim_time(options_.epoch, sim_s); }

  Millis monotonic(double sim_s) const { return seconds_to_millis(sim_s - boot_s_); }

  Timestamp device_time(double sim_s) const { return clock_.corrected(monotonic(sim_s)); }

  void boot(double sim_s) {
    boot_s_ = sim_s;
    powered_ = true;
    cycles_since_boot_ = 0;
    if (link_->up()) clock_ = sync_clock(clock_, at(sim_s), Millis{0});
    update_health(sim_s);
  }

  void tick(const ScenarioFrame& frame) {
    const double t = frame.sim_time;
    ++stats_.ticks;

    if (trace_ && is_multiple(t, options_.control.poll_period)) {
      trace_->sample(at(t), frame.state);
      last_trace_s_ = t;
    }

    if (frame.faults.power_off && powered_) power_loss(t);
    link_->set_up(!frame.faults.network_down);
    if (!frame.faults.power_off && !powered_) power_restore(t);

    if (!powered_) {
      fail_commands("device is powered off");
      return;
    }

    const bool link_up = link_->up();
    if (!link_up && publisher_->link_up()) {
      const auto now = device_time(t);
      publisher_->on_network_down(now);
      stage({0, now, SystemFault{FaultKind::NetworkDown}});
    } else if (link_up && !publisher_->link_up()) {
      const auto now = device_time(t);
      if (!clock_.synced()) clock_ = sync_clock(clock_, at(t), monotonic(t));
      stage({0, now, SystemFault{FaultKind::NetworkUp}});
      on_drain(publisher_->on_network_up(now), now);
    }
    if (const auto now = device_time(t); publisher_->link_up()) on_drain(publisher_->tick(now), now);

    apply_commands(t);

    if (is_multiple(t - boot_s_, options_.control.poll_period)) poll(frame, t);
    update_health(t);
  }

  static bool is_multiple(double t, Millis period) {
    const auto ms = seconds_to_millis(t).count();
    return ms % period.count() == 0;
  }

  void poll(const ScenarioFrame& frame, double t) {
    const auto wall_start = std::chrono::steady_clock::now();
    const auto now = device_time(t);
    const auto mono = monotonic(t);
    ++cycle_;
    ++cycles_since_boot_;
    ++stats_.poll_cycles;

    std::vector<ParameterReading> readings;
    for (auto kind : kAllKinds) {
      const auto raw = sample(frame.state, kind, options_.noise, rng_, pipeline_.curves().curve(kind), mono);
      if (!raw) continue;  // dropout: the kind is absent from this cycle
      readings.push_back(pipeline_.ingest(*raw, now));
    }

    auto outcome = engine_.poll_cycle(readings, cycle_, now);
    for (auto& r : outcome.records) stage(std::move(r));

    if (auto scheduled = scheduler_.poll(now)) execute(*scheduled, now);

    const auto food = engine_.last_food_distance();
    const bool feeding_allowed = food && *food < physical_range(ParameterKind::FoodDistance).hi;
    auto snap = std::make_shared<const ReadingsSnapshot>(make_snapshot(
        cycle_, now, std::move(readings), engine_.config().rules, engine_.pump(), engine_.feeder(),
        feeding_allowed));
    {
      std::lock_guard lock(snapshot_mutex_);
      snapshot_ = std::move(snap);
    }

    if (cycles_since_boot_ % options_.flush_every_cycles == 0) flush();

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    stats_.max_cycle_wall_s = std::max(stats_.max_cycle_wall_s, wall);
    stats_.total_cycle_wall_s += wall;
  }

  CommandReply execute(ActuatorCommand command, Timestamp now) {
    command.timestamp = now;
    CommandReply reply;
    if (std::holds_alternative<FeedCommand>(command.action)) {
      auto decision = engine_.request_feed(command, now);
      for (auto& r : decision.records) stage(std::move(r));
      reply.feed = decision.result;
    } else {
      auto decision = engine_.set_pump(command, now);
      for (auto& r : decision.records) stage(std::move(r));
      reply.pump = decision.state;
    }
    return reply;
  }

  void apply_commands(double t) {
    std::deque<PendingCommand> batch;
    {
      std::lock_guard lock(command_mutex_);
      batch.swap(commands_);
    }
    const auto now = device_time(t);
    for (auto& pending : batch) {
      try {
        pending.reply.set_value(execute(std::move(pending.command), now));
      } catch (...) {
        pending.reply.set_exception(std::current_exception());
      }
    }
  }

  void fail_commands(const std::string& why) {
    std::deque<PendingCommand> batch;
    {
      std::lock_guard lock(command_mutex_);
      batch.swap(commands_);
    }
    for (auto& pending : batch) pending.reply.set_exception(std::make_exception_ptr(ControlUnavailable(why)));
  }

  /// Numbers the record, hands it to the publisher and holds it for the next
  /// flush to storage.
  void stage(EventRecord record) {
    record.sequence_number = next_sequence_++;
    staged_.push_back(record);
    on_drain(publisher_->publish(record, record.timestamp), record.timestamp);
  }

  void on_drain(std::optional<PublisherDrain> drain, Timestamp now) {
    if (drain) stage({0, now, *drain});
  }

  void flush() {
    for (auto& r : staged_) log_.append(std::move(r));
    stats_.records += staged_.size();
    staged_.clear();
  }

  void power_loss(double t) {
    loss_time_ = device_time(t);
    stats_.staged_lost += staged_.size();
    staged_.clear();
    stats_.queue_lost += publisher_->reset();
    pipeline_.reset();
    engine_.reset_volatile();
    scheduler_.reset();
    powered_ = false;
    update_health(t);
  }

  void power_restore(double t) {
    boot(t);
    log_.open_next_segment(next_sequence_);
    ++stats_.segments;
    if (!link_->up()) publisher_->on_network_down(device_time(t));
    // The brownout detector keeps the loss instant; it is persisted first
    // thing after boot, followed by the restore marker.
    stage({0, loss_time_, SystemFault{FaultKind::PowerLoss}});
    stage({0, device_time(t), SystemFault{FaultKind::PowerRestore}});
    flush();
  }

  void shutdown() {
    fail_commands("control loop stopped");
    {
      std::lock_guard lock(command_mutex_);
      state_ = State::Stopped;
    }
    fail_commands("control loop stopped");
    if (powered_) flush();
    log_.close();
    if (trace_) {
      const auto end = last_state();
      if (!last_trace_s_ || end.sim_time > *last_trace_s_) trace_->sample(at(end.sim_time), end);
      trace_->flush();
    }
    std::lock_guard lock(snapshot_mutex_);
    health_.status = "stopped";
  }

  PlantState last_state() const {
    auto s = runner_.state();
    s.sim_time = std::min(s.sim_time, options_.duration_s);
    return s;
  }

  void update_health(double t) {
    std::lock_guard lock(snapshot_mutex_);
    health_.status = !powered_ ? "power_off" : (snapshot_ ? "running" : "starting");
    health_.uptime_s = powered_ ? t - boot_s_ : 0.0;
    health_.clock_synced = clock_.synced();
  }

  RuntimeOptions options_;
  ScenarioRunner runner_;
  SignalPipeline pipeline_;
  SimulatedFeeder feeder_actuator_;
  ControlEngine engine_;
  EventLog log_;
  std::unique_ptr<Transport> inner_;
  std::unique_ptr<SimulatedLink> link_;
  std::unique_ptr<Publisher> publisher_;
  std::unique_ptr<TraceWriter> trace_;
  std::mt19937_64 rng_;
  FeedScheduler scheduler_;
  ClockModel clock_;

  std::optional<double> last_trace_s_;
  double boot_s_ = 0.0;
  bool powered_ = false;
  Timestamp loss_time_{};
  std::uint64_t cycle_ = 0;
  std::uint64_t cycles_since_boot_ = 0;
  std::uint64_t next_sequence_ = 1;
  std::vector<EventRecord> staged_;
  RunStats stats_;

  std::atomic<State> state_{State::Idle};
  std::atomic<bool> stop_requested_{false};
  mutable std::mutex command_mutex_;
  std::deque<PendingCommand> commands_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const ReadingsSnapshot> snapshot_;
  Health health_{"starting", 0.0, false};
};

}  // namespace aquarium
