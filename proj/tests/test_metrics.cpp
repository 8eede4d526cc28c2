#include <gtest/gtest.h>

#include <random>

#include "aquarium/metrics.hpp"

using namespace aquarium;

namespace {

Timestamp at_s(double s) { return at_sim_time(kDefaultEpoch, s); }

PlantState with_ph(double t, double ph) {
  PlantState s;
  s.ph = ph;
  s.sim_time = t;
  return s;
}

EventRecord reading(std::uint64_t seq, double t, ParameterKind k, double v, Quality q = Quality::Valid) {
  return {seq, at_s(t), SensorSnapshot{seq, {{k, v, at_s(t), q}}}};
}

EventRecord alert(std::uint64_t seq, double t, ParameterKind k, Direction d, bool suppressed = false) {
  return {seq, at_s(t), AlertRecord{{k, d, 0.0, at_s(t), ""}, suppressed}};
}

EventRecord fault(std::uint64_t seq, double t, FaultKind f) { return {seq, at_s(t), SystemFault{f}}; }

// pH trace at 5 s spacing, dipping to 6.0 for [k*1000+100, k*1000+200] s.
GroundTruthTrace dipping_trace(int dips) {
  GroundTruthTrace trace;
  for (int i = 0; i <= dips * 200; ++i) {
    const double t = i * 5.0;
    const double local = std::fmod(t, 1000.0);
    trace.add(at_s(t), with_ph(t, local >= 100 && local <= 200 ? 6.0 : 7.4));
  }
  return trace;
}

const std::vector<ThresholdRule> kPhOnly{ThresholdRule::make(ParameterKind::Ph, 6.8, 8.2)};

}  // namespace

TEST(Accuracy, TenReadingFixture) {
  GroundTruthTrace trace;
  PlantState s;
  s.water_temp = 26.0;
  trace.add(at_s(0), s);
  s.water_temp = 27.0;
  trace.add(at_s(100), s);
  // Truth at t is 26 + t/100. Errors: nine within 0.5 °C, one at 0.75.
  const std::vector<double> errors{0.0, 0.1, -0.1, 0.2, -0.2, 0.3, -0.3, 0.5, -0.45, 0.75};
  std::vector<EventRecord> log;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double t = 10.0 * i;
    log.push_back(reading(i + 1, t, ParameterKind::WaterTemperature, 26.0 + t / 100.0 + errors[i]));
  }
  log.push_back(reading(99, 5, ParameterKind::WaterTemperature, 40.0, Quality::Smoothing));
  EXPECT_EQ(accuracy(trace, log, ParameterKind::WaterTemperature, 0.5), 90.0);
  EXPECT_THROW(accuracy(trace, log, ParameterKind::Ph, 0.3), NoSamples);
  EXPECT_THROW(accuracy(trace, log, ParameterKind::WaterTemperature, 0.0), std::invalid_argument);
}

TEST(Accuracy, InvariantUnderTimeTranslation) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.2);
  GroundTruthTrace a, b;
  std::vector<EventRecord> la, lb;
  const Millis shift{86'400'000 * 3 + 1234};
  for (int i = 0; i < 200; ++i) {
    PlantState s;
    s.ph = 7.0 + std::sin(i / 10.0);
    a.add(at_s(i * 5.0), s);
    b.add(at_s(i * 5.0) + shift, s);
  }
  for (int i = 0; i < 300; ++i) {
    const double t = i * 3.3;
    auto r = reading(i + 1, t, ParameterKind::Ph, 7.0 + std::sin(t / 50.0) + noise(rng));
    la.push_back(r);
    r.timestamp += shift;
    std::get<SensorSnapshot>(r.payload).readings[0].timestamp += shift;
    lb.push_back(r);
  }
  EXPECT_EQ(accuracy(a, la, ParameterKind::Ph, 0.3), accuracy(b, lb, ParameterKind::Ph, 0.3));
}

TEST(Episodes, InterpolatedCrossings) {
  const auto eps = episodes(dipping_trace(1), kPhOnly);
  ASSERT_EQ(eps.size(), 1u);
  EXPECT_EQ(eps[0].direction, Direction::BelowLower);
  // 7.4 at 95 s, 6.0 at 100 s: crosses 6.8 at 95 + 5*(0.6/1.4) s.
  EXPECT_EQ(eps[0].start, at_s(95.0) + seconds_to_millis(5.0 * 0.6 / 1.4));
  EXPECT_EQ(eps[0].end, at_s(200.0) + seconds_to_millis(5.0 * 0.8 / 1.4));
}

TEST(AlertQuality, AlertsAtEveryEpisodeStart) {
  const auto trace = dipping_trace(5);
  const auto eps = episodes(trace, kPhOnly);
  ASSERT_EQ(eps.size(), 5u);
  std::vector<AlertEvent> alerts;
  for (const auto& e : eps) alerts.push_back({ParameterKind::Ph, Direction::BelowLower, 6.7, e.start, ""});
  const auto q = alert_quality(eps, alerts, Millis{5000});
  EXPECT_EQ(q.precision, 100.0);
  EXPECT_EQ(q.recall, 100.0);
}

TEST(AlertQuality, TwentyEpisodeFixture) {
  const auto trace = dipping_trace(20);
  std::vector<EventRecord> log;
  std::uint64_t seq = 0;
  for (int k = 0; k < 20; ++k) {
    if (k == 7) continue;  // missed episode
    log.push_back(alert(++seq, k * 1000.0 + 110.0, ParameterKind::Ph, Direction::BelowLower));
    log.push_back(alert(++seq, k * 1000.0 + 115.0, ParameterKind::Ph, Direction::BelowLower, true));
  }
  log.push_back(alert(++seq, 7500.0, ParameterKind::Ph, Direction::BelowLower));  // spurious
  const auto report = evaluate(trace, log, kPhOnly, Millis{5000});
  EXPECT_EQ(report.alerts.episodes, 20u);
  EXPECT_EQ(report.alerts.alerts, 20u);
  EXPECT_EQ(report.alerts.recall, 95.0);
  EXPECT_EQ(report.alerts.precision, 95.0);
}

TEST(AlertQuality, UnperturbedRunHasNoEpisodes) {
  GroundTruthTrace trace;
  for (int i = 0; i < 10; ++i) trace.add(at_s(i * 5.0), with_ph(i * 5.0, 7.4));
  const auto q = alert_quality(episodes(trace, default_rules()), {}, Millis{5000});
  EXPECT_FALSE(q.recall);
  EXPECT_FALSE(q.precision);
}

TEST(AlertQuality, MatchingWindowExtendsOnePollPastEnd) {
  const Episode e{ParameterKind::Ph, Direction::BelowLower, at_s(100), at_s(200)};
  EXPECT_TRUE(matches(e, {ParameterKind::Ph, Direction::BelowLower, 0, at_s(205), ""}, Millis{5000}));
  EXPECT_FALSE(matches(e, {ParameterKind::Ph, Direction::BelowLower, 0, at_s(205.001), ""}, Millis{5000}));
  EXPECT_FALSE(matches(e, {ParameterKind::Ph, Direction::AboveUpper, 0, at_s(150), ""}, Millis{5000}));
  EXPECT_FALSE(matches(e, {ParameterKind::Tds, Direction::BelowLower, 0, at_s(150), ""}, Millis{5000}));
  EXPECT_FALSE(matches(e, {ParameterKind::Ph, Direction::BelowLower, 0, at_s(99.999), ""}, Millis{5000}));
}

// Exhaustive pairing oracle on random small fixtures.
TEST(AlertQuality, AgreesWithPairingOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> when(0.0, 1000.0);
  std::uniform_real_distribution<double> len(1.0, 80.0);
  std::uniform_int_distribution<int> dir(0, 1), count(0, 6);
  for (int round = 0; round < 2000; ++round) {
    std::vector<Episode> eps;
    std::vector<AlertEvent> alerts;
    for (int i = count(rng); i > 0; --i) {
      const double s = when(rng);
      eps.push_back({ParameterKind::Ph, dir(rng) ? Direction::BelowLower : Direction::AboveUpper, at_s(s),
                     at_s(s + len(rng))});
    }
    for (int i = count(rng); i > 0; --i)
      alerts.push_back({ParameterKind::Ph, dir(rng) ? Direction::BelowLower : Direction::AboveUpper, 0,
                        at_s(when(rng)), ""});

    std::vector<bool> alert_hit(alerts.size(), false), episode_hit(eps.size(), false);
    for (std::size_t a = 0; a < alerts.size(); ++a)
      for (std::size_t e = 0; e < eps.size(); ++e) {
        const double ta = to_seconds(alerts[a].timestamp - kDefaultEpoch);
        const double ts = to_seconds(eps[e].start - kDefaultEpoch);
        const double te = to_seconds(eps[e].end - kDefaultEpoch) + 5.0;
        if (alerts[a].direction == eps[e].direction && ta >= ts && ta <= te) alert_hit[a] = episode_hit[e] = true;
      }
    const auto q = alert_quality(eps, alerts, Millis{5000});
    const auto tp = std::count(alert_hit.begin(), alert_hit.end(), true);
    const auto det = std::count(episode_hit.begin(), episode_hit.end(), true);
    ASSERT_EQ(q.true_positives, static_cast<std::uint64_t>(tp));
    ASSERT_EQ(q.detected, static_cast<std::uint64_t>(det));
    if (!alerts.empty()) {
      ASSERT_EQ(*q.precision, 100.0 * tp / alerts.size());
    }
    if (!eps.empty()) {
      ASSERT_EQ(*q.recall, 100.0 * det / eps.size());
    }
  }
}

TEST(Latency, NearestRankExamples) {
  EXPECT_EQ(latency_percentiles({3.0}).p50, 3.0);
  EXPECT_EQ(latency_percentiles({3.0}).p95, 3.0);
  std::vector<double> hundred;
  for (int i = 100; i >= 1; --i) hundred.push_back(i);
  EXPECT_EQ(nearest_rank(hundred, 95), 95.0);
  EXPECT_EQ(nearest_rank(hundred, 50), 50.0);
  EXPECT_EQ(nearest_rank({1, 2, 3}, 50), 2.0);
  EXPECT_THROW(latency_percentiles({}), NoAlerts);
}

TEST(Latency, FirstAlertPerEpisode) {
  const std::vector<Episode> eps{{ParameterKind::Ph, Direction::BelowLower, at_s(100), at_s(2000)}};
  const std::vector<AlertEvent> alerts{{ParameterKind::Ph, Direction::BelowLower, 0, at_s(103), ""},
                                       {ParameterKind::Ph, Direction::BelowLower, 0, at_s(703), ""}};
  EXPECT_EQ(detection_latencies(eps, alerts, Millis{5000}), (std::vector<double>{3.0}));
}

TEST(Recovery, NetworkAndPower) {
  std::vector<EventRecord> log{
      fault(1, 100, FaultKind::NetworkDown), fault(2, 126, FaultKind::NetworkUp),
      {3, at_s(126), PublisherDrain{4, 0}},  reading(4, 130, ParameterKind::Ph, 7.0),
      fault(9, 500, FaultKind::PowerLoss),   fault(10, 527, FaultKind::PowerRestore),
  };
  const auto r = recovery_times(log);
  EXPECT_EQ(r.network_s, (std::vector<double>{26.0}));
  EXPECT_EQ(r.power_s, (std::vector<double>{27.0}));
  EXPECT_EQ(r.records_lost, 4u);
  EXPECT_EQ(r.network_success(), 100.0);

  const auto none = recovery_times({reading(1, 0, ParameterKind::Ph, 7.0)});
  EXPECT_TRUE(none.network_s.empty());
  EXPECT_TRUE(none.power_s.empty());
  EXPECT_EQ(none.records_lost, 0u);
  EXPECT_FALSE(none.network_success());
}

TEST(Endurance, SixJamsInSixHundred) {
  std::vector<EventRecord> log;
  for (int i = 0; i < 600; ++i) {
    const bool jam = i % 100 == 50;
    log.push_back({static_cast<std::uint64_t>(i + 1), at_s(i),
                   FeedResult{jam ? FeedOutcome::Jammed : FeedOutcome::Dispensed, jam ? 0 : 1, jam ? 0.0 : 0.5}});
  }
  const auto e = endurance(log);
  EXPECT_EQ(e.feed_attempts, 600u);
  EXPECT_EQ(e.jams, 6u);
  EXPECT_EQ(e.servo_success(), 99.0);
  EXPECT_EQ(e.grams_dispensed, 297.0);
}

TEST(Endurance, EmptyAndPump) {
  EXPECT_FALSE(endurance({}).servo_success());
  EXPECT_FALSE(endurance({}).pump_success());
  std::vector<EventRecord> log;
  for (int i = 0; i < 4; ++i)
    log.push_back({static_cast<std::uint64_t>(i + 1), at_s(i),
                   CommandRecord{{PumpCommand{i % 2 == 0}, CommandSource::Manual, at_s(i)}, true}});
  EXPECT_EQ(endurance(log).pump_success(), 100.0);
}

TEST(Report, DeterministicJsonAndTable) {
  const auto trace = dipping_trace(3);
  std::vector<EventRecord> log{alert(1, 110, ParameterKind::Ph, Direction::BelowLower),
                               reading(2, 120, ParameterKind::Ph, 6.1)};
  const auto a = evaluate(trace, log, kPhOnly, Millis{5000});
  const auto b = evaluate(trace, log, kPhOnly, Millis{5000});
  EXPECT_EQ(Json(a).dump(), Json(b).dump());
  const auto table = format_table(a);
  EXPECT_NE(table.find("Alert recall %"), std::string::npos);
  EXPECT_NE(table.find("33.33"), std::string::npos);
  const auto j = Json(a);
  EXPECT_TRUE(j["accuracy_percent"]["tds"].is_null());
  EXPECT_EQ(j["accuracy_percent"]["ph"].get<double>(), 100.0);
}

TEST(Report, EmptyLogIsNotApplicable) {
  const auto report = evaluate(GroundTruthTrace{}, {}, default_rules(), Millis{5000});
  const auto j = Json(report);
  EXPECT_TRUE(j["alerts"]["precision_percent"].is_null());
  EXPECT_TRUE(j["alerts"]["recall_percent"].is_null());
  EXPECT_TRUE(j["latency_s"].is_null());
  EXPECT_TRUE(j["endurance"]["servo_success_percent"].is_null());
}
