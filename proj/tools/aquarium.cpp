// aquarium: run the simulated tank and controller, evaluate a run, show the
// LCD pages, or serve the local API.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

#include "aquarium/aquarium.hpp"

namespace {

using namespace aquarium;

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2 };

std::atomic<Runtime*> g_runtime{nullptr};
std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) {
  g_interrupted.store(true);
  if (auto* rt = g_runtime.load()) rt->stop();
}

std::optional<double> parse_speedup(const std::string& text) {
  if (text == "max") return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size() || !(v >= 1.0)) throw ConfigError("speedup must be a number >= 1 or 'max'");
  return v;
}

struct DeviceFlags {
  std::string scenario;
  std::string duration = "72h";
  std::string speedup = "3600";
  int port = 80;
  std::string host = "0.0.0.0";
  std::string log_dir = "logs";
  std::string config;
  std::string calibration;
  std::string run_id = "aquarium";
  std::uint64_t seed = 1;
  std::string noise = "standard";
  double jam_probability = 0.0;
};

void add_device_flags(CLI::App* cmd, DeviceFlags& f, bool with_scenario) {
  if (with_scenario)
    cmd->add_option("--scenario", f.scenario, "Scenario script (default: built-in standard 72 h)")
        ->envname("AQUA_SCENARIO");
  cmd->add_option("--duration", f.duration, "Simulated run length, e.g. 72h or 90m")
      ->envname("AQUA_DURATION")
      ->capture_default_str();
  cmd->add_option("--speedup", f.speedup, "Simulated seconds per wall second (>= 1) or 'max'")
      ->envname("AQUA_SPEEDUP")
      ->capture_default_str();
  cmd->add_option("--port", f.port, "HTTP port for the local API; 0 disables it")
      ->envname("AQUA_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  cmd->add_option("--host", f.host, "Address to bind")->envname("AQUA_HOST")->capture_default_str();
  cmd->add_option("--log-dir", f.log_dir, "Directory for log segments and trace")
      ->envname("AQUA_LOG_DIR")
      ->capture_default_str();
  cmd->add_option("--config", f.config, "Controller config file")->envname("AQUA_CONFIG");
  cmd->add_option("--calibration", f.calibration, "Calibration file")->envname("AQUA_CALIBRATION");
  cmd->add_option("--run-id", f.run_id, "Prefix for output files")->envname("AQUA_RUN_ID")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Noise seed")->envname("AQUA_SEED")->capture_default_str();
  cmd->add_option("--noise", f.noise, "Sensor noise model")
      ->envname("AQUA_NOISE")
      ->check(CLI::IsMember({"standard", "none"}))
      ->capture_default_str();
  cmd->add_option("--jam-probability", f.jam_probability, "Per-rotation feeder jam probability")
      ->envname("AQUA_JAM_PROBABILITY")
      ->check(CLI::Range(0.0, 0.999))
      ->capture_default_str();
}

RuntimeOptions build_options(const DeviceFlags& f, ScenarioScript script) {
  RuntimeOptions o;
  o.run_id = f.run_id;
  o.log_dir = f.log_dir;
  o.duration_s = parse_duration_seconds(f.duration);
  if (!(o.duration_s > 0)) throw ConfigError("duration must be positive");
  o.speedup = parse_speedup(f.speedup);
  o.script = std::move(script);
  o.control = ControlConfig::load(f.config.empty() ? std::nullopt : std::optional(f.config));
  o.calibration = CalibrationSet::load(f.calibration.empty() ? std::nullopt : std::optional(f.calibration));
  o.noise = f.noise == "none" ? NoiseModel::none(f.seed) : NoiseModel::standard(f.seed);
  o.jam_probability = f.jam_probability;
  return o;
}

int run_device(const RuntimeOptions& options, const DeviceFlags& f) {
  Runtime runtime(options);
  std::unique_ptr<TelemetryService> service;
  if (f.port != 0) {
    service = std::make_unique<TelemetryService>(runtime);
    const int port = service->start(f.host, f.port);
    std::cerr << "serving on " << f.host << ":" << port << "\n";
  }
  g_runtime.store(&runtime);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto stats = runtime.run();
  g_runtime.store(nullptr);
  if (service) service->stop();

  std::cerr << "run " << options.run_id << ": " << stats.poll_cycles << " poll cycles, " << stats.records
            << " records in " << stats.segments << " segment(s), " << stats.staged_lost
            << " lost at power loss, max cycle " << stats.max_cycle_wall_s * 1000.0 << " ms"
            << (g_interrupted.load() ? " (interrupted)" : "") << "\n";
  return kOk;
}

struct EvalFlags {
  std::string log_dir = "logs";
  std::string run_id = "aquarium";
  std::string trace;
  std::string log;
  std::string config;
  std::string out;
};

int eval(const EvalFlags& f) {
  const std::filesystem::path dir = f.log_dir;
  const auto trace_path = f.trace.empty() ? dir / trace_file_name(f.run_id) : std::filesystem::path(f.trace);
  const auto replayed = f.log.empty() ? replay_run(dir, f.run_id) : replay_file(f.log);
  const auto trace = load_trace(trace_path);
  const auto config = ControlConfig::load(f.config.empty() ? std::nullopt : std::optional(f.config));

  for (const auto& c : replayed.corrupt)
    std::cerr << "warning: skipped corrupt record in " << c.source << " at byte " << c.byte_offset << ": "
              << c.reason << "\n";

  const auto report = evaluate(trace, replayed.records, config.rules, config.poll_period, replayed.corrupt.size());
  std::cout << format_table(report);

  const auto out_path = f.out.empty() ? dir / (f.run_id + ".report.json") : std::filesystem::path(f.out);
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path.string());
  out << Json(report).dump(2) << '\n';
  std::cerr << "report written to " << out_path.string() << "\n";
  return kOk;
}

struct DisplayFlags {
  std::string address = "http://127.0.0.1:80";
  int frames = 0;
  std::string page_period = "3s";
};

int display(const DisplayFlags& f) {
  httplib::Client client(f.address);
  client.set_connection_timeout(2);
  client.set_read_timeout(2);
  const auto period = seconds_to_millis(parse_duration_seconds(f.page_period));
  if (period <= Millis{0}) throw ConfigError("page period must be positive");
  std::signal(SIGINT, on_signal);
  int attempt = 0;
  std::size_t page = 0;
  for (int shown = 0; (f.frames == 0 || shown < f.frames) && !g_interrupted.load(); ++shown) {
    const auto res = client.Get("/api/readings");
    LcdFrame frame;
    if (!res || res->status != 200) {
      frame = retry_frame(++attempt);
    } else {
      attempt = 0;
      frame = render_page(Json::parse(res->body), page);
      page = (page + 1) % kKindCount;
    }
    std::cout << draw(frame) << std::flush;
    if (f.frames == 0 || shown + 1 < f.frames) std::this_thread::sleep_for(period);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart aquarium controller, simulator and evaluator"};
  app.require_subcommand(1);

  DeviceFlags run_flags;
  auto* run = app.add_subcommand("run", "Run a scenario against the simulated tank, logging and serving the API");
  add_device_flags(run, run_flags, true);

  DeviceFlags serve_flags;
  serve_flags.duration = "365d";
  serve_flags.speedup = "1";
  auto* serve = app.add_subcommand("serve", "Serve the API over an unperturbed tank in real time");
  add_device_flags(serve, serve_flags, false);

  EvalFlags eval_flags;
  auto* ev = app.add_subcommand("eval", "Evaluate a finished run and print the metrics table");
  ev->add_option("--log-dir", eval_flags.log_dir, "Directory holding the run")->envname("AQUA_LOG_DIR")->capture_default_str();
  ev->add_option("--run-id", eval_flags.run_id, "Run to evaluate")->envname("AQUA_RUN_ID")->capture_default_str();
  ev->add_option("--trace", eval_flags.trace, "Ground-truth trace file (overrides --log-dir lookup)");
  ev->add_option("--log", eval_flags.log, "Single log file (overrides segment lookup)");
  ev->add_option("--config", eval_flags.config, "Controller config whose rules define episodes")->envname("AQUA_CONFIG");
  ev->add_option("--out", eval_flags.out, "Where to write the JSON report");

  DisplayFlags display_flags;
  auto* disp = app.add_subcommand("display", "Emulate the 16x2 LCD against a running service");
  disp->add_option("--address", display_flags.address, "Service base URL")->envname("AQUA_ADDRESS")->capture_default_str();
  disp->add_option("--frames", display_flags.frames, "Stop after this many frames (0 = forever)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  disp->add_option("--page-period", display_flags.page_period, "Time per page")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      auto script = run_flags.scenario.empty() ? standard_scenario() : ScenarioScript::load(run_flags.scenario);
      return run_device(build_options(run_flags, std::move(script)), run_flags);
    }
    if (*serve) return run_device(build_options(serve_flags, ScenarioScript{}), serve_flags);
    if (*ev) return eval(eval_flags);
    if (*disp) return display(display_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
