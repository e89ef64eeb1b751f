#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sar/face/lbph.hpp"
#include "sar/gesture/synthetic.hpp"
#include "sar/gesture/tracker.hpp"
#include "sar/robot/machine.hpp"
#include "sar/session/bench.hpp"
#include "sar/session/config.hpp"
#include "sar/session/replay.hpp"
#include "sar/session/server.hpp"
#include "sar/vision/cascade.hpp"
#include "sar/vision/detect.hpp"
#include "sar/vision/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sar;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

session::ServiceConfig config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return session::load_service_config(path);
}

std::vector<fs::path> frame_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

vision::Rect parse_box(const std::string& s) {
  vision::Rect r;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream in(s);
  if (!(in >> r.x >> c1 >> r.y >> c2 >> r.w >> c3 >> r.h) || c1 != ',' || c2 != ',' || c3 != ',') {
    throw Error(ErrorKind::Parse, "box must be x,y,w,h");
  }
  return r;
}

int run_serve(const std::string& config_path) {
  auto cfg = session::load_service_config(config_path);
  session::SessionManager mgr(cfg);
  session::Server server(mgr);
  server.start();
  std::cerr << "listening on " << cfg.bind << ":" << server.port() << "\n";
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

int run_replay(const std::string& log_path, const std::string& config_path) {
  const auto cfg = config_or_default(config_path);
  const auto log = session::read_log(log_path);
  const auto r = session::replay(log, cfg.hug, cfg.hardware);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << session::replay_report(r).dump(2) << "\n";
  return r.divergences.empty() ? 0 : 1;
}

int run_bench(const session::BenchOptions& opt, const std::string& config_path) {
  const auto r = session::run_bench(config_or_default(config_path), opt);
  auto j = session::to_json(r);
  j["delay_model"] = opt.delay_model;
  j["concurrency"] = opt.concurrency;
  std::cout << j.dump(2) << "\n";
  std::cerr << "p50 " << j["p50_ms"] << " ms, p90 " << j["p90_ms"] << " ms over " << r.latencies_ms.size()
            << " turns\n";
  for (std::size_t b = 0; b < session::kLatencyBins; ++b) {
    std::cerr << (b < 10 ? " " : "") << b << "s |" << std::string(static_cast<std::size_t>(j["histogram"][b].get<int>()), '#')
              << "\n";
  }
  return 0;
}

int run_detect(const std::string& image, const std::string& cascade_path, const vision::DetectParams& p) {
  const auto cascade = vision::load_cascade(cascade_path);
  const auto frame = vision::load_frame(image);
  json out = json::array();
  for (const auto& b : vision::detect_faces(cascade, frame, p)) out.push_back(vision::to_json(b));
  std::cout << json{{"image", image}, {"faces", out}}.dump(2) << "\n";
  return 0;
}

int run_gesture(const std::string& dir, const std::string& box, const std::string& cascade_path, int interval_ms,
                const std::string& config_path) {
  const auto cfg = config_or_default(config_path);
  const auto files = frame_files(dir);
  if (files.empty()) throw Error(ErrorKind::NotFound, "no .pgm or .png frames in " + dir);
  std::optional<vision::Cascade> cascade;
  if (!cascade_path.empty()) cascade = vision::load_cascade(cascade_path);
  if (box.empty() && !cascade) throw Error(ErrorKind::Config, "give --box or --cascade to locate the face");
  gesture::HeadGestureTracker tracker(cfg.flow, cfg.gesture);
  std::int64_t t = 0;
  for (const auto& f : files) {
    auto frame = vision::load_frame(f);
    frame.set_timestamp_ms(t);
    std::optional<vision::Rect> face;
    if (!box.empty()) {
      face = parse_box(box);
    } else if (const auto found = vision::detect_faces(*cascade, frame, cfg.detect); !found.empty()) {
      face = vision::Rect{found[0].x, found[0].y, found[0].w, found[0].h};
    }
    tracker.push_frame(frame, face);
    t += interval_ms;
  }
  const auto v = tracker.classify();
  std::cout << json{{"frames", files.size()}, {"verdict", gesture::to_json(v)}, {"live_fraction", tracker.live_fraction()}}
                   .dump(2)
            << "\n";
  return 0;
}

int run_burst(const std::string& kind, const std::string& out_dir, const gesture::BurstParams& p) {
  const auto burst = gesture::render_head_burst(gesture::gesture_kind_from_string(kind), p);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < burst.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.pgm", i);
    vision::save_pgm(burst.frames[i], fs::path(out_dir) / name);
  }
  const auto& b = burst.face;
  std::cout << json{{"frames", burst.frames.size()}, {"box", {b.x, b.y, b.w, b.h}}}.dump() << "\n";
  return 0;
}

int run_enroll(const std::string& dir, const std::string& out, double threshold) {
  face::LbphParams p;
  p.unknown_threshold = threshold;
  const auto model = face::train(p, face::load_enrollment(dir));
  face::save_lbph(model, out);
  std::cout << json{{"templates", model.templates().size()}, {"out", out}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Companion robot simulator: perception kernels, hug automaton, session service"};
  app.require_subcommand(1);

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket session service");
  serve->add_option("--config", config_path, "Service config (JSON)")->required()->check(CLI::ExistingFile);

  std::string log_path;
  auto* replay = app.add_subcommand("replay", "Re-apply a session log and report divergences");
  replay->add_option("log", log_path, "JSONL session log")->required()->check(CLI::ExistingFile);
  replay->add_option("--config", config_path, "Initial conditions when the log has no header");

  session::BenchOptions bench_opt;
  auto* bench = app.add_subcommand("bench-latency", "Measure dialogue turn latency against the stub");
  bench->add_option("--turns", bench_opt.turns, "Number of turns")->check(CLI::PositiveNumber);
  bench->add_option("--delay-model", bench_opt.delay_model, "constant:MS | uniform:LO,HI | none");
  bench->add_option("--concurrency", bench_opt.concurrency, "Parallel conversations")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_opt.seed, "Stub seed");
  bench->add_flag("--force-live", bench_opt.force_live, "Allow a non-stub endpoint");
  bench->add_option("--config", config_path, "Service config (JSON)");

  std::string image, cascade_path, box;
  vision::DetectParams detect_opt;
  auto* detect = app.add_subcommand("detect", "Run the cascade detector on one image");
  detect->add_option("image", image, "PGM or PNG")->required()->check(CLI::ExistingFile);
  detect->add_option("--cascade", cascade_path, "Cascade JSON")->required()->check(CLI::ExistingFile);
  detect->add_option("--scale-factor", detect_opt.scale_factor);
  detect->add_option("--min-neighbors", detect_opt.min_neighbors);
  detect->add_option("--min-size", detect_opt.min_size);

  std::string frame_dir;
  int interval_ms = 50;
  auto* gest = app.add_subcommand("gesture", "Classify a head gesture from a directory of frames");
  gest->add_option("framedir", frame_dir, "Frames, in name order")->required()->check(CLI::ExistingDirectory);
  gest->add_option("--box", box, "Face box x,y,w,h in the first frame");
  gest->add_option("--cascade", cascade_path, "Locate the face with this cascade instead");
  gest->add_option("--interval-ms", interval_ms, "Time between frames")->check(CLI::PositiveNumber);
  gest->add_option("--config", config_path, "Flow and gesture parameters");

  std::string kind = "nod", out_dir;
  gesture::BurstParams burst_opt;
  auto* burst = app.add_subcommand("render-burst", "Write a synthetic head-gesture burst as PGM frames");
  burst->add_option("--kind", kind, "nod | shake | none");
  burst->add_option("--out", out_dir, "Output directory")->required();
  burst->add_option("--peak-to-peak", burst_opt.peak_to_peak_px);
  burst->add_option("--seed", burst_opt.seed);

  std::string enroll_dir, model_out;
  double threshold = face::LbphParams{}.unknown_threshold;
  auto* enroll = app.add_subcommand("enroll", "Train an LBPH model from <dir>/<label>/*.pgm|png");
  enroll->add_option("dir", enroll_dir)->required()->check(CLI::ExistingDirectory);
  enroll->add_option("--out", model_out)->required();
  enroll->add_option("--unknown-threshold", threshold);

  app.add_subcommand("table", "Print the hug automaton's transition table as JSON");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) return run_serve(config_path);
    if (*replay) return run_replay(log_path, config_path);
    if (*bench) return run_bench(bench_opt, config_path);
    if (*detect) return run_detect(image, cascade_path, detect_opt);
    if (*gest) return run_gesture(frame_dir, box, cascade_path, interval_ms, config_path);
    if (*burst) return run_burst(kind, out_dir, burst_opt);
    if (*enroll) return run_enroll(enroll_dir, model_out, threshold);
    std::cout << robot::transition_table_json().dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
