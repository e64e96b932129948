// Command-line front end: dataset construction (annotated point clouds or
// the simulator), network training, detection evaluation, single-frame
// inference, and scene rendering.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "graspkit/dataset.hpp"
#include "graspkit/experiment.hpp"
#include "graspkit/pipeline.hpp"
#include "graspkit/synth.hpp"
#include "graspkit/training.hpp"

namespace fs = std::filesystem;
using namespace graspkit;

namespace {

// ---- dataset build: annotated point clouds -> training set ---------------

struct BuildArgs {
  std::string input_dir;
  std::string out_dir;
  std::uint64_t seed = 1;
  int augments = 10;
  int out_size = 300;
  double train_fraction = 0.8;
};

/// A source is a point-cloud file with rectangle annotations beside it:
/// <stem>.txt plus <stem>cpos.txt (and optional <stem>cneg.txt).
std::vector<fs::path> find_sources(const fs::path& root) {
  std::vector<fs::path> stems;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string name = e.path().filename().string();
    const std::string tag = "cpos.txt";
    if (name.size() > tag.size() && name.compare(name.size() - tag.size(), tag.size(), tag) == 0) {
      fs::path stem = e.path().parent_path() / name.substr(0, name.size() - tag.size());
      if (fs::exists(stem.string() + ".txt")) stems.push_back(stem);
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

int run_dataset_build(const BuildArgs& a) {
  auto stems = find_sources(a.input_dir);
  require(!stems.empty(), "dataset build: no annotated point clouds under " + a.input_dir);
  int n = int(stems.size());
  data::SplitIds split = data::split_sources(n, a.train_fraction, a.seed);
  std::vector<bool> in_train(size_t(n), false);
  for (int id : split.train) in_train[size_t(id)] = true;

  Rng master(a.seed);
  data::DatasetWriter writer(a.out_dir);
  int dropped = 0;
  for (int i = 0; i < n; ++i) {
    Rng src_rng(master());
    std::ifstream pcd(stems[size_t(i)].string() + ".txt");
    require(pcd.good(), "dataset build: cannot open " + stems[size_t(i)].string() + ".txt");
    DepthImage depth = data::pcd_to_depth(pcd);

    auto parsed = data::load_rect_file(stems[size_t(i)].string() + "cpos.txt", true);
    dropped += parsed.dropped;
    std::vector<data::GraspRectangle> rects = parsed.rects;
    std::string neg = stems[size_t(i)].string() + "cneg.txt";
    if (fs::exists(neg)) {
      auto pn = data::load_rect_file(neg, false);
      dropped += pn.dropped;
      rects.insert(rects.end(), pn.rects.begin(), pn.rects.end());
    }

    const std::string split_name = in_train[size_t(i)] ? "train" : "eval";
    for (int k = 0; k < a.augments; ++k) {
      auto p = data::sample_augment_params(depth.width(), depth.height(), a.out_size, src_rng);
      require(p.has_value(), "dataset build: no feasible crop for source " +
                                 stems[size_t(i)].string());
      data::StoredSample s = data::warp_sample(depth, rects, *p, a.out_size, i);
      writer.add(split_name, s);
    }
  }
  data::json params = {{"input_dir", a.input_dir},
                       {"augments", a.augments},
                       {"out_size", a.out_size},
                       {"train_fraction", a.train_fraction},
                       {"sources", n},
                       {"dropped_rects", dropped}};
  writer.finalize(a.seed, params);
  auto m = data::read_manifest(a.out_dir);
  std::printf("built %d sources -> %d train / %d eval samples in %s\n", n,
              m["splits"].value("train", 0), m["splits"].value("eval", 0), a.out_dir.c_str());
  return 0;
}

// ---- dataset synth: simulator -> training set ----------------------------

int run_dataset_synth(const data::SynthConfig& cfg, const std::string& out_dir) {
  auto m = data::generate_synthetic_dataset(out_dir, cfg);
  std::printf("synthesized %d scenes -> %d train / %d eval samples in %s\n", cfg.scenes,
              m["splits"].value("train", 0), m["splits"].value("eval", 0), out_dir.c_str());
  return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  net::FitConfig fit;
  int eval_cap = 100;
  std::string optimizer = "adam";
};

int run_train(TrainArgs a) {
  auto train_dirs = data::list_samples(a.data_dir, "train");
  require(!train_dirs.empty(), "train: no train samples under " + a.data_dir);
  auto eval_dirs = data::list_samples(a.data_dir, "eval");
  if (int(eval_dirs.size()) > a.eval_cap) eval_dirs.resize(size_t(a.eval_cap));

  std::vector<net::NetSample<float>> eval_set(eval_dirs.size());
  for (size_t i = 0; i < eval_dirs.size(); ++i) {
    data::TrainingSample t = data::prepare_stored(data::read_sample(eval_dirs[i]));
    data::to_tensors(t, eval_set[i].x, eval_set[i].y);
  }

  net::SampleLoader<float> loader = [&train_dirs](int i, net::NetSample<float>& out) {
    data::TrainingSample t = data::prepare_stored(data::read_sample(train_dirs[size_t(i)]));
    data::to_tensors(t, out.x, out.y);
  };

  fs::create_directories(a.out_dir);
  a.fit.optimizer = a.optimizer == "sgd" ? net::OptimizerKind::kSgd : net::OptimizerKind::kAdam;
  a.fit.log_csv_path = (fs::path(a.out_dir) / "train_log.csv").string();
  a.fit.checkpoint_path = (fs::path(a.out_dir) / "checkpoint.bin").string();

  net::NetworkConfig cfg = net::reference_network_config();
  std::vector<float> params = net::init_params<float>(cfg, a.fit.seed);
  std::printf("training on %zu samples (%zu eval), %d epochs, batch %d, lr %g, seed %llu\n",
              train_dirs.size(), eval_dirs.size(), a.fit.epochs, a.fit.batch_size, a.fit.lr,
              static_cast<unsigned long long>(a.fit.seed));
  std::fflush(stdout);

  auto t0 = std::chrono::steady_clock::now();
  net::FitResult r =
      net::fit(cfg, params, loader, int(train_dirs.size()), eval_set, a.fit,
               [&](const net::EpochStats& st) {
                 double mins =
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
                     60.0;
                 std::printf("epoch %3d  train %.6f  eval %.6f  %.1fs  (%.1f min elapsed)\n",
                             st.epoch, st.train_loss, st.eval_loss, st.wall_ms / 1000.0, mins);
                 std::fflush(stdout);
               });
  std::printf("done: final train %.6f eval %.6f; checkpoint %s\n", r.history.back().train_loss,
              r.history.back().eval_loss, a.fit.checkpoint_path.c_str());
  return 0;
}

// ---- eval-detect: rectangle-metric detection rate over a stored split ----

struct EvalDetectArgs {
  std::string data_dir;
  std::string checkpoint;
  std::string split = "eval";
  int limit = 0;  // 0 = whole split
};

int run_eval_detect(const EvalDetectArgs& a) {
  auto dirs = data::list_samples(a.data_dir, a.split);
  require(!dirs.empty(), "eval-detect: no '" + a.split + "' samples under " + a.data_dir);
  if (a.limit > 0 && int(dirs.size()) > a.limit) dirs.resize(size_t(a.limit));

  pipeline::Detector det = pipeline::Detector::from_checkpoint(a.checkpoint);
  pipeline::PipelineConfig pcfg;
  int hits = 0, scored = 0, skipped = 0;
  Tensor4<float> x, y;
  for (const auto& dir : dirs) {
    data::StoredSample s = data::read_sample(dir);
    std::vector<data::GraspRectangle> rects = s.rects;
    bool has_positive = false;
    for (const auto& r : rects) has_positive = has_positive || r.positive;
    if (!has_positive) {
      ++skipped;
      continue;
    }
    data::TrainingSample t = data::prepare_stored(std::move(s));
    data::to_tensors(t, x, y);
    GraspMap m = pipeline::postprocess(det.run(x), pcfg);
    auto peaks = pipeline::local_maxima(m.q, pcfg.max_candidates, pcfg.maxima_radius);
    bool hit = false;
    if (!peaks.empty()) {
      ImageGrasp g = pipeline::grasp_at(m, peaks[0].u, peaks[0].v);
      hit = pipeline::detection_metric(g, rects);
    }
    hits += hit ? 1 : 0;
    ++scored;
  }
  require(scored > 0, "eval-detect: no scorable samples (none had positive rectangles)");
  auto ci = experiment::wilson_interval(hits, scored);
  std::printf("detection rate %d/%d = %.1f%%  (95%% CI %.1f%%-%.1f%%) on split '%s'\n", hits,
              scored, 100.0 * hits / scored, 100.0 * ci.lo, 100.0 * ci.hi, a.split.c_str());
  if (skipped > 0) std::printf("skipped %d samples without positive rectangles\n", skipped);
  return 0;
}

// ---- infer: single depth frame -> selected grasp + timing ----------------

struct InferArgs {
  std::string input;
  std::string intrinsics;
  std::string checkpoint;
  std::string out_path;
  std::string dump_dir;
  double camera_height = 0.35;
};

/// Accepts [fx,fy,cx,cy], an {fx,fy,cx,cy} object, or any object that
/// nests one under "intrinsics"/"camera" (so a scene spec works directly).
CameraIntrinsics intrinsics_from_json(const data::json& j) {
  if (j.is_array()) {
    require(j.size() == 4, "intrinsics: expected [fx, fy, cx, cy]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  }
  if (j.contains("intrinsics")) return intrinsics_from_json(j["intrinsics"]);
  if (j.contains("camera")) return intrinsics_from_json(j["camera"]);
  require(j.contains("fx") && j.contains("fy") && j.contains("cx") && j.contains("cy"),
          "intrinsics: need fx, fy, cx, cy");
  return {j["fx"].get<double>(), j["fy"].get<double>(), j["cx"].get<double>(),
          j["cy"].get<double>()};
}

void dump_map_pgm(const fs::path& path, const Image<float>& m, float lo, float hi) {
  Image<std::uint16_t> img(m.width(), m.height());
  for (size_t i = 0; i < m.size(); ++i) {
    float t = (m.raw()[i] - lo) / (hi - lo);
    t = t < 0.f ? 0.f : (t > 1.f ? 1.f : t);
    img.raw()[i] = std::uint16_t(t * 65535.f + 0.5f);
  }
  write_pgm16(path.string(), img);
}

int run_infer(const InferArgs& a) {
  DepthImage frame = read_depth_pgm(a.input);
  std::ifstream kf(a.intrinsics);
  require(kf.good(), "infer: cannot open " + a.intrinsics);
  CameraIntrinsics k = intrinsics_from_json(data::json::parse(kf));

  pipeline::Detector det = pipeline::Detector::from_checkpoint(a.checkpoint);
  pipeline::PipelineState st;
  Pose6D pose = nadir_camera_pose(0.0, 0.0, a.camera_height);
  pipeline::DetectionResult r = pipeline::detect(det, frame, k, pose, st);

  const ImageGrasp& ig = r.selected_image;
  const WorldGrasp& wg = r.selected_world;
  data::json out = {
      {"schema_version", 1},
      {"input", a.input},
      {"checkpoint", a.checkpoint},
      {"camera_height", a.camera_height},
      {"image_grasp",
       {{"u", ig.u}, {"v", ig.v}, {"angle", ig.angle}, {"width_px", ig.width_px},
        {"quality", ig.quality}}},
      {"world_grasp",
       {{"position", {wg.position.x(), wg.position.y(), wg.position.z()}},
        {"yaw", wg.yaw},
        {"width", wg.width}}},
      {"timing_ms",
       {{"preprocess", r.timing.preprocess_ms},
        {"inference", r.timing.inference_ms},
        {"postprocess", r.timing.postprocess_ms},
        {"total", r.timing.total_ms()}}},
  };
  if (!a.out_path.empty()) {
    std::ofstream f(a.out_path);
    require(bool(f), "infer: cannot open " + a.out_path);
    f << out.dump(2) << "\n";
  }
  if (!a.dump_dir.empty()) {
    fs::create_directories(a.dump_dir);
    pipeline::PipelineConfig pcfg;
    dump_map_pgm(fs::path(a.dump_dir) / "q.pgm", r.map.q, 0.f, 1.f);
    dump_map_pgm(fs::path(a.dump_dir) / "phi.pgm", r.map.phi, float(-kPi / 2), float(kPi / 2));
    dump_map_pgm(fs::path(a.dump_dir) / "w.pgm", r.map.w, 0.f, float(pcfg.width_scale));
  }
  std::printf("grasp: image (u %.1f, v %.1f, angle %.3f rad, width %.1f px, q %.3f)\n", ig.u,
              ig.v, ig.angle, ig.width_px, ig.quality);
  std::printf("       world (%.4f, %.4f, %.4f) m, yaw %.3f rad, width %.4f m\n",
              wg.position.x(), wg.position.y(), wg.position.z(), wg.yaw, wg.width);
  std::printf("timing: pre %.2f + net %.2f + post %.2f = %.2f ms\n", r.timing.preprocess_ms,
              r.timing.inference_ms, r.timing.postprocess_ms, r.timing.total_ms());
  return 0;
}

// ---- sim render ----------------------------------------------------------

struct RenderArgs {
  std::string scene_path;
  std::string out_path;
  std::uint64_t seed = 1;
  double time = 0.0;
};

int run_sim_render(const RenderArgs& a) {
  std::ifstream in(a.scene_path);
  require(in.good(), "sim render: cannot open " + a.scene_path);
  sim::SimSpec spec = sim::sim_spec_from_json(data::json::parse(in));
  if (!spec.scripts.empty()) sim::validate_scripts(spec.scene, spec.scripts);
  sim::Scene at = sim::scene_at(spec.scene, spec.scripts, a.time);
  Rng rng(a.seed);
  DepthImage img = sim::render_depth(at, spec.camera, rng);
  write_depth_pgm(a.out_path, img);
  std::printf("rendered %dx%d frame (%d invalid pixels) to %s\n", img.width(), img.height(),
              count_invalid(img), a.out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixelwise antipodal grasp synthesis toolkit"};
  app.require_subcommand(1);

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Build training datasets");
  dataset->require_subcommand(1);

  BuildArgs build;
  auto* cmd_build = dataset->add_subcommand(
      "build", "Convert annotated point clouds into an augmented training set");
  cmd_build->add_option("--input-dir", build.input_dir, "Directory of annotated point clouds")
      ->required();
  cmd_build->add_option("--out-dir", build.out_dir, "Output dataset root")->required();
  cmd_build->add_option("--seed", build.seed, "Master seed");
  cmd_build->add_option("--augments", build.augments, "Augmented samples per source")
      ->check(CLI::PositiveNumber);
  cmd_build->add_option("--size", build.out_size, "Output image size")->check(CLI::PositiveNumber);
  cmd_build->add_option("--train-fraction", build.train_fraction, "Source-level train fraction")
      ->check(CLI::Range(0.0, 1.0));
  cmd_build->callback([&build] { run_dataset_build(build); });

  data::SynthConfig synth;
  std::string synth_out;
  auto* cmd_synth =
      dataset->add_subcommand("synth", "Generate a synthetic training set from the simulator");
  cmd_synth->add_option("--scenes", synth.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  cmd_synth->add_option("--out-dir", synth_out, "Output dataset root")->required();
  cmd_synth->add_option("--seed", synth.seed, "Master seed");
  cmd_synth->add_option("--min-objects", synth.min_objects, "Minimum objects per scene");
  cmd_synth->add_option("--max-objects", synth.max_objects, "Maximum objects per scene");
  cmd_synth->add_option("--camera-height", synth.camera_height, "Nadir camera height, m");
  cmd_synth->add_option("--sigma", synth.depth_sigma, "Depth noise sigma, m");
  cmd_synth->add_option("--train-fraction", synth.train_fraction, "Scene-level train fraction")
      ->check(CLI::Range(0.0, 1.0));
  cmd_synth->callback([&synth, &synth_out] { run_dataset_synth(synth, synth_out); });

  // train
  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "Train the grasp network");
  cmd_train->add_option("--data", train.data_dir, "Dataset root")->required();
  cmd_train->add_option("--out-dir", train.out_dir, "Run directory for checkpoint and log")
      ->required();
  cmd_train->add_option("--epochs", train.fit.epochs, "Training epochs")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--batch", train.fit.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--lr", train.fit.lr, "Learning rate");
  cmd_train->add_option("--seed", train.fit.seed, "Init and shuffle seed");
  cmd_train->add_option("--optimizer", train.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  cmd_train->add_option("--eval-cap", train.eval_cap, "Max eval samples held in memory");
  cmd_train->callback([&train] { run_train(train); });

  // eval-detect
  EvalDetectArgs evald;
  auto* cmd_evald =
      app.add_subcommand("eval-detect", "Rectangle-metric detection rate over a stored split");
  cmd_evald->add_option("--data", evald.data_dir, "Dataset root")->required();
  cmd_evald->add_option("--checkpoint", evald.checkpoint, "Trained checkpoint")->required();
  cmd_evald->add_option("--split", evald.split, "Split name (default eval)");
  cmd_evald->add_option("--limit", evald.limit, "Cap on samples scored (0 = all)");
  cmd_evald->callback([&evald] { run_eval_detect(evald); });

  // infer
  InferArgs infer;
  auto* cmd_infer = app.add_subcommand("infer", "Run detection on one depth frame");
  cmd_infer->add_option("--input", infer.input, "Input 16-bit depth PGM")->required();
  cmd_infer->add_option("--intrinsics", infer.intrinsics, "Camera intrinsics JSON")->required();
  cmd_infer->add_option("--checkpoint", infer.checkpoint, "Trained checkpoint")->required();
  cmd_infer->add_option("--out", infer.out_path, "Output JSON path");
  cmd_infer->add_option("--dump-maps", infer.dump_dir, "Directory for Q/Phi/W PGM dumps");
  cmd_infer->add_option("--camera-height", infer.camera_height,
                        "Nadir camera height for the world-frame grasp, m");
  cmd_infer->callback([&infer] { run_infer(infer); });

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Simulator utilities");
  sim_cmd->require_subcommand(1);
  RenderArgs render;
  auto* cmd_render = sim_cmd->add_subcommand("render", "Render a scene spec to a 16-bit PGM");
  cmd_render->add_option("--scene", render.scene_path, "Scene spec JSON")->required();
  cmd_render->add_option("--out", render.out_path, "Output PGM path")->required();
  cmd_render->add_option("--seed", render.seed, "Noise seed");
  cmd_render->add_option("--time", render.time, "Script time to render at, s");
  cmd_render->callback([&render] { run_sim_render(render); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
