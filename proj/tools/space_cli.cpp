#include "space/errors.hpp"
#include "space/filtering.hpp"
#include "space/pipeline.hpp"
#include "space/render.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

using namespace space;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config = "configs/space.json";
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

PipelineConfig load_config(const Globals& g) {
  if (fs::exists(g.config)) return load_pipeline_config(g.config, g.profile);
  if (g.config != "configs/space.json") throw ConfigError("config file '" + g.config + "' not found");
  return default_pipeline_config(g.profile);
}

// Training manifest: the filtered one when present.
Corpus open_corpus(const fs::path& dir) {
  if (fs::exists(dir / kFilteredManifestFile)) return load_corpus(dir, kFilteredManifestFile);
  std::cerr << "warning: no filtered manifest in " << dir << ", using all clips\n";
  return load_corpus(dir);
}

EmotionVector parse_emotion(const std::string& name, double intensity) {
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw InvalidArgument("intensity must be in [0, 1]");
  return EmotionVector::one_hot(emotion_from_string(name), intensity);
}

Eigen::Vector2d parse_pair(const std::string& text) {
  std::istringstream in(text);
  double x = 0, y = 0;
  char comma = 0;
  if (!(in >> x >> comma >> y) || comma != ',') throw InvalidArgument("expected x,y but got '" + text + "'");
  return {x, y};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech-driven portrait animation pipeline: corpus, training, inference, evaluation"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "config file")->capture_default_str();
  app.add_option("--profile", g.profile, "config profile")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed_value, "seed (overrides the config)");
  app.add_flag("-v,--verbose", g.verbose, "progress output");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  std::string gen_out;
  int gen_clips = 0;
  double gen_anomaly = -1.0;
  gen->add_option("--out", gen_out, "corpus directory");
  gen->add_option("--clips", gen_clips, "clip count")->check(CLI::PositiveNumber);
  gen->add_option("--anomaly-rate", gen_anomaly, "fraction of clips with injected anomalies")
      ->check(CLI::Range(0.0, 1.0));

  // filter
  auto* filt = app.add_subcommand("filter", "filter corpus clips and write the filtered manifest");
  std::string filt_corpus;
  filt->add_option("--corpus", filt_corpus, "corpus directory");

  // train
  auto* train = app.add_subcommand("train", "train one model");
  std::string train_which, train_corpus, train_out;
  long train_steps = -1;
  train->add_option("model", train_which, "s2l, posegen or l2l")
      ->required()
      ->check(CLI::IsMember({"s2l", "posegen", "l2l"}));
  train->add_option("--corpus", train_corpus, "corpus directory");
  train->add_option("--out", train_out, "checkpoint directory");
  train->add_option("--steps", train_steps, "optimization steps (overrides the config)")
      ->check(CLI::NonNegativeNumber);

  // infer
  auto* inf = app.add_subcommand("infer", "animate a source frame from an audio file");
  std::string inf_audio, inf_source, inf_ckpt, inf_out, inf_pose = "generated", inf_emotion = "neutral",
                                                        inf_gaze;
  std::size_t inf_source_frame = 0;
  double inf_intensity = 1.0;
  std::vector<std::size_t> inf_blinks;
  int inf_size = kDefaultRenderSize;
  inf->add_option("--audio", inf_audio, "WAV file")->required()->check(CLI::ExistingFile);
  inf->add_option("--source", inf_source, "landmark-sequence file holding the source frame")
      ->required()
      ->check(CLI::ExistingFile);
  inf->add_option("--source-frame", inf_source_frame, "frame of the source file to use");
  inf->add_option("--checkpoints", inf_ckpt, "checkpoint directory");
  inf->add_option("--out", inf_out, "output directory");
  inf->add_option("--pose-mode", inf_pose, "generated | fixed | transfer:<pose file>")->capture_default_str();
  inf->add_option("--emotion", inf_emotion, "emotion label")->capture_default_str();
  inf->add_option("--intensity", inf_intensity, "emotion intensity in [0, 1]")->capture_default_str();
  inf->add_option("--blink", inf_blinks, "frames at which to insert blinks")->delimiter(',');
  inf->add_option("--gaze", inf_gaze, "iris offset x,y in normalized units");
  inf->add_option("--size", inf_size, "render size in pixels, 0 to skip rendering")->capture_default_str();

  // render
  auto* ren = app.add_subcommand("render", "render a landmark and/or keypoint sequence");
  std::string ren_landmarks, ren_keypoints, ren_out = "frames";
  int ren_size = kDefaultRenderSize;
  ren->add_option("--landmarks", ren_landmarks, "landmark-sequence file")->check(CLI::ExistingFile);
  ren->add_option("--keypoints", ren_keypoints, "keypoint-sequence file")->check(CLI::ExistingFile);
  ren->add_option("--out", ren_out, "output directory")->capture_default_str();
  ren->add_option("--size", ren_size, "image size")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate checkpoints on a corpus split");
  std::string ev_corpus, ev_ckpt, ev_out, ev_split = "test";
  ev->add_option("--corpus", ev_corpus, "corpus directory");
  ev->add_option("--checkpoints", ev_ckpt, "checkpoint directory");
  ev->add_option("--split", ev_split, "split to evaluate")->capture_default_str();
  ev->add_option("--out", ev_out, "report directory");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_value;

  try {
    PipelineConfig cfg = load_config(g);
    auto path_or = [](const std::string& cli, const fs::path& fallback) {
      return cli.empty() ? fallback : fs::path(cli);
    };

    if (*gen) {
      if (gen_clips > 0) cfg.corpus.clips = gen_clips;
      if (gen_anomaly >= 0.0) cfg.corpus.anomaly_rate = gen_anomaly;
      if (g.seed) cfg.corpus.seed = *g.seed;
      const fs::path dir = path_or(gen_out, cfg.corpus_dir);
      const Corpus c = build_corpus(dir, cfg.corpus);
      std::cout << "wrote " << c.entries.size() << " clips to " << dir.string() << "\n";
    } else if (*filt) {
      const fs::path dir = path_or(filt_corpus, cfg.corpus_dir);
      const FilterRun run = run_filters(dir, cfg.filter);
      std::cout << "kept " << run.kept.size() << ", removed " << run.removed << "; report in "
                << (dir / kFilterReportFile).string() << "\n";
    } else if (*train) {
      torch::set_num_threads(1);
      if (g.seed) cfg.train.seed = *g.seed;
      if (train_steps >= 0) cfg.train.steps = train_steps;
      cfg.train.validate();
      const Corpus corpus = open_corpus(path_or(train_corpus, cfg.corpus_dir));
      const TrainingSet set =
          load_training_set(corpus, "train", cfg.train.augment_variants, cfg.train.seed);
      TrainOptions opts;
      opts.out_dir = path_or(train_out, cfg.checkpoint_dir);
      opts.profile = cfg.profile;
      opts.quiet = !g.verbose;
      const ModelKind kind = model_kind_from_string(train_which);
      TrainResult r;
      if (kind == ModelKind::s2l) {
        S2L m = make_s2l(cfg.model, cfg.train.seed, &set);
        r = train_model(m, set, cfg.train, opts);
      } else if (kind == ModelKind::posegen) {
        PoseGen m = make_posegen(cfg.model, cfg.train.seed, &set);
        r = train_model(m, set, cfg.train, opts);
      } else {
        L2L m = make_l2l(cfg.model, cfg.train.seed, &set);
        r = train_model(m, set, cfg.train, opts);
      }
      std::cout << train_which << ": " << r.steps << " steps";
      if (!r.losses.empty()) std::cout << ", loss " << r.losses.front() << " -> " << r.losses.back();
      std::cout << "; checkpoint " << r.checkpoint.string() << "\n";
    } else if (*inf) {
      torch::set_num_threads(1);
      const PoseModeSpec pose = parse_pose_mode(inf_pose);
      const LandmarkSequence src = read_landmark_sequence(inf_source);
      if (inf_source_frame >= src.size()) throw InvalidArgument("source frame is out of range");
      InferenceRequest req;
      req.source = src.frames[inf_source_frame];
      req.source_pose = src.poses[inf_source_frame];
      req.audio = read_wav(inf_audio);
      req.pose_mode = pose.mode;
      if (pose.mode == PoseMode::transfer) req.transfer_poses = read_pose_sequence(pose.file);
      req.emotion = parse_emotion(inf_emotion, inf_intensity);
      req.seed = g.seed.value_or(0);
      req.blink_frames = inf_blinks;
      if (!inf_gaze.empty()) req.gaze = parse_pair(inf_gaze);
      req.oracle_seed = cfg.corpus.oracle_seed;
      Models models =
          load_models(path_or(inf_ckpt, cfg.checkpoint_dir), pose.mode == PoseMode::generated);
      const InferenceResult r = infer(models, req);
      const fs::path out = path_or(inf_out, cfg.output_dir);
      write_inference(out, r, inf_size);
      std::cout << "wrote " << r.landmarks.size() << " frames to " << out.string() << "\n";
    } else if (*ren) {
      if (ren_landmarks.empty() && ren_keypoints.empty()) {
        throw InvalidArgument("render needs --landmarks and/or --keypoints");
      }
      const std::vector<LandmarkFrame> frames =
          ren_landmarks.empty() ? std::vector<LandmarkFrame>{} : read_landmark_sequence(ren_landmarks).frames;
      const std::vector<LatentKeypoints> kps =
          ren_keypoints.empty() ? std::vector<LatentKeypoints>{} : read_latent_sequence(ren_keypoints);
      const auto files = render_sequence(frames, kps, ren_out, ren_size);
      std::cout << "wrote " << files.size() << " images to " << ren_out << "\n";
    } else if (*ev) {
      torch::set_num_threads(1);
      const Corpus corpus = open_corpus(path_or(ev_corpus, cfg.corpus_dir));
      const TrainingSet set = load_training_set(corpus, "train", 0, 0);
      std::vector<ClipRecord> records;
      std::vector<ClipTensors> clips;
      for (const ManifestEntry* e : corpus.split(ev_split)) {
        records.push_back(load_clip(corpus, *e));
        clips.push_back(clip_to_tensors(records.back()));
      }
      if (records.empty()) throw ConfigError("corpus has no '" + ev_split + "' clips");
      Models models = load_models(path_or(ev_ckpt, cfg.checkpoint_dir), false);
      EvaluationSummary s = evaluate_models(models, set, records, clips);
      const std::string hash = fnv1a_hex(nlohmann::json{{"model", to_json(cfg.model)},
                                                        {"train", to_json(cfg.train)},
                                                        {"split", ev_split}}
                                             .dump());
      s.model.config_hash = s.baseline.config_hash = hash;
      const fs::path out = path_or(ev_out, cfg.output_dir);
      fs::create_directories(out);
      write_eval_report(out / "eval_model.json", s.model);
      write_eval_report(out / "eval_baseline.json", s.baseline);
      const auto& m = s.model.aggregate;
      const auto& b = s.baseline.aggregate;
      std::cout << s.model.clip_count << " clips  M-P " << m.mp << " (baseline " << b.mp << ")  M-V "
                << m.mv << "  F-P " << m.fp << " (baseline " << b.fp << ")  F-V " << m.fv
                << "  KP-L1 " << *m.kp_l1 << " (L2L on true landmarks " << s.l2l_kp_l1
                << ", baseline " << s.baseline_kp_l1 << ", first frame repeated " << s.copy_kp_l1
                << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
