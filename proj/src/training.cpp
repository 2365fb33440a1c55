#include "space/training.hpp"

#include "space/errors.hpp"
#include "space/random.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

namespace space {

using nlohmann::json;

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::s2l: return "s2l";
    case ModelKind::posegen: return "posegen";
    case ModelKind::l2l: return "l2l";
  }
  return "s2l";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "s2l") return ModelKind::s2l;
  if (s == "posegen") return ModelKind::posegen;
  if (s == "l2l") return ModelKind::l2l;
  throw InvalidArgument("unknown model '" + std::string(s) + "' (expected s2l, posegen or l2l)");
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.batch_size = 256;
  c.steps = 1000000;
  c.schedule.warmup_steps = 10000;
  c.schedule.total_steps = 1000000;
  c.checkpoint_every = 10000;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (steps < 0) throw InvalidArgument("step count must be nonnegative");
  if (crop_frames < 2) throw InvalidArgument("crops need at least 2 frames");
  if (lambda_y < 0 || velocity_weight < 0 || kl_weight < 0 || input_noise < 0 || grad_clip <= 0) {
    throw InvalidArgument("loss weights and noise must be nonnegative, grad clip positive");
  }
  if (augment_variants < 0) throw InvalidArgument("augment variants must be nonnegative");
  schedule.validate();
}

json to_json(const ModelConfig& c) {
  return {{"conv_channels", c.audio.channels},
          {"symmetric_layers", c.audio.symmetric_layers},
          {"causal_layers", c.audio.causal_layers},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},
          {"encoder_width", c.encoder_width},
          {"posegen_hidden", c.posegen_hidden},
          {"film_hidden", c.film_hidden},
          {"mouth_conditioning", c.mouth_conditioning}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  c.audio.channels = j.value("conv_channels", c.audio.channels);
  c.audio.symmetric_layers = j.value("symmetric_layers", c.audio.symmetric_layers);
  c.audio.causal_layers = j.value("causal_layers", c.audio.causal_layers);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.encoder_width = j.value("encoder_width", c.encoder_width);
  c.posegen_hidden = j.value("posegen_hidden", c.posegen_hidden);
  c.film_hidden = j.value("film_hidden", c.film_hidden);
  c.mouth_conditioning = j.value("mouth_conditioning", c.mouth_conditioning);
  if (c.audio.channels < 1 || c.lstm_hidden < 1 || c.lstm_layers < 1 || c.encoder_width < 1 ||
      c.posegen_hidden < 1 || c.film_hidden < 1) {
    throw ConfigError("model widths must be positive");
  }
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"steps", c.steps},
          {"warmup_steps", c.schedule.warmup_steps},
          {"total_steps", c.schedule.total_steps},
          {"start_lr", c.schedule.start_lr},
          {"peak_lr", c.schedule.peak_lr},
          {"lambda_y", c.lambda_y},
          {"velocity_weight", c.velocity_weight},
          {"kl_weight", c.kl_weight},
          {"crop_frames", c.crop_frames},
          {"grad_clip", c.grad_clip},
          {"checkpoint_every", c.checkpoint_every},
          {"input_noise", c.input_noise},
          {"augment_variants", c.augment_variants},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.schedule.warmup_steps = j.value("warmup_steps", c.schedule.warmup_steps);
  c.schedule.total_steps = j.value("total_steps", c.schedule.total_steps);
  c.steps = j.value("steps", c.schedule.total_steps);
  c.schedule.start_lr = j.value("start_lr", c.schedule.start_lr);
  c.schedule.peak_lr = j.value("peak_lr", c.schedule.peak_lr);
  c.lambda_y = j.value("lambda_y", c.lambda_y);
  c.velocity_weight = j.value("velocity_weight", c.velocity_weight);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  c.crop_frames = j.value("crop_frames", c.crop_frames);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.input_noise = j.value("input_noise", c.input_noise);
  c.augment_variants = j.value("augment_variants", c.augment_variants);
  c.seed = j.value("seed", c.seed);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

PipelineConfig default_pipeline_config(const std::string& profile) {
  PipelineConfig p;
  p.profile = profile;
  if (profile == "desk") {
    p.model = ModelConfig::desk();
    p.train = TrainConfig::desk();
  } else if (profile == "paper") {
    p.model = ModelConfig::paper();
    p.train = TrainConfig::paper();
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
  }
  return p;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path, const std::string& profile) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  PipelineConfig p = default_pipeline_config(profile);
  try {
    const json profiles = j.value("profiles", json::object());
    if (!profiles.contains(profile)) {
      throw ConfigError("config '" + path.string() + "' has no profile '" + profile + "'");
    }
    const json& prof = profiles.at(profile);
    p.model = model_config_from_json(prof.value("model", json::object()), p.model);
    p.train = train_config_from_json(prof.value("train", json::object()), p.train);

    const json corpus = j.value("corpus", json::object());
    p.corpus.clips = corpus.value("clips", p.corpus.clips);
    p.corpus.train_ratio = corpus.value("train_ratio", p.corpus.train_ratio);
    p.corpus.val_ratio = corpus.value("val_ratio", p.corpus.val_ratio);
    p.corpus.test_ratio = corpus.value("test_ratio", p.corpus.test_ratio);
    p.corpus.seed = corpus.value("seed", p.corpus.seed);
    p.corpus.anomaly_rate = corpus.value("anomaly_rate", p.corpus.anomaly_rate);
    p.corpus.min_duration_s = corpus.value("min_duration_s", p.corpus.min_duration_s);
    p.corpus.max_duration_s = corpus.value("max_duration_s", p.corpus.max_duration_s);
    p.corpus.emotion_prob = corpus.value("emotion_prob", p.corpus.emotion_prob);
    p.corpus.oracle_seed = corpus.value("oracle_seed", p.corpus.oracle_seed);

    const json filter = j.value("filter", json::object());
    p.filter.temporal_jump = filter.value("temporal_jump", p.filter.temporal_jump);
    p.filter.jump_threshold = filter.value("jump_threshold", p.filter.jump_threshold);
    p.filter.rotation = filter.value("rotation", p.filter.rotation);
    p.filter.max_rotation_deg = filter.value("max_rotation_deg", p.filter.max_rotation_deg);
    p.filter.scale_variation = filter.value("scale_variation", p.filter.scale_variation);
    p.filter.max_scale_ratio = filter.value("max_scale_ratio", p.filter.max_scale_ratio);
    p.filter.missing_frames = filter.value("missing_frames", p.filter.missing_frames);
    p.filter.hands = filter.value("hands", p.filter.hands);

    const json paths = j.value("paths", json::object());
    p.corpus_dir = paths.value("corpus", p.corpus_dir.string());
    p.checkpoint_dir = paths.value("checkpoints", p.checkpoint_dir.string());
    p.output_dir = paths.value("output", p.output_dir.string());
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return p;
}

ClipTensors clip_to_tensors(const ClipRecord& clip, int augment_variants,
                            std::uint64_t augment_seed) {
  const auto t = static_cast<Eigen::Index>(clip.frames());
  if (t < 2) throw InvalidArgument("clip '" + clip.clip_id + "' is too short");
  ClipTensors c;
  c.id = clip.clip_id;
  c.mfcc.push_back(mfcc_to_tensor(align_frames(compute_mfcc(clip.waveform), t).mfcc));
  for (int v = 0; v < augment_variants; ++v) {
    const Waveform aug = augment(clip.waveform, AugmentSpec::mild(), mix_seed(augment_seed, v));
    c.mfcc.push_back(mfcc_to_tensor(align_frames(compute_mfcc(aug), t).mfcc));
  }
  std::vector<torch::Tensor> frames, posed, poses, latents;
  std::vector<double> scales;
  for (std::size_t i = 0; i < clip.frames(); ++i) {
    const LandmarkFrame& f = clip.landmarks.frames[i];
    const HeadPose& p = clip.landmarks.poses[i];
    frames.push_back(frame_to_tensor(f));
    posed.push_back(face_to_tensor(apply_pose(f, p).face));
    poses.push_back(pose_to_tensor(p));
    scales.push_back(p.scale);
    latents.push_back(keypoints_to_tensor(clip.latents[i]));
  }
  c.frames = torch::stack(frames);
  c.posed = torch::stack(posed);
  c.poses = torch::stack(poses);
  c.scales = torch::tensor(scales, torch::kFloat64).to(torch::kFloat32);
  c.latents = torch::stack(latents);
  c.emotion = emotion_to_tensor(clip.emotion);
  return c;
}

int64_t TrainingSet::min_frames() const {
  int64_t m = std::numeric_limits<int64_t>::max();
  for (const auto& c : clips) m = std::min(m, c.frames_count());
  return m;
}

torch::Tensor TrainingSet::mean_frame() const {
  std::vector<torch::Tensor> all;
  for (const auto& c : clips) all.push_back(c.frames);
  return torch::cat(all).mean(0);
}

torch::Tensor TrainingSet::mean_keypoints() const {
  std::vector<torch::Tensor> all;
  for (const auto& c : clips) all.push_back(c.latents);
  return torch::cat(all).mean(0);
}

TrainingSet make_training_set(std::vector<ClipTensors> clips) {
  if (clips.empty()) throw InvalidArgument("training set is empty");
  TrainingSet set;
  set.clips = std::move(clips);
  std::vector<torch::Tensor> feats;
  for (const auto& c : set.clips) feats.push_back(c.mfcc[0]);
  const torch::Tensor all = torch::cat(feats);
  set.mfcc_mean = all.mean(0);
  set.mfcc_std = all.size(0) > 1 ? all.std(0) : torch::ones({kNumMfcc});
  return set;
}

TrainingSet load_training_set(const Corpus& corpus, const std::string& split,
                              int augment_variants, std::uint64_t seed) {
  std::vector<ClipTensors> clips;
  for (const ManifestEntry* e : corpus.split(split)) {
    const ClipRecord clip = load_clip(corpus, *e);
    clips.push_back(clip_to_tensors(clip, augment_variants, mix_seed(seed, e->identity_seed)));
  }
  if (clips.empty()) throw ConfigError("corpus has no '" + split + "' clips");
  return make_training_set(std::move(clips));
}

BatchSampler::BatchSampler(const TrainingSet& set, int batch_size, int crop_frames,
                           std::uint64_t seed)
    : set_(set),
      batch_(batch_size),
      crop_(static_cast<int>(std::min<int64_t>(crop_frames, set.min_frames()))),
      rng_(seed) {
  if (set.clips.empty()) throw InvalidArgument("batch sampler needs clips");
  if (crop_ < 2) throw InvalidArgument("training clips are too short to crop");
}

namespace {

// Rows [start - 1, start - 1 + len) with row -1 replaced by row 0.
torch::Tensor shifted(const torch::Tensor& x, int64_t start, int64_t len) {
  if (start > 0) return x.narrow(0, start - 1, len);
  return torch::cat({x.narrow(0, 0, 1), x.narrow(0, 0, len - 1)});
}

}  // namespace

Batch BatchSampler::next() {
  std::vector<torch::Tensor> frame0, frames, prev, mfcc, emotion, posed, latents, kp_s, prev_kp,
      poses;
  for (int b = 0; b < batch_; ++b) {
    const ClipTensors& c =
        set_.clips[std::uniform_int_distribution<std::size_t>(0, set_.clips.size() - 1)(rng_)];
    const int64_t start = std::uniform_int_distribution<int64_t>(0, c.frames_count() - crop_)(rng_);
    const std::size_t variant =
        std::uniform_int_distribution<std::size_t>(0, c.mfcc.size() - 1)(rng_);
    frame0.push_back(c.frames[0]);
    frames.push_back(c.frames.narrow(0, start, crop_));
    prev.push_back(shifted(c.frames, start, crop_));
    mfcc.push_back(c.mfcc[variant].narrow(0, start, crop_));
    emotion.push_back(c.emotion);
    posed.push_back(c.posed.narrow(0, start, crop_));
    latents.push_back(c.latents.narrow(0, start, crop_));
    kp_s.push_back(c.latents[0]);
    prev_kp.push_back(shifted(c.latents, start, crop_));
    poses.push_back(c.poses.narrow(0, start, crop_));
  }
  return {torch::stack(frame0), torch::stack(frames), torch::stack(prev),
          torch::stack(mfcc),   torch::stack(emotion), torch::stack(posed),
          torch::stack(latents), torch::stack(kp_s),  torch::stack(prev_kp),
          torch::stack(poses)};
}

namespace {

torch::Tensor noisy(const torch::Tensor& x, double sigma) {
  if (sigma <= 0.0) return x;
  return x + sigma * torch::randn_like(x);
}

}  // namespace

LossParts s2l_loss(S2L& model, const Batch& b, const TrainConfig& cfg) {
  const torch::Tensor mouth =
      model->config.mouth_conditioning ? mouth_from_frames(b.frames) : torch::Tensor();
  const torch::Tensor pred =
      model->forward(b.frame0, noisy(b.prev, cfg.input_noise), b.mfcc, b.emotion, mouth);
  const torch::Tensor l1 = weighted_l1_frames(pred, b.frames, cfg.lambda_y);
  const torch::Tensor vel = velocity_loss(pred, b.frames);
  return {l1 + cfg.velocity_weight * vel, {{"l1", l1}, {"velocity", vel}}};
}

LossParts posegen_loss(PoseGen& model, const Batch& b, const TrainConfig& cfg) {
  const PoseLatent lat = model->encode(b.mfcc, b.poses);
  const torch::Tensor z = lat.mu + lat.sigma * torch::randn_like(lat.sigma);
  const torch::Tensor pred = model->decode(b.mfcc, z);
  const torch::Tensor rec = (pred - b.poses).abs().mean();
  const torch::Tensor kl = kl_loss(lat.mu, lat.sigma);
  return {rec + cfg.kl_weight * kl, {{"reconstruction", rec}, {"kl", kl}}};
}

LossParts l2l_loss(L2L& model, const Batch& b, const TrainConfig& cfg) {
  const torch::Tensor pred = model->forward(noisy(b.posed, cfg.input_noise), b.mfcc, b.kp_source,
                                            noisy(b.prev_kp, cfg.input_noise), b.emotion);
  const torch::Tensor l1 = (pred - b.latents).abs().mean();
  return {l1, {{"l1", l1}}};
}

namespace {

template <typename M>
M with_seed(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set) {
  torch::manual_seed(seed);
  M m(c);
  if (set != nullptr) m->audio->set_normalization(set->mfcc_mean, set->mfcc_std);
  return m;
}

template <typename M>
M load_model(const std::filesystem::path& path, std::string_view kind) {
  const CheckpointMeta meta = read_checkpoint_meta(path);
  if (meta.model != kind) {
    throw ConfigError("checkpoint '" + path.string() + "' holds a " + meta.model + " model, not " +
                      std::string(kind));
  }
  M m(model_config_from_json(meta.model_config));
  load_checkpoint(path, *m);
  m->eval();
  return m;
}

}  // namespace

S2L make_s2l(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set) {
  return with_seed<S2L>(c, seed, set);
}
PoseGen make_posegen(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set) {
  return with_seed<PoseGen>(c, seed, set);
}
L2L make_l2l(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set) {
  return with_seed<L2L>(c, seed, set);
}

S2L load_s2l(const std::filesystem::path& path) { return load_model<S2L>(path, "s2l"); }
PoseGen load_posegen(const std::filesystem::path& path) {
  return load_model<PoseGen>(path, "posegen");
}
L2L load_l2l(const std::filesystem::path& path) { return load_model<L2L>(path, "l2l"); }

namespace {

template <typename M, typename LossFn>
TrainResult run_training(M& model, ModelKind kind, const TrainingSet& set, const TrainConfig& cfg,
                         const TrainOptions& options, LossFn loss_fn) {
  cfg.validate();
  if (options.out_dir.empty()) throw InvalidArgument("training needs an output directory");
  std::filesystem::create_directories(options.out_dir);
  const std::string name(to_string(kind));
  TrainResult result;
  result.checkpoint = options.out_dir / (name + ".ckpt");

  CheckpointMeta meta;
  meta.model = name;
  meta.profile = options.profile;
  meta.model_config = to_json(model->config);
  meta.extra = {{"train", to_json(cfg)}};

  torch::manual_seed(mix_seed(cfg.seed, 0x7A1));
  BatchSampler sampler(set, cfg.batch_size, cfg.crop_frames, mix_seed(cfg.seed, 0xBA7C));
  torch::optim::Adam opt(model->parameters(),
                         torch::optim::AdamOptions(lr_schedule(0, cfg.schedule)));
  std::ofstream log(options.out_dir / (name + ".metrics.jsonl"), std::ios::app);
  if (!log) throw IoError("cannot open metrics log in '" + options.out_dir.string() + "'");

  model->train();
  for (long step = 0; step < cfg.steps; ++step) {
    const double lr = lr_schedule(step, cfg.schedule);
    for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);

    const Batch batch = sampler.next();
    const LossParts parts = loss_fn(model, batch, cfg);
    const double loss = parts.total.template item<double>();
    json record = {{"step", step}, {"loss", loss}, {"lr", lr}};
    for (const auto& [k, v] : parts.components) {
      const double value = v.template item<double>();
      record[k] = std::isfinite(value) ? json(value) : json(nullptr);
      if (k == "kl") result.kl.push_back(value);
    }
    if (!std::isfinite(loss)) {
      record["loss"] = nullptr;
      log << record.dump() << '\n';
      meta.step = step;
      meta.extra["diagnostic"] = "non-finite loss";
      save_checkpoint(options.out_dir / (name + ".nan.ckpt"), meta, *model, &opt);
      throw NumericalError(name + " training produced a non-finite loss at step " +
                           std::to_string(step));
    }
    log << record.dump() << '\n';
    result.losses.push_back(loss);

    opt.zero_grad();
    parts.total.backward();
    torch::nn::utils::clip_grad_norm_(model->parameters(), cfg.grad_clip);
    opt.step();

    if (options.on_step) options.on_step(step, loss);
    if (!options.quiet && (step % 100 == 0 || step + 1 == cfg.steps)) {
      std::cerr << name << " step " << step << " loss " << loss << " lr " << lr << '\n';
    }
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
      meta.step = step + 1;
      save_checkpoint(result.checkpoint, meta, *model, &opt);
    }
  }
  model->eval();
  result.steps = cfg.steps;
  meta.step = cfg.steps;
  save_checkpoint(result.checkpoint, meta, *model, &opt);
  return result;
}

}  // namespace

TrainResult train_model(S2L& model, const TrainingSet& set, const TrainConfig& cfg,
                        const TrainOptions& options) {
  return run_training(model, ModelKind::s2l, set, cfg, options, s2l_loss);
}

TrainResult train_model(PoseGen& model, const TrainingSet& set, const TrainConfig& cfg,
                        const TrainOptions& options) {
  return run_training(model, ModelKind::posegen, set, cfg, options, posegen_loss);
}

TrainResult train_model(L2L& model, const TrainingSet& set, const TrainConfig& cfg,
                        const TrainOptions& options) {
  return run_training(model, ModelKind::l2l, set, cfg, options, l2l_loss);
}

}  // namespace space
