#pragma once

#include "space/checkpoint.hpp"
#include "space/filtering.hpp"
#include "space/losses.hpp"
#include "space/models.hpp"
#include "space/synth.hpp"

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace space {

enum class ModelKind { s2l, posegen, l2l };
std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

struct TrainConfig {
  int batch_size = 32;
  long steps = 20000;  // optimization steps to run
  LrSchedule schedule;  // warmup 500, total 20000
  double lambda_y = 2.0;
  double velocity_weight = 1.0;
  double kl_weight = 1e-3;
  int crop_frames = 90;
  double grad_clip = 1.0;
  long checkpoint_every = 1000;
  // Std of Gaussian noise added to the teacher-forced previous-frame inputs.
  double input_noise = 0.01;
  // Augmented copies of each training waveform (pitch, EQ, gain).
  int augment_variants = 1;
  std::uint64_t seed = 0;

  static TrainConfig desk();
  static TrainConfig paper();
  void validate() const;
};

// Everything selected by one profile of the config file.
struct PipelineConfig {
  std::string profile = "desk";
  ModelConfig model;
  TrainConfig train;
  CorpusConfig corpus;
  FilterConfig filter;
  std::filesystem::path corpus_dir = "data/corpus";
  std::filesystem::path checkpoint_dir = "runs/checkpoints";
  std::filesystem::path output_dir = "runs/output";
};

// Config file: {"profiles": {"desk": {...}, "paper": {...}}, "paths": {...},
// "corpus": {...}, "filter": {...}}. A profile holds "model" and "train"
// blocks; missing keys keep the built-in profile defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, const std::string& profile);
PipelineConfig default_pipeline_config(const std::string& profile);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// One clip as float tensors.
struct ClipTensors {
  std::string id;
  std::vector<torch::Tensor> mfcc;  // (T, 40); [0] is the clean waveform
  torch::Tensor frames;             // (T, 308) frontal_normalized face + eyes
  torch::Tensor posed;              // (T, 204) posed face
  torch::Tensor poses;              // (T, 6) normalized pose
  torch::Tensor scales;             // (T,) pose scale
  torch::Tensor latents;            // (T, 60)
  torch::Tensor emotion;            // (8,)

  int64_t frames_count() const { return frames.size(0); }
};

ClipTensors clip_to_tensors(const ClipRecord& clip, int augment_variants = 0,
                            std::uint64_t augment_seed = 0);

struct TrainingSet {
  std::vector<ClipTensors> clips;
  torch::Tensor mfcc_mean, mfcc_std;  // (40,) over the clean features

  int64_t min_frames() const;
  torch::Tensor mean_frame() const;     // (308,) over all frames
  torch::Tensor mean_keypoints() const;  // (60,)
};

TrainingSet make_training_set(std::vector<ClipTensors> clips);
// Loads the given manifest entries of a corpus (the train split by default).
TrainingSet load_training_set(const Corpus& corpus, const std::string& split, int augment_variants,
                              std::uint64_t seed);

// Batch of random crops for teacher-forced training.
struct Batch {
  torch::Tensor frame0;     // (B, 308) clip frame 0
  torch::Tensor frames;     // (B, L, 308) targets
  torch::Tensor prev;       // (B, L, 308) previous frames (frame 0 before the clip start)
  torch::Tensor mfcc;       // (B, L, 40)
  torch::Tensor emotion;    // (B, 8)
  torch::Tensor posed;      // (B, L, 204)
  torch::Tensor latents;    // (B, L, 60)
  torch::Tensor kp_source;  // (B, 60) clip frame 0 keypoints
  torch::Tensor prev_kp;    // (B, L, 60)
  torch::Tensor poses;      // (B, L, 6)
};

class BatchSampler {
 public:
  BatchSampler(const TrainingSet& set, int batch_size, int crop_frames, std::uint64_t seed);
  Batch next();
  int crop_frames() const { return crop_; }

 private:
  const TrainingSet& set_;
  int batch_;
  int crop_;
  std::mt19937_64 rng_;
};

struct LossParts {
  torch::Tensor total;
  std::vector<std::pair<std::string, torch::Tensor>> components;
};

LossParts s2l_loss(S2L& model, const Batch& b, const TrainConfig& cfg);
LossParts posegen_loss(PoseGen& model, const Batch& b, const TrainConfig& cfg);
LossParts l2l_loss(L2L& model, const Batch& b, const TrainConfig& cfg);

// Models are created under torch::manual_seed(seed) and carry the training
// set's MFCC normalization when one is given.
S2L make_s2l(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set = nullptr);
PoseGen make_posegen(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set = nullptr);
L2L make_l2l(const ModelConfig& c, std::uint64_t seed, const TrainingSet* set = nullptr);

S2L load_s2l(const std::filesystem::path& path);
PoseGen load_posegen(const std::filesystem::path& path);
L2L load_l2l(const std::filesystem::path& path);

struct TrainResult {
  std::vector<double> losses;  // total loss per step
  std::vector<double> kl;      // PoseGen only
  std::filesystem::path checkpoint;
  long steps = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // checkpoint and metrics log location
  std::string profile = "desk";
  bool quiet = true;
  // Called after each step with (step, loss).
  std::function<void(long, double)> on_step;
};

// Teacher-forced Adam training with warmup-cosine lr and gradient clipping.
// Writes <out_dir>/<kind>.ckpt (periodically and at the end) and appends to
// <out_dir>/<kind>.metrics.jsonl. A non-finite loss writes
// <out_dir>/<kind>.nan.ckpt and throws NumericalError.
TrainResult train_model(S2L& model, const TrainingSet& set, const TrainConfig& cfg,
                        const TrainOptions& options);
TrainResult train_model(PoseGen& model, const TrainingSet& set, const TrainConfig& cfg,
                        const TrainOptions& options);
TrainResult train_model(L2L& model, const TrainingSet& set, const TrainConfig& cfg,
                        const TrainOptions& options);

}  // namespace space
