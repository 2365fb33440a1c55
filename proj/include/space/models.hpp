#pragma once

#include "space/geometry.hpp"
#include "space/sequence_io.hpp"
#include "space/synth.hpp"

#include <torch/torch.h>

#include <string>
#include <vector>

namespace space {

inline constexpr int kPoseDims = 6;  // yaw, pitch, roll, tx, ty, tz
inline constexpr int kPoseLatentDims = 64;
inline constexpr int kMouthDims = (lmk::kMouthEnd - lmk::kMouthBegin) * 3;  // 60

struct AudioEncoderConfig {
  int channels = 128;
  int symmetric_layers = 4;  // kernel 3
  int causal_layers = 8;     // kernel 5
  double leaky_slope = 0.2;

  static constexpr int kMaxLookahead = 2;

  int layers() const { return symmetric_layers + causal_layers; }
  // Delay applied after the symmetric block so that it sees at most
  // kMaxLookahead future frames.
  int delay() const { return symmetric_layers > kMaxLookahead ? symmetric_layers - kMaxLookahead : 0; }
  int lookahead() const { return symmetric_layers - delay(); }
};

// Widths of one model family. "desk" and "paper" profiles come from the
// config file; the defaults here are the desk profile.
struct ModelConfig {
  AudioEncoderConfig audio;
  int lstm_hidden = 128;
  int lstm_layers = 2;
  int encoder_width = 128;  // landmark / keypoint / eye encoder MLP width
  int posegen_hidden = 128;
  int film_hidden = 64;
  bool mouth_conditioning = false;  // extra S2L input of the mouth landmarks

  static ModelConfig desk();
  static ModelConfig paper();
};

// Pose normalization used by PoseGen: angles / 45 deg, translation / 0.2.
inline constexpr double kPoseAngleScale = 45.0;
inline constexpr double kPoseTranslationScale = 0.2;

// FiLM generator: 2-layer MLP from the 8-dim emotion vector to (gamma, beta).
// The last layer starts at zero, so gamma = 1 and beta = 0 at initialization.
class FiLMImpl : public torch::nn::Module {
 public:
  FiLMImpl(int features, int hidden);

  // x: (..., features), emotion: (B, 8) broadcast over the middle dims.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& emotion);
  std::pair<torch::Tensor, torch::Tensor> params(const torch::Tensor& emotion);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
  int features;
};
TORCH_MODULE(FiLM);

// Applies gamma * x + beta with gamma, beta of shape (B, F) to x of shape
// (B, F) or (B, T, F).
torch::Tensor film_apply(const torch::Tensor& x, const torch::Tensor& gamma,
                         const torch::Tensor& beta);

// Stack of Linear + LeakyReLU layers; the last layer is linear when
// final_activation is false.
class MLPImpl : public torch::nn::Module {
 public:
  MLPImpl(int in, int width, int out, int layers, bool final_activation = true);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::ModuleList layers_;
  bool final_activation_;
};
TORCH_MODULE(MLP);

// 1D convolution over (B, T, C) as an explicit window product, so output t
// reads exactly the inputs [t - left, t + right].
class WindowConvImpl : public torch::nn::Module {
 public:
  WindowConvImpl(int in, int out, int kernel, int left_pad);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear proj{nullptr};
  int kernel, left_pad;
};
TORCH_MODULE(WindowConv);

// 12 conv layers with batch norm and leaky ReLU over MFCC frames. Layers 1-4
// use symmetric kernel-3 windows; their output is delayed by 2 frames so the
// total lookahead is 2 frames. Layers 5-12 are causal kernel-5 windows.
class AudioEncoderImpl : public torch::nn::Module {
 public:
  AudioEncoderImpl(const AudioEncoderConfig& config, int film_hidden, bool with_film);

  // mfcc: (B, T, 40), emotion: (B, 8) or undefined when built without FiLM.
  torch::Tensor forward(const torch::Tensor& mfcc, const torch::Tensor& emotion = {});
  torch::Tensor encode(const torch::Tensor& mfcc);  // without FiLM

  void set_normalization(const torch::Tensor& mean, const torch::Tensor& std);

  AudioEncoderConfig config;
  torch::nn::ModuleList convs, norms;
  FiLM film{nullptr};
  torch::Tensor mfcc_mean, mfcc_std;
};
TORCH_MODULE(AudioEncoder);

struct LstmState {
  torch::Tensor h, c;  // (layers, B, hidden)
};

// Speech2Landmarks: face_t = face_0 + head(LSTM(enc(face_{t-1}), enc(eyes_{t-1}), a_t)).
class S2LImpl : public torch::nn::Module {
 public:
  explicit S2LImpl(const ModelConfig& config);

  // Learned initial state from (face_0, eyes_0, a_0).
  LstmState init_hidden(const torch::Tensor& frame0, const torch::Tensor& a0);

  // Teacher-forced pass. frame0: (B, 308) reference frame; prev: (B, T, 308)
  // ground-truth previous frames; mfcc: (B, T, 40); emotion: (B, 8);
  // mouth: (B, T, 60) or undefined. Returns (B, T, 308).
  torch::Tensor forward(const torch::Tensor& frame0, const torch::Tensor& prev,
                        const torch::Tensor& mfcc, const torch::Tensor& emotion,
                        const torch::Tensor& mouth = {});

  // Autoregressive rollout feeding back its own predictions. Shapes as above;
  // returns (B, T, 308).
  torch::Tensor rollout(const torch::Tensor& frame0, const torch::Tensor& mfcc,
                        const torch::Tensor& emotion, const torch::Tensor& mouth = {});

  ModelConfig config;
  AudioEncoder audio{nullptr};
  FiLM face_film{nullptr};
  MLP face_encoder{nullptr}, eye_encoder{nullptr}, init_mlp{nullptr};
  torch::nn::LSTM lstm{nullptr};
  torch::nn::Linear head{nullptr};

 private:
  torch::Tensor step_inputs(const torch::Tensor& prev, const torch::Tensor& audio_emb,
                            const torch::Tensor& emotion, const torch::Tensor& mouth);
};
TORCH_MODULE(S2L);

struct PoseLatent {
  torch::Tensor mu, sigma;  // (B, 64), sigma > 0
};

// Conditional VAE over normalized pose sequences (B, T, 6).
class PoseGenImpl : public torch::nn::Module {
 public:
  explicit PoseGenImpl(const ModelConfig& config);

  PoseLatent encode(const torch::Tensor& mfcc, const torch::Tensor& poses);

  // Decodes (B, T, 6) normalized poses from audio and z. The recurrence is
  // carried by the LSTM state; no pose is fed back.
  torch::Tensor decode(const torch::Tensor& mfcc, const torch::Tensor& z);

  ModelConfig config;
  AudioEncoder audio{nullptr};
  torch::nn::LSTM encoder{nullptr}, decoder{nullptr};
  torch::nn::Linear to_mu{nullptr}, to_logvar{nullptr}, z_to_state{nullptr}, head{nullptr};

 private:
  LstmState decoder_state(const torch::Tensor& z);
};
TORCH_MODULE(PoseGen);

// Landmarks2Latents: kp_t = kp_s + head(LSTM(enc(posed_t), a_t, enc(kp_s), enc(kp_{t-1}))).
class L2LImpl : public torch::nn::Module {
 public:
  explicit L2LImpl(const ModelConfig& config);

  LstmState init_hidden(const torch::Tensor& posed0, const torch::Tensor& kp_s,
                        const torch::Tensor& a0);

  // posed: (B, T, 204), mfcc: (B, T, 40), kp_s: (B, 60), prev: (B, T, 60)
  // ground-truth previous keypoints, emotion: (B, 8). Returns (B, T, 60).
  torch::Tensor forward(const torch::Tensor& posed, const torch::Tensor& mfcc,
                        const torch::Tensor& kp_s, const torch::Tensor& prev,
                        const torch::Tensor& emotion);
  torch::Tensor rollout(const torch::Tensor& posed, const torch::Tensor& mfcc,
                        const torch::Tensor& kp_s, const torch::Tensor& emotion);

  ModelConfig config;
  AudioEncoder audio{nullptr};
  FiLM face_film{nullptr}, source_film{nullptr};
  MLP face_encoder{nullptr}, source_encoder{nullptr}, prev_encoder{nullptr}, init_mlp{nullptr};
  torch::nn::LSTM lstm{nullptr};
  torch::nn::Linear head{nullptr};

 private:
  torch::Tensor static_inputs(const torch::Tensor& posed, const torch::Tensor& emb,
                              const torch::Tensor& kp_s, const torch::Tensor& emotion);
};
TORCH_MODULE(L2L);

// Conversions between geometry types and flat float tensors.
torch::Tensor frame_to_tensor(const LandmarkFrame& frame);  // (308,) face then eyes
torch::Tensor face_to_tensor(const FaceMatrix& face);       // (204,)
LandmarkFrame tensor_to_frame(const torch::Tensor& t, LandmarkSpace space);
torch::Tensor keypoints_to_tensor(const LatentKeypoints& kp);  // (60,)
LatentKeypoints tensor_to_keypoints(const torch::Tensor& t);
torch::Tensor pose_to_tensor(const HeadPose& pose);  // normalized (6,)
HeadPose tensor_to_pose(const torch::Tensor& t, double scale);
torch::Tensor emotion_to_tensor(const EmotionVector& e);  // (8,)
torch::Tensor mfcc_to_tensor(const MfccMatrix& m);        // (T, 40)
torch::Tensor mouth_from_frames(const torch::Tensor& frames);  // (..., 308) -> (..., 60)

// Eval mode with gradients off for the lifetime of the guard.
struct InferenceGuard {
  explicit InferenceGuard(torch::nn::Module& m) : module(m), was_training(m.is_training()) {
    module.eval();
  }
  ~InferenceGuard() { module.train(was_training); }
  InferenceGuard(const InferenceGuard&) = delete;
  InferenceGuard& operator=(const InferenceGuard&) = delete;

  torch::nn::Module& module;
  bool was_training;
  torch::NoGradGuard no_grad;
};

}  // namespace space
