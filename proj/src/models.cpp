#include "space/models.hpp"

#include "space/errors.hpp"

namespace space {

namespace F = torch::nn::functional;

namespace {

constexpr double kLeakySlope = 0.2;

torch::Tensor leaky(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
}

torch::nn::LSTM make_lstm(int in, int hidden, int layers, bool bidirectional = false) {
  return torch::nn::LSTM(torch::nn::LSTMOptions(in, hidden)
                             .num_layers(layers)
                             .batch_first(true)
                             .bidirectional(bidirectional));
}

// Splits a (B, 2 * layers * hidden) vector into an LSTM state.
LstmState split_state(const torch::Tensor& v, int layers, int hidden) {
  const auto b = v.size(0);
  const torch::Tensor s = v.view({b, 2, layers, hidden});
  return {torch::tanh(s.select(1, 0)).permute({1, 0, 2}).contiguous(),
          s.select(1, 1).permute({1, 0, 2}).contiguous()};
}

std::pair<torch::Tensor, LstmState> run_lstm(torch::nn::LSTM& lstm, const torch::Tensor& x,
                                             const LstmState& s) {
  auto [y, hc] = lstm->forward(x, std::make_tuple(s.h, s.c));
  return {y, {std::get<0>(hc), std::get<1>(hc)}};
}

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

void check_sequence(const torch::Tensor& t, int64_t features, const char* what) {
  require(t.dim() == 3 && t.size(2) == features, what);
}

}  // namespace

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.audio.channels = 1024;
  c.lstm_hidden = 1024;
  c.encoder_width = 1024;
  c.posegen_hidden = 256;
  c.film_hidden = 256;
  return c;
}

FiLMImpl::FiLMImpl(int features_, int hidden) : features(features_) {
  fc1 = register_module("fc1", torch::nn::Linear(kNumEmotions, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, 2 * features));
  torch::NoGradGuard g;
  fc2->weight.zero_();
  fc2->bias.zero_();
}

std::pair<torch::Tensor, torch::Tensor> FiLMImpl::params(const torch::Tensor& emotion) {
  require(emotion.dim() == 2 && emotion.size(1) == kNumEmotions, "FiLM expects (B, 8) emotion");
  const torch::Tensor out = fc2(leaky(fc1(emotion)));
  return {1.0 + out.narrow(1, 0, features), out.narrow(1, features, features)};
}

torch::Tensor film_apply(const torch::Tensor& x, const torch::Tensor& gamma,
                         const torch::Tensor& beta) {
  if (x.dim() == 3) return x * gamma.unsqueeze(1) + beta.unsqueeze(1);
  return x * gamma + beta;
}

torch::Tensor FiLMImpl::forward(const torch::Tensor& x, const torch::Tensor& emotion) {
  require(x.size(-1) == features, "FiLM feature size mismatch");
  auto [gamma, beta] = params(emotion);
  return film_apply(x, gamma, beta);
}

MLPImpl::MLPImpl(int in, int width, int out, int layers, bool final_activation)
    : final_activation_(final_activation) {
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int i = 0; i < layers; ++i) {
    const int a = i == 0 ? in : width;
    const int b = i == layers - 1 ? out : width;
    torch::nn::Linear l(a, b);
    // He init for the leaky slope keeps deep stacks from shrinking the signal.
    torch::NoGradGuard g;
    torch::nn::init::kaiming_normal_(l->weight, kLeakySlope, torch::kFanIn,
                                     torch::kLeakyReLU);
    l->bias.zero_();
    layers_->push_back(l);
  }
}

torch::Tensor MLPImpl::forward(torch::Tensor x) {
  const auto n = layers_->size();
  for (std::size_t i = 0; i < n; ++i) {
    x = layers_[i]->as<torch::nn::Linear>()->forward(x);
    if (i + 1 < n || final_activation_) x = leaky(x);
  }
  return x;
}

WindowConvImpl::WindowConvImpl(int in, int out, int kernel_, int left_pad_)
    : kernel(kernel_), left_pad(left_pad_) {
  proj = register_module("proj", torch::nn::Linear(in * kernel, out));
}

torch::Tensor WindowConvImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), t = x.size(1), c = x.size(2);
  const torch::Tensor padded = F::pad(x, F::PadFuncOptions({0, 0, left_pad, kernel - 1 - left_pad}));
  // (B, T, C, K) -> (B, T, K * C) with the window position as the slow index.
  const torch::Tensor windows = padded.unfold(1, kernel, 1).transpose(2, 3).reshape({b, t, kernel * c});
  return proj(windows);
}

AudioEncoderImpl::AudioEncoderImpl(const AudioEncoderConfig& config_, int film_hidden,
                                   bool with_film)
    : config(config_) {
  if (config.symmetric_layers < 0 || config.causal_layers < 0 || config.layers() < 1) {
    throw InvalidArgument("audio encoder needs at least one layer");
  }
  convs = register_module("convs", torch::nn::ModuleList());
  norms = register_module("norms", torch::nn::ModuleList());
  const int c = config.channels;
  for (int i = 0; i < config.layers(); ++i) {
    const int in = i == 0 ? kNumMfcc : c;
    if (i < config.symmetric_layers) {
      convs->push_back(WindowConv(in, c, 3, 1));
    } else {
      convs->push_back(WindowConv(in, c, 5, 4));
    }
    norms->push_back(torch::nn::BatchNorm1d(c));
  }
  if (with_film) film = register_module("film", FiLM(c, film_hidden));
  mfcc_mean = register_buffer("mfcc_mean", torch::zeros({kNumMfcc}));
  mfcc_std = register_buffer("mfcc_std", torch::ones({kNumMfcc}));
}

void AudioEncoderImpl::set_normalization(const torch::Tensor& mean, const torch::Tensor& std) {
  require(mean.numel() == kNumMfcc && std.numel() == kNumMfcc, "normalization needs 40 values");
  torch::NoGradGuard g;
  mfcc_mean.copy_(mean.reshape({kNumMfcc}));
  mfcc_std.copy_(std.reshape({kNumMfcc}).clamp_min(1e-6));
}

torch::Tensor AudioEncoderImpl::encode(const torch::Tensor& mfcc) {
  check_sequence(mfcc, kNumMfcc, "audio encoder expects (B, T, 40) features");
  require(mfcc.size(1) >= 1, "audio encoder needs at least one frame");
  torch::Tensor x = (mfcc - mfcc_mean) / mfcc_std;
  const auto b = x.size(0), t = x.size(1);
  const int c = config.channels;
  for (int i = 0; i < config.layers(); ++i) {
    torch::Tensor y = convs[i]->as<WindowConv>()->forward(x);
    y = norms[i]->as<torch::nn::BatchNorm1d>()->forward(y.reshape({b * t, c})).view({b, t, c});
    y = leaky(y);
    x = i == 0 ? y : x + y;
    if (i + 1 == config.symmetric_layers && config.delay() > 0) {
      const int d = config.delay();
      const torch::Tensor zeros = torch::zeros({b, std::min<int64_t>(d, t), c}, x.options());
      x = t > d ? torch::cat({zeros, x.narrow(1, 0, t - d)}, 1) : zeros;
    }
  }
  return x;
}

torch::Tensor AudioEncoderImpl::forward(const torch::Tensor& mfcc, const torch::Tensor& emotion) {
  torch::Tensor x = encode(mfcc);
  if (film && emotion.defined()) x = film(x, emotion);
  return x;
}

S2LImpl::S2LImpl(const ModelConfig& config_) : config(config_) {
  const int c = config.audio.channels, w = config.encoder_width, h = config.lstm_hidden;
  audio = register_module("audio", AudioEncoder(config.audio, config.film_hidden, true));
  face_film = register_module("face_film", FiLM(kFaceDims, config.film_hidden));
  face_encoder = register_module("face_encoder", MLP(kFaceDims, w, w, 8));
  eye_encoder = register_module("eye_encoder", MLP(kEyeDims, w, w, 4));
  const int in = c + 2 * w + (config.mouth_conditioning ? kMouthDims : 0);
  lstm = register_module("lstm", make_lstm(in, h, config.lstm_layers));
  head = register_module("head", torch::nn::Linear(h, kFrameDims));
  init_mlp = register_module(
      "init_mlp", MLP(kFrameDims + c, w, 2 * config.lstm_layers * h, 4, false));
  // Small output steps at start keep early rollouts near the reference frame.
  torch::NoGradGuard g;
  head->weight.mul_(0.1);
  head->bias.zero_();
}

LstmState S2LImpl::init_hidden(const torch::Tensor& frame0, const torch::Tensor& a0) {
  require(frame0.dim() == 2 && frame0.size(1) == kFrameDims, "S2L expects (B, 308) frame0");
  return split_state(init_mlp(torch::cat({frame0, a0}, 1)), config.lstm_layers,
                     config.lstm_hidden);
}

torch::Tensor S2LImpl::step_inputs(const torch::Tensor& prev, const torch::Tensor& audio_emb,
                                   const torch::Tensor& emotion, const torch::Tensor& mouth) {
  const torch::Tensor face = face_film(prev.narrow(2, 0, kFaceDims), emotion);
  const torch::Tensor eyes = prev.narrow(2, kFaceDims, kEyeDims);
  std::vector<torch::Tensor> parts = {audio_emb, face_encoder(face), eye_encoder(eyes)};
  if (config.mouth_conditioning) {
    require(mouth.defined(), "S2L built with mouth conditioning needs mouth landmarks");
    parts.push_back(mouth);
  }
  return torch::cat(parts, 2);
}

torch::Tensor S2LImpl::forward(const torch::Tensor& frame0, const torch::Tensor& prev,
                               const torch::Tensor& mfcc, const torch::Tensor& emotion,
                               const torch::Tensor& mouth) {
  check_sequence(prev, kFrameDims, "S2L expects (B, T, 308) previous frames");
  require(prev.size(1) == mfcc.size(1), "S2L landmark and audio lengths differ");
  const torch::Tensor emb = audio(mfcc, emotion);
  const torch::Tensor x = step_inputs(prev, emb, emotion, mouth);
  auto [y, state] = run_lstm(lstm, x, init_hidden(frame0, emb.select(1, 0)));
  return frame0.unsqueeze(1) + head(y);
}

torch::Tensor S2LImpl::rollout(const torch::Tensor& frame0, const torch::Tensor& mfcc,
                               const torch::Tensor& emotion, const torch::Tensor& mouth) {
  check_sequence(mfcc, kNumMfcc, "S2L expects (B, T, 40) features");
  if (mfcc.size(1) < 1) throw InvalidArgument("S2L rollout needs at least one audio frame");
  const torch::Tensor emb = audio(mfcc, emotion);
  LstmState state = init_hidden(frame0, emb.select(1, 0));
  torch::Tensor prev = frame0.unsqueeze(1);
  std::vector<torch::Tensor> out;
  const auto t_len = mfcc.size(1);
  out.reserve(static_cast<std::size_t>(t_len));
  for (int64_t t = 0; t < t_len; ++t) {
    const torch::Tensor m = config.mouth_conditioning ? mouth.narrow(1, t, 1) : torch::Tensor();
    const torch::Tensor x = step_inputs(prev, emb.narrow(1, t, 1), emotion, m);
    auto [y, next] = run_lstm(lstm, x, state);
    state = next;
    prev = frame0.unsqueeze(1) + head(y);
    out.push_back(prev);
  }
  return torch::cat(out, 1);
}

PoseGenImpl::PoseGenImpl(const ModelConfig& config_) : config(config_) {
  const int c = config.audio.channels, p = config.posegen_hidden;
  audio = register_module("audio", AudioEncoder(config.audio, config.film_hidden, false));
  encoder = register_module("encoder", make_lstm(c + kPoseDims, p, 2, true));
  to_mu = register_module("to_mu", torch::nn::Linear(2 * p, kPoseLatentDims));
  to_logvar = register_module("to_logvar", torch::nn::Linear(2 * p, kPoseLatentDims));
  decoder = register_module("decoder", make_lstm(c + kPoseLatentDims, p, 2));
  z_to_state = register_module("z_to_state", torch::nn::Linear(kPoseLatentDims, 2 * 2 * p));
  head = register_module("head", torch::nn::Linear(p, kPoseDims));
}

PoseLatent PoseGenImpl::encode(const torch::Tensor& mfcc, const torch::Tensor& poses) {
  check_sequence(poses, kPoseDims, "PoseGen expects (B, T, 6) poses");
  require(poses.size(1) == mfcc.size(1), "PoseGen audio and pose lengths differ");
  const torch::Tensor emb = audio(mfcc);
  auto [y, hc] = encoder->forward(torch::cat({emb, poses}, 2));
  const torch::Tensor pooled = y.mean(1);
  const torch::Tensor logvar = to_logvar(pooled).clamp(-12.0, 12.0);
  return {to_mu(pooled), torch::exp(0.5 * logvar)};
}

LstmState PoseGenImpl::decoder_state(const torch::Tensor& z) {
  require(z.dim() == 2 && z.size(1) == kPoseLatentDims, "PoseGen expects (B, 64) z");
  return split_state(z_to_state(z), 2, config.posegen_hidden);
}

torch::Tensor PoseGenImpl::decode(const torch::Tensor& mfcc, const torch::Tensor& z) {
  if (!z.isfinite().all().item<bool>()) throw InvalidArgument("PoseGen latent must be finite");
  const torch::Tensor emb = audio(mfcc);
  require(z.size(0) == emb.size(0), "PoseGen latent and audio batch sizes differ");
  const torch::Tensor zz = z.unsqueeze(1).expand({z.size(0), emb.size(1), kPoseLatentDims});
  auto [y, state] = run_lstm(decoder, torch::cat({emb, zz}, 2), decoder_state(z));
  return torch::tanh(head(y));
}

L2LImpl::L2LImpl(const ModelConfig& config_) : config(config_) {
  const int c = config.audio.channels, w = config.encoder_width, h = config.lstm_hidden;
  audio = register_module("audio", AudioEncoder(config.audio, config.film_hidden, true));
  face_film = register_module("face_film", FiLM(kFaceDims, config.film_hidden));
  source_film = register_module("source_film", FiLM(kLatentDims, config.film_hidden));
  face_encoder = register_module("face_encoder", MLP(kFaceDims, w, w, 8));
  source_encoder = register_module("source_encoder", MLP(kLatentDims, w, w, 4));
  prev_encoder = register_module("prev_encoder", MLP(kLatentDims, w, w, 8));
  lstm = register_module("lstm", make_lstm(c + 3 * w, h, config.lstm_layers));
  head = register_module("head", torch::nn::Linear(h, kLatentDims));
  init_mlp = register_module(
      "init_mlp", MLP(kFaceDims + kLatentDims + c, w, 2 * config.lstm_layers * h, 4, false));
  torch::NoGradGuard g;
  head->weight.mul_(0.1);
  head->bias.zero_();
}

LstmState L2LImpl::init_hidden(const torch::Tensor& posed0, const torch::Tensor& kp_s,
                               const torch::Tensor& a0) {
  return split_state(init_mlp(torch::cat({posed0, kp_s, a0}, 1)), config.lstm_layers,
                     config.lstm_hidden);
}

torch::Tensor L2LImpl::static_inputs(const torch::Tensor& posed, const torch::Tensor& emb,
                                     const torch::Tensor& kp_s, const torch::Tensor& emotion) {
  const torch::Tensor face = face_encoder(face_film(posed, emotion));
  const torch::Tensor src = source_encoder(source_film(kp_s, emotion));
  return torch::cat({emb, face, src.unsqueeze(1).expand({src.size(0), posed.size(1), src.size(1)})},
                    2);
}

torch::Tensor L2LImpl::forward(const torch::Tensor& posed, const torch::Tensor& mfcc,
                               const torch::Tensor& kp_s, const torch::Tensor& prev,
                               const torch::Tensor& emotion) {
  check_sequence(posed, kFaceDims, "L2L expects (B, T, 204) posed landmarks");
  check_sequence(prev, kLatentDims, "L2L expects (B, T, 60) previous keypoints");
  require(posed.size(1) == mfcc.size(1) && prev.size(1) == mfcc.size(1),
          "L2L sequence lengths differ");
  const torch::Tensor emb = audio(mfcc, emotion);
  const torch::Tensor x = torch::cat({static_inputs(posed, emb, kp_s, emotion), prev_encoder(prev)}, 2);
  auto [y, state] = run_lstm(lstm, x, init_hidden(posed.select(1, 0), kp_s, emb.select(1, 0)));
  return kp_s.unsqueeze(1) + head(y);
}

torch::Tensor L2LImpl::rollout(const torch::Tensor& posed, const torch::Tensor& mfcc,
                               const torch::Tensor& kp_s, const torch::Tensor& emotion) {
  check_sequence(posed, kFaceDims, "L2L expects (B, T, 204) posed landmarks");
  require(posed.size(1) == mfcc.size(1), "L2L landmark and audio lengths differ");
  const torch::Tensor emb = audio(mfcc, emotion);
  const torch::Tensor stat = static_inputs(posed, emb, kp_s, emotion);
  LstmState state = init_hidden(posed.select(1, 0), kp_s, emb.select(1, 0));
  torch::Tensor prev = kp_s.unsqueeze(1);
  std::vector<torch::Tensor> out;
  for (int64_t t = 0; t < posed.size(1); ++t) {
    const torch::Tensor x = torch::cat({stat.narrow(1, t, 1), prev_encoder(prev)}, 2);
    auto [y, next] = run_lstm(lstm, x, state);
    state = next;
    prev = kp_s.unsqueeze(1) + head(y);
    out.push_back(prev);
  }
  return torch::cat(out, 1);
}

torch::Tensor face_to_tensor(const FaceMatrix& face) {
  torch::Tensor t = torch::empty({kFaceDims}, torch::kFloat64);
  std::copy(face.data(), face.data() + kFaceDims, t.data_ptr<double>());
  return t.to(torch::kFloat32);
}

torch::Tensor frame_to_tensor(const LandmarkFrame& frame) {
  torch::Tensor t = torch::empty({kFrameDims}, torch::kFloat64);
  double* p = t.data_ptr<double>();
  std::copy(frame.face.data(), frame.face.data() + kFaceDims, p);
  std::copy(frame.eyes.data(), frame.eyes.data() + kEyeDims, p + kFaceDims);
  return t.to(torch::kFloat32);
}

LandmarkFrame tensor_to_frame(const torch::Tensor& t, LandmarkSpace space) {
  const torch::Tensor d = t.detach().to(torch::kCPU, torch::kFloat64).contiguous().reshape({-1});
  require(d.numel() == kFrameDims, "frame tensor needs 308 values");
  LandmarkFrame f;
  const double* p = d.data_ptr<double>();
  std::copy(p, p + kFaceDims, f.face.data());
  std::copy(p + kFaceDims, p + kFrameDims, f.eyes.data());
  f.space = space;
  return f;
}

torch::Tensor keypoints_to_tensor(const LatentKeypoints& kp) {
  torch::Tensor t = torch::empty({kLatentDims}, torch::kFloat64);
  std::copy(kp.data(), kp.data() + kLatentDims, t.data_ptr<double>());
  return t.to(torch::kFloat32);
}

LatentKeypoints tensor_to_keypoints(const torch::Tensor& t) {
  const torch::Tensor d = t.detach().to(torch::kCPU, torch::kFloat64).contiguous().reshape({-1});
  require(d.numel() == kLatentDims, "keypoint tensor needs 60 values");
  LatentKeypoints kp;
  std::copy(d.data_ptr<double>(), d.data_ptr<double>() + kLatentDims, kp.data());
  return kp;
}

torch::Tensor pose_to_tensor(const HeadPose& p) {
  return torch::tensor({p.yaw / kPoseAngleScale, p.pitch / kPoseAngleScale,
                        p.roll / kPoseAngleScale, p.tx / kPoseTranslationScale,
                        p.ty / kPoseTranslationScale, p.tz / kPoseTranslationScale},
                       torch::kFloat64)
      .to(torch::kFloat32);
}

HeadPose tensor_to_pose(const torch::Tensor& t, double scale) {
  const torch::Tensor d = t.detach().to(torch::kCPU, torch::kFloat64).contiguous().reshape({-1});
  require(d.numel() == kPoseDims, "pose tensor needs 6 values");
  const double* p = d.data_ptr<double>();
  return HeadPose{p[0] * kPoseAngleScale, p[1] * kPoseAngleScale, p[2] * kPoseAngleScale,
                  p[3] * kPoseTranslationScale, p[4] * kPoseTranslationScale,
                  p[5] * kPoseTranslationScale, scale};
}

torch::Tensor emotion_to_tensor(const EmotionVector& e) {
  e.validate();
  return torch::tensor(std::vector<double>(e.weights.begin(), e.weights.end()), torch::kFloat64)
      .to(torch::kFloat32);
}

torch::Tensor mfcc_to_tensor(const MfccMatrix& m) {
  torch::Tensor t = torch::empty({m.rows(), kNumMfcc}, torch::kFloat64);
  std::copy(m.data(), m.data() + m.size(), t.data_ptr<double>());
  return t.to(torch::kFloat32);
}

torch::Tensor mouth_from_frames(const torch::Tensor& frames) {
  return frames.narrow(-1, lmk::kMouthBegin * 3, kMouthDims);
}

}  // namespace space
