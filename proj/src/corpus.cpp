#include "space/errors.hpp"
#include "space/random.hpp"
#include "space/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace space {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json emotion_to_json(const EmotionVector& e) {
  return json{{"label", std::string(to_string(e.dominant()))},
              {"intensity", e.intensity()},
              {"weights", e.weights}};
}

EmotionVector emotion_from_json(const json& j) {
  EmotionVector e;
  const auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != kNumEmotions) throw IoError("emotion weights must have 8 entries");
  std::copy(w.begin(), w.end(), e.weights.begin());
  e.validate();
  return e;
}

json entry_to_json(const ManifestEntry& e) {
  return json{{"id", e.id},
              {"split", e.split},
              {"emotion", emotion_to_json(e.emotion)},
              {"identity", e.identity_seed},
              {"frames", e.frames},
              {"duration_s", e.duration_s},
              {"flags",
               {{"anomaly", std::string(to_string(e.flags.anomaly))},
                {"hands_detected", e.flags.hands_detected}}},
              {"paths",
               {{"audio", e.audio},
                {"landmarks", e.landmarks},
                {"poses", e.poses},
                {"latents", e.latents}}}};
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.id = j.at("id").get<std::string>();
  e.split = j.at("split").get<std::string>();
  e.emotion = emotion_from_json(j.at("emotion"));
  e.identity_seed = j.at("identity").get<std::uint64_t>();
  e.frames = j.at("frames").get<std::size_t>();
  e.duration_s = j.at("duration_s").get<double>();
  const json& flags = j.at("flags");
  e.flags.anomaly = anomaly_from_string(flags.at("anomaly").get<std::string>());
  e.flags.hands_detected = flags.value("hands_detected", false);
  const json& paths = j.at("paths");
  e.audio = paths.at("audio").get<std::string>();
  e.landmarks = paths.at("landmarks").get<std::string>();
  e.poses = paths.at("poses").get<std::string>();
  e.latents = paths.at("latents").get<std::string>();
  return e;
}

json config_to_json(const CorpusConfig& c) {
  return json{{"clips", c.clips},
              {"train_ratio", c.train_ratio},
              {"val_ratio", c.val_ratio},
              {"test_ratio", c.test_ratio},
              {"seed", c.seed},
              {"anomaly_rate", c.anomaly_rate},
              {"min_duration_s", c.min_duration_s},
              {"max_duration_s", c.max_duration_s},
              {"emotion_prob", c.emotion_prob},
              {"oracle_seed", c.oracle_seed}};
}

CorpusConfig config_from_json(const json& j) {
  CorpusConfig c;
  c.clips = j.at("clips").get<int>();
  c.train_ratio = j.at("train_ratio").get<double>();
  c.val_ratio = j.at("val_ratio").get<double>();
  c.test_ratio = j.at("test_ratio").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.anomaly_rate = j.at("anomaly_rate").get<double>();
  c.min_duration_s = j.at("min_duration_s").get<double>();
  c.max_duration_s = j.at("max_duration_s").get<double>();
  c.emotion_prob = j.at("emotion_prob").get<double>();
  c.oracle_seed = j.at("oracle_seed").get<std::uint64_t>();
  return c;
}

void validate(const CorpusConfig& c) {
  if (c.clips < 1) throw InvalidArgument("corpus needs at least one clip");
  const double total = c.train_ratio + c.val_ratio + c.test_ratio;
  if (c.train_ratio < 0 || c.val_ratio < 0 || c.test_ratio < 0 || std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must be nonnegative and sum to 1");
  }
  if (!(c.anomaly_rate >= 0.0 && c.anomaly_rate <= 1.0)) {
    throw InvalidArgument("anomaly rate must be within [0, 1]");
  }
  if (!(c.min_duration_s >= 1.0 && c.max_duration_s <= 10.0 &&
        c.min_duration_s <= c.max_duration_s)) {
    throw InvalidArgument("clip durations must lie within [1, 10] s");
  }
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order is stable across libraries.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<const ManifestEntry*> Corpus::split(std::string_view name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const auto& e : entries) text += entry_to_json(e).dump() + "\n";
  write_text_atomic(path, text);
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      entries.push_back(entry_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return entries;
}

void save_clip(const fs::path& root, const ClipRecord& clip, ManifestEntry& entry) {
  const fs::path rel = fs::path("clips") / clip.clip_id;
  std::error_code ec;
  fs::create_directories(root / rel, ec);
  if (ec) throw IoError("cannot create '" + (root / rel).string() + "': " + ec.message());
  entry.id = clip.clip_id;
  entry.emotion = clip.emotion;
  entry.frames = clip.frames();
  entry.duration_s = clip.waveform.duration();
  entry.flags = clip.flags;
  entry.audio = (rel / "audio.wav").generic_string();
  entry.landmarks = (rel / "landmarks.jsonl").generic_string();
  entry.poses = (rel / "poses.jsonl").generic_string();
  entry.latents = (rel / "latents.jsonl").generic_string();
  write_wav(root / entry.audio, clip.waveform);
  write_landmark_sequence(root / entry.landmarks, clip.landmarks);
  write_pose_sequence(root / entry.poses, clip.landmarks.poses);
  write_latent_sequence(root / entry.latents, clip.latents);
}

ClipRecord load_clip(const Corpus& corpus, const ManifestEntry& entry) {
  ClipRecord clip;
  clip.clip_id = entry.id;
  clip.emotion = entry.emotion;
  clip.flags = entry.flags;
  clip.shape = FaceShape::sample(entry.identity_seed);
  clip.waveform = read_wav(corpus.root / entry.audio);
  clip.landmarks = read_landmark_sequence(corpus.root / entry.landmarks);
  clip.landmarks.poses = read_pose_sequence(corpus.root / entry.poses);
  clip.latents = read_latent_sequence(corpus.root / entry.latents);
  if (clip.landmarks.poses.size() != clip.landmarks.frames.size() ||
      clip.latents.size() != clip.landmarks.frames.size()) {
    throw IoError("clip '" + entry.id + "' has sequences of different lengths");
  }
  return clip;
}

Corpus build_corpus(const fs::path& root, const CorpusConfig& config) {
  validate(config);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) {
    throw IoError("cannot create corpus directory '" + root.string() + "'");
  }
  const LatentOracle oracle(config.oracle_seed);
  const auto n = static_cast<std::size_t>(config.clips);

  const auto n_train = static_cast<std::size_t>(std::llround(n * config.train_ratio));
  const auto n_val = std::min(n - n_train,
                              static_cast<std::size_t>(std::llround(n * config.val_ratio)));
  const auto split_order = permutation(n, mix_seed(config.seed, 0x5917));
  std::vector<std::string> split(n);
  for (std::size_t k = 0; k < n; ++k) {
    split[split_order[k]] = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
  }

  const auto n_anomalies = static_cast<std::size_t>(std::llround(n * config.anomaly_rate));
  const auto anomaly_order = permutation(n, mix_seed(config.seed, 0xA0A1));
  std::vector<AnomalyKind> anomaly(n, AnomalyKind::none);
  constexpr std::array<AnomalyKind, 3> kinds = {
      AnomalyKind::temporal_jump, AnomalyKind::rotation, AnomalyKind::scale_sweep};
  for (std::size_t k = 0; k < n_anomalies; ++k) anomaly[anomaly_order[k]] = kinds[k % kinds.size()];

  Corpus corpus;
  corpus.root = root;
  corpus.config = config;
  corpus.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t clip_seed = mix_seed(config.seed, 1000 + i);
    std::mt19937_64 rng(clip_seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    ClipSpec spec;
    spec.duration_s =
        config.min_duration_s + (config.max_duration_s - config.min_duration_s) * u01(rng);
    // Whole milliseconds keep the sample count exact.
    spec.duration_s = std::round(spec.duration_s * 1000.0) / 1000.0;
    spec.identity_seed = mix_seed(clip_seed, 0x1D);
    if (u01(rng) < config.emotion_prob) {
      const int label = 1 + static_cast<int>(rng() % (kNumEmotions - 1));
      spec.emotion = EmotionVector::one_hot(static_cast<Emotion>(label), 0.3 + 0.7 * u01(rng));
    }

    ClipRecord clip = generate_clip(spec, clip_seed, oracle);
    char id[32];
    std::snprintf(id, sizeof(id), "clip_%05zu", i);
    clip.clip_id = id;
    inject_anomaly(clip, anomaly[i], clip_seed, oracle);

    ManifestEntry& entry = corpus.entries[i];
    entry.split = split[i];
    entry.identity_seed = spec.identity_seed;
    save_clip(root, clip, entry);
  }

  write_text_atomic(root / kCorpusConfigFile, config_to_json(config).dump(2) + "\n");
  write_manifest(root / kManifestFile, corpus.entries);
  return corpus;
}

Corpus load_corpus(const fs::path& root, const std::string& manifest_name) {
  Corpus corpus;
  corpus.root = root;
  std::ifstream in(root / kCorpusConfigFile);
  if (!in) throw IoError("missing '" + (root / kCorpusConfigFile).string() + "'");
  try {
    corpus.config = config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw IoError(std::string("corpus config: ") + e.what());
  }
  corpus.entries = read_manifest(root / manifest_name);
  return corpus;
}

}  // namespace space
