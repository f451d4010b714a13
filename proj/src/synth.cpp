// Copyright 2026 The Prosodia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "prosodia/synth.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "prosodia/error.hpp"
#include "prosodia/prosody.hpp"

namespace prosodia {

namespace {

constexpr std::size_t kSpectralLatentDim = 4;

// White noise smoothed by a truncated Gaussian (edges renormalized), then
// standardized to zero mean and unit variance.
std::vector<double> smooth_process(std::mt19937_64& rng, std::size_t n, double width) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(3.0 * width));
  std::vector<double> noise(n + 2 * static_cast<std::size_t>(half));
  for (auto& v : noise) v = gauss(rng);
  std::vector<double> kernel(2 * static_cast<std::size_t>(half) + 1);
  for (std::ptrdiff_t k = -half; k <= half; ++k) {
    kernel[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * static_cast<double>(k * k) / (width * width));
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; k < kernel.size(); ++k) out[t] += kernel[k] * noise[t + k];
  }
  return standardize(out);
}

struct Latents {
  std::size_t frames = 0;
  std::vector<double> slow;
  std::vector<double> fast;
  Eigen::MatrixXd spectral;  // kSpectralLatentDim x frames
  std::vector<bool> voiced;
};

Latents draw_latents(std::mt19937_64& rng, const SynthSpec& spec) {
  Latents l;
  l.frames = spec.min_frames + static_cast<std::size_t>(rng() % (spec.max_frames - spec.min_frames + 1));
  l.slow = smooth_process(rng, l.frames, spec.slow_smoothness);
  l.fast = smooth_process(rng, l.frames, spec.fast_smoothness);
  l.spectral.resize(kSpectralLatentDim, static_cast<Eigen::Index>(l.frames));
  for (std::size_t d = 0; d < kSpectralLatentDim; ++d) {
    const auto row = smooth_process(rng, l.frames, spec.spectral_smoothness);
    for (std::size_t t = 0; t < l.frames; ++t) l.spectral(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(t)) = row[t];
  }
  // Unvoiced lead-in/out plus a few interior pauses.
  l.voiced.assign(l.frames, true);
  const std::size_t lead = 3 + rng() % 8, tail = 3 + rng() % 8;
  for (std::size_t t = 0; t < lead; ++t) l.voiced[t] = false;
  for (std::size_t t = 0; t < tail; ++t) l.voiced[l.frames - 1 - t] = false;
  const std::size_t gaps = 2 + rng() % 3;
  for (std::size_t g = 0; g < gaps; ++g) {
    const std::size_t len = 4 + rng() % 12;
    const std::size_t start = lead + rng() % (l.frames - lead - tail - len);
    for (std::size_t t = start; t < start + len; ++t) l.voiced[t] = false;
  }
  return l;
}

UtteranceFeatures render(const Latents& l, const SynthEmotion& e, const Eigen::MatrixXd& mixing,
                         const Eigen::VectorXd& base, const std::string& id, double frame_period_ms,
                         double register_offset) {
  std::vector<double> shape(l.frames);
  for (std::size_t t = 0; t < l.frames; ++t) shape[t] = l.slow[t] + e.fast_weight * l.fast[t];
  shape = standardize(shape);
  const double log_mean = std::log(e.f0_mean_hz) + register_offset;
  const double log_std = std::log1p(e.f0_range_hz / e.f0_mean_hz);
  std::vector<double> f0(l.frames, 0.0);
  for (std::size_t t = 0; t < l.frames; ++t) {
    if (l.voiced[t]) f0[t] = std::exp(log_mean + log_std * shape[t]);
  }
  UtteranceFeatures u;
  u.utterance_id = id;
  u.emotion_label = e.name;
  u.frame_period_ms = frame_period_ms;
  const Eigen::MatrixXd mceps = (e.mcep_gain * (mixing * l.spectral)).colwise() + (base.array() + e.mcep_offset).matrix();
  u.set_mceps(mceps);
  u.set_f0(f0);
  return u;
}

}  // namespace

SynthSpec SynthSpec::defaults() {
  SynthSpec s;
  s.emotions = {{"neutral", 200.0, 30.0, 0.1, 1.0, 0.0}, {"angry", 300.0, 60.0, 0.3, 1.3, 0.2}};
  return s;
}

void SynthSpec::validate() const {
  std::vector<std::string> problems;
  if (emotions.size() < 2) problems.push_back(fmt::format("need at least 2 emotions, got {}", emotions.size()));
  std::set<std::string> names;
  for (const auto& e : emotions) {
    if (e.name.empty()) problems.push_back("emotion name must be non-empty");
    if (!names.insert(e.name).second) problems.push_back(fmt::format("duplicate emotion '{}'", e.name));
    if (!(e.f0_mean_hz > 0.0)) problems.push_back(fmt::format("{}: f0_mean_hz must be > 0", e.name));
    if (!(e.f0_range_hz > 0.0)) problems.push_back(fmt::format("{}: f0_range_hz must be > 0", e.name));
    if (!(e.fast_weight >= 0.0)) problems.push_back(fmt::format("{}: fast_weight must be >= 0", e.name));
    if (!std::isfinite(e.mcep_gain) || !std::isfinite(e.mcep_offset)) {
      problems.push_back(fmt::format("{}: cepstral map must be finite", e.name));
    }
  }
  if (n_train_each == 0) problems.push_back("n_train_each must be > 0");
  if (n_eval == 0) problems.push_back("n_eval must be > 0");
  if (min_frames < 64) problems.push_back(fmt::format("min_frames must be >= 64, got {}", min_frames));
  if (max_frames < min_frames) problems.push_back("max_frames must be >= min_frames");
  if (!(frame_period_ms > 0.0)) problems.push_back("frame_period_ms must be > 0");
  if (!(slow_smoothness > 0.0) || !(fast_smoothness > 0.0) || !(spectral_smoothness > 0.0)) {
    problems.push_back("smoothness widths must be > 0");
  }
  if (!(register_jitter >= 0.0)) problems.push_back("register_jitter must be >= 0");
  if (!problems.empty()) throw ValidationError(fmt::format("invalid synthetic corpus spec: {}", fmt::join(problems, "; ")));
}

void to_json(nlohmann::json& j, const SynthEmotion& e) {
  j = {{"name", e.name},           {"f0_mean_hz", e.f0_mean_hz}, {"f0_range_hz", e.f0_range_hz},
       {"fast_weight", e.fast_weight}, {"mcep_gain", e.mcep_gain},   {"mcep_offset", e.mcep_offset}};
}

void from_json(const nlohmann::json& j, SynthEmotion& e) {
  e.name = j.at("name").get<std::string>();
  e.f0_mean_hz = j.value("f0_mean_hz", e.f0_mean_hz);
  e.f0_range_hz = j.value("f0_range_hz", e.f0_range_hz);
  e.fast_weight = j.value("fast_weight", e.fast_weight);
  e.mcep_gain = j.value("mcep_gain", e.mcep_gain);
  e.mcep_offset = j.value("mcep_offset", e.mcep_offset);
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"emotions", s.emotions},
       {"n_train_each", s.n_train_each},
       {"n_eval", s.n_eval},
       {"min_frames", s.min_frames},
       {"max_frames", s.max_frames},
       {"frame_period_ms", s.frame_period_ms},
       {"slow_smoothness", s.slow_smoothness},
       {"fast_smoothness", s.fast_smoothness},
       {"spectral_smoothness", s.spectral_smoothness},
       {"register_jitter", s.register_jitter},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  s = SynthSpec::defaults();
  if (j.contains("emotions")) s.emotions = j.at("emotions").get<std::vector<SynthEmotion>>();
  s.n_train_each = j.value("n_train_each", s.n_train_each);
  s.n_eval = j.value("n_eval", s.n_eval);
  s.min_frames = j.value("min_frames", s.min_frames);
  s.max_frames = j.value("max_frames", s.max_frames);
  s.frame_period_ms = j.value("frame_period_ms", s.frame_period_ms);
  s.slow_smoothness = j.value("slow_smoothness", s.slow_smoothness);
  s.fast_smoothness = j.value("fast_smoothness", s.fast_smoothness);
  s.spectral_smoothness = j.value("spectral_smoothness", s.spectral_smoothness);
  s.register_jitter = j.value("register_jitter", s.register_jitter);
  s.seed = j.value("seed", s.seed);
}

Corpus synthesize_corpus(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Cepstral map shared by all emotions: decaying base envelope and mixing.
  Eigen::VectorXd base(kMcepDim);
  Eigen::MatrixXd mixing(kMcepDim, kSpectralLatentDim);
  for (std::size_t d = 0; d < kMcepDim; ++d) {
    const double decay = 1.0 / (1.0 + static_cast<double>(d));
    base(static_cast<Eigen::Index>(d)) = (d == 0 ? -4.0 : 0.8 * gauss(rng) * decay);
    for (std::size_t k = 0; k < kSpectralLatentDim; ++k) {
      mixing(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = 0.3 * gauss(rng) * std::sqrt(decay);
    }
  }

  Corpus corpus;
  for (std::size_t u = 0; u < spec.utterances_per_emotion(); ++u) {
    const Latents latents = draw_latents(rng, spec);
    const std::string id = fmt::format("s{:03}", u);
    for (const auto& e : spec.emotions) {
      const double offset = spec.register_jitter * gauss(rng);
      corpus[e.name].push_back(render(latents, e, mixing, base, id, spec.frame_period_ms, offset));
    }
  }
  return corpus;
}

std::filesystem::path write_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& dir) {
  const Corpus corpus = synthesize_corpus(spec);
  CorpusManifest manifest;
  for (const auto& [emotion, utts] : corpus) {
    std::filesystem::create_directories(dir / emotion);
    for (const auto& u : utts) {
      const auto rel = std::filesystem::path(emotion) / (u.utterance_id + ".uff");
      write_feature_file(u, dir / rel);
      manifest.entries.push_back({u.utterance_id, emotion, rel});
    }
  }
  const auto manifest_path = dir / "manifest.json";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace prosodia
