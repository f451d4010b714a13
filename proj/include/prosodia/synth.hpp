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


// Synthetic two-emotion feature corpus for desk-scale experiments.
//
// Every sentence id owns shared latent contours: a slow and a fast smooth
// process for pitch plus a low-dimensional spectral latent. Each emotion
// renders them through its own pitch statistics, slow/fast mix and affine
// cepstral map, so parallel renderings of one id differ by a known smooth
// transformation plus a per-rendering pitch register offset.

#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prosodia/feature_io.hpp"

namespace prosodia {

struct SynthEmotion {
  std::string name;
  double f0_mean_hz = 200.0;
  /// One log-domain standard deviation above the mean lands at mean + range.
  double f0_range_hz = 30.0;
  /// Weight of the fast pitch component relative to the slow one.
  double fast_weight = 0.1;
  /// Cepstra = base + mcep_gain * W z + mcep_offset, z the spectral latent.
  double mcep_gain = 1.0;
  double mcep_offset = 0.0;
};

struct SynthSpec {
  std::vector<SynthEmotion> emotions;
  std::size_t n_train_each = 20;
  std::size_t n_eval = 5;
  std::size_t min_frames = 160;
  std::size_t max_frames = 256;
  double frame_period_ms = 5.0;
  /// Gaussian smoothing widths (frames) of the latent processes.
  double slow_smoothness = 24.0;
  double fast_smoothness = 4.0;
  double spectral_smoothness = 10.0;
  /// Log-domain std of a pitch-level offset drawn independently for every
  /// rendering, so no two utterances share an absolute register.
  double register_jitter = 0.08;
  std::uint64_t seed = 0;

  /// Two emotions: "neutral" at 200 Hz and "angry" at 300 Hz with a wider
  /// range and a stronger fast component.
  static SynthSpec defaults();
  /// Utterances per emotion: 2 * n_train_each + n_eval.
  std::size_t utterances_per_emotion() const { return 2 * n_train_each + n_eval; }
  void validate() const;
};

void to_json(nlohmann::json& j, const SynthEmotion& e);
void from_json(const nlohmann::json& j, SynthEmotion& e);
void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

/// Deterministic in spec (seed included). Ids are "s000", "s001", ...
Corpus synthesize_corpus(const SynthSpec& spec);

/// Writes <dir>/<emotion>/<id>.uff plus <dir>/manifest.json and returns the
/// manifest path.
std::filesystem::path write_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace prosodia
