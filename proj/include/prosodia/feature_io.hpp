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

// Utterance feature storage (UFF1 binary files), JSON corpus manifests and
// non-parallel train/eval splitting.
//
// UFF1 layout, little-endian:
//   "UFF1" | u32 version=1 | u32 frame_count N | u32 mcep_dim=24 |
//   f64 frame_period_ms | u16 len + emotion_label | u16 len + utterance_id |
//   N*24 f32 mceps (frame-major) | N f32 f0 (Hz, 0 = unvoiced)

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace prosodia {

inline constexpr std::size_t kMcepDim = 24;
inline constexpr std::uint32_t kUffVersion = 1;

struct UtteranceFeatures {
  std::string utterance_id;
  std::string emotion_label;
  double frame_period_ms = 5.0;
  /// Frame-major: mceps[frame * kMcepDim + dim].
  std::vector<float> mceps;
  std::vector<float> f0_hz;

  std::size_t frames() const { return f0_hz.size(); }
  float mcep(std::size_t frame, std::size_t dim) const { return mceps[frame * kMcepDim + dim]; }

  /// 24 x N double matrix view of the cepstra.
  Eigen::MatrixXd mcep_matrix() const;
  void set_mceps(const Eigen::MatrixXd& m);
  std::vector<double> f0_vector() const { return {f0_hz.begin(), f0_hz.end()}; }
  void set_f0(const std::vector<double>& f0);

  bool operator==(const UtteranceFeatures&) const = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const UtteranceFeatures& features);

void write_feature_file(const UtteranceFeatures& features, const std::filesystem::path& path);
UtteranceFeatures read_feature_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string utterance_id;
  std::string emotion_label;
  std::filesystem::path path;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::string version = "1";
};

/// Parses a JSON array of {"id","emotion","path"}. Relative paths resolve
/// against the manifest's directory.
CorpusManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& manifest_path);

/// Emotion label -> utterances sorted by utterance_id.
using Corpus = std::map<std::string, std::vector<UtteranceFeatures>>;

/// Utterance ids are unique within an emotion; parallel corpora reuse the
/// same id for the same sentence across emotions.
Corpus load_corpus(const std::filesystem::path& manifest_path);

struct NonParallelSplit {
  std::vector<UtteranceFeatures> source_set;
  std::vector<UtteranceFeatures> target_set;
  /// (source utterance, target utterance) sharing one sentence id.
  std::vector<std::pair<UtteranceFeatures, UtteranceFeatures>> eval_pairs;
};

/// Orders the sentence ids shared by both emotions (identity for seed 0, a
/// seeded shuffle otherwise) and takes the first n_train_each for the source
/// side, the next n_train_each for the target side and the following n_eval
/// as held-out parallel pairs.
NonParallelSplit make_nonparallel_split(const Corpus& corpus, const std::string& source_emotion,
                                        const std::string& target_emotion, std::size_t n_train_each,
                                        std::size_t n_eval, std::uint64_t seed);

}  // namespace prosodia
