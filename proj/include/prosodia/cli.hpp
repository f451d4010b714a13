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


// Pipeline commands behind the `prosodia` executable. Each command validates
// its whole configuration before touching the output directory, marks the
// directory with an ".in_progress" sentinel while working and removes it on
// success.

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prosodia/cyclegan.hpp"
#include "prosodia/metrics.hpp"
#include "prosodia/nn/network.hpp"
#include "prosodia/prosody.hpp"
#include "prosodia/synth.hpp"

namespace prosodia::cli {

struct EmotionPair {
  std::string source;
  std::string target;
  std::string name() const { return source + "-to-" + target; }
};

/// System selector for train/convert: the three CycleGAN modes, the LG
/// baseline and (convert only) separate = spectrum + prosody checkpoints.
enum class RunMode { kSpectrum, kProsody, kJoint, kBaseline, kSeparate };
RunMode parse_run_mode(const std::string& text);
std::string to_string(RunMode mode);

struct RunConfig {
  std::filesystem::path corpus;   ///< manifest
  std::filesystem::path out_dir;
  std::vector<EmotionPair> pairs;
  std::size_t n_train_each = 20;
  std::size_t n_eval = 5;
  std::optional<std::uint64_t> split_seed;  ///< defaults to `seed`
  WaveletParams wavelet;
  std::size_t base_channels = 32;
  std::size_t n_residual = 4;
  std::size_t disc_base_channels = 32;
  LossWeights weights;
  TrainSchedule schedule;
  RunMode mode = RunMode::kSeparate;
  StatsPolicy stats_policy = StatsPolicy::kTarget;
  Alignment align = Alignment::kNone;
  std::uint64_t seed = 0;
  /// Checkpoint directories for convert, keyed by "spectrum", "prosody",
  /// "joint", "baseline".
  std::map<std::string, std::filesystem::path> checkpoints;

  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  nn::NetworkConfig generator_shape() const;
  nn::NetworkConfig discriminator_shape() const;
};

/// Defaults mirror the desk-scale schedule. Relative paths resolve against
/// `base_dir`. Unknown keys and every invalid field are reported together in
/// one ValidationError.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// 2e5 constant + 2e5 decaying iterations, lr 2e-4 / 1e-4, cycle 10,
/// identity 5 until iteration 1e4.
void apply_paper_scale(RunConfig& config);

/// Checks that referenced inputs exist; used by commands that read them.
void validate_paths(const RunConfig& config, bool need_corpus);

std::filesystem::path cmd_synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);
void cmd_preprocess(const std::filesystem::path& manifest, const std::filesystem::path& out_dir);
void cmd_decompose(const std::filesystem::path& input, const WaveletParams& wavelet,
                   const std::filesystem::path& out_dir);
void cmd_reconstruct(const std::filesystem::path& cache, const std::filesystem::path& out_dir);

/// Trains config.mode for every pair into out_dir/<pair>/<mode>.
void cmd_train(const RunConfig& config);

/// Converts each input with the checkpoints selected by `mode`, writing
/// out_dir/<utterance_id>.uff. `inverse` maps target back to source.
void cmd_convert(const RunConfig& config, RunMode mode, const std::vector<std::filesystem::path>& inputs,
                 const std::filesystem::path& out_dir, bool inverse = false);

/// Scores every .uff in `converted_dir` against the same id in
/// `reference_dir` and writes the report CSV.
EvalReport cmd_evaluate(const std::filesystem::path& converted_dir, const std::filesystem::path& reference_dir,
                        Alignment align, const std::filesystem::path& out_csv);

struct CompareCell {
  std::string pair;
  std::string system;
  std::optional<EvalReport> report;  ///< empty when the system failed
  std::string failure;
};

/// Trains baseline, joint and separate systems per pair, converts and scores
/// the held-out pairs and writes out_dir/compare.csv and compare.txt.
std::vector<CompareCell> cmd_compare(const RunConfig& config);

/// Entry point of the executable. Exit codes: 0 success, 1 invalid input,
/// 2 runtime or numeric failure.
int run(int argc, char** argv);

}  // namespace prosodia::cli
