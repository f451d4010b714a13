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

// Cycle-consistent adversarial mapping between two emotion domains X and Y,
// trained on non-parallel utterances.
//
// Per iteration one random segment is drawn from each side. Discriminators
// are updated first with the least-squares objective, then both generators
// with  adv(X->Y) + adv(Y->X) + lambda_cyc * L_cyc + lambda_id * L_id,  the
// identity term only before id_cutoff_iters.

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prosodia/feature_io.hpp"
#include "prosodia/nn/network.hpp"
#include "prosodia/prosody.hpp"

namespace prosodia {

enum class TrainingMode { kSpectrum, kProsody, kJoint };

/// 24 (spectrum), n_scales (prosody), 24 + n_scales (joint).
std::size_t mode_channels(TrainingMode mode, int n_scales = 10);
std::string to_string(TrainingMode mode);
/// Accepts "spectrum-separate"/"spectrum", "prosody-separate"/"prosody", "joint".
TrainingMode parse_training_mode(const std::string& text);

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  std::uint64_t id_cutoff_iters = 10000;

  void validate() const;
};

struct TrainSchedule {
  std::uint64_t total_iters = 5000;
  std::uint64_t constant_lr_iters = 2500;
  std::uint64_t decay_iters = 2500;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  std::size_t segment_frames = 128;
  std::uint64_t seed = 0;

  /// 2e5 constant + 2e5 linear decay iterations.
  static TrainSchedule paper_scale();
  void validate() const;
  /// Learning rate at 0-based iteration t: base for t <= constant_lr_iters,
  /// then base * (1 - (t - constant_lr_iters) / decay_iters), 0 at total_iters.
  double lr_at(double base, std::uint64_t t) const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

/// Per-dimension standardization of one domain's features.
struct FeatureNorm {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& m) const;
};

struct CycleGanModel {
  TrainingMode mode = TrainingMode::kSpectrum;
  nn::NetworkConfig gen_config;
  nn::NetworkConfig disc_config;
  nn::ParamStore g_xy;
  nn::ParamStore g_yx;
  nn::ParamStore d_x;
  nn::ParamStore d_y;
  WaveletParams wavelet;
  /// Filled by train(): feature standardization and pooled log-F0 statistics
  /// of the training sets, X = source side, Y = target side.
  FeatureNorm norm_x;
  FeatureNorm norm_y;
  NormStats f0_stats_x;
  NormStats f0_stats_y;
  std::string source_label;
  std::string target_label;
  LossWeights weights;
  TrainSchedule schedule;
  std::uint64_t seed = 0;

  /// Fresh model with identity feature normalization.
  static CycleGanModel create(TrainingMode mode, const nn::NetworkConfig& generator_shape,
                              const nn::NetworkConfig& discriminator_shape, const WaveletParams& wavelet,
                              std::uint64_t seed);
  std::size_t channels() const { return gen_config.in_channels; }
  void validate() const;
};

/// Feature matrix of one utterance for a mode: MCEPs, CWT coefficients of the
/// standardized log-F0, or both stacked (MCEPs first).
Eigen::MatrixXd mode_features(const UtteranceFeatures& utt, TrainingMode mode, const WaveletParams& wavelet);

enum class AdversarialSide { kGenerator, kDiscriminator };

/// Least squares: discriminator mean((real - 1)^2) + mean(fake^2); generator
/// mean((fake - 1)^2). `real` is ignored on the generator side.
nn::Tensor adversarial_loss(const nn::Tensor& real_scores, const nn::Tensor& fake_scores, AdversarialSide side);
/// mean|x_cycled - x| + mean|y_cycled - y|.
nn::Tensor cycle_loss(const nn::Tensor& x, const nn::Tensor& x_cycled, const nn::Tensor& y, const nn::Tensor& y_cycled);
/// mean|G_yx(x) - x| + mean|G_xy(y) - y|.
nn::Tensor identity_loss(const nn::Tensor& x, const nn::Tensor& g_yx_of_x, const nn::Tensor& y,
                         const nn::Tensor& g_xy_of_y);

struct LossLogRow {
  std::uint64_t iter = 0;
  double lr = 0.0;  ///< generator learning rate
  double adv_g = 0.0;
  double adv_d = 0.0;
  double cyc = 0.0;
  double id = 0.0;  ///< unweighted identity loss; 0 once the term is switched off
};

using LossLog = std::vector<LossLogRow>;

void write_loss_log(const LossLog& log, const std::filesystem::path& path);
LossLog read_loss_log(const std::filesystem::path& path);

struct TrainOptions {
  /// Stop early after this many iterations while keeping the schedule's rates.
  std::optional<std::uint64_t> stop_after;
  std::function<void(const LossLogRow&)> on_iteration;
};

/// Trains in place and returns one log row per iteration. Throws
/// NumericError naming the iteration if a loss turns non-finite.
LossLog train(CycleGanModel& model, const std::vector<UtteranceFeatures>& source_set,
              const std::vector<UtteranceFeatures>& target_set, const LossWeights& weights,
              const TrainSchedule& schedule, const TrainOptions& options = {});

enum class Direction { kForward, kInverse };

/// Full-length conversion of a channels x N matrix of raw features. Inputs
/// shorter than the generator's frame multiple are reflection-padded and the
/// output cropped back to N.
Eigen::MatrixXd convert_features(const CycleGanModel& model, const Eigen::MatrixXd& features, Direction direction);

enum class StatsPolicy { kSource, kTarget };
StatsPolicy parse_stats_policy(const std::string& text);
std::string to_string(StatsPolicy policy);

/// Either separate spectrum/prosody models (each optional; a missing stream
/// passes through unchanged) or one joint model.
struct ConversionModels {
  const CycleGanModel* spectrum = nullptr;
  const CycleGanModel* prosody = nullptr;
  const CycleGanModel* joint = nullptr;
  Direction direction = Direction::kForward;
};

/// interpolate -> normalize -> CWT -> convert -> reconstruct -> standardize ->
/// de-normalize (source utterance or `target_stats`) -> reapply voicing.
UtteranceFeatures convert_utterance(const ConversionModels& models, const UtteranceFeatures& utt,
                                    const NormStats& target_stats, StatsPolicy policy);

/// Checkpoint directory: g_xy.prm, g_yx.prm, d_x.prm, d_y.prm, model.json.
void save_model(const CycleGanModel& model, const std::filesystem::path& dir);
CycleGanModel load_model(const std::filesystem::path& dir);

}  // namespace prosodia
