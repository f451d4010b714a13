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

// F0 preprocessing and multi-scale continuous wavelet analysis/synthesis.
//
// A contour is made continuous (linear interpolation through unvoiced gaps),
// moved to the log domain and standardized; the result is decomposed with a
// Mexican hat wavelet at a ladder of scales. Synthesis sums the scales with
// weights (i + 2.5)^-5/2, i = 1..n_scales.

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace prosodia {

/// How analysis rows are scaled.
enum class CwtNormalization {
  /// Row i is a^-1/2 * sum_j k[j] psi((j - n) / s) with s = a / tau0 in
  /// samples; the (i + 2.5)^-5/2 weight is applied only on synthesis.
  kAmplitude,
  /// Row i additionally carries 1/a, tau0/sqrt(a) (a in seconds) and the
  /// (i + 2.5)^-5/2 weight, so synthesis weights each scale twice.
  kLiteral,
};

enum class ScaleLadder {
  kOctave,  ///< a_i = 2^(i+1) * tau0, one octave apart
  kDj,      ///< a_i = s0 * 2^((i-1) * dj)
};

struct WaveletParams {
  double tau0 = 0.005;  ///< sampling interval, seconds
  int n_scales = 10;
  double dj = 0.5;
  double s0 = 0.010;  ///< seconds; 2 * tau0
  double support_T = 5.0;
  ScaleLadder ladder = ScaleLadder::kOctave;
  CwtNormalization normalization = CwtNormalization::kAmplitude;

  void validate() const;
  /// Scale a_i in seconds for i = 1..n_scales.
  double scale(int i) const;

  bool operator==(const WaveletParams&) const = default;
};

void to_json(nlohmann::json& j, const WaveletParams& p);
void from_json(const nlohmann::json& j, WaveletParams& p);

struct NormStats {
  double mean = 0.0;  ///< log-Hz
  double std = 1.0;   ///< log-Hz, > 0
};

struct ContinuousF0 {
  std::vector<double> values;  ///< standardized log-F0
  NormStats stats;
  std::vector<bool> voicing_mask;
};

struct CwtMatrix {
  Eigen::MatrixXd coeffs;  ///< n_scales x N, row i-1 holds scale i
  WaveletParams params;
};

struct InterpolatedF0 {
  std::vector<double> continuous_hz;
  std::vector<bool> voicing_mask;
};

/// Voiced frames are kept, interior gaps are linearly bridged and edge gaps
/// take the nearest voiced value. Throws ValidationError without any voiced
/// frame.
InterpolatedF0 interpolate_unvoiced(std::span<const double> f0_hz);

/// Population (divisor N) mean/std of the input.
NormStats sample_stats(std::span<const double> values);

/// Standardizes ln(f0). The returned mask is all-true; callers that started
/// from a voiced/unvoiced contour overwrite it with the interpolation mask.
ContinuousF0 normalize_log_f0(std::span<const double> continuous_hz);

/// exp(v * std + mean) on voiced frames, exactly 0 elsewhere.
std::vector<double> denormalize_log_f0(std::span<const double> values, const NormStats& stats,
                                       const std::vector<bool>& voicing_mask);

/// interpolate_unvoiced followed by normalize_log_f0, mask carried over.
ContinuousF0 preprocess_f0(std::span<const double> f0_hz);

/// L2-normalized Mexican hat, 2/(sqrt(3) pi^1/4) (1 - t^2) exp(-t^2/2).
double mexican_hat(double t);

/// FFT-based decomposition.
CwtMatrix cwt_decompose(std::span<const double> signal, const WaveletParams& params);

/// Same contract as cwt_decompose, evaluated by explicit summation. Test oracle.
CwtMatrix cwt_direct_oracle(std::span<const double> signal, const WaveletParams& params);

/// sum_i coeffs(i) * (i + 2.5)^-5/2.
std::vector<double> cwt_reconstruct(const CwtMatrix& cwt);

/// Shifts and scales to zero mean, unit population variance.
std::vector<double> standardize(std::span<const double> values);

/// Header "frame,scale1,...,scaleK"; one row per frame, 17 significant digits.
void export_scalogram_csv(const CwtMatrix& cwt, const std::filesystem::path& path);
Eigen::MatrixXd read_scalogram_csv(const std::filesystem::path& path);

/// Decomposed utterance as cached on disk: everything needed to turn the
/// scalogram back into an F0 contour in Hz.
struct CwtCache {
  std::string utterance_id;
  std::string emotion_label;
  double frame_period_ms = 5.0;
  NormStats stats;
  std::vector<bool> voicing_mask;
  CwtMatrix cwt;

  bool operator==(const CwtCache& o) const {
    return utterance_id == o.utterance_id && emotion_label == o.emotion_label &&
           frame_period_ms == o.frame_period_ms && stats.mean == o.stats.mean && stats.std == o.stats.std &&
           voicing_mask == o.voicing_mask && cwt.params == o.cwt.params && cwt.coeffs == o.cwt.coeffs;
  }
};

/// Little-endian "PCW1": u32 version, u32 N, u32 n_scales, f64 frame period,
/// u16-prefixed emotion and id, wavelet parameters, f64 log-F0 mean and std,
/// N mask bytes, then n_scales x N f64 coefficients scale-major.
void write_cwt_cache(const CwtCache& cache, const std::filesystem::path& path);
CwtCache read_cwt_cache(const std::filesystem::path& path);

}  // namespace prosodia
