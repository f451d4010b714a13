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


// Objective scores between converted and reference features.

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prosodia/feature_io.hpp"

namespace prosodia {

/// Mean over frames of (10 / ln 10) * sqrt(2 * sum_d (c_d - t_d)^2), both
/// 24 x N.
double mcd(const Eigen::MatrixXd& converted, const Eigen::MatrixXd& target);
double rmse_f0(std::span<const double> converted_hz, std::span<const double> target_hz);
/// Pearson correlation; NumericError when either side is constant.
double pcc(std::span<const double> converted_hz, std::span<const double> target_hz);

enum class Alignment { kNone, kLinearResample };
Alignment parse_alignment(const std::string& text);

/// Linear interpolation of each row onto `length` evenly spaced points that
/// keep both endpoints.
Eigen::MatrixXd resample_frames(const Eigen::MatrixXd& m, Eigen::Index length);
std::vector<double> resample_contour(std::span<const double> v, std::size_t length);

struct EvalRow {
  std::string pair_id;
  double mcd_db = 0.0;
  double rmse_hz = 0.0;
  double pcc = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_mcd = 0.0;
  double mean_rmse = 0.0;
  double mean_pcc = 0.0;

  void aggregate();
};

/// Pairs by utterance id (every converted id needs a target). F0 scores are
/// taken on unvoiced-bridged contours in Hz.
EvalReport evaluate_pairs(const std::vector<UtteranceFeatures>& converted,
                          const std::vector<UtteranceFeatures>& targets, Alignment align);

void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report_csv(const std::filesystem::path& path);

}  // namespace prosodia
