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


// Log-Gaussian linear F0 mapping: log-F0 is shifted and scaled so that its
// pooled statistics move from one corpus to another.

#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <vector>

#include "prosodia/feature_io.hpp"

namespace prosodia {

struct LgStats {
  double mean_log_f0 = 0.0;
  double std_log_f0 = 1.0;
  std::uint64_t n_frames = 0;  ///< voiced frames pooled

  void validate() const;
};

/// Population mean/std of ln(f0) over every voiced frame of every utterance.
LgStats lg_fit(const std::vector<UtteranceFeatures>& corpus);
/// Same estimator over a raw contour; zeros are unvoiced.
LgStats lg_fit_contour(std::span<const double> f0_hz);

/// exp(tgt.mean + tgt.std / src.std * (ln f0 - src.mean)) on voiced frames;
/// unvoiced zeros pass through.
std::vector<double> lg_transform(std::span<const double> f0_hz, const LgStats& src, const LgStats& tgt);

void to_json(nlohmann::json& j, const LgStats& s);
void from_json(const nlohmann::json& j, LgStats& s);

}  // namespace prosodia
