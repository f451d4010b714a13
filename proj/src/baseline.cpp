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


#include "prosodia/baseline.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "prosodia/error.hpp"

namespace prosodia {

namespace {

struct Accumulator {
  std::vector<double> logs;

  void add(std::span<const double> f0_hz) {
    for (double f : f0_hz) {
      if (f > 0.0) logs.push_back(std::log(f));
    }
  }

  LgStats finish() const {
    if (logs.size() < 2) {
      throw ValidationError(fmt::format("LG fit needs at least 2 voiced frames, found {}", logs.size()));
    }
    double sum = 0.0;
    for (double v : logs) sum += v;
    const double mean = sum / static_cast<double>(logs.size());
    double sq = 0.0;
    for (double v : logs) sq += (v - mean) * (v - mean);
    const double std = std::sqrt(sq / static_cast<double>(logs.size()));
    // A constant contour can still leave rounding residue in the mean.
    if (!(std > 1e-12 * std::max(1.0, std::abs(mean)))) {
      throw NumericError("LG fit: voiced log-F0 has zero variance");
    }
    return {mean, std, logs.size()};
  }
};

}  // namespace

void LgStats::validate() const {
  if (!std::isfinite(mean_log_f0) || !std::isfinite(std_log_f0) || !(std_log_f0 > 0.0)) {
    throw ValidationError(fmt::format("invalid LG stats (mean {}, std {})", mean_log_f0, std_log_f0));
  }
}

LgStats lg_fit(const std::vector<UtteranceFeatures>& corpus) {
  Accumulator acc;
  for (const auto& utt : corpus) acc.add(utt.f0_vector());
  return acc.finish();
}

LgStats lg_fit_contour(std::span<const double> f0_hz) {
  Accumulator acc;
  acc.add(f0_hz);
  return acc.finish();
}

std::vector<double> lg_transform(std::span<const double> f0_hz, const LgStats& src, const LgStats& tgt) {
  src.validate();
  tgt.validate();
  const double ratio = tgt.std_log_f0 / src.std_log_f0;
  std::vector<double> out(f0_hz.size(), 0.0);
  for (std::size_t i = 0; i < f0_hz.size(); ++i) {
    if (f0_hz[i] > 0.0) out[i] = std::exp(tgt.mean_log_f0 + ratio * (std::log(f0_hz[i]) - src.mean_log_f0));
  }
  return out;
}

void to_json(nlohmann::json& j, const LgStats& s) {
  j = {{"mean", s.mean_log_f0}, {"std", s.std_log_f0}, {"n_frames", s.n_frames}};
}

void from_json(const nlohmann::json& j, LgStats& s) {
  s.mean_log_f0 = j.at("mean").get<double>();
  s.std_log_f0 = j.at("std").get<double>();
  s.n_frames = j.value("n_frames", std::uint64_t{0});
  s.validate();
}

}  // namespace prosodia
