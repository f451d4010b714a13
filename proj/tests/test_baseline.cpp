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


#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

#include "prosodia/baseline.hpp"
#include "prosodia/error.hpp"

using namespace prosodia;
using doctest::Approx;

namespace {

UtteranceFeatures with_f0(std::vector<float> f0, std::string id = "u") {
  UtteranceFeatures u;
  u.utterance_id = std::move(id);
  u.emotion_label = "neutral";
  u.mceps.assign(f0.size() * kMcepDim, 0.0f);
  u.f0_hz = std::move(f0);
  return u;
}

// Log-normal contour; every seventh frame unvoiced.
std::vector<double> log_normal(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mu, sigma);
  std::vector<double> f0(n);
  for (std::size_t t = 0; t < n; ++t) f0[t] = (t % 7 == 6) ? 0.0 : std::exp(g(rng));
  return f0;
}

}  // namespace

TEST_SUITE("baseline") {
  TEST_CASE("fit on a hand-computed corpus") {
    const float e5 = static_cast<float>(std::exp(5.0)), e7 = static_cast<float>(std::exp(7.0));
    const LgStats s = lg_fit({with_f0({e5, e5, e7})});
    CHECK(s.mean_log_f0 == Approx(17.0 / 3.0).epsilon(1e-6));
    // Population std of {5, 5, 7}.
    CHECK(s.std_log_f0 == Approx(std::sqrt(8.0 / 9.0)).epsilon(1e-6));
    CHECK(s.n_frames == 3);
  }

  TEST_CASE("unvoiced frames are excluded") {
    const float e5 = static_cast<float>(std::exp(5.0)), e7 = static_cast<float>(std::exp(7.0));
    const LgStats a = lg_fit({with_f0({e5, 0.0f, e5, 0.0f, e7}, "a"), with_f0({0.0f}, "b")});
    const LgStats b = lg_fit({with_f0({e5, e5, e7})});
    CHECK(a.mean_log_f0 == b.mean_log_f0);
    CHECK(a.std_log_f0 == b.std_log_f0);
    CHECK(a.n_frames == 3);
  }

  TEST_CASE("degenerate corpora are rejected") {
    CHECK_THROWS_AS(lg_fit({with_f0({0.0f, 0.0f, 0.0f})}), ValidationError);
    CHECK_THROWS_AS(lg_fit({}), ValidationError);
    CHECK_THROWS_AS(lg_fit_contour(std::vector<double>{0.0, 120.0}), ValidationError);
    CHECK_THROWS_AS(lg_fit_contour(std::vector<double>{120.0, 120.0, 120.0}), NumericError);
  }

  TEST_CASE("equal statistics give the identity") {
    const auto f0 = log_normal(200, 5.2, 0.15, 1);
    const LgStats s = lg_fit_contour(f0);
    CHECK(lg_transform(f0, s, s) == f0);
  }

  TEST_CASE("mean maps to mean") {
    const LgStats src{5.0, 0.2, 10}, tgt{5.5, 0.3, 10};
    const auto out = lg_transform(std::vector<double>{std::exp(5.0)}, src, tgt);
    CHECK(out[0] == Approx(std::exp(5.5)).epsilon(1e-12));
  }

  TEST_CASE("exact sample statistics map exactly") {
    const auto f0 = log_normal(1000, 5.3, 0.12, 2);
    const LgStats src = lg_fit_contour(f0);
    const LgStats tgt{5.7, 0.25, 1};
    const LgStats got = lg_fit_contour(lg_transform(f0, src, tgt));
    CHECK(std::abs(got.mean_log_f0 - tgt.mean_log_f0) <= 1e-9 * tgt.mean_log_f0);
    CHECK(std::abs(got.std_log_f0 - tgt.std_log_f0) <= 1e-9 * tgt.std_log_f0);
  }

  TEST_CASE("population statistics map within sampling error") {
    const LgStats src{5.3, 0.12, 0}, tgt{5.7, 0.25, 0};
    const LgStats got = lg_fit_contour(lg_transform(log_normal(5000, src.mean_log_f0, src.std_log_f0, 3), src, tgt));
    CHECK(std::abs(got.mean_log_f0 - tgt.mean_log_f0) <= 0.02 * tgt.mean_log_f0);
    CHECK(std::abs(got.std_log_f0 - tgt.std_log_f0) <= 0.02 * tgt.std_log_f0);
  }

  TEST_CASE("transforms compose") {
    const auto f0 = log_normal(100, 5.0, 0.2, 4);
    const LgStats a{5.0, 0.2, 1}, b{5.4, 0.1, 1}, c{4.8, 0.35, 1};
    const auto two = lg_transform(lg_transform(f0, a, b), b, c);
    const auto one = lg_transform(f0, a, c);
    for (std::size_t t = 0; t < f0.size(); ++t) {
      if (one[t] == 0.0) {
        CHECK(two[t] == 0.0);
      } else {
        CHECK(std::abs(two[t] - one[t]) <= 1e-9 * one[t]);
      }
    }
  }

  TEST_CASE("unvoiced zeros pass through") {
    const auto out = lg_transform(std::vector<double>{0.0, 150.0, 0.0}, {5.0, 0.2, 1}, {5.5, 0.3, 1});
    CHECK(out[0] == 0.0);
    CHECK(out[1] > 0.0);
    CHECK(out[2] == 0.0);
  }

  TEST_CASE("stats validation and JSON") {
    const LgStats s{5.25, 0.125, 42};
    const nlohmann::json j = s;
    CHECK(j.at("mean") == 5.25);
    const auto back = j.get<LgStats>();
    CHECK(back.mean_log_f0 == s.mean_log_f0);
    CHECK(back.std_log_f0 == s.std_log_f0);
    CHECK(back.n_frames == 42);
    CHECK_THROWS_AS((LgStats{5.0, 0.0, 1}.validate()), ValidationError);
    CHECK_THROWS_AS(lg_transform(std::vector<double>{100.0}, {5.0, -1.0, 1}, {5.0, 0.2, 1}), ValidationError);
  }
}
