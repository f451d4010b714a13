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

#include <cmath>
#include <fstream>
#include <numbers>

#include "prosodia/error.hpp"
#include "prosodia/metrics.hpp"
#include "support.hpp"

using namespace prosodia;
using doctest::Approx;
using prosodia::test::random_utterance;
using prosodia::test::TempDir;

namespace {

const double kMcdUnit = 10.0 / std::numbers::ln10 * std::numbers::sqrt2;

std::vector<double> ramp(std::size_t n, double a, double b) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a * std::sin(0.3 * static_cast<double>(i)) + b;
  return v;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("mcd closed forms") {
    const Eigen::MatrixXd t = Eigen::MatrixXd::Random(24, 40);
    CHECK(mcd(t, t) == 0.0);
    Eigen::MatrixXd c = t;
    c.row(7).array() += 1.0;
    CHECK(std::abs(mcd(c, t) - kMcdUnit) < 1e-9);
    CHECK(kMcdUnit == Approx(6.14185).epsilon(1e-5));
    CHECK(mcd(c, t) == Approx(mcd(t, c)));
    CHECK_THROWS_AS(mcd(t, Eigen::MatrixXd::Zero(24, 39)), ValidationError);
  }

  TEST_CASE("rmse closed forms") {
    const auto x = ramp(50, 20.0, 150.0);
    CHECK(rmse_f0(x, x) == 0.0);
    for (double d : {3.0, -12.5, 0.25}) {
      auto y = x;
      for (auto& v : y) v += d;
      CHECK(std::abs(rmse_f0(y, x) - std::abs(d)) < 1e-12);
    }
    CHECK_THROWS_AS(rmse_f0(x, ramp(49, 1, 1)), ValidationError);
  }

  TEST_CASE("pcc closed forms and invariances") {
    const auto x = ramp(64, 1.0, 0.0);
    const auto pos = ramp(64, 2.0, 3.0), neg = ramp(64, -1.0, 0.0);
    CHECK(std::abs(pcc(x, pos) - 1.0) < 1e-12);
    CHECK(std::abs(pcc(x, neg) + 1.0) < 1e-12);
    std::vector<double> other(64);
    for (std::size_t i = 0; i < 64; ++i) other[i] = std::cos(0.11 * static_cast<double>(i * i));
    const double r = pcc(x, other);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(pcc(other, x) == Approx(r).epsilon(1e-14));
    auto shifted = other;
    for (auto& v : shifted) v = 4.0 * v + 100.0;
    CHECK(pcc(x, shifted) == Approx(r).epsilon(1e-12));
    CHECK_THROWS_AS(pcc(x, std::vector<double>(64, 5.0)), NumericError);
  }

  TEST_CASE("resampling keeps endpoints") {
    const std::vector<double> v{0.0, 10.0, 20.0};
    const auto r = resample_contour(v, 5);
    CHECK(r == std::vector<double>{0.0, 5.0, 10.0, 15.0, 20.0});
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(24, 9);
    const Eigen::MatrixXd up = resample_frames(m, 17);
    CHECK(up.cols() == 17);
    CHECK(up.col(0) == m.col(0));
    CHECK(up.col(16) == m.col(8));
    CHECK(parse_alignment("linear") == Alignment::kLinearResample);
    CHECK(parse_alignment("none") == Alignment::kNone);
    CHECK_THROWS_AS(parse_alignment("dtw"), ValidationError);
  }

  TEST_CASE("identical pairs score perfectly") {
    std::vector<UtteranceFeatures> set;
    for (int i = 0; i < 3; ++i) set.push_back(random_utterance(60, 30 + i, "p" + std::to_string(i)));
    const EvalReport r = evaluate_pairs(set, set, Alignment::kNone);
    REQUIRE(r.rows.size() == 3);
    for (const auto& row : r.rows) {
      CHECK(row.mcd_db == 0.0);
      CHECK(row.rmse_hz == 0.0);
      CHECK(row.pcc == Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("a known offset pair reproduces the per-metric values") {
    UtteranceFeatures tgt = random_utterance(80, 7, "p0");
    for (auto& f : tgt.f0_hz) f = 0.0f;
    for (std::size_t t = 0; t < 80; ++t) {
      if (t % 9 != 0) tgt.f0_hz[t] = static_cast<float>(150.0 + 20.0 * std::sin(0.2 * static_cast<double>(t)));
    }
    UtteranceFeatures conv = tgt;
    for (std::size_t t = 0; t < 80; ++t) conv.mceps[t * kMcepDim + 3] += 1.0f;
    for (auto& f : conv.f0_hz) {
      if (f > 0.0f) f += 8.0f;
    }
    const EvalReport r = evaluate_pairs({conv}, {tgt}, Alignment::kNone);
    CHECK(r.rows[0].mcd_db == Approx(kMcdUnit).epsilon(1e-6));
    CHECK(r.rows[0].rmse_hz == Approx(8.0).epsilon(1e-5));
    CHECK(r.rows[0].pcc == Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("pairing errors") {
    const auto a = random_utterance(40, 1, "a"), b = random_utterance(40, 2, "b");
    CHECK_THROWS_AS(evaluate_pairs({a}, {b}, Alignment::kNone), ValidationError);
    const auto a_long = random_utterance(50, 3, "a");
    CHECK_THROWS_AS(evaluate_pairs({a_long}, {a}, Alignment::kNone), ValidationError);
    const EvalReport r = evaluate_pairs({a_long}, {a}, Alignment::kLinearResample);
    CHECK(r.rows.size() == 1);
    CHECK(std::isfinite(r.rows[0].mcd_db));
  }

  TEST_CASE("report CSV round-trips") {
    TempDir dir;
    std::vector<UtteranceFeatures> conv, ref;
    for (int i = 0; i < 4; ++i) {
      conv.push_back(random_utterance(50, 100 + i, "q" + std::to_string(i)));
      ref.push_back(random_utterance(50, 200 + i, "q" + std::to_string(i)));
    }
    const EvalReport r = evaluate_pairs(conv, ref, Alignment::kNone);
    write_report_csv(r, dir / "report.csv");
    const EvalReport back = read_report_csv(dir / "report.csv");
    REQUIRE(back.rows.size() == r.rows.size());
    double mean_mcd = 0.0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      CHECK(back.rows[i].pair_id == r.rows[i].pair_id);
      CHECK(std::abs(back.rows[i].mcd_db - r.rows[i].mcd_db) < 1e-12);
      CHECK(std::abs(back.rows[i].rmse_hz - r.rows[i].rmse_hz) < 1e-12);
      CHECK(std::abs(back.rows[i].pcc - r.rows[i].pcc) < 1e-12);
      mean_mcd += back.rows[i].mcd_db;
    }
    CHECK(std::abs(back.mean_mcd - mean_mcd / 4.0) < 1e-12);
    std::ifstream in(dir / "report.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "pair_id,mcd_db,rmse_hz,pcc");
  }
}
