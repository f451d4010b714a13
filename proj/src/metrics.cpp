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


#include "prosodia/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "prosodia/error.hpp"
#include "prosodia/prosody.hpp"

namespace prosodia {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ValidationError(fmt::format("{}: length mismatch ({} vs {})", what, a, b));
  if (a == 0) throw ValidationError(fmt::format("{}: empty input", what));
}

double parse_number(const std::string& cell, const std::filesystem::path& path) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || cell.empty()) {
    throw FormatError(fmt::format("{}: '{}' is not a number", path.string(), cell));
  }
  return v;
}

}  // namespace

double mcd(const Eigen::MatrixXd& converted, const Eigen::MatrixXd& target) {
  if (converted.rows() != target.rows() || converted.cols() != target.cols()) {
    throw ValidationError(fmt::format("mcd: shape mismatch {}x{} vs {}x{}", converted.rows(), converted.cols(),
                                      target.rows(), target.cols()));
  }
  if (converted.cols() == 0) throw ValidationError("mcd: no frames");
  const double k = 10.0 / std::numbers::ln10;
  const Eigen::ArrayXd per_frame = ((converted - target).colwise().squaredNorm().array() * 2.0).sqrt() * k;
  return per_frame.mean();
}

double rmse_f0(std::span<const double> converted_hz, std::span<const double> target_hz) {
  require_same_length(converted_hz.size(), target_hz.size(), "rmse_f0");
  double sq = 0.0;
  for (std::size_t i = 0; i < converted_hz.size(); ++i) {
    const double d = converted_hz[i] - target_hz[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(converted_hz.size()));
}

double pcc(std::span<const double> converted_hz, std::span<const double> target_hz) {
  require_same_length(converted_hz.size(), target_hz.size(), "pcc");
  const std::size_t n = converted_hz.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += converted_hz[i];
    mb += target_hz[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = converted_hz[i] - ma, db = target_hz[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (!(va > 0.0) || !(vb > 0.0)) throw NumericError("pcc: undefined correlation, an input has zero variance");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

Alignment parse_alignment(const std::string& text) {
  if (text == "none") return Alignment::kNone;
  if (text == "linear" || text == "linear-resample") return Alignment::kLinearResample;
  throw ValidationError(fmt::format("align must be \"none\" or \"linear\", got \"{}\"", text));
}

Eigen::MatrixXd resample_frames(const Eigen::MatrixXd& m, Eigen::Index length) {
  if (m.cols() == 0 || length <= 0) throw ValidationError("resample: empty input or target length");
  if (m.cols() == length) return m;
  Eigen::MatrixXd out(m.rows(), length);
  const double step = length == 1 ? 0.0 : static_cast<double>(m.cols() - 1) / static_cast<double>(length - 1);
  for (Eigen::Index t = 0; t < length; ++t) {
    const double pos = step * static_cast<double>(t);
    const auto lo = std::min(static_cast<Eigen::Index>(pos), m.cols() - 1);
    const auto hi = std::min(lo + 1, m.cols() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.col(t) = (1.0 - frac) * m.col(lo) + frac * m.col(hi);
  }
  return out;
}

std::vector<double> resample_contour(std::span<const double> v, std::size_t length) {
  Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::MatrixXd out = resample_frames(row, static_cast<Eigen::Index>(length));
  return {out.data(), out.data() + out.size()};
}

void EvalReport::aggregate() {
  mean_mcd = mean_rmse = mean_pcc = 0.0;
  if (rows.empty()) return;
  for (const auto& r : rows) {
    mean_mcd += r.mcd_db;
    mean_rmse += r.rmse_hz;
    mean_pcc += r.pcc;
  }
  const double n = static_cast<double>(rows.size());
  mean_mcd /= n;
  mean_rmse /= n;
  mean_pcc /= n;
}

EvalReport evaluate_pairs(const std::vector<UtteranceFeatures>& converted,
                          const std::vector<UtteranceFeatures>& targets, Alignment align) {
  std::map<std::string, const UtteranceFeatures*> by_id;
  for (const auto& t : targets) by_id[t.utterance_id] = &t;
  std::vector<std::string> unpaired;
  for (const auto& c : converted) {
    if (!by_id.count(c.utterance_id)) unpaired.push_back(c.utterance_id);
  }
  if (!unpaired.empty()) {
    std::string list;
    for (const auto& id : unpaired) list += (list.empty() ? "" : ", ") + id;
    throw ValidationError(fmt::format("no reference for converted utterance(s): {}", list));
  }
  if (converted.empty()) throw ValidationError("evaluate_pairs: nothing to evaluate");

  EvalReport report;
  for (const auto& c : converted) {
    const UtteranceFeatures& t = *by_id.at(c.utterance_id);
    Eigen::MatrixXd mc = c.mcep_matrix(), mt = t.mcep_matrix();
    std::vector<double> fc = interpolate_unvoiced(c.f0_vector()).continuous_hz;
    std::vector<double> ft = interpolate_unvoiced(t.f0_vector()).continuous_hz;
    if (mc.cols() != mt.cols()) {
      if (align == Alignment::kNone) {
        throw ValidationError(fmt::format("utterance '{}': {} converted frames vs {} reference frames (use align=linear)",
                                          c.utterance_id, mc.cols(), mt.cols()));
      }
      const Eigen::Index n = std::max(mc.cols(), mt.cols());
      mc = resample_frames(mc, n);
      mt = resample_frames(mt, n);
      fc = resample_contour(fc, static_cast<std::size_t>(n));
      ft = resample_contour(ft, static_cast<std::size_t>(n));
    }
    report.rows.push_back({c.utterance_id, mcd(mc, mt), rmse_f0(fc, ft), pcc(fc, ft)});
  }
  report.aggregate();
  return report;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << "pair_id,mcd_db,rmse_hz,pcc\n";
  for (const auto& r : report.rows) out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.pair_id, r.mcd_db, r.rmse_hz, r.pcc);
  out << fmt::format("MEAN,{:.17g},{:.17g},{:.17g}\n", report.mean_mcd, report.mean_rmse, report.mean_pcc);
  if (!out) throw IoError(fmt::format("write failure on '{}'", path.string()));
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "pair_id,mcd_db,rmse_hz,pcc") {
    throw FormatError(fmt::format("{}: expected header \"pair_id,mcd_db,rmse_hz,pcc\"", path.string()));
  }
  EvalReport report;
  bool saw_mean = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw FormatError(fmt::format("{}: malformed row '{}'", path.string(), line));
    const EvalRow row{cells[0], parse_number(cells[1], path), parse_number(cells[2], path),
                      parse_number(cells[3], path)};
    if (row.pair_id == "MEAN") {
      report.mean_mcd = row.mcd_db;
      report.mean_rmse = row.rmse_hz;
      report.mean_pcc = row.pcc;
      saw_mean = true;
    } else {
      report.rows.push_back(row);
    }
  }
  if (!saw_mean) throw FormatError(fmt::format("{}: missing MEAN row", path.string()));
  return report;
}

}  // namespace prosodia
