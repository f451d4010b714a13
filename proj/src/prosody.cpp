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

#include "prosodia/prosody.hpp"

#include <fftw3.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "prosodia/binary_io.hpp"
#include "prosodia/error.hpp"

namespace prosodia {

namespace {

double scale_weight(int i) { return std::pow(i + 2.5, -2.5); }

void require_finite(std::span<const double> signal, const char* what) {
  for (std::size_t n = 0; n < signal.size(); ++n) {
    if (!std::isfinite(signal[n])) throw ValidationError(fmt::format("{}: sample {} is not finite", what, n));
  }
}

// Discretized kernel for one scale: half-width in samples, the per-row
// constant selected by the normalization mode, and the mean of the truncated
// taps, removed so that constant input yields exactly zero.
struct ScaleKernel {
  double width;  // a / tau0, in samples
  std::size_t half;
  double gain;
  double dc = 0.0;

  double at(std::ptrdiff_t offset) const { return gain * (mexican_hat(static_cast<double>(offset) / width) - dc); }
};

ScaleKernel make_kernel(const WaveletParams& p, int i) {
  const double a = p.scale(i);
  const double width = a / p.tau0;
  const auto half = static_cast<std::size_t>(std::ceil(width * p.support_T - 1e-9));
  const double gain = p.normalization == CwtNormalization::kAmplitude
                          ? 1.0 / std::sqrt(width)
                          : (1.0 / a) * (p.tau0 / std::sqrt(a)) * scale_weight(i);
  ScaleKernel k{width, half, gain};
  const auto h = static_cast<std::ptrdiff_t>(half);
  double sum = 0.0;
  for (std::ptrdiff_t m = -h; m <= h; ++m) sum += mexican_hat(static_cast<double>(m) / width);
  k.dc = sum / static_cast<double>(2 * h + 1);
  return k;
}

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t length)
      : length_(length),
        real_(fftw_alloc_real(length)),
        spectrum_(fftw_alloc_complex(length / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(length), real_, spectrum_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(length), spectrum_, real_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spectrum_);
  }

  std::size_t length() const { return length_; }
  std::size_t bins() const { return length_ / 2 + 1; }
  double* real() { return real_; }
  fftw_complex* spectrum() { return spectrum_; }
  void forward() { fftw_execute(forward_); }
  /// Unnormalized; callers divide by length().
  void inverse() { fftw_execute(inverse_); }

 private:
  std::size_t length_;
  double* real_;
  fftw_complex* spectrum_;
  fftw_plan forward_{};
  fftw_plan inverse_{};
};

}  // namespace

void WaveletParams::validate() const {
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw ValidationError(fmt::format("wavelet tau0 must be > 0, got {}", tau0));
  if (n_scales < 1) throw ValidationError(fmt::format("wavelet n_scales must be >= 1, got {}", n_scales));
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw ValidationError(fmt::format("wavelet s0 must be > 0, got {}", s0));
  if (!(support_T > 0.0) || !std::isfinite(support_T)) {
    throw ValidationError(fmt::format("wavelet support_T must be > 0, got {}", support_T));
  }
  if (ladder == ScaleLadder::kDj && !(dj > 0.0)) throw ValidationError(fmt::format("wavelet dj must be > 0, got {}", dj));
}

double WaveletParams::scale(int i) const {
  if (ladder == ScaleLadder::kOctave) return std::ldexp(tau0, i + 1);
  return s0 * std::exp2((i - 1) * dj);
}

void to_json(nlohmann::json& j, const WaveletParams& p) {
  j = {{"tau0", p.tau0},
       {"n_scales", p.n_scales},
       {"dj", p.dj},
       {"s0", p.s0},
       {"support_T", p.support_T},
       {"ladder", p.ladder == ScaleLadder::kOctave ? "octave" : "dj"},
       {"normalization", p.normalization == CwtNormalization::kAmplitude ? "amplitude" : "literal"}};
}

void from_json(const nlohmann::json& j, WaveletParams& p) {
  p.tau0 = j.value("tau0", p.tau0);
  p.n_scales = j.value("n_scales", p.n_scales);
  p.dj = j.value("dj", p.dj);
  p.s0 = j.value("s0", 2.0 * p.tau0);
  p.support_T = j.value("support_T", p.support_T);
  const std::string ladder = j.value("ladder", std::string("octave"));
  if (ladder == "octave") {
    p.ladder = ScaleLadder::kOctave;
  } else if (ladder == "dj") {
    p.ladder = ScaleLadder::kDj;
  } else {
    throw ValidationError(fmt::format("wavelet ladder must be \"octave\" or \"dj\", got \"{}\"", ladder));
  }
  const std::string norm = j.value("normalization", std::string("amplitude"));
  if (norm == "amplitude") {
    p.normalization = CwtNormalization::kAmplitude;
  } else if (norm == "literal") {
    p.normalization = CwtNormalization::kLiteral;
  } else {
    throw ValidationError(
        fmt::format("wavelet normalization must be \"amplitude\" or \"literal\", got \"{}\"", norm));
  }
}

InterpolatedF0 interpolate_unvoiced(std::span<const double> f0_hz) {
  const std::size_t n = f0_hz.size();
  InterpolatedF0 out{std::vector<double>(f0_hz.begin(), f0_hz.end()), std::vector<bool>(n)};
  std::vector<std::size_t> voiced;
  for (std::size_t t = 0; t < n; ++t) {
    out.voicing_mask[t] = f0_hz[t] > 0.0;
    if (out.voicing_mask[t]) voiced.push_back(t);
  }
  if (voiced.empty()) throw ValidationError("no voiced frames: cannot interpolate F0");

  for (std::size_t t = 0; t < voiced.front(); ++t) out.continuous_hz[t] = f0_hz[voiced.front()];
  for (std::size_t t = voiced.back() + 1; t < n; ++t) out.continuous_hz[t] = f0_hz[voiced.back()];
  for (std::size_t k = 0; k + 1 < voiced.size(); ++k) {
    const std::size_t lo = voiced[k], hi = voiced[k + 1];
    const double span = static_cast<double>(hi - lo);
    for (std::size_t t = lo + 1; t < hi; ++t) {
      const double w = static_cast<double>(t - lo) / span;
      out.continuous_hz[t] = (1.0 - w) * f0_hz[lo] + w * f0_hz[hi];
    }
  }
  return out;
}

NormStats sample_stats(std::span<const double> values) {
  if (values.empty()) throw ValidationError("statistics of an empty sequence");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

ContinuousF0 normalize_log_f0(std::span<const double> continuous_hz) {
  std::vector<double> logs(continuous_hz.size());
  for (std::size_t t = 0; t < logs.size(); ++t) {
    if (!(continuous_hz[t] > 0.0) || !std::isfinite(continuous_hz[t])) {
      throw ValidationError(fmt::format("log-F0 normalization needs positive finite input, frame {} is {}", t,
                                        continuous_hz[t]));
    }
    logs[t] = std::log(continuous_hz[t]);
  }
  const NormStats stats = sample_stats(logs);
  if (!(stats.std > 0.0)) throw NumericError("degenerate F0 contour: log-F0 has zero variance");
  ContinuousF0 out;
  out.stats = stats;
  out.values.resize(logs.size());
  for (std::size_t t = 0; t < logs.size(); ++t) out.values[t] = (logs[t] - stats.mean) / stats.std;
  out.voicing_mask.assign(logs.size(), true);
  return out;
}

std::vector<double> denormalize_log_f0(std::span<const double> values, const NormStats& stats,
                                       const std::vector<bool>& voicing_mask) {
  if (!(stats.std > 0.0) || !std::isfinite(stats.std) || !std::isfinite(stats.mean)) {
    throw ValidationError(fmt::format("invalid normalization stats (mean {}, std {})", stats.mean, stats.std));
  }
  if (values.size() != voicing_mask.size()) {
    throw ValidationError(fmt::format("denormalize: {} values but voicing mask of length {}", values.size(),
                                      voicing_mask.size()));
  }
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (voicing_mask[t]) out[t] = std::exp(values[t] * stats.std + stats.mean);
  }
  return out;
}

ContinuousF0 preprocess_f0(std::span<const double> f0_hz) {
  InterpolatedF0 interp = interpolate_unvoiced(f0_hz);
  ContinuousF0 out = normalize_log_f0(interp.continuous_hz);
  out.voicing_mask = std::move(interp.voicing_mask);
  return out;
}

double mexican_hat(double t) {
  static const double norm = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
  const double t2 = t * t;
  return norm * (1.0 - t2) * std::exp(-0.5 * t2);
}

CwtMatrix cwt_decompose(std::span<const double> signal, const WaveletParams& params) {
  params.validate();
  if (signal.empty()) throw ValidationError("cwt_decompose: empty signal");
  require_finite(signal, "cwt_decompose");

  const std::size_t n = signal.size();
  std::vector<ScaleKernel> kernels;
  std::size_t max_half = 0;
  for (int i = 1; i <= params.n_scales; ++i) {
    kernels.push_back(make_kernel(params, i));
    max_half = std::max(max_half, kernels.back().half);
  }
  // Zero padding of 2*half after the signal turns the circular convolution
  // into a linear one; one common length serves every scale.
  const std::size_t length = n + 2 * max_half;

  RealFft fft(length);
  std::fill(fft.real(), fft.real() + length, 0.0);
  std::copy(signal.begin(), signal.end(), fft.real());
  fft.forward();
  std::vector<std::array<double, 2>> signal_spectrum(fft.bins());
  for (std::size_t k = 0; k < fft.bins(); ++k) signal_spectrum[k] = {fft.spectrum()[k][0], fft.spectrum()[k][1]};

  CwtMatrix out{Eigen::MatrixXd(params.n_scales, n), params};
  for (int i = 1; i <= params.n_scales; ++i) {
    const ScaleKernel& kernel = kernels[i - 1];
    double* h = fft.real();
    std::fill(h, h + length, 0.0);
    for (std::size_t m = 0; m <= 2 * kernel.half; ++m) {
      h[m] = kernel.at(static_cast<std::ptrdiff_t>(kernel.half) - static_cast<std::ptrdiff_t>(m));
    }
    fft.forward();
    for (std::size_t k = 0; k < fft.bins(); ++k) {
      const double re = fft.spectrum()[k][0], im = fft.spectrum()[k][1];
      const double sr = signal_spectrum[k][0], si = signal_spectrum[k][1];
      fft.spectrum()[k][0] = re * sr - im * si;
      fft.spectrum()[k][1] = re * si + im * sr;
    }
    fft.inverse();
    const double scale = 1.0 / static_cast<double>(length);
    for (std::size_t t = 0; t < n; ++t) out.coeffs(i - 1, t) = fft.real()[t + kernel.half] * scale;
  }
  return out;
}

CwtMatrix cwt_direct_oracle(std::span<const double> signal, const WaveletParams& params) {
  params.validate();
  if (signal.empty()) throw ValidationError("cwt_direct_oracle: empty signal");
  require_finite(signal, "cwt_direct_oracle");

  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  CwtMatrix out{Eigen::MatrixXd::Zero(params.n_scales, n), params};
  for (int i = 1; i <= params.n_scales; ++i) {
    const ScaleKernel kernel = make_kernel(params, i);
    const auto half = static_cast<std::ptrdiff_t>(kernel.half);
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      double acc = 0.0;
      for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, t - half); j <= std::min(n - 1, t + half); ++j) {
        acc += signal[j] * kernel.at(j - t);
      }
      out.coeffs(i - 1, t) = acc;
    }
  }
  return out;
}

std::vector<double> cwt_reconstruct(const CwtMatrix& cwt) {
  if (!cwt.coeffs.allFinite()) throw ValidationError("cwt_reconstruct: non-finite coefficients");
  std::vector<double> out(cwt.coeffs.cols(), 0.0);
  for (Eigen::Index i = 0; i < cwt.coeffs.rows(); ++i) {
    const double w = scale_weight(static_cast<int>(i) + 1);
    for (Eigen::Index t = 0; t < cwt.coeffs.cols(); ++t) out[t] += cwt.coeffs(i, t) * w;
  }
  return out;
}

std::vector<double> standardize(std::span<const double> values) {
  const NormStats s = sample_stats(values);
  if (!(s.std > 0.0)) throw NumericError("cannot standardize a constant sequence");
  std::vector<double> out(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) out[t] = (values[t] - s.mean) / s.std;
  return out;
}

void export_scalogram_csv(const CwtMatrix& cwt, const std::filesystem::path& path) {
  if (path.empty()) throw IoError("scalogram export: empty path");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << "frame";
  for (Eigen::Index i = 0; i < cwt.coeffs.rows(); ++i) out << ",scale" << (i + 1);
  out << '\n';
  for (Eigen::Index t = 0; t < cwt.coeffs.cols(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < cwt.coeffs.rows(); ++i) out << fmt::format(",{:.17g}", cwt.coeffs(i, t));
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("write failure on '{}'", path.string()));
}

Eigen::MatrixXd read_scalogram_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame", 0) != 0) {
    throw FormatError(fmt::format("{}: missing scalogram header", path.string()));
  }
  const auto n_scales = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(row.size()) != n_scales) {
      throw FormatError(fmt::format("{}: row {} has {} values, expected {}", path.string(), rows.size(), row.size(),
                                    n_scales));
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(n_scales, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (Eigen::Index i = 0; i < n_scales; ++i) m(i, static_cast<Eigen::Index>(t)) = rows[t][i];
  return m;
}

namespace {
constexpr std::string_view kCacheMagic = "PCW1";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void write_cwt_cache(const CwtCache& cache, const std::filesystem::path& path) {
  const auto& c = cache.cwt.coeffs;
  if (static_cast<std::size_t>(c.cols()) != cache.voicing_mask.size() || c.rows() != cache.cwt.params.n_scales) {
    throw ValidationError(fmt::format("cwt cache: {}x{} coefficients with {} mask entries and {} scales", c.rows(),
                                      c.cols(), cache.voicing_mask.size(), cache.cwt.params.n_scales));
  }
  binary::Writer w;
  w.put_magic(kCacheMagic);
  w.put<std::uint32_t>(kCacheVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.cols()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.rows()));
  w.put<double>(cache.frame_period_ms);
  w.put_string16(cache.emotion_label);
  w.put_string16(cache.utterance_id);
  const WaveletParams& p = cache.cwt.params;
  w.put<double>(p.tau0);
  w.put<double>(p.dj);
  w.put<double>(p.s0);
  w.put<double>(p.support_T);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.ladder));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.normalization));
  w.put<double>(cache.stats.mean);
  w.put<double>(cache.stats.std);
  for (bool v : cache.voicing_mask) w.put<std::uint8_t>(v ? 1 : 0);
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index t = 0; t < c.cols(); ++t) w.put<double>(c(i, t));
  binary::write_file(path, w.bytes());
}

CwtCache read_cwt_cache(const std::filesystem::path& path) {
  binary::Reader r(binary::read_file(path), path.string());
  const std::string magic = r.get_bytes(4);
  if (magic != kCacheMagic) {
    throw FormatError(fmt::format("{}: bad magic '{}', expected magic \"{}\"", path.string(), magic, kCacheMagic));
  }
  if (const auto version = r.get<std::uint32_t>(); version != kCacheVersion) {
    throw FormatError(fmt::format("{}: unsupported format version {}, expected {}", path.string(), version,
                                  kCacheVersion));
  }
  const auto n = r.get<std::uint32_t>();
  const auto scales = r.get<std::uint32_t>();
  CwtCache cache;
  cache.frame_period_ms = r.get<double>();
  cache.emotion_label = r.get_string16();
  cache.utterance_id = r.get_string16();
  WaveletParams& p = cache.cwt.params;
  p.n_scales = static_cast<int>(scales);
  p.tau0 = r.get<double>();
  p.dj = r.get<double>();
  p.s0 = r.get<double>();
  p.support_T = r.get<double>();
  const auto ladder = r.get<std::uint8_t>();
  const auto normalization = r.get<std::uint8_t>();
  if (ladder > 1 || normalization > 1) throw FormatError(fmt::format("{}: unknown wavelet enum value", path.string()));
  p.ladder = static_cast<ScaleLadder>(ladder);
  p.normalization = static_cast<CwtNormalization>(normalization);
  p.validate();
  cache.stats.mean = r.get<double>();
  cache.stats.std = r.get<double>();
  const std::size_t payload = static_cast<std::size_t>(n) + static_cast<std::size_t>(n) * scales * sizeof(double);
  if (r.remaining() != payload) {
    throw FormatError(fmt::format("{}: payload size mismatch: expected {} bytes for {} frames, found {}",
                                  path.string(), payload, n, r.remaining()));
  }
  cache.voicing_mask.resize(n);
  for (std::size_t t = 0; t < n; ++t) cache.voicing_mask[t] = r.get<std::uint8_t>() != 0;
  cache.cwt.coeffs.resize(scales, n);
  for (Eigen::Index i = 0; i < cache.cwt.coeffs.rows(); ++i)
    for (Eigen::Index t = 0; t < cache.cwt.coeffs.cols(); ++t) cache.cwt.coeffs(i, t) = r.get<double>();
  return cache;
}

}  // namespace prosodia
