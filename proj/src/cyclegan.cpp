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

#include "prosodia/cyclegan.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "prosodia/error.hpp"
#include "prosodia/nn/ops.hpp"
#include "prosodia/nn/optim.hpp"

namespace prosodia {

namespace {

using nn::Tensor;

// Mirror index without repeating the edge sample; period 2 (n - 1).
Eigen::Index reflect_index(Eigen::Index t, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  Eigen::Index r = t % period;
  if (r < 0) r += period;
  return r < n ? r : period - r;
}

Eigen::MatrixXd reflect_pad(const Eigen::MatrixXd& m, Eigen::Index length) {
  if (m.cols() >= length) return m;
  Eigen::MatrixXd out(m.rows(), length);
  for (Eigen::Index t = 0; t < length; ++t) out.col(t) = m.col(reflect_index(t, m.cols()));
  return out;
}

Tensor to_tensor(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index c = 0; c < m.rows(); ++c)
    for (Eigen::Index t = 0; t < m.cols(); ++t) v[c * m.cols() + t] = m(c, t);
  return Tensor::constant({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  const auto rows = static_cast<Eigen::Index>(t.dim(0)), cols = static_cast<Eigen::Index>(t.dim(1));
  Eigen::MatrixXd m(rows, cols);
  const auto v = t.values();
  for (Eigen::Index c = 0; c < rows; ++c)
    for (Eigen::Index s = 0; s < cols; ++s) m(c, s) = v[c * cols + s];
  return m;
}

Tensor as_map(const Tensor& features) { return nn::reshape(features, {1, features.dim(0), features.dim(1)}); }

FeatureNorm fit_norm(const std::vector<Eigen::MatrixXd>& mats) {
  const Eigen::Index rows = mats.front().rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows);
  double count = 0.0;
  for (const auto& m : mats) {
    sum += m.rowwise().sum();
    count += static_cast<double>(m.cols());
  }
  FeatureNorm norm;
  norm.mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(rows);
  for (const auto& m : mats) sq += (m.colwise() - norm.mean).array().square().matrix().rowwise().sum();
  norm.std = (sq / count).array().sqrt();
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!(norm.std(i) > 1e-12)) norm.std(i) = 1.0;
  }
  return norm;
}

NormStats pooled_log_f0_stats(const std::vector<UtteranceFeatures>& set) {
  std::vector<double> logs;
  for (const auto& utt : set) {
    const InterpolatedF0 interp = interpolate_unvoiced(utt.f0_vector());
    for (double v : interp.continuous_hz) logs.push_back(std::log(v));
  }
  NormStats s = sample_stats(logs);
  if (!(s.std > 0.0)) throw NumericError("training set log-F0 has zero variance");
  return s;
}

nlohmann::json norm_to_json(const FeatureNorm& n) {
  return {{"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
          {"std", std::vector<double>(n.std.data(), n.std.data() + n.std.size())}};
}

FeatureNorm norm_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std = j.at("std").get<std::vector<double>>();
  if (mean.size() != std.size()) throw FormatError("feature norm mean/std length mismatch");
  FeatureNorm n;
  n.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  n.std = Eigen::Map<const Eigen::VectorXd>(std.data(), static_cast<Eigen::Index>(std.size()));
  return n;
}

template <typename T>
T get_count(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  const bool negative = v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0;
  if (!v.is_number_integer() || negative) {
    throw ValidationError(fmt::format("'{}' must be a non-negative integer, got {}", key, v.dump()));
  }
  return v.get<T>();
}

}  // namespace

std::size_t mode_channels(TrainingMode mode, int n_scales) {
  switch (mode) {
    case TrainingMode::kSpectrum:
      return kMcepDim;
    case TrainingMode::kProsody:
      return static_cast<std::size_t>(n_scales);
    case TrainingMode::kJoint:
      return kMcepDim + static_cast<std::size_t>(n_scales);
  }
  return 0;
}

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kSpectrum:
      return "spectrum-separate";
    case TrainingMode::kProsody:
      return "prosody-separate";
    case TrainingMode::kJoint:
      return "joint";
  }
  return "?";
}

TrainingMode parse_training_mode(const std::string& text) {
  if (text == "spectrum-separate" || text == "spectrum") return TrainingMode::kSpectrum;
  if (text == "prosody-separate" || text == "prosody") return TrainingMode::kProsody;
  if (text == "joint") return TrainingMode::kJoint;
  throw ValidationError(fmt::format("unknown training mode '{}'", text));
}

void LossWeights::validate() const {
  if (!(lambda_cyc >= 0.0) || !(lambda_id >= 0.0)) {
    throw ValidationError(fmt::format("loss weights must be >= 0 (lambda_cyc {}, lambda_id {})", lambda_cyc, lambda_id));
  }
}

TrainSchedule TrainSchedule::paper_scale() {
  TrainSchedule s;
  s.total_iters = 400000;
  s.constant_lr_iters = 200000;
  s.decay_iters = 200000;
  return s;
}

void TrainSchedule::validate() const {
  if (total_iters != constant_lr_iters + decay_iters) {
    throw ValidationError(fmt::format("schedule total_iters {} != constant_lr_iters {} + decay_iters {}", total_iters,
                                      constant_lr_iters, decay_iters));
  }
  if (total_iters == 0) throw ValidationError("schedule total_iters must be > 0");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) {
    throw ValidationError(fmt::format("learning rates must be > 0 (lr_g {}, lr_d {})", lr_g, lr_d));
  }
  if (segment_frames == 0) throw ValidationError("segment_frames must be > 0");
}

double TrainSchedule::lr_at(double base, std::uint64_t t) const {
  if (t <= constant_lr_iters) return base;
  if (decay_iters == 0) return 0.0;
  const double progress = static_cast<double>(t - constant_lr_iters) / static_cast<double>(decay_iters);
  return base * std::max(0.0, 1.0 - progress);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_cyc", w.lambda_cyc}, {"lambda_id", w.lambda_id}, {"id_cutoff_iters", w.id_cutoff_iters}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lambda_cyc = j.value("lambda_cyc", w.lambda_cyc);
  w.lambda_id = j.value("lambda_id", w.lambda_id);
  w.id_cutoff_iters = get_count(j, "id_cutoff_iters", w.id_cutoff_iters);
}

void to_json(nlohmann::json& j, const TrainSchedule& s) {
  j = {{"total_iters", s.total_iters}, {"constant_lr_iters", s.constant_lr_iters},
       {"decay_iters", s.decay_iters}, {"lr_g", s.lr_g},
       {"lr_d", s.lr_d},               {"segment_frames", s.segment_frames},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s) {
  s.total_iters = get_count(j, "total_iters", s.total_iters);
  s.constant_lr_iters = get_count(j, "constant_lr_iters", s.constant_lr_iters);
  s.decay_iters = get_count(j, "decay_iters", s.decay_iters);
  s.lr_g = j.value("lr_g", s.lr_g);
  s.lr_d = j.value("lr_d", s.lr_d);
  s.segment_frames = get_count(j, "segment_frames", s.segment_frames);
  s.seed = get_count(j, "seed", s.seed);
}

Eigen::MatrixXd FeatureNorm::apply(const Eigen::MatrixXd& m) const {
  if (m.rows() != mean.size()) {
    throw ValidationError(fmt::format("feature norm for {} dims applied to {} rows", mean.size(), m.rows()));
  }
  return (m.colwise() - mean).array().colwise() / std.array();
}

Eigen::MatrixXd FeatureNorm::invert(const Eigen::MatrixXd& m) const {
  if (m.rows() != mean.size()) {
    throw ValidationError(fmt::format("feature norm for {} dims applied to {} rows", mean.size(), m.rows()));
  }
  return (m.array().colwise() * std.array()).matrix().colwise() + mean;
}

CycleGanModel CycleGanModel::create(TrainingMode mode, const nn::NetworkConfig& generator_shape,
                                    const nn::NetworkConfig& discriminator_shape, const WaveletParams& wavelet,
                                    std::uint64_t seed) {
  wavelet.validate();
  CycleGanModel m;
  m.mode = mode;
  m.wavelet = wavelet;
  m.seed = seed;
  const std::size_t channels = mode_channels(mode, wavelet.n_scales);
  m.gen_config = generator_shape;
  m.gen_config.kind = nn::NetworkKind::kGenerator1d;
  m.gen_config.in_channels = channels;
  m.disc_config = discriminator_shape;
  m.disc_config.kind = nn::NetworkKind::kDiscriminator2d;
  m.disc_config.in_channels = channels;
  m.gen_config.validate();
  m.disc_config.validate();
  m.g_xy = nn::init_params(m.gen_config, seed * 4 + 1);
  m.g_yx = nn::init_params(m.gen_config, seed * 4 + 2);
  m.d_x = nn::init_params(m.disc_config, seed * 4 + 3);
  m.d_y = nn::init_params(m.disc_config, seed * 4 + 4);
  const auto dims = static_cast<Eigen::Index>(channels);
  m.norm_x = m.norm_y = {Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims)};
  return m;
}

void CycleGanModel::validate() const {
  const std::size_t expected = mode_channels(mode, wavelet.n_scales);
  if (gen_config.in_channels != expected || disc_config.in_channels != expected) {
    throw ValidationError(fmt::format("{} model needs {} channels, networks are configured for {} / {}",
                                      to_string(mode), expected, gen_config.in_channels, disc_config.in_channels));
  }
  gen_config.validate();
  disc_config.validate();
  if (static_cast<std::size_t>(norm_x.mean.size()) != expected ||
      static_cast<std::size_t>(norm_y.mean.size()) != expected) {
    throw ValidationError("feature normalization does not match model channels");
  }
}

Eigen::MatrixXd mode_features(const UtteranceFeatures& utt, TrainingMode mode, const WaveletParams& wavelet) {
  if (mode == TrainingMode::kSpectrum) return utt.mcep_matrix();
  const ContinuousF0 f0 = preprocess_f0(utt.f0_vector());
  Eigen::MatrixXd cwt = cwt_decompose(f0.values, wavelet).coeffs;
  if (mode == TrainingMode::kProsody) return cwt;
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(kMcepDim) + cwt.rows(), cwt.cols());
  stacked << utt.mcep_matrix(), cwt;
  return stacked;
}

Tensor adversarial_loss(const Tensor& real_scores, const Tensor& fake_scores, AdversarialSide side) {
  if (side == AdversarialSide::kGenerator) return nn::mean_squared_offset(fake_scores, 1.0);
  return nn::add(nn::mean_squared_offset(real_scores, 1.0), nn::mean_squared_offset(fake_scores, 0.0));
}

Tensor cycle_loss(const Tensor& x, const Tensor& x_cycled, const Tensor& y, const Tensor& y_cycled) {
  return nn::add(nn::mean_abs_diff(x_cycled, x), nn::mean_abs_diff(y_cycled, y));
}

Tensor identity_loss(const Tensor& x, const Tensor& g_yx_of_x, const Tensor& y, const Tensor& g_xy_of_y) {
  return nn::add(nn::mean_abs_diff(g_yx_of_x, x), nn::mean_abs_diff(g_xy_of_y, y));
}

void write_loss_log(const LossLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << "iter,lr,adv_g,adv_d,cyc,id\n";
  for (const auto& r : log) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.iter, r.lr, r.adv_g, r.adv_d, r.cyc, r.id);
  }
  if (!out) throw IoError(fmt::format("write failure on '{}'", path.string()));
}

LossLog read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "iter,lr,adv_g,adv_d,cyc,id") {
    throw FormatError(fmt::format("{}: unexpected loss log header", path.string()));
  }
  LossLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw FormatError(fmt::format("{}: malformed row '{}'", path.string(), line));
    log.push_back({std::stoull(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                   std::stod(cells[4]), std::stod(cells[5])});
  }
  return log;
}

LossLog train(CycleGanModel& model, const std::vector<UtteranceFeatures>& source_set,
              const std::vector<UtteranceFeatures>& target_set, const LossWeights& weights,
              const TrainSchedule& schedule, const TrainOptions& options) {
  weights.validate();
  schedule.validate();
  model.validate();
  if (source_set.empty() || target_set.empty()) throw ValidationError("training sets must be non-empty");
  if (schedule.segment_frames % model.gen_config.frame_multiple() != 0) {
    throw ValidationError(fmt::format("segment_frames {} must be a multiple of {}", schedule.segment_frames,
                                      model.gen_config.frame_multiple()));
  }

  auto prepare = [&](const std::vector<UtteranceFeatures>& set) {
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& utt : set) mats.push_back(mode_features(utt, model.mode, model.wavelet));
    return mats;
  };
  std::vector<Eigen::MatrixXd> xs = prepare(source_set), ys = prepare(target_set);
  model.norm_x = fit_norm(xs);
  model.norm_y = fit_norm(ys);
  model.f0_stats_x = pooled_log_f0_stats(source_set);
  model.f0_stats_y = pooled_log_f0_stats(target_set);
  model.source_label = source_set.front().emotion_label;
  model.target_label = target_set.front().emotion_label;
  model.weights = weights;
  model.schedule = schedule;
  const auto seg = static_cast<Eigen::Index>(schedule.segment_frames);
  for (auto& m : xs) m = reflect_pad(model.norm_x.apply(m), seg);
  for (auto& m : ys) m = reflect_pad(model.norm_y.apply(m), seg);

  std::mt19937_64 rng(schedule.seed);
  auto sample = [&](const std::vector<Eigen::MatrixXd>& set) {
    const auto& m = set[rng() % set.size()];
    const auto offset = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m.cols() - seg + 1));
    return to_tensor(m.middleCols(offset, seg));
  };

  nn::AdamState st_gxy, st_gyx, st_dx, st_dy;
  const std::uint64_t iters = std::min(schedule.total_iters, options.stop_after.value_or(schedule.total_iters));
  LossLog log;
  log.reserve(iters);
  for (std::uint64_t t = 0; t < iters; ++t) {
    try {
      const Tensor x = sample(xs);
      const Tensor y = sample(ys);
      const double lr_g = schedule.lr_at(schedule.lr_g, t);
      const double lr_d = schedule.lr_at(schedule.lr_d, t);

      const Tensor fake_y = nn::forward_generator(model.g_xy, model.gen_config, x);
      const Tensor fake_x = nn::forward_generator(model.g_yx, model.gen_config, y);

      model.d_x.zero_grad();
      model.d_y.zero_grad();
      const Tensor d_loss = nn::add(
          adversarial_loss(nn::forward_discriminator(model.d_y, model.disc_config, as_map(y)),
                           nn::forward_discriminator(model.d_y, model.disc_config, as_map(fake_y.detach())),
                           AdversarialSide::kDiscriminator),
          adversarial_loss(nn::forward_discriminator(model.d_x, model.disc_config, as_map(x)),
                           nn::forward_discriminator(model.d_x, model.disc_config, as_map(fake_x.detach())),
                           AdversarialSide::kDiscriminator));
      nn::backward(d_loss);
      nn::adam_step(model.d_y, st_dy, lr_d);
      nn::adam_step(model.d_x, st_dx, lr_d);

      const Tensor cycled_x = nn::forward_generator(model.g_yx, model.gen_config, fake_y);
      const Tensor cycled_y = nn::forward_generator(model.g_xy, model.gen_config, fake_x);
      const Tensor adv_g = nn::add(
          adversarial_loss({}, nn::forward_discriminator(model.d_y, model.disc_config, as_map(fake_y)),
                           AdversarialSide::kGenerator),
          adversarial_loss({}, nn::forward_discriminator(model.d_x, model.disc_config, as_map(fake_x)),
                           AdversarialSide::kGenerator));
      const Tensor cyc = cycle_loss(x, cycled_x, y, cycled_y);
      Tensor total = nn::add(adv_g, nn::scale(cyc, weights.lambda_cyc));
      double id_value = 0.0;
      if (t < weights.id_cutoff_iters) {
        const Tensor id = identity_loss(x, nn::forward_generator(model.g_yx, model.gen_config, x), y,
                                        nn::forward_generator(model.g_xy, model.gen_config, y));
        id_value = id.item();
        total = nn::add(total, nn::scale(id, weights.lambda_id));
      }
      model.g_xy.zero_grad();
      model.g_yx.zero_grad();
      nn::backward(total);
      nn::adam_step(model.g_xy, st_gxy, lr_g);
      nn::adam_step(model.g_yx, st_gyx, lr_g);
      model.d_x.clear_grad();
      model.d_y.clear_grad();

      log.push_back({t, lr_g, adv_g.item(), d_loss.item(), cyc.item(), id_value});
      if (options.on_iteration) options.on_iteration(log.back());
      if (spdlog::should_log(spdlog::level::debug) && (t % 100 == 0 || t + 1 == iters)) {
        const auto& r = log.back();
        spdlog::debug("[{}] iter {} lr {:.3g} adv_g {:.4f} adv_d {:.4f} cyc {:.4f} id {:.4f}", to_string(model.mode),
                      t, r.lr, r.adv_g, r.adv_d, r.cyc, r.id);
      }
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("training aborted at iteration {}: {}", t, e.what()));
    }
  }
  return log;
}

Eigen::MatrixXd convert_features(const CycleGanModel& model, const Eigen::MatrixXd& features, Direction direction) {
  if (static_cast<std::size_t>(features.rows()) != model.channels()) {
    throw ValidationError(fmt::format("{} model converts {}-dim features, got {}", to_string(model.mode),
                                      model.channels(), features.rows()));
  }
  if (features.cols() == 0) throw ValidationError("convert_features: no frames");
  const bool fwd = direction == Direction::kForward;
  const FeatureNorm& in_norm = fwd ? model.norm_x : model.norm_y;
  const FeatureNorm& out_norm = fwd ? model.norm_y : model.norm_x;
  const auto n = features.cols();
  const auto multiple = static_cast<Eigen::Index>(model.gen_config.frame_multiple());
  const Eigen::Index padded = ((n + multiple - 1) / multiple) * multiple;

  nn::NoGradGuard no_grad;
  const Tensor input = to_tensor(reflect_pad(in_norm.apply(features), padded));
  const Tensor output = nn::forward_generator(fwd ? model.g_xy : model.g_yx, model.gen_config, input);
  return out_norm.invert(to_matrix(output).leftCols(n));
}

StatsPolicy parse_stats_policy(const std::string& text) {
  if (text == "source") return StatsPolicy::kSource;
  if (text == "target") return StatsPolicy::kTarget;
  throw ValidationError(fmt::format("stats_policy must be \"source\" or \"target\", got \"{}\"", text));
}

std::string to_string(StatsPolicy policy) { return policy == StatsPolicy::kSource ? "source" : "target"; }

UtteranceFeatures convert_utterance(const ConversionModels& models, const UtteranceFeatures& utt,
                                    const NormStats& target_stats, StatsPolicy policy) {
  validate(utt);
  if (models.joint && (models.spectrum || models.prosody)) {
    throw ValidationError("conversion takes either a joint model or separate models, not both");
  }
  if (!models.joint && !models.spectrum && !models.prosody) throw ValidationError("no conversion model given");
  auto check_mode = [](const CycleGanModel* m, TrainingMode expected) {
    if (m && m->mode != expected) {
      throw ValidationError(fmt::format("mode mismatch: expected a {} model, got {}", to_string(expected),
                                        to_string(m->mode)));
    }
  };
  check_mode(models.spectrum, TrainingMode::kSpectrum);
  check_mode(models.prosody, TrainingMode::kProsody);
  check_mode(models.joint, TrainingMode::kJoint);

  UtteranceFeatures out = utt;
  const CycleGanModel* label_source = models.joint ? models.joint : (models.prosody ? models.prosody : models.spectrum);
  const bool fwd = models.direction == Direction::kForward;
  out.emotion_label = fwd ? label_source->target_label : label_source->source_label;

  const CycleGanModel* f0_model = models.joint ? models.joint : models.prosody;
  ContinuousF0 f0;
  Eigen::MatrixXd cwt;
  if (f0_model) {
    f0 = preprocess_f0(utt.f0_vector());
    cwt = cwt_decompose(f0.values, f0_model->wavelet).coeffs;
  }

  Eigen::MatrixXd mceps = utt.mcep_matrix();
  if (models.joint) {
    Eigen::MatrixXd stacked(mceps.rows() + cwt.rows(), mceps.cols());
    stacked << mceps, cwt;
    const Eigen::MatrixXd converted = convert_features(*models.joint, stacked, models.direction);
    mceps = converted.topRows(mceps.rows());
    cwt = converted.bottomRows(cwt.rows());
  } else {
    if (models.spectrum) mceps = convert_features(*models.spectrum, mceps, models.direction);
    if (models.prosody) cwt = convert_features(*models.prosody, cwt, models.direction);
  }
  out.set_mceps(mceps);

  if (f0_model) {
    const std::vector<double> recon = cwt_reconstruct({cwt, f0_model->wavelet});
    const std::vector<double> values = standardize(recon);
    const NormStats& stats = policy == StatsPolicy::kTarget ? target_stats : f0.stats;
    out.set_f0(denormalize_log_f0(values, stats, f0.voicing_mask));
  }
  validate(out);
  return out;
}

void save_model(const CycleGanModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_params(model.g_xy, dir / "g_xy.prm");
  nn::save_params(model.g_yx, dir / "g_yx.prm");
  nn::save_params(model.d_x, dir / "d_x.prm");
  nn::save_params(model.d_y, dir / "d_y.prm");
  nlohmann::json meta = {
      {"format", "prosodia-cyclegan-1"},
      {"mode", to_string(model.mode)},
      {"generator", model.gen_config},
      {"discriminator", model.disc_config},
      {"wavelet", model.wavelet},
      {"weights", model.weights},
      {"schedule", model.schedule},
      {"seed", model.seed},
      {"source_label", model.source_label},
      {"target_label", model.target_label},
      {"norm_x", norm_to_json(model.norm_x)},
      {"norm_y", norm_to_json(model.norm_y)},
      {"f0_stats_source", {{"mean", model.f0_stats_x.mean}, {"std", model.f0_stats_x.std}}},
      {"f0_stats_target", {{"mean", model.f0_stats_y.mean}, {"std", model.f0_stats_y.std}}},
  };
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / "model.json").string()));
  out << meta.dump(2) << '\n';
}

CycleGanModel load_model(const std::filesystem::path& dir) {
  const auto meta_path = dir / "model.json";
  std::ifstream in(meta_path);
  if (!in) throw IoError(fmt::format("missing checkpoint metadata '{}'", meta_path.string()));
  CycleGanModel m;
  try {
    const nlohmann::json meta = nlohmann::json::parse(in);
    m.mode = parse_training_mode(meta.at("mode").get<std::string>());
    m.gen_config = meta.at("generator").get<nn::NetworkConfig>();
    m.disc_config = meta.at("discriminator").get<nn::NetworkConfig>();
    m.wavelet = meta.at("wavelet").get<WaveletParams>();
    m.weights = meta.at("weights").get<LossWeights>();
    m.schedule = meta.at("schedule").get<TrainSchedule>();
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.source_label = meta.at("source_label").get<std::string>();
    m.target_label = meta.at("target_label").get<std::string>();
    m.norm_x = norm_from_json(meta.at("norm_x"));
    m.norm_y = norm_from_json(meta.at("norm_y"));
    m.f0_stats_x = {meta.at("f0_stats_source").at("mean").get<double>(),
                    meta.at("f0_stats_source").at("std").get<double>()};
    m.f0_stats_y = {meta.at("f0_stats_target").at("mean").get<double>(),
                    meta.at("f0_stats_target").at("std").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: {}", meta_path.string(), e.what()));
  }
  m.g_xy = nn::load_params(dir / "g_xy.prm");
  m.g_yx = nn::load_params(dir / "g_yx.prm");
  m.d_x = nn::load_params(dir / "d_x.prm");
  m.d_y = nn::load_params(dir / "d_y.prm");
  m.validate();
  return m;
}

}  // namespace prosodia
