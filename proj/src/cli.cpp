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


#include "prosodia/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "prosodia/baseline.hpp"
#include "prosodia/error.hpp"
#include "prosodia/feature_io.hpp"

namespace prosodia::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSentinel = ".in_progress";

// Marks a directory as partial until commit().
class InProgress {
 public:
  explicit InProgress(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    std::ofstream(dir_ / kSentinel) << "incomplete\n";
  }
  void commit() { fs::remove(dir_ / kSentinel); }

 private:
  fs::path dir_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failure on '{}'", path.string()));
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
}

TrainingMode training_mode(RunMode mode) {
  switch (mode) {
    case RunMode::kSpectrum:
      return TrainingMode::kSpectrum;
    case RunMode::kProsody:
      return TrainingMode::kProsody;
    case RunMode::kJoint:
      return TrainingMode::kJoint;
    default:
      throw ValidationError(fmt::format("mode '{}' does not train a CycleGAN", to_string(mode)));
  }
}

std::string slot_name(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kSpectrum:
      return "spectrum";
    case TrainingMode::kProsody:
      return "prosody";
    case TrainingMode::kJoint:
      return "joint";
  }
  return "?";
}

struct TrainedSystem {
  CycleGanModel model;
  LossLog log;
};

TrainedSystem train_system(const RunConfig& config, TrainingMode mode, const NonParallelSplit& split,
                           const std::string& tag) {
  TrainSchedule schedule = config.schedule;
  schedule.seed = config.seed;
  TrainedSystem out{CycleGanModel::create(mode, config.generator_shape(), config.discriminator_shape(),
                                          config.wavelet, config.seed),
                    {}};
  TrainOptions options;
  const std::uint64_t every = std::max<std::uint64_t>(1, schedule.total_iters / 10);
  options.on_iteration = [&](const LossLogRow& r) {
    if (r.iter % every == 0 || r.iter + 1 == schedule.total_iters) {
      spdlog::info("[{}] iter {}/{} lr {:.3g} adv_g {:.4f} adv_d {:.4f} cyc {:.4f} id {:.4f}", tag, r.iter + 1,
                   schedule.total_iters, r.lr, r.adv_g, r.adv_d, r.cyc, r.id);
    }
  };
  out.log = train(out.model, split.source_set, split.target_set, config.weights, schedule, options);
  return out;
}

void save_system(const TrainedSystem& s, const fs::path& dir, const RunConfig& config) {
  save_model(s.model, dir);
  write_loss_log(s.log, dir / "losslog.csv");
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");
}

struct LgPair {
  LgStats source;
  LgStats target;
  std::string source_label;
  std::string target_label;
};

void write_lg_pair(const LgPair& lg, const fs::path& dir) {
  json doc = {{"source", lg.source}, {"target", lg.target}};
  doc["source"]["emotion"] = lg.source_label;
  doc["target"]["emotion"] = lg.target_label;
  write_text(dir / "lg_stats.json", doc.dump(2) + "\n");
}

LgPair read_lg_pair(const fs::path& dir) {
  const fs::path path = dir / "lg_stats.json";
  if (!fs::exists(path)) throw IoError(fmt::format("missing baseline checkpoint '{}'", path.string()));
  const json doc = read_json(path);
  try {
    return {doc.at("source").get<LgStats>(), doc.at("target").get<LgStats>(),
            doc.at("source").value("emotion", std::string{}), doc.at("target").value("emotion", std::string{})};
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

LgPair fit_lg_pair(const NonParallelSplit& split, const EmotionPair& pair) {
  return {lg_fit(split.source_set), lg_fit(split.target_set), pair.source, pair.target};
}

UtteranceFeatures convert_baseline(const UtteranceFeatures& utt, const LgPair& lg, const CycleGanModel* spectrum,
                                   bool inverse) {
  UtteranceFeatures out = utt;
  const Direction dir = inverse ? Direction::kInverse : Direction::kForward;
  if (spectrum) out.set_mceps(convert_features(*spectrum, utt.mcep_matrix(), dir));
  out.set_f0(inverse ? lg_transform(utt.f0_vector(), lg.target, lg.source)
                     : lg_transform(utt.f0_vector(), lg.source, lg.target));
  out.emotion_label = inverse ? lg.source_label : lg.target_label;
  validate(out);
  return out;
}

CycleGanModel load_checked(const fs::path& dir, TrainingMode expected) {
  CycleGanModel m = load_model(dir);
  if (m.mode != expected) {
    throw ValidationError(fmt::format("mode mismatch: checkpoint '{}' holds a {} model but is used as the {} model",
                                      dir.string(), to_string(m.mode), to_string(expected)));
  }
  return m;
}

std::vector<UtteranceFeatures> read_uff_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".uff") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<UtteranceFeatures> out;
  for (const auto& f : files) out.push_back(read_feature_file(f));
  return out;
}

std::string format_cell(const std::optional<double>& v) { return v ? fmt::format("{:.10g}", *v) : "FAILED"; }

}  // namespace

RunMode parse_run_mode(const std::string& text) {
  if (text == "spectrum" || text == "spectrum-separate") return RunMode::kSpectrum;
  if (text == "prosody" || text == "prosody-separate") return RunMode::kProsody;
  if (text == "joint") return RunMode::kJoint;
  if (text == "baseline") return RunMode::kBaseline;
  if (text == "separate") return RunMode::kSeparate;
  throw ValidationError(
      fmt::format("unknown mode '{}' (expected spectrum, prosody, joint, baseline or separate)", text));
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kSpectrum:
      return "spectrum";
    case RunMode::kProsody:
      return "prosody";
    case RunMode::kJoint:
      return "joint";
    case RunMode::kBaseline:
      return "baseline";
    case RunMode::kSeparate:
      return "separate";
  }
  return "?";
}

nn::NetworkConfig RunConfig::generator_shape() const {
  nn::NetworkConfig g = nn::NetworkConfig::generator(kMcepDim, base_channels);
  g.n_residual = n_residual;
  return g;
}

nn::NetworkConfig RunConfig::discriminator_shape() const {
  return nn::NetworkConfig::discriminator(kMcepDim, disc_base_channels);
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = {"corpus", "out_dir", "pairs", "split", "wavelet",
                                              "network", "weights", "schedule", "mode", "stats_policy",
                                              "align", "seed", "checkpoints"};
  std::vector<std::string> problems;
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) problems.push_back(fmt::format("unknown key '{}'", key));
  }
  RunConfig c;
  auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : base_dir / q;
  };
  auto field = [&](const char* key, const auto& apply) {
    if (!doc.contains(key)) return;
    try {
      apply(doc.at(key));
    } catch (const json::exception& e) {
      problems.push_back(fmt::format("{}: {}", key, e.what()));
    } catch (const Error& e) {
      problems.push_back(fmt::format("{}: {}", key, e.what()));
    }
  };

  field("corpus", [&](const json& v) { c.corpus = resolve(v.get<std::string>()); });
  field("out_dir", [&](const json& v) { c.out_dir = resolve(v.get<std::string>()); });
  field("seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); });
  field("pairs", [&](const json& v) {
    if (!v.is_array()) throw ValidationError("must be an array of {\"source\", \"target\"} objects");
    for (const auto& p : v) c.pairs.push_back({p.at("source").get<std::string>(), p.at("target").get<std::string>()});
  });
  field("split", [&](const json& v) {
    c.n_train_each = v.value("n_train_each", c.n_train_each);
    c.n_eval = v.value("n_eval", c.n_eval);
    if (v.contains("seed")) c.split_seed = v.at("seed").get<std::uint64_t>();
  });
  field("wavelet", [&](const json& v) {
    c.wavelet = v.get<WaveletParams>();
    c.wavelet.validate();
  });
  field("network", [&](const json& v) {
    c.base_channels = v.value("base_channels", c.base_channels);
    c.n_residual = v.value("n_residual", c.n_residual);
    c.disc_base_channels = v.value("disc_base_channels", c.disc_base_channels);
    c.generator_shape().validate();
    c.discriminator_shape().validate();
  });
  field("weights", [&](const json& v) {
    c.weights = v.get<LossWeights>();
    c.weights.validate();
  });
  field("schedule", [&](const json& v) {
    c.schedule = v.get<TrainSchedule>();
    // A bare total splits evenly into constant and decaying halves.
    if (v.contains("total_iters") && !v.contains("constant_lr_iters") && !v.contains("decay_iters")) {
      c.schedule.constant_lr_iters = c.schedule.total_iters / 2;
      c.schedule.decay_iters = c.schedule.total_iters - c.schedule.constant_lr_iters;
    }
    c.schedule.validate();
  });
  field("mode", [&](const json& v) { c.mode = parse_run_mode(v.get<std::string>()); });
  field("stats_policy", [&](const json& v) { c.stats_policy = parse_stats_policy(v.get<std::string>()); });
  field("align", [&](const json& v) { c.align = parse_alignment(v.get<std::string>()); });
  field("checkpoints", [&](const json& v) {
    for (const auto& [key, value] : v.items()) {
      if (key != "spectrum" && key != "prosody" && key != "joint" && key != "baseline") {
        throw ValidationError(fmt::format("unknown checkpoint slot '{}'", key));
      }
      c.checkpoints[key] = resolve(value.get<std::string>());
    }
  });

  for (const auto& p : c.pairs) {
    if (p.source.empty() || p.target.empty()) problems.push_back("pairs: emotion names must be non-empty");
    if (p.source == p.target) problems.push_back(fmt::format("pairs: source and target are both '{}'", p.source));
  }
  if (c.n_train_each == 0) problems.push_back("split: n_train_each must be > 0");
  if (c.schedule.segment_frames % (std::size_t{1} << c.generator_shape().n_downsample) != 0) {
    problems.push_back(fmt::format("schedule: segment_frames {} must be a multiple of {}", c.schedule.segment_frames,
                                   c.generator_shape().frame_multiple()));
  }
  if (!problems.empty()) {
    throw ValidationError(fmt::format("invalid config ({} problem{}):\n  - {}", problems.size(),
                                      problems.size() == 1 ? "" : "s", fmt::join(problems, "\n  - ")));
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_json(path), fs::absolute(path).parent_path());
}

json to_json(const RunConfig& c) {
  json pairs = json::array();
  for (const auto& p : c.pairs) pairs.push_back({{"source", p.source}, {"target", p.target}});
  json checkpoints = json::object();
  for (const auto& [k, v] : c.checkpoints) checkpoints[k] = v.generic_string();
  json split = {{"n_train_each", c.n_train_each}, {"n_eval", c.n_eval}, {"seed", c.effective_split_seed()}};
  return {{"corpus", c.corpus.generic_string()},
          {"out_dir", c.out_dir.generic_string()},
          {"pairs", pairs},
          {"split", split},
          {"wavelet", c.wavelet},
          {"network",
           {{"base_channels", c.base_channels},
            {"n_residual", c.n_residual},
            {"disc_base_channels", c.disc_base_channels}}},
          {"weights", c.weights},
          {"schedule", c.schedule},
          {"mode", to_string(c.mode)},
          {"stats_policy", to_string(c.stats_policy)},
          {"align", c.align == Alignment::kNone ? "none" : "linear"},
          {"seed", c.seed},
          {"checkpoints", checkpoints}};
}

void apply_paper_scale(RunConfig& config) {
  const std::size_t segment = config.schedule.segment_frames;
  config.schedule = TrainSchedule::paper_scale();
  config.schedule.segment_frames = segment;
  config.weights = LossWeights{};
}

void validate_paths(const RunConfig& config, bool need_corpus) {
  std::vector<std::string> problems;
  if (need_corpus) {
    if (config.corpus.empty()) {
      problems.push_back("corpus: no manifest given");
    } else if (!fs::exists(config.corpus)) {
      problems.push_back(fmt::format("corpus: '{}' does not exist", config.corpus.string()));
    }
    if (config.pairs.empty()) problems.push_back("pairs: at least one emotion pair is required");
  }
  if (config.out_dir.empty()) problems.push_back("out_dir: no output directory given");
  if (!problems.empty()) {
    throw ValidationError(fmt::format("invalid config:\n  - {}", fmt::join(problems, "\n  - ")));
  }
}

fs::path cmd_synth_corpus(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  InProgress guard(out_dir);
  const fs::path manifest = write_synthetic_corpus(spec, out_dir);
  json spec_doc = spec;
  write_text(out_dir / "synth_spec.json", spec_doc.dump(2) + "\n");
  guard.commit();
  spdlog::info("wrote {} utterances per emotion to {}", spec.utterances_per_emotion(), out_dir.string());
  return manifest;
}

void cmd_preprocess(const fs::path& manifest, const fs::path& out_dir) {
  const Corpus corpus = load_corpus(manifest);
  if (corpus.empty()) throw ValidationError(fmt::format("{}: corpus is empty", manifest.string()));
  // Every utterance must survive interpolation before anything is written.
  std::map<std::string, std::vector<ContinuousF0>> processed;
  for (const auto& [emotion, utts] : corpus) {
    for (const auto& u : utts) {
      try {
        processed[emotion].push_back(preprocess_f0(u.f0_vector()));
      } catch (const Error& e) {
        throw ValidationError(fmt::format("{}/{}: {}", emotion, u.utterance_id, e.what()));
      }
    }
  }
  InProgress guard(out_dir);
  json summary = json::object();
  for (const auto& [emotion, utts] : corpus) {
    std::size_t frames = 0;
    for (std::size_t k = 0; k < utts.size(); ++k) {
      const auto& u = utts[k];
      const auto& f0 = processed[emotion][k];
      const InterpolatedF0 interp = interpolate_unvoiced(u.f0_vector());
      std::string csv = "frame,f0_hz,voiced,continuous_hz,normalized_log_f0\n";
      for (std::size_t t = 0; t < u.frames(); ++t) {
        csv += fmt::format("{},{:.9g},{},{:.17g},{:.17g}\n", t, u.f0_hz[t], f0.voicing_mask[t] ? 1 : 0,
                           interp.continuous_hz[t], f0.values[t]);
      }
      write_text(out_dir / emotion / (u.utterance_id + ".f0.csv"), csv);
      frames += u.frames();
    }
    summary[emotion] = {{"utterances", utts.size()}, {"frames", frames}, {"lg_stats", lg_fit(utts)}};
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  guard.commit();
}

void cmd_decompose(const fs::path& input, const WaveletParams& wavelet, const fs::path& out_dir) {
  wavelet.validate();
  const UtteranceFeatures utt = read_feature_file(input);
  const ContinuousF0 f0 = preprocess_f0(utt.f0_vector());
  CwtCache cache{utt.utterance_id, utt.emotion_label, utt.frame_period_ms, f0.stats, f0.voicing_mask,
                 cwt_decompose(f0.values, wavelet)};
  InProgress guard(out_dir);
  export_scalogram_csv(cache.cwt, out_dir / (utt.utterance_id + ".scalogram.csv"));
  write_cwt_cache(cache, out_dir / (utt.utterance_id + ".cwt"));
  guard.commit();
}

void cmd_reconstruct(const fs::path& cache_path, const fs::path& out_dir) {
  const CwtCache cache = read_cwt_cache(cache_path);
  const std::vector<double> values = standardize(cwt_reconstruct(cache.cwt));
  const std::vector<double> hz = denormalize_log_f0(values, cache.stats, cache.voicing_mask);
  std::string csv = "frame,normalized_log_f0,f0_hz\n";
  for (std::size_t t = 0; t < values.size(); ++t) csv += fmt::format("{},{:.17g},{:.17g}\n", t, values[t], hz[t]);
  InProgress guard(out_dir);
  write_text(out_dir / (cache.utterance_id + ".f0.csv"), csv);
  guard.commit();
}

void cmd_train(const RunConfig& config) {
  validate_paths(config, true);
  if (config.mode == RunMode::kSeparate) {
    throw ValidationError("train: separate systems are trained as two runs, mode spectrum and mode prosody");
  }
  const Corpus corpus = load_corpus(config.corpus);
  std::vector<NonParallelSplit> splits;
  for (const auto& p : config.pairs) {
    splits.push_back(make_nonparallel_split(corpus, p.source, p.target, config.n_train_each, config.n_eval,
                                            config.effective_split_seed()));
  }
  InProgress guard(config.out_dir);
  write_text(config.out_dir / "config.json", to_json(config).dump(2) + "\n");
  for (std::size_t k = 0; k < config.pairs.size(); ++k) {
    const auto& pair = config.pairs[k];
    const fs::path dir = config.out_dir / pair.name() / to_string(config.mode);
    if (config.mode == RunMode::kBaseline) {
      write_lg_pair(fit_lg_pair(splits[k], pair), dir);
      continue;
    }
    const auto mode = training_mode(config.mode);
    save_system(train_system(config, mode, splits[k], pair.name() + "/" + slot_name(mode)), dir, config);
    spdlog::info("checkpoint written to {}", dir.string());
  }
  guard.commit();
}

void cmd_convert(const RunConfig& config, RunMode mode, const std::vector<fs::path>& inputs, const fs::path& out_dir,
                 bool inverse) {
  if (inputs.empty()) throw ValidationError("convert: no input feature files");
  std::vector<std::string> missing_inputs;
  for (const auto& p : inputs) {
    if (!fs::exists(p)) missing_inputs.push_back(p.string());
  }
  if (!missing_inputs.empty()) {
    throw ValidationError(fmt::format("convert: missing input file(s): {}", fmt::join(missing_inputs, ", ")));
  }
  auto slot = [&](const std::string& key) -> std::optional<fs::path> {
    const auto it = config.checkpoints.find(key);
    if (it == config.checkpoints.end()) return std::nullopt;
    return it->second;
  };
  std::vector<std::string> required;
  switch (mode) {
    case RunMode::kSpectrum:
      required = {"spectrum"};
      break;
    case RunMode::kProsody:
      required = {"prosody"};
      break;
    case RunMode::kJoint:
      required = {"joint"};
      break;
    case RunMode::kSeparate:
      required = {"spectrum", "prosody"};
      break;
    case RunMode::kBaseline:
      required = {"baseline"};
      break;
  }
  std::vector<std::string> absent;
  for (const auto& key : required) {
    if (!slot(key)) absent.push_back(key);
  }
  if (!absent.empty()) {
    throw ValidationError(fmt::format("convert --mode {} needs checkpoint(s): {}", to_string(mode), fmt::join(absent, ", ")));
  }

  std::optional<CycleGanModel> spectrum, prosody, joint;
  std::optional<LgPair> lg;
  if (mode == RunMode::kSpectrum || mode == RunMode::kSeparate || (mode == RunMode::kBaseline && slot("spectrum"))) {
    spectrum = load_checked(*slot("spectrum"), TrainingMode::kSpectrum);
  }
  if (mode == RunMode::kProsody || mode == RunMode::kSeparate) prosody = load_checked(*slot("prosody"), TrainingMode::kProsody);
  if (mode == RunMode::kJoint) joint = load_checked(*slot("joint"), TrainingMode::kJoint);
  if (mode == RunMode::kBaseline) lg = read_lg_pair(*slot("baseline"));

  std::vector<UtteranceFeatures> utts;
  for (const auto& p : inputs) utts.push_back(read_feature_file(p));

  ConversionModels models;
  models.spectrum = spectrum ? &*spectrum : nullptr;
  models.prosody = prosody ? &*prosody : nullptr;
  models.joint = joint ? &*joint : nullptr;
  models.direction = inverse ? Direction::kInverse : Direction::kForward;
  const CycleGanModel* f0_model = joint ? &*joint : (prosody ? &*prosody : nullptr);
  const NormStats target_stats =
      f0_model ? (inverse ? f0_model->f0_stats_x : f0_model->f0_stats_y) : NormStats{};

  InProgress guard(out_dir);
  for (const auto& utt : utts) {
    const UtteranceFeatures out = lg ? convert_baseline(utt, *lg, models.spectrum, inverse)
                                     : convert_utterance(models, utt, target_stats, config.stats_policy);
    write_feature_file(out, out_dir / (out.utterance_id + ".uff"));
  }
  guard.commit();
  spdlog::info("converted {} utterance(s) into {}", utts.size(), out_dir.string());
}

EvalReport cmd_evaluate(const fs::path& converted_dir, const fs::path& reference_dir, Alignment align,
                        const fs::path& out_csv) {
  const auto converted = read_uff_dir(converted_dir);
  const auto references = read_uff_dir(reference_dir);
  std::set<std::string> ref_ids;
  for (const auto& r : references) ref_ids.insert(r.utterance_id);
  std::vector<UtteranceFeatures> paired;
  for (const auto& c : converted) {
    if (ref_ids.count(c.utterance_id)) {
      paired.push_back(c);
    } else {
      spdlog::warn("no reference for converted utterance '{}', skipped", c.utterance_id);
    }
  }
  if (paired.empty()) {
    throw ValidationError(fmt::format("no common utterance ids between '{}' and '{}'", converted_dir.string(),
                                      reference_dir.string()));
  }
  const EvalReport report = evaluate_pairs(paired, references, align);
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_report_csv(report, out_csv);
  spdlog::info("mean MCD {:.4f} dB, RMSE {:.4f} Hz, PCC {:.4f} over {} pair(s)", report.mean_mcd, report.mean_rmse,
               report.mean_pcc, report.rows.size());
  return report;
}

std::vector<CompareCell> cmd_compare(const RunConfig& config) {
  validate_paths(config, true);
  const Corpus corpus = load_corpus(config.corpus);
  std::vector<NonParallelSplit> splits;
  for (const auto& p : config.pairs) {
    splits.push_back(make_nonparallel_split(corpus, p.source, p.target, config.n_train_each, config.n_eval,
                                            config.effective_split_seed()));
  }
  InProgress guard(config.out_dir);
  write_text(config.out_dir / "config.json", to_json(config).dump(2) + "\n");
  const auto policy = std::thread::hardware_concurrency() > 1 ? std::launch::async : std::launch::deferred;

  std::vector<CompareCell> cells;
  for (std::size_t k = 0; k < config.pairs.size(); ++k) {
    const auto& pair = config.pairs[k];
    const auto& split = splits[k];
    const fs::path pair_dir = config.out_dir / pair.name();

    // Systems share nothing mutable, so the three trainings may overlap.
    std::map<TrainingMode, std::future<TrainedSystem>> jobs;
    for (const auto mode : {TrainingMode::kSpectrum, TrainingMode::kProsody, TrainingMode::kJoint}) {
      jobs[mode] = std::async(policy, [&, mode] { return train_system(config, mode, split, pair.name() + "/" + slot_name(mode)); });
    }
    std::map<TrainingMode, TrainedSystem> trained;
    std::map<TrainingMode, std::string> failures;
    for (auto& [mode, job] : jobs) {
      try {
        trained.emplace(mode, job.get());
        save_system(trained.at(mode), pair_dir / slot_name(mode), config);
      } catch (const std::exception& e) {
        failures[mode] = e.what();
        spdlog::error("[{}/{}] training failed: {}", pair.name(), slot_name(mode), e.what());
      }
    }
    const LgPair lg = fit_lg_pair(split, pair);
    write_lg_pair(lg, pair_dir / "baseline");

    std::vector<UtteranceFeatures> sources, references;
    for (const auto& [src, tgt] : split.eval_pairs) {
      sources.push_back(src);
      references.push_back(tgt);
    }
    auto model = [&](TrainingMode m) -> const CycleGanModel* {
      if (!trained.count(m)) throw Error(fmt::format("{} system unavailable: {}", slot_name(m), failures[m]));
      return &trained.at(m).model;
    };
    auto run_system = [&](const std::string& system, const auto& convert) {
      CompareCell cell{pair.name(), system, std::nullopt, {}};
      try {
        std::vector<UtteranceFeatures> converted;
        for (const auto& u : sources) converted.push_back(convert(u));
        cell.report = evaluate_pairs(converted, references, config.align);
        write_report_csv(*cell.report, pair_dir / (system + "_report.csv"));
      } catch (const std::exception& e) {
        cell.failure = e.what();
        spdlog::error("[{}/{}] evaluation failed: {}", pair.name(), system, e.what());
      }
      cells.push_back(std::move(cell));
    };
    run_system("baseline", [&](const UtteranceFeatures& u) {
      return convert_baseline(u, lg, model(TrainingMode::kSpectrum), false);
    });
    run_system("joint", [&](const UtteranceFeatures& u) {
      ConversionModels m;
      m.joint = model(TrainingMode::kJoint);
      return convert_utterance(m, u, m.joint->f0_stats_y, config.stats_policy);
    });
    run_system("separate", [&](const UtteranceFeatures& u) {
      ConversionModels m;
      m.spectrum = model(TrainingMode::kSpectrum);
      m.prosody = model(TrainingMode::kProsody);
      return convert_utterance(m, u, m.prosody->f0_stats_y, config.stats_policy);
    });
  }

  // Per-system means over pairs; a system with any failed pair has no mean.
  const std::vector<std::string> systems = {"baseline", "joint", "separate"};
  std::string csv = "pair,system,mcd_db,rmse_hz,pcc\n";
  std::string text = fmt::format("{:<24} {:<10} {:>12} {:>12} {:>10}\n", "pair", "system", "MCD [dB]", "RMSE [Hz]", "PCC");
  auto emit = [&](const std::string& pair, const std::string& system, std::optional<double> mcd_v,
                  std::optional<double> rmse_v, std::optional<double> pcc_v) {
    csv += fmt::format("{},{},{},{},{}\n", pair, system, format_cell(mcd_v), format_cell(rmse_v), format_cell(pcc_v));
    auto col = [](const std::optional<double>& v, int prec) { return v ? fmt::format("{:.{}f}", *v, prec) : "FAILED"; };
    text += fmt::format("{:<24} {:<10} {:>12} {:>12} {:>10}\n", pair, system, col(mcd_v, 4), col(rmse_v, 4), col(pcc_v, 4));
  };
  bool any_failed = false;
  for (const auto& c : cells) {
    if (c.report) {
      emit(c.pair, c.system, c.report->mean_mcd, c.report->mean_rmse, c.report->mean_pcc);
    } else {
      any_failed = true;
      emit(c.pair, c.system, std::nullopt, std::nullopt, std::nullopt);
    }
  }
  for (const auto& system : systems) {
    double m = 0, r = 0, p = 0;
    std::size_t n = 0;
    bool ok = true;
    for (const auto& c : cells) {
      if (c.system != system) continue;
      if (!c.report) {
        ok = false;
        continue;
      }
      m += c.report->mean_mcd;
      r += c.report->mean_rmse;
      p += c.report->mean_pcc;
      ++n;
    }
    if (ok && n > 0) {
      emit("OVERALL", system, m / static_cast<double>(n), r / static_cast<double>(n), p / static_cast<double>(n));
    } else {
      emit("OVERALL", system, std::nullopt, std::nullopt, std::nullopt);
    }
  }
  write_text(config.out_dir / "compare.csv", csv);
  write_text(config.out_dir / "compare.txt", text);
  if (any_failed) throw Error(fmt::format("compare: some systems failed; see {}", (config.out_dir / "compare.csv").string()));
  guard.commit();
  return cells;
}

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("prosodia");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("PROSODIA_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("PROSODIA_LOG='{}' not recognized, using info", level);
  }
}

}  // namespace

int run(int argc, char** argv) {
  if (!spdlog::get("prosodia")) configure_logging();

  CLI::App app{"prosodia: emotional voice conversion on precomputed speech features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "prosodia 0.1.0");

  std::string config_path, out, mode_text, align_text = "none";
  std::uint64_t seed = 0;
  bool paper_scale = false, inverse = false;
  std::vector<std::string> positional, checkpoint_flags;
  std::string converted_dir, reference_dir;

  auto* synth = app.add_subcommand("synth-corpus", "Generate a synthetic two-emotion feature corpus");
  synth->add_option("--config", config_path, "Synthetic corpus parameters (JSON)")->check(CLI::ExistingFile);
  auto* synth_seed = synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", out, "Output directory")->required();

  auto* prep = app.add_subcommand("preprocess", "Validate a corpus and export interpolated, normalized F0");
  prep->add_option("manifest", positional, "Corpus manifest")->required()->expected(1);
  prep->add_option("--out", out, "Output directory")->required();

  auto* decomp = app.add_subcommand("decompose", "CWT-decompose the F0 of one feature file");
  decomp->add_option("input", positional, "UFF feature file")->required()->expected(1);
  decomp->add_option("--config", config_path, "Run config supplying wavelet parameters")->check(CLI::ExistingFile);
  decomp->add_option("--out", out, "Output directory")->required();

  auto* recon = app.add_subcommand("reconstruct", "Rebuild an F0 contour from a CWT cache file");
  recon->add_option("cache", positional, "CWT cache (.cwt)")->required()->expected(1);
  recon->add_option("--out", out, "Output directory")->required();

  auto* trn = app.add_subcommand("train", "Train one system per configured emotion pair");
  auto* cmp = app.add_subcommand("compare", "Train, convert and score baseline, joint and separate systems");
  auto* conv = app.add_subcommand("convert", "Convert feature files with trained checkpoints");
  for (auto* sub : {trn, cmp, conv}) {
    sub->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (overrides out_dir)");
  }
  std::vector<CLI::Option*> seed_opts, mode_opts, paper_opts, align_opts;
  for (auto* sub : {trn, cmp}) {
    seed_opts.push_back(sub->add_option("--seed", seed, "Seed for initialization, sampling and split"));
    paper_opts.push_back(sub->add_flag("--paper-scale", paper_scale, "Full-length schedule: 2e5 + 2e5 iterations"));
  }
  mode_opts.push_back(trn->add_option("--mode", mode_text, "spectrum | prosody | joint | baseline"));
  mode_opts.push_back(conv->add_option("--mode", mode_text, "spectrum | prosody | joint | separate | baseline"));
  align_opts.push_back(cmp->add_option("--align", align_text, "none | linear"));
  conv->add_option("inputs", positional, "UFF feature files")->required();
  conv->add_option("--checkpoint", checkpoint_flags, "SLOT=DIR with SLOT in spectrum, prosody, joint, baseline");
  conv->add_flag("--inverse", inverse, "Map target emotion back to source");

  auto* eval = app.add_subcommand("evaluate", "Score converted features against references");
  eval->add_option("--converted", converted_dir, "Directory of converted .uff files")->required();
  eval->add_option("--reference", reference_dir, "Directory of reference .uff files")->required();
  align_opts.push_back(eval->add_option("--align", align_text, "none | linear"));
  eval->add_option("--out", out, "Report CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto load_config = [&]() {
    RunConfig c = load_run_config(config_path);
    if (!out.empty()) c.out_dir = out;
    if (std::any_of(seed_opts.begin(), seed_opts.end(), [](auto* o) { return o->count() > 0; })) c.seed = seed;
    if (paper_scale) apply_paper_scale(c);
    if (std::any_of(mode_opts.begin(), mode_opts.end(), [](auto* o) { return o->count() > 0; })) {
      c.mode = parse_run_mode(mode_text);
    }
    if (std::any_of(align_opts.begin(), align_opts.end(), [](auto* o) { return o->count() > 0; })) {
      c.align = parse_alignment(align_text);
    }
    for (const auto& flag : checkpoint_flags) {
      const auto eq = flag.find('=');
      if (eq == std::string::npos) throw ValidationError(fmt::format("--checkpoint expects SLOT=DIR, got '{}'", flag));
      const std::string key = flag.substr(0, eq);
      if (key != "spectrum" && key != "prosody" && key != "joint" && key != "baseline") {
        throw ValidationError(fmt::format("--checkpoint: unknown slot '{}'", key));
      }
      c.checkpoints[key] = flag.substr(eq + 1);
    }
    return c;
  };

  try {
    if (*synth) {
      SynthSpec spec = SynthSpec::defaults();
      if (!config_path.empty()) spec = read_json(config_path).get<SynthSpec>();
      if (synth_seed->count()) spec.seed = seed;
      cmd_synth_corpus(spec, out);
    } else if (*prep) {
      cmd_preprocess(positional.at(0), out);
    } else if (*decomp) {
      WaveletParams wavelet;
      if (!config_path.empty()) wavelet = load_run_config(config_path).wavelet;
      cmd_decompose(positional.at(0), wavelet, out);
    } else if (*recon) {
      cmd_reconstruct(positional.at(0), out);
    } else if (*trn) {
      cmd_train(load_config());
    } else if (*conv) {
      const RunConfig c = load_config();
      if (out.empty()) throw ValidationError("convert: --out is required");
      std::vector<fs::path> inputs(positional.begin(), positional.end());
      cmd_convert(c, c.mode, inputs, out, inverse);
    } else if (*eval) {
      cmd_evaluate(converted_dir, reference_dir, parse_alignment(align_text), out);
    } else if (*cmp) {
      const auto cells = cmd_compare(load_config());
      std::ifstream table(load_config().out_dir / "compare.txt");
      std::cout << table.rdbuf();
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const FormatError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const json::exception& e) {
    spdlog::error("invalid JSON: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}

}  // namespace prosodia::cli
