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

#include "prosodia/feature_io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "prosodia/binary_io.hpp"
#include "prosodia/error.hpp"

namespace prosodia {

namespace {
constexpr char kUffMagic[] = "UFF1";
}

Eigen::MatrixXd UtteranceFeatures::mcep_matrix() const {
  const std::size_t n = frames();
  Eigen::MatrixXd m(kMcepDim, n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < kMcepDim; ++d) m(d, t) = mceps[t * kMcepDim + d];
  return m;
}

void UtteranceFeatures::set_mceps(const Eigen::MatrixXd& m) {
  if (static_cast<std::size_t>(m.rows()) != kMcepDim) {
    throw ValidationError(fmt::format("mcep matrix has {} rows, expected {}", m.rows(), kMcepDim));
  }
  mceps.resize(kMcepDim * m.cols());
  for (Eigen::Index t = 0; t < m.cols(); ++t)
    for (std::size_t d = 0; d < kMcepDim; ++d) mceps[t * kMcepDim + d] = static_cast<float>(m(d, t));
}

void UtteranceFeatures::set_f0(const std::vector<double>& f0) { f0_hz.assign(f0.begin(), f0.end()); }

void validate(const UtteranceFeatures& f) {
  const std::size_t n = f.f0_hz.size();
  if (n == 0) throw ValidationError(fmt::format("utterance '{}': no frames", f.utterance_id));
  if (f.mceps.size() != n * kMcepDim) {
    throw ValidationError(fmt::format("utterance '{}': mceps hold {} values ({} frames of {}), f0 has {} frames",
                                      f.utterance_id, f.mceps.size(), f.mceps.size() / kMcepDim, kMcepDim, n));
  }
  if (!(f.frame_period_ms > 0.0) || !std::isfinite(f.frame_period_ms)) {
    throw ValidationError(fmt::format("utterance '{}': frame_period_ms must be > 0, got {}", f.utterance_id,
                                      f.frame_period_ms));
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(f.f0_hz[t]) || f.f0_hz[t] < 0.0f) {
      throw ValidationError(fmt::format("utterance '{}': f0[{}] = {} is not a finite non-negative value",
                                        f.utterance_id, t, f.f0_hz[t]));
    }
  }
  for (std::size_t i = 0; i < f.mceps.size(); ++i) {
    if (!std::isfinite(f.mceps[i])) {
      throw ValidationError(fmt::format("utterance '{}': mcep value at frame {} dim {} is not finite",
                                        f.utterance_id, i / kMcepDim, i % kMcepDim));
    }
  }
}

void write_feature_file(const UtteranceFeatures& f, const std::filesystem::path& path) {
  validate(f);
  binary::Writer w;
  w.put_magic(kUffMagic);
  w.put<std::uint32_t>(kUffVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.frames()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kMcepDim));
  w.put<double>(f.frame_period_ms);
  w.put_string16(f.emotion_label);
  w.put_string16(f.utterance_id);
  for (float v : f.mceps) w.put<float>(v);
  for (float v : f.f0_hz) w.put<float>(v);
  try {
    binary::write_file(path, w.bytes());
  } catch (const IoError& e) {
    throw IoError(fmt::format("write error for feature file '{}': {}", path.string(), e.what()));
  }
}

UtteranceFeatures read_feature_file(const std::filesystem::path& path) {
  binary::Reader r(binary::read_file(path), path.string());
  const std::string magic = r.get_bytes(4);
  if (magic != kUffMagic) {
    throw FormatError(fmt::format("{}: bad magic '{}', expected magic \"{}\"", path.string(), magic, kUffMagic));
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kUffVersion) {
    throw FormatError(fmt::format("{}: unsupported format version {}, expected {}", path.string(), version,
                                  kUffVersion));
  }
  const auto n = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (dim != kMcepDim) {
    throw ValidationError(fmt::format("{}: mcep_dim {} does not match required {}", path.string(), dim, kMcepDim));
  }
  UtteranceFeatures f;
  f.frame_period_ms = r.get<double>();
  f.emotion_label = r.get_string16();
  f.utterance_id = r.get_string16();
  const std::size_t payload = (static_cast<std::size_t>(n) * kMcepDim + n) * sizeof(float);
  if (r.remaining() != payload) {
    throw FormatError(fmt::format("{}: payload size mismatch: expected {} bytes for {} frames, found {}",
                                  path.string(), payload, n, r.remaining()));
  }
  f.mceps.resize(static_cast<std::size_t>(n) * kMcepDim);
  for (auto& v : f.mceps) v = r.get<float>();
  f.f0_hz.resize(n);
  for (auto& v : f.f0_hz) v = r.get<float>();
  validate(f);
  return f;
}

CorpusManifest read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError(fmt::format("cannot open manifest '{}'", manifest_path.string()));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: invalid JSON: {}", manifest_path.string(), e.what()));
  }
  if (!doc.is_array()) throw FormatError(fmt::format("{}: manifest must be a JSON array", manifest_path.string()));
  CorpusManifest manifest;
  const auto base = manifest_path.parent_path();
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    if (!e.is_object() || !e.contains("id") || !e.contains("emotion") || !e.contains("path") ||
        !e["id"].is_string() || !e["emotion"].is_string() || !e["path"].is_string()) {
      throw FormatError(fmt::format("{}: entry {} needs string fields id, emotion, path", manifest_path.string(), i));
    }
    std::filesystem::path p = e["path"].get<std::string>();
    if (p.is_relative()) p = base / p;
    manifest.entries.push_back({e["id"].get<std::string>(), e["emotion"].get<std::string>(), p});
  }
  return manifest;
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& manifest_path) {
  nlohmann::json doc = nlohmann::json::array();
  const auto base = manifest_path.parent_path();
  for (const auto& e : manifest.entries) {
    auto p = e.path;
    if (!base.empty() && p.is_absolute()) p = std::filesystem::relative(p, std::filesystem::absolute(base));
    doc.push_back({{"id", e.utterance_id}, {"emotion", e.emotion_label}, {"path", p.generic_string()}});
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open manifest '{}' for writing", manifest_path.string()));
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("write failure on '{}'", manifest_path.string()));
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
  const CorpusManifest manifest = read_manifest(manifest_path);

  std::set<std::pair<std::string, std::string>> seen;
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries) {
    if (!seen.emplace(e.emotion_label, e.utterance_id).second) {
      throw ValidationError(fmt::format("{}: duplicate utterance_id '{}' for emotion '{}'", manifest_path.string(),
                                        e.utterance_id, e.emotion_label));
    }
    if (!std::filesystem::exists(e.path)) missing.push_back(e.path.string());
  }
  if (!missing.empty()) {
    throw IoError(fmt::format("{}: {} missing feature file(s): {}", manifest_path.string(), missing.size(),
                              fmt::join(missing, ", ")));
  }

  Corpus corpus;
  for (const auto& e : manifest.entries) {
    UtteranceFeatures f = read_feature_file(e.path);
    if (f.utterance_id != e.utterance_id || f.emotion_label != e.emotion_label) {
      throw ValidationError(fmt::format("{}: file '{}' holds ({}, {}) but manifest says ({}, {})",
                                        manifest_path.string(), e.path.string(), f.utterance_id, f.emotion_label,
                                        e.utterance_id, e.emotion_label));
    }
    corpus[e.emotion_label].push_back(std::move(f));
  }
  for (auto& [label, list] : corpus) {
    std::sort(list.begin(), list.end(),
              [](const UtteranceFeatures& a, const UtteranceFeatures& b) { return a.utterance_id < b.utterance_id; });
  }
  return corpus;
}

NonParallelSplit make_nonparallel_split(const Corpus& corpus, const std::string& source_emotion,
                                        const std::string& target_emotion, std::size_t n_train_each,
                                        std::size_t n_eval, std::uint64_t seed) {
  if (source_emotion == target_emotion) {
    throw ValidationError(fmt::format("source and target emotion are both '{}'", source_emotion));
  }
  if (n_train_each == 0) throw ValidationError("n_train_each must be >= 1");
  const auto src_it = corpus.find(source_emotion);
  const auto tgt_it = corpus.find(target_emotion);
  if (src_it == corpus.end()) throw ValidationError(fmt::format("emotion '{}' not in corpus", source_emotion));
  if (tgt_it == corpus.end()) throw ValidationError(fmt::format("emotion '{}' not in corpus", target_emotion));

  const std::size_t needed = 2 * n_train_each + n_eval;
  std::map<std::string, const UtteranceFeatures*> src_by_id, tgt_by_id;
  for (const auto& f : src_it->second) src_by_id[f.utterance_id] = &f;
  for (const auto& f : tgt_it->second) tgt_by_id[f.utterance_id] = &f;
  std::vector<std::string> shared;
  for (const auto& [id, _] : src_by_id)
    if (tgt_by_id.count(id)) shared.push_back(id);

  if (src_by_id.size() < needed || tgt_by_id.size() < needed || shared.size() < needed) {
    throw ValidationError(fmt::format(
        "insufficient utterances for split: need {} (2*{} train + {} eval) per emotion, have {} '{}', {} '{}', "
        "{} shared sentence ids",
        needed, n_train_each, n_eval, src_by_id.size(), source_emotion, tgt_by_id.size(), target_emotion,
        shared.size()));
  }

  if (seed != 0) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = shared.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(shared[i], shared[j]);
    }
  }

  NonParallelSplit split;
  for (std::size_t k = 0; k < n_train_each; ++k) split.source_set.push_back(*src_by_id.at(shared[k]));
  for (std::size_t k = n_train_each; k < 2 * n_train_each; ++k) split.target_set.push_back(*tgt_by_id.at(shared[k]));
  for (std::size_t k = 2 * n_train_each; k < needed; ++k) {
    split.eval_pairs.emplace_back(*src_by_id.at(shared[k]), *tgt_by_id.at(shared[k]));
  }
  return split;
}

}  // namespace prosodia
