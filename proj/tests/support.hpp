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


#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "prosodia/binary_io.hpp"
#include "prosodia/feature_io.hpp"

namespace prosodia::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("prosodia-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random valid utterance; every fifth frame unvoiced.
inline UtteranceFeatures random_utterance(std::size_t frames, std::uint64_t seed, std::string id = "u0",
                                          std::string emotion = "neutral") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::uniform_real_distribution<float> pitch(90.0f, 300.0f);
  UtteranceFeatures u;
  u.utterance_id = std::move(id);
  u.emotion_label = std::move(emotion);
  u.frame_period_ms = 5.0;
  u.mceps.resize(frames * kMcepDim);
  for (auto& v : u.mceps) v = gauss(rng);
  u.f0_hz.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) u.f0_hz[t] = (t % 5 == 4) ? 0.0f : pitch(rng);
  return u;
}

/// True when both files hold identical bytes.
inline bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return binary::read_file(a) == binary::read_file(b);
}

}  // namespace prosodia::test
