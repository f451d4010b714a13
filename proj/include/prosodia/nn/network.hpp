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

// Generator / discriminator definitions, parameter stores and PRM1
// checkpoints.
//
// Generator (1-D, length preserving):
//   conv(k0) -> IN -> GLU                              base channels
//   n_downsample x [conv(k1, stride 2) -> IN -> GLU]   2*base
//   n_residual  x [conv(k2) -> IN -> GLU -> conv(k2) -> IN, + skip]
//   n_upsample  x [nearest x2 -> conv(k3) -> IN -> GLU]  last stage back to base
//   conv(k4) to in_channels
//
// Discriminator (2-D patch critic over a 1 x features x frames map):
//   (n_downsample - 1) x [conv(k, stride 2) -> IN -> leaky 0.2], channels
//   base, 2*base, 4*base, ... then conv(k, stride 2) to one score channel.

#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "prosodia/nn/tensor.hpp"

namespace prosodia::nn {

enum class NetworkKind { kGenerator1d, kDiscriminator2d };

struct NetworkConfig {
  NetworkKind kind = NetworkKind::kGenerator1d;
  /// Generator: feature channels. Discriminator: feature rows of the 2-D map.
  std::size_t in_channels = 24;
  std::size_t base_channels = 32;
  std::size_t n_downsample = 2;
  std::size_t n_residual = 4;
  std::size_t n_upsample = 2;
  /// Generator: {input, down, residual, up, output}. Discriminator: {k}.
  std::vector<std::size_t> kernel_sizes = {15, 5, 3, 5, 15};

  static NetworkConfig generator(std::size_t channels, std::size_t base = 32);
  static NetworkConfig discriminator(std::size_t feature_rows, std::size_t base = 32);

  void validate() const;
  /// Frame counts fed to a generator must be a positive multiple of this.
  std::size_t frame_multiple() const { return std::size_t{1} << n_downsample; }

  bool operator==(const NetworkConfig&) const = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// Named parameters in deterministic (lexicographic) order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  void add(const std::string& name, Tensor param);
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;
  std::uint64_t rng_seed() const { return rng_seed_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  void clear_grad();
  /// Deep copy; the copy shares no nodes with this store.
  ParamStore clone() const;
  /// Bitwise equality of names, shapes and values.
  bool same_values(const ParamStore& other) const;

 private:
  std::map<std::string, Tensor> params_;
  std::uint64_t rng_seed_;
};

/// Zero-mean normal weights with variance 1/fan_in. Normalized layers carry
/// unit IN gains and no bias; the output layers have zero biases.
ParamStore init_params(const NetworkConfig& config, std::uint64_t seed);

/// input [channels, frames] -> [channels, frames].
Tensor forward_generator(const ParamStore& params, const NetworkConfig& config, const Tensor& input);

/// input [1, features, frames] -> [1, rows, cols] patch scores (no link function).
Tensor forward_discriminator(const ParamStore& params, const NetworkConfig& config, const Tensor& input);

/// PRM1: "PRM1" | u32 count | per parameter: u16 len + name | u32 rank |
/// rank x u32 dims | f64 payload.
void save_params(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_params(const std::filesystem::path& path);

}  // namespace prosodia::nn
