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

#include "prosodia/nn/network.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "prosodia/binary_io.hpp"
#include "prosodia/error.hpp"
#include "prosodia/nn/ops.hpp"

namespace prosodia::nn {

namespace {

constexpr char kPrmMagic[] = "PRM1";
constexpr double kLeakySlope = 0.2;

class Initializer {
 public:
  Initializer(ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  // Conv weight [cout, cin, k...] with N(0, 1/fan_in). A normalized layer gets
  // unit gain and zero shift instead of a bias, which the norm would cancel.
  void conv(const std::string& name, Shape weight_shape, bool with_norm) {
    const std::size_t cout = weight_shape[0];
    const std::size_t fan_in = shape_size(weight_shape) / cout;
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    std::vector<double> w(shape_size(weight_shape));
    for (auto& v : w) v = normal(rng_);
    store_.add(name + ".w", Tensor::parameter(std::move(weight_shape), std::move(w)));
    if (with_norm) {
      store_.add(name + ".gamma", Tensor::parameter({cout}, std::vector<double>(cout, 1.0)));
      store_.add(name + ".beta", Tensor::parameter({cout}, std::vector<double>(cout, 0.0)));
    } else {
      store_.add(name + ".b", Tensor::parameter({cout}, std::vector<double>(cout, 0.0)));
    }
  }

 private:
  ParamStore& store_;
  std::mt19937_64 rng_;
};

struct GeneratorLayout {
  std::size_t mid;  // channel width below the input layer
};

GeneratorLayout generator_layout(const NetworkConfig& c) {
  return {c.n_downsample == 0 ? c.base_channels : 2 * c.base_channels};
}

Tensor conv_norm_glu(const ParamStore& p, const std::string& name, const Tensor& x, std::size_t stride) {
  const Tensor& w = p.at(name + ".w");
  const std::size_t k = w.dim(2);
  Tensor h = conv1d(x, w, Tensor::zeros({w.dim(0)}), stride, k / 2);
  h = instance_norm(h, p.at(name + ".gamma"), p.at(name + ".beta"));
  return glu(h);
}

}  // namespace

NetworkConfig NetworkConfig::generator(std::size_t channels, std::size_t base) {
  NetworkConfig c;
  c.kind = NetworkKind::kGenerator1d;
  c.in_channels = channels;
  c.base_channels = base;
  return c;
}

NetworkConfig NetworkConfig::discriminator(std::size_t feature_rows, std::size_t base) {
  NetworkConfig c;
  c.kind = NetworkKind::kDiscriminator2d;
  c.in_channels = feature_rows;
  c.base_channels = base;
  c.n_downsample = 4;
  c.n_residual = 0;
  c.n_upsample = 0;
  c.kernel_sizes = {3};
  return c;
}

void NetworkConfig::validate() const {
  if (in_channels < 1) throw ValidationError("network in_channels must be >= 1");
  if (base_channels < 1) throw ValidationError("network base_channels must be >= 1");
  for (auto k : kernel_sizes) {
    if (k == 0 || k % 2 == 0) throw ValidationError(fmt::format("kernel sizes must be odd and positive, got {}", k));
  }
  if (kind == NetworkKind::kGenerator1d) {
    if (n_downsample != n_upsample) {
      throw ValidationError(fmt::format("generator needs n_downsample == n_upsample to preserve length, got {} / {}",
                                        n_downsample, n_upsample));
    }
    if (kernel_sizes.size() != 5) {
      throw ValidationError(fmt::format("generator needs 5 kernel sizes, got {}", kernel_sizes.size()));
    }
  } else {
    if (n_downsample < 1) throw ValidationError("discriminator needs at least one strided layer");
    if (kernel_sizes.size() != 1) {
      throw ValidationError(fmt::format("discriminator needs 1 kernel size, got {}", kernel_sizes.size()));
    }
  }
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"kind", c.kind == NetworkKind::kGenerator1d ? "generator-1d" : "discriminator-2d"},
       {"in_channels", c.in_channels},
       {"base_channels", c.base_channels},
       {"n_downsample", c.n_downsample},
       {"n_residual", c.n_residual},
       {"n_upsample", c.n_upsample},
       {"kernel_sizes", c.kernel_sizes}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "generator-1d") {
    c = NetworkConfig::generator(j.at("in_channels").get<std::size_t>());
  } else if (kind == "discriminator-2d") {
    c = NetworkConfig::discriminator(j.at("in_channels").get<std::size_t>());
  } else {
    throw ValidationError(fmt::format("unknown network kind '{}'", kind));
  }
  c.base_channels = j.value("base_channels", c.base_channels);
  c.n_downsample = j.value("n_downsample", c.n_downsample);
  c.n_residual = j.value("n_residual", c.n_residual);
  c.n_upsample = j.value("n_upsample", c.n_upsample);
  c.kernel_sizes = j.value("kernel_sizes", c.kernel_sizes);
}

void ParamStore::add(const std::string& name, Tensor param) {
  if (!params_.emplace(name, std::move(param)).second) {
    throw ValidationError(fmt::format("parameter '{}' already exists", name));
  }
}

const Tensor& ParamStore::at(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError(fmt::format("missing parameter '{}'", name));
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  const auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError(fmt::format("missing parameter '{}'", name));
  return it->second;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void ParamStore::clear_grad() {
  for (auto& [_, t] : params_) t.clear_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore copy(rng_seed_);
  for (const auto& [name, t] : params_) copy.params_.emplace(name, t.clone());
  return copy;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
    const auto va = a->second.values(), vb = b->second.values();
    if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

ParamStore init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  ParamStore store(seed);
  Initializer init(store, seed);
  const std::size_t b = config.base_channels;

  if (config.kind == NetworkKind::kGenerator1d) {
    const auto& k = config.kernel_sizes;
    const std::size_t mid = generator_layout(config).mid;
    init.conv("g.in", {2 * b, config.in_channels, k[0]}, true);
    std::size_t ch = b;
    for (std::size_t d = 1; d <= config.n_downsample; ++d) {
      init.conv(fmt::format("g.down{}", d), {2 * mid, ch, k[1]}, true);
      ch = mid;
    }
    for (std::size_t r = 1; r <= config.n_residual; ++r) {
      init.conv(fmt::format("g.res{}.a", r), {2 * ch, ch, k[2]}, true);
      init.conv(fmt::format("g.res{}.b", r), {ch, ch, k[2]}, true);
    }
    for (std::size_t u = 1; u <= config.n_upsample; ++u) {
      const std::size_t out = u == config.n_upsample ? b : mid;
      init.conv(fmt::format("g.up{}", u), {2 * out, ch, k[3]}, true);
      ch = out;
    }
    init.conv("g.out", {config.in_channels, ch, k[4]}, false);
  } else {
    const std::size_t k = config.kernel_sizes[0];
    std::size_t ch = 1;
    for (std::size_t l = 1; l < config.n_downsample; ++l) {
      const std::size_t out = b << (l - 1);
      init.conv(fmt::format("d.conv{}", l), {out, ch, k, k}, true);
      ch = out;
    }
    init.conv("d.out", {1, ch, k, k}, false);
  }
  return store;
}

Tensor forward_generator(const ParamStore& p, const NetworkConfig& config, const Tensor& input) {
  if (config.kind != NetworkKind::kGenerator1d) throw ValidationError("forward_generator on a discriminator config");
  if (input.rank() != 2 || input.dim(0) != config.in_channels) {
    throw ValidationError(fmt::format("generator expects [{}, frames], got {}", config.in_channels,
                                      shape_string(input.shape())));
  }
  if (input.dim(1) % config.frame_multiple() != 0) {
    throw ValidationError(fmt::format("generator frame count {} is not a multiple of {}", input.dim(1),
                                      config.frame_multiple()));
  }
  Tensor h = conv_norm_glu(p, "g.in", input, 1);
  for (std::size_t d = 1; d <= config.n_downsample; ++d) h = conv_norm_glu(p, fmt::format("g.down{}", d), h, 2);
  for (std::size_t r = 1; r <= config.n_residual; ++r) {
    const std::string a = fmt::format("g.res{}.a", r), b = fmt::format("g.res{}.b", r);
    Tensor t = conv_norm_glu(p, a, h, 1);
    const Tensor& wb = p.at(b + ".w");
    t = conv1d(t, wb, Tensor::zeros({wb.dim(0)}), 1, wb.dim(2) / 2);
    t = instance_norm(t, p.at(b + ".gamma"), p.at(b + ".beta"));
    h = add(h, t);
  }
  for (std::size_t u = 1; u <= config.n_upsample; ++u) {
    h = upsample_nearest1d(h, 2);
    h = conv_norm_glu(p, fmt::format("g.up{}", u), h, 1);
  }
  const Tensor& wo = p.at("g.out.w");
  return conv1d(h, wo, p.at("g.out.b"), 1, wo.dim(2) / 2);
}

Tensor forward_discriminator(const ParamStore& p, const NetworkConfig& config, const Tensor& input) {
  if (config.kind != NetworkKind::kDiscriminator2d) {
    throw ValidationError("forward_discriminator on a generator config");
  }
  if (input.rank() != 3 || input.dim(0) != 1 || input.dim(1) != config.in_channels) {
    throw ValidationError(fmt::format("discriminator expects [1, {}, frames], got {}", config.in_channels,
                                      shape_string(input.shape())));
  }
  Tensor h = input;
  for (std::size_t l = 1; l < config.n_downsample; ++l) {
    const std::string name = fmt::format("d.conv{}", l);
    const Tensor& w = p.at(name + ".w");
    h = conv2d(h, w, Tensor::zeros({w.dim(0)}), 2, w.dim(2) / 2);
    h = instance_norm(h, p.at(name + ".gamma"), p.at(name + ".beta"));
    h = leaky_relu(h, kLeakySlope);
  }
  const Tensor& wo = p.at("d.out.w");
  return conv2d(h, wo, p.at("d.out.b"), 2, wo.dim(2) / 2);
}

void save_params(const ParamStore& params, const std::filesystem::path& path) {
  binary::Writer w;
  w.put_magic(kPrmMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put_string16(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.put<double>(v);
  }
  binary::write_file(path, w.bytes());
}

ParamStore load_params(const std::filesystem::path& path) {
  binary::Reader r(binary::read_file(path), path.string());
  const std::string magic = r.get_bytes(4);
  if (magic != kPrmMagic) {
    throw FormatError(fmt::format("{}: bad magic '{}', expected magic \"{}\"", path.string(), magic, kPrmMagic));
  }
  const auto count = r.get<std::uint32_t>();
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string16();
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError(fmt::format("{}: parameter '{}' has rank {}", path.string(), name, rank));
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    const std::size_t n = shape_size(shape);
    r.require(n * sizeof(double));
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>();
    store.add(name, Tensor::parameter(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) {
    throw FormatError(fmt::format("{}: {} trailing bytes after {} parameters", path.string(), r.remaining(), count));
  }
  return store;
}

}  // namespace prosodia::nn
