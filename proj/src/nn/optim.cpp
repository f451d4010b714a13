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

#include "prosodia/nn/optim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "prosodia/error.hpp"

namespace prosodia::nn {

void adam_step(ParamStore& params, AdamState& state, double lr) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) throw ValidationError(fmt::format("adam_step: parameter '{}' has no gradient", name));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, param] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) {
      m.assign(param.size(), 0.0);
      v.assign(param.size(), 0.0);
    }
    if (m.size() != param.size()) {
      throw ValidationError(fmt::format("adam_step: moment size {} does not match parameter '{}' ({})", m.size(),
                                        name, param.size()));
    }
    auto values = param.mutable_values();
    const auto grad = param.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      values[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.epsilon);
    }
    param.clear_grad();
  }
}

double finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& params, double h, int n_probe,
                         std::uint64_t seed) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError(fmt::format("finite_diff_check: step h must be > 0, got {}", h));
  if (n_probe < 1) throw ValidationError("finite_diff_check: n_probe must be >= 1");

  params.zero_grad();
  backward(loss_fn());

  std::vector<Tensor*> tensors;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (auto& [name, t] : params) {
    tensors.push_back(&t);
    offsets.push_back(total);
    total += t.size();
  }
  if (total == 0) throw ValidationError("finite_diff_check: empty parameter store");

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int probe = 0; probe < n_probe; ++probe) {
    const std::size_t flat = static_cast<std::size_t>(rng() % total);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    Tensor& t = *tensors[static_cast<std::size_t>(it - offsets.begin())];
    const std::size_t i = flat - *it;

    const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
    auto values = t.mutable_values();
    const double saved = values[i];
    double plus, minus;
    {
      NoGradGuard no_grad;
      values[i] = saved + h;
      plus = loss_fn().item();
      values[i] = saved - h;
      minus = loss_fn().item();
    }
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  params.clear_grad();
  return worst;
}

}  // namespace prosodia::nn
