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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "prosodia/nn/network.hpp"

namespace prosodia::nn {

struct AdamState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every parameter in `params`, then clears
/// their gradients. Throws ValidationError if any parameter has no gradient.
void adam_step(ParamStore& params, AdamState& state, double lr);

/// Worst relative error between analytic gradients and central differences
/// over `n_probe` randomly chosen coordinates; the denominator is
/// max(|analytic|, |numeric|, 1e-12). `loss_fn` must rebuild the loss from the
/// current parameter values on every call.
double finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& params, double h, int n_probe,
                         std::uint64_t seed);

}  // namespace prosodia::nn
