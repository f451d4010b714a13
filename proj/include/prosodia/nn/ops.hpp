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

// Differentiable ops. Every op throws NumericError if its output holds a
// NaN/Inf and ValidationError on shape mismatch.

#pragma once

#include "prosodia/nn/tensor.hpp"

namespace prosodia::nn {

/// x [Cin, L], w [Cout, Cin, K], b [Cout] -> [Cout, (L + 2 pad - K) / stride + 1].
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);

/// x [Cin, H, W], w [Cout, Cin, KH, KW], b [Cout]; same stride/pad on both axes.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);

/// Per-channel standardization over all non-channel axes, then gamma * x + beta.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Gated linear unit over channel halves: x[:C] * sigmoid(x[C:]).
Tensor glu(const Tensor& x);

Tensor leaky_relu(const Tensor& x, double slope);

/// Nearest-neighbour repetition along the last axis of a [C, L] tensor.
Tensor upsample_nearest1d(const Tensor& x, std::size_t factor);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor reshape(const Tensor& x, Shape shape);

/// a [M, K] x b [K, N] -> [M, N]; a 1-D b is treated as [K, 1].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// mean((x - target)^2) with a constant target.
Tensor mean_squared_offset(const Tensor& x, double target);
/// mean(|a - b|); subgradient 0 where a == b.
Tensor mean_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace prosodia::nn
