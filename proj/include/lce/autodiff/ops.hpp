// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The lce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>

#include <Eigen/Core>

#include "lce/autodiff/tensor.hpp"

// Differentiable operations. No broadcasting beyond the explicit bias forms
// (`linear`, the conv biases, `add_channel_bias`) and scalar arithmetic.
namespace lce::ad {

// -- elementwise -------------------------------------------------------------

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T s);
template <class T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <class T> Tensor<T> relu(const Tensor<T>& a);
template <class T> Tensor<T> exp(const Tensor<T>& a);
/// Clamps to [lo, hi]; gradient is zero where the clamp is active.
template <class T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <class T> Tensor<T> operator*(T s, const Tensor<T>& a) { return scale(a, s); }

// -- shape -------------------------------------------------------------------

template <class T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// -- reductions (scalar outputs of shape (1)) ----------------------------------

template <class T> Tensor<T> sum(const Tensor<T>& a);
/// Sum of squared entries.
template <class T> Tensor<T> sum_squares(const Tensor<T>& a);
/// Sum over the leading (batch) axis of w[n] * ||a[n]||^2.
template <class T> Tensor<T> weighted_sum_squares(const Tensor<T>& a, std::span<const T> weights);
/// Mean squared difference.
template <class T> Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);

// -- linear algebra ------------------------------------------------------------

/// (m, k) x (k, n) -> (m, n).
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// x (N, in), weight (out, in), bias (out) -> x W^T + b.
template <class T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Right-multiplies every complex plane pair of x (N, 2, R, C) -- channel 0
/// real, channel 1 imaginary -- by the constant complex matrix m (C, K).
/// Output (N, 2, R, K). The backward pass applies m^H.
template <class T> Tensor<T> complex_right_multiply(const Tensor<T>& x, const Eigen::MatrixXcd& m);

// -- convolution ---------------------------------------------------------------

struct Conv2dOptions {
    int stride = 1;
    int padding = 0;
};

struct ConvTranspose2dOptions {
    int stride = 1;
    int padding = 0;
    int output_padding = 0;
};

/// Cross-correlation. x (N, C, H, W) or (C, H, W); weight (O, C, k, k);
/// bias (O) or undefined. Output spatial dims floor((H + 2p - k) / s) + 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dOptions opt = {});

/// Adjoint of conv2d in x. x (N, Cin, H, W) or (Cin, H, W); weight
/// (Cin, Cout, k, k); bias (Cout) or undefined. Output spatial dims
/// (H - 1) s - 2p + k + output_padding.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           ConvTranspose2dOptions opt = {});

/// x (N, C, H, W) plus a per-sample, per-channel bias b (N, C).
template <class T> Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b);

/// relu(x + conv3x3(x)) with stride 1 and padding 1.
template <class T>
Tensor<T> residual_block(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

}  // namespace lce::ad
