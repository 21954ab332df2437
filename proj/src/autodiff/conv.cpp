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

// 2-D convolution via im2col + one GEMM over the whole batch.
//
// The column matrix is (C*k*k, N*Ho*Wo), row-major. Its columns are ordered
// sample-major so the GEMM result (O, N*Ho*Wo) needs a single transpose of
// the (O, N) block structure to become NCHW.

#include <Eigen/Dense>

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"

namespace lce::ad {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Geom {
    std::size_t n, c, h, w;  // input
    std::size_t k, s, p;
    std::size_t ho, wo;      // output of the forward conv
    std::size_t rows() const { return c * k * k; }
    std::size_t cols() const { return n * ho * wo; }
};

// in (N, C, H, W) -> cols (C*k*k, N*Ho*Wo)
template <class T>
void im2col(const T* in, const Geom& g, T* cols)
{
    const std::size_t ncols = g.cols();
    const std::size_t plane = g.ho * g.wo;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ki = 0; ki < g.k; ++ki)
            for (std::size_t kj = 0; kj < g.k; ++kj) {
                T* row = cols + ((c * g.k + ki) * g.k + kj) * ncols;
                for (std::size_t b = 0; b < g.n; ++b) {
                    const T* src = in + (b * g.c + c) * g.h * g.w;
                    T* dst = row + b * plane;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const auto ih = static_cast<std::ptrdiff_t>(oh * g.s + ki) - static_cast<std::ptrdiff_t>(g.p);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
                            std::fill(dst + oh * g.wo, dst + (oh + 1) * g.wo, T(0));
                            continue;
                        }
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const auto iw =
                                static_cast<std::ptrdiff_t>(ow * g.s + kj) - static_cast<std::ptrdiff_t>(g.p);
                            dst[oh * g.wo + ow] =
                                (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) ? T(0) : src[ih * g.w + iw];
                        }
                    }
                }
            }
}

// Adjoint of im2col: accumulates cols into out (N, C, H, W).
template <class T>
void col2im(const T* cols, const Geom& g, T* out)
{
    const std::size_t ncols = g.cols();
    const std::size_t plane = g.ho * g.wo;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ki = 0; ki < g.k; ++ki)
            for (std::size_t kj = 0; kj < g.k; ++kj) {
                const T* row = cols + ((c * g.k + ki) * g.k + kj) * ncols;
                for (std::size_t b = 0; b < g.n; ++b) {
                    T* dst = out + (b * g.c + c) * g.h * g.w;
                    const T* src = row + b * plane;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const auto ih = static_cast<std::ptrdiff_t>(oh * g.s + ki) - static_cast<std::ptrdiff_t>(g.p);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h))
                            continue;
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const auto iw =
                                static_cast<std::ptrdiff_t>(ow * g.s + kj) - static_cast<std::ptrdiff_t>(g.p);
                            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.w))
                                dst[ih * g.w + iw] += src[oh * g.wo + ow];
                        }
                    }
                }
            }
}

// (C, N*P) <-> (N, C, P)
template <class T>
void cn_to_nc(const T* src, std::size_t c, std::size_t n, std::size_t p, T* dst)
{
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t b = 0; b < n; ++b)
            std::copy_n(src + (ci * n + b) * p, p, dst + (b * c + ci) * p);
}

template <class T>
void nc_to_cn(const T* src, std::size_t n, std::size_t c, std::size_t p, T* dst)
{
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci)
            std::copy_n(src + (b * c + ci) * p, p, dst + (ci * n + b) * p);
}

template <class T>
Tensor<T> as_batched(const Tensor<T>& x, const char* op)
{
    if (x.rank() == 4)
        return x;
    if (x.rank() == 3)
        return reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)});
    throw ShapeError(std::string(op) + ": expected rank 3 or 4 input, got " + shape_str(x.shape()));
}

template <class T>
Tensor<T> unbatch_like(const Tensor<T>& y, const Tensor<T>& x)
{
    if (x.rank() == 4)
        return y;
    return reshape(y, Shape{y.dim(1), y.dim(2), y.dim(3)});
}

template <class T>
void check_bias(const Tensor<T>& bias, std::size_t channels, const char* op)
{
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels))
        throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape()) + " for " +
                         std::to_string(channels) + " channels");
}

template <class T>
void add_bias_nc(T* y, const T* bias, std::size_t n, std::size_t c, std::size_t p)
{
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci) {
            T* dst = y + (b * c + ci) * p;
            for (std::size_t j = 0; j < p; ++j)
                dst[j] += bias[ci];
        }
}

template <class T>
void bias_grad_nc(const T* g, std::size_t n, std::size_t c, std::size_t p, T* out)
{
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const T* src = g + (b * c + ci) * p;
            T s = 0;
            for (std::size_t j = 0; j < p; ++j)
                s += src[j];
            out[ci] += s;
        }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dOptions opt)
{
    const Tensor<T> x = as_batched(input, "conv2d");
    if (weight.rank() != 4 || weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3))
        throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " for input " + shape_str(x.shape()));
    if (opt.stride < 1 || opt.padding < 0)
        throw DomainError("conv2d: stride must be >= 1 and padding >= 0");
    Geom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(2),
           static_cast<std::size_t>(opt.stride), static_cast<std::size_t>(opt.padding), 0, 0};
    if (g.h + 2 * g.p < g.k || g.w + 2 * g.p < g.k)
        throw ShapeError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
    g.ho = (g.h + 2 * g.p - g.k) / g.s + 1;
    g.wo = (g.w + 2 * g.p - g.k) / g.s + 1;
    const std::size_t o = weight.dim(0);
    check_bias(bias, o, "conv2d");

    const auto rows = static_cast<Eigen::Index>(g.rows());
    const auto ncols = static_cast<Eigen::Index>(g.cols());
    auto cols = std::make_shared<std::vector<T>>(g.rows() * g.cols());
    im2col(x.data().data(), g, cols->data());

    RowMat<T> y_cn(static_cast<Eigen::Index>(o), ncols);
    y_cn.noalias() = Eigen::Map<const RowMat<T>>(weight.data().data(), static_cast<Eigen::Index>(o), rows) *
                     Eigen::Map<const RowMat<T>>(cols->data(), rows, ncols);
    const std::size_t plane = g.ho * g.wo;
    Buffer<T> out(g.n * o * plane);
    cn_to_nc(y_cn.data(), o, g.n, plane, out.data());
    if (bias.defined())
        add_bias_nc(out.data(), bias.data().data(), g.n, o, plane);

    auto xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr;
    auto y = detail::make_result<T>(
        Shape{g.n, o, g.ho, g.wo}, std::move(out), {xn, wn, bn},
        [xn, wn, bn, g, o, cols, rows, ncols, plane](detail::Node<T>& node) {
            RowMat<T> g_cn(static_cast<Eigen::Index>(o), ncols);
            nc_to_cn(node.grad.data(), g.n, o, plane, g_cn.data());
            if (wn && wn->requires_grad)
                Eigen::Map<RowMat<T>>(wn->grad_buffer().data(), static_cast<Eigen::Index>(o), rows).noalias() +=
                    g_cn * Eigen::Map<const RowMat<T>>(cols->data(), rows, ncols).transpose();
            if (bn && bn->requires_grad)
                bias_grad_nc(node.grad.data(), g.n, o, plane, bn->grad_buffer().data());
            if (xn && xn->requires_grad) {
                RowMat<T> dcols(rows, ncols);
                dcols.noalias() =
                    Eigen::Map<const RowMat<T>>(wn->value.data(), static_cast<Eigen::Index>(o), rows).transpose() *
                    g_cn;
                col2im(dcols.data(), g, xn->grad_buffer().data());
            }
        });
    return unbatch_like(y, input);
}

template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           ConvTranspose2dOptions opt)
{
    const Tensor<T> x = as_batched(input, "conv_transpose2d");
    if (weight.rank() != 4 || weight.dim(0) != x.dim(1) || weight.dim(2) != weight.dim(3))
        throw ShapeError("conv_transpose2d: weight " + shape_str(weight.shape()) + " for input " +
                         shape_str(x.shape()));
    if (opt.stride < 1 || opt.padding < 0 || opt.output_padding < 0 || opt.output_padding >= opt.stride)
        throw DomainError("conv_transpose2d: need stride >= 1, padding >= 0, 0 <= output_padding < stride");
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cout = weight.dim(1), k = weight.dim(2);
    const auto s = static_cast<std::size_t>(opt.stride), p = static_cast<std::size_t>(opt.padding);
    const auto op = static_cast<std::size_t>(opt.output_padding);
    if ((h - 1) * s + k + op <= 2 * p || (w - 1) * s + k + op <= 2 * p)
        throw ShapeError("conv_transpose2d: empty output for input " + shape_str(x.shape()));
    const std::size_t ho = (h - 1) * s + k + op - 2 * p;
    const std::size_t wo = (w - 1) * s + k + op - 2 * p;
    check_bias(bias, cout, "conv_transpose2d");

    // Geometry of the forward conv that maps (ho, wo) back to (h, w).
    const Geom g{n, cout, ho, wo, k, s, p, h, w};
    const auto rows = static_cast<Eigen::Index>(g.rows());
    const auto ncols = static_cast<Eigen::Index>(g.cols());
    const auto ci = static_cast<Eigen::Index>(cin);
    const std::size_t in_plane = h * w, out_plane = ho * wo;

    auto x_cn = std::make_shared<RowMat<T>>(ci, ncols);
    nc_to_cn(x.data().data(), n, cin, in_plane, x_cn->data());
    RowMat<T> cols(rows, ncols);
    cols.noalias() = Eigen::Map<const RowMat<T>>(weight.data().data(), ci, rows).transpose() * *x_cn;
    Buffer<T> out(n * cout * out_plane, T(0));
    col2im(cols.data(), g, out.data());
    if (bias.defined())
        add_bias_nc(out.data(), bias.data().data(), n, cout, out_plane);

    auto xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr;
    auto y = detail::make_result<T>(
        Shape{n, cout, ho, wo}, std::move(out), {xn, wn, bn},
        [xn, wn, bn, g, x_cn, rows, ncols, ci, in_plane, out_plane](detail::Node<T>& node) {
            if (bn && bn->requires_grad)
                bias_grad_nc(node.grad.data(), g.n, g.c, out_plane, bn->grad_buffer().data());
            const bool need_x = xn && xn->requires_grad, need_w = wn && wn->requires_grad;
            if (!need_x && !need_w)
                return;
            RowMat<T> gcols(rows, ncols);
            im2col(node.grad.data(), g, gcols.data());
            if (need_w)
                Eigen::Map<RowMat<T>>(wn->grad_buffer().data(), ci, rows).noalias() += *x_cn * gcols.transpose();
            if (need_x) {
                RowMat<T> dx_cn(ci, ncols);
                dx_cn.noalias() = Eigen::Map<const RowMat<T>>(wn->value.data(), ci, rows) * gcols;
                Buffer<T> dx(g.n * static_cast<std::size_t>(ci) * in_plane);
                cn_to_nc(dx_cn.data(), static_cast<std::size_t>(ci), g.n, in_plane, dx.data());
                auto& gx = xn->grad_buffer();
                for (std::size_t i = 0; i < dx.size(); ++i)
                    gx[i] += dx[i];
            }
        });
    return unbatch_like(y, input);
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, Conv2dOptions);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, Conv2dOptions);
template Tensor<float> conv_transpose2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                       ConvTranspose2dOptions);
template Tensor<double> conv_transpose2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                         ConvTranspose2dOptions);

}  // namespace lce::ad
