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

#include "lce/autodiff/ops.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "lce/common/error.hpp"

namespace lce::ad {

namespace {

template <class T>
using NodeT = detail::Node<T>;

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op)
{
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

template <class T>
bool wants_grad(const std::shared_ptr<NodeT<T>>& n)
{
    return n && n->requires_grad;
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "add");
    const auto av = a.data(), bv = b.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] + bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn](NodeT<T>& o) {
        for (const auto& p : {an, bn}) {
            if (!wants_grad<T>(p))
                continue;
            auto& g = p->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += o.grad[i];
        }
    });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "sub");
    const auto av = a.data(), bv = b.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] - bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn](NodeT<T>& o) {
        if (wants_grad<T>(an)) {
            auto& g = an->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += o.grad[i];
        }
        if (wants_grad<T>(bn)) {
            auto& g = bn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] -= o.grad[i];
        }
    });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "mul");
    const auto av = a.data(), bv = b.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] * bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn](NodeT<T>& o) {
        if (wants_grad<T>(an)) {
            auto& g = an->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += o.grad[i] * bn->value[i];
        }
        if (wants_grad<T>(bn)) {
            auto& g = bn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += o.grad[i] * an->value[i];
        }
    });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s)
{
    const auto av = a.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] * s;
    auto an = a.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an}, [an, s](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i] * s;
    });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s)
{
    const auto av = a.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] + s;
    auto an = a.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an}, [an](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i];
    });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a)
{
    const auto av = a.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] > T(0) ? av[i] : T(0);
    auto an = a.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an}, [an](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (an->value[i] > T(0))
                g[i] += o.grad[i];
    });
}

template <class T>
Tensor<T> exp(const Tensor<T>& a)
{
    const auto av = a.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::exp(av[i]);
    auto an = a.node();
    return detail::make_result<T>(a.shape(), out, {an}, [an, out](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i] * out[i];
    });
}

template <class T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi)
{
    if (!(lo <= hi))
        throw DomainError("clamp: lo > hi");
    const auto av = a.data();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(std::max(av[i], lo), hi);
    auto an = a.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an}, [an, lo, hi](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (an->value[i] > lo && an->value[i] < hi)
                g[i] += o.grad[i];
    });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape)
{
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    auto an = a.node();
    Buffer<T> out(a.data().begin(), a.data().end());
    return detail::make_result<T>(std::move(shape), std::move(out), {an}, [an](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i];
    });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a)
{
    T s = 0;
    for (T v : a.data())
        s += v;
    auto an = a.node();
    return detail::make_result<T>(Shape{1}, {s}, {an}, [an](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (auto& x : g)
            x += o.grad[0];
    });
}

template <class T>
Tensor<T> sum_squares(const Tensor<T>& a)
{
    T s = 0;
    for (T v : a.data())
        s += v * v;
    auto an = a.node();
    return detail::make_result<T>(Shape{1}, {s}, {an}, [an](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        const T go = T(2) * o.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += go * an->value[i];
    });
}

template <class T>
Tensor<T> weighted_sum_squares(const Tensor<T>& a, std::span<const T> weights)
{
    const std::size_t n = a.dim(0);
    if (weights.size() != n)
        throw ShapeError("weighted_sum_squares: " + std::to_string(weights.size()) + " weights for batch " +
                         std::to_string(n));
    const std::size_t per = a.numel() / n;
    const auto av = a.data();
    T s = 0;
    for (std::size_t b = 0; b < n; ++b) {
        T part = 0;
        for (std::size_t j = 0; j < per; ++j)
            part += av[b * per + j] * av[b * per + j];
        s += weights[b] * part;
    }
    auto an = a.node();
    std::vector<T> w(weights.begin(), weights.end());
    return detail::make_result<T>(Shape{1}, {s}, {an}, [an, w, per](NodeT<T>& o) {
        auto& g = an->grad_buffer();
        for (std::size_t b = 0; b < w.size(); ++b) {
            const T go = T(2) * w[b] * o.grad[0];
            for (std::size_t j = 0; j < per; ++j)
                g[b * per + j] += go * an->value[b * per + j];
        }
    });
}

template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "mse");
    const auto av = a.data(), bv = b.data();
    const T inv_n = T(1) / static_cast<T>(av.size());
    T s = 0;
    for (std::size_t i = 0; i < av.size(); ++i)
        s += (av[i] - bv[i]) * (av[i] - bv[i]);
    auto an = a.node(), bn = b.node();
    return detail::make_result<T>(Shape{1}, {s * inv_n}, {an, bn}, [an, bn, inv_n](NodeT<T>& o) {
        const T go = T(2) * inv_n * o.grad[0];
        if (wants_grad<T>(an)) {
            auto& g = an->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += go * (an->value[i] - bn->value[i]);
        }
        if (wants_grad<T>(bn)) {
            auto& g = bn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] -= go * (an->value[i] - bn->value[i]);
        }
    });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    Buffer<T> out(static_cast<std::size_t>(m * n));
    Eigen::Map<RowMat<T>>(out.data(), m, n).noalias() =
        Eigen::Map<const RowMat<T>>(a.data().data(), m, k) * Eigen::Map<const RowMat<T>>(b.data().data(), k, n);
    auto an = a.node(), bn = b.node();
    return detail::make_result<T>(Shape{a.dim(0), b.dim(1)}, std::move(out), {an, bn}, [an, bn, m, k, n](NodeT<T>& o) {
        Eigen::Map<const RowMat<T>> go(o.grad.data(), m, n);
        if (wants_grad<T>(an))
            Eigen::Map<RowMat<T>>(an->grad_buffer().data(), m, k).noalias() +=
                go * Eigen::Map<const RowMat<T>>(bn->value.data(), k, n).transpose();
        if (wants_grad<T>(bn))
            Eigen::Map<RowMat<T>>(bn->grad_buffer().data(), k, n).noalias() +=
                Eigen::Map<const RowMat<T>>(an->value.data(), m, k).transpose() * go;
    });
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias)
{
    if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1))
        throw ShapeError("linear: input " + shape_str(x.shape()) + " weight " + shape_str(weight.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))
        throw ShapeError("linear: bias " + shape_str(bias.shape()));
    const auto n = static_cast<Eigen::Index>(x.dim(0));
    const auto in = static_cast<Eigen::Index>(x.dim(1));
    const auto outf = static_cast<Eigen::Index>(weight.dim(0));
    Buffer<T> out(static_cast<std::size_t>(n * outf));
    Eigen::Map<RowMat<T>> y(out.data(), n, outf);
    y.noalias() = Eigen::Map<const RowMat<T>>(x.data().data(), n, in) *
                  Eigen::Map<const RowMat<T>>(weight.data().data(), outf, in).transpose();
    if (bias.defined())
        y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(), outf);
    auto xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr;
    return detail::make_result<T>(Shape{x.dim(0), weight.dim(0)}, std::move(out), {xn, wn, bn},
                                  [xn, wn, bn, n, in, outf](NodeT<T>& o) {
                                      Eigen::Map<const RowMat<T>> go(o.grad.data(), n, outf);
                                      if (wants_grad<T>(xn))
                                          Eigen::Map<RowMat<T>>(xn->grad_buffer().data(), n, in).noalias() +=
                                              go * Eigen::Map<const RowMat<T>>(wn->value.data(), outf, in);
                                      if (wants_grad<T>(wn))
                                          Eigen::Map<RowMat<T>>(wn->grad_buffer().data(), outf, in).noalias() +=
                                              go.transpose() * Eigen::Map<const RowMat<T>>(xn->value.data(), n, in);
                                      if (wants_grad<T>(bn))
                                          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bn->grad_buffer().data(),
                                                                                          outf) += go.colwise().sum();
                                  });
}

template <class T>
Tensor<T> complex_right_multiply(const Tensor<T>& x, const Eigen::MatrixXcd& m)
{
    if (x.rank() != 4 || x.dim(1) != 2 || x.dim(3) != static_cast<std::size_t>(m.rows()))
        throw ShapeError("complex_right_multiply: input " + shape_str(x.shape()) + " with matrix " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    const auto batch = x.dim(0);
    const auto r = static_cast<Eigen::Index>(x.dim(2));
    const auto c = static_cast<Eigen::Index>(x.dim(3));
    const auto k = static_cast<Eigen::Index>(m.cols());
    const RowMat<T> mr = m.real().cast<T>();
    const RowMat<T> mi = m.imag().cast<T>();
    const std::size_t in_plane = static_cast<std::size_t>(r * c);
    const std::size_t out_plane = static_cast<std::size_t>(r * k);
    Buffer<T> out(batch * 2 * out_plane);
    const T* xv = x.data().data();
    for (std::size_t b = 0; b < batch; ++b) {
        Eigen::Map<const RowMat<T>> xr(xv + b * 2 * in_plane, r, c);
        Eigen::Map<const RowMat<T>> xi(xv + b * 2 * in_plane + in_plane, r, c);
        Eigen::Map<RowMat<T>> yr(out.data() + b * 2 * out_plane, r, k);
        Eigen::Map<RowMat<T>> yi(out.data() + b * 2 * out_plane + out_plane, r, k);
        yr.noalias() = xr * mr;
        yr.noalias() -= xi * mi;
        yi.noalias() = xr * mi;
        yi.noalias() += xi * mr;
    }
    auto xn = x.node();
    return detail::make_result<T>(Shape{batch, 2, x.dim(2), static_cast<std::size_t>(k)}, std::move(out), {xn},
                                  [xn, mr, mi, batch, r, c, k, in_plane, out_plane](NodeT<T>& o) {
                                      auto& g = xn->grad_buffer();
                                      for (std::size_t b = 0; b < batch; ++b) {
                                          Eigen::Map<const RowMat<T>> gr(o.grad.data() + b * 2 * out_plane, r, k);
                                          Eigen::Map<const RowMat<T>> gi(o.grad.data() + b * 2 * out_plane + out_plane,
                                                                         r, k);
                                          Eigen::Map<RowMat<T>> dr(g.data() + b * 2 * in_plane, r, c);
                                          Eigen::Map<RowMat<T>> di(g.data() + b * 2 * in_plane + in_plane, r, c);
                                          // G m^H split into real and imaginary planes.
                                          dr.noalias() += gr * mr.transpose();
                                          dr.noalias() += gi * mi.transpose();
                                          di.noalias() += gi * mr.transpose();
                                          di.noalias() -= gr * mi.transpose();
                                      }
                                  });
}

template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b)
{
    if (x.rank() != 4 || b.rank() != 2 || b.dim(0) != x.dim(0) || b.dim(1) != x.dim(1))
        throw ShapeError("add_channel_bias: input " + shape_str(x.shape()) + " bias " + shape_str(b.shape()));
    const std::size_t nc = x.dim(0) * x.dim(1);
    const std::size_t plane = x.dim(2) * x.dim(3);
    const auto xv = x.data(), bv = b.data();
    Buffer<T> out(xv.size());
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = 0; j < plane; ++j)
            out[i * plane + j] = xv[i * plane + j] + bv[i];
    auto xn = x.node(), bn = b.node();
    return detail::make_result<T>(x.shape(), std::move(out), {xn, bn}, [xn, bn, nc, plane](NodeT<T>& o) {
        if (wants_grad<T>(xn)) {
            auto& g = xn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += o.grad[i];
        }
        if (wants_grad<T>(bn)) {
            auto& g = bn->grad_buffer();
            for (std::size_t i = 0; i < nc; ++i) {
                T s = 0;
                for (std::size_t j = 0; j < plane; ++j)
                    s += o.grad[i * plane + j];
                g[i] += s;
            }
        }
    });
}

template <class T>
Tensor<T> residual_block(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias)
{
    return relu(add(x, conv2d(x, weight, bias, Conv2dOptions{1, 1})));
}

#define LCE_INSTANTIATE_OPS(T)                                                                        \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> scale(const Tensor<T>&, T);                                                    \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                               \
    template Tensor<T> relu(const Tensor<T>&);                                                        \
    template Tensor<T> exp(const Tensor<T>&);                                                         \
    template Tensor<T> clamp(const Tensor<T>&, T, T);                                                 \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                              \
    template Tensor<T> sum(const Tensor<T>&);                                                         \
    template Tensor<T> sum_squares(const Tensor<T>&);                                                 \
    template Tensor<T> weighted_sum_squares(const Tensor<T>&, std::span<const T>);                    \
    template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
    template Tensor<T> complex_right_multiply(const Tensor<T>&, const Eigen::MatrixXcd&);             \
    template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                          \
    template Tensor<T> residual_block(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

LCE_INSTANTIATE_OPS(float)
LCE_INSTANTIATE_OPS(double)

}  // namespace lce::ad
