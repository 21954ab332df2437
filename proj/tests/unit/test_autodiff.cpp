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

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lce/autodiff/checkpoint.hpp"
#include "lce/autodiff/ops.hpp"
#include "lce/autodiff/param_store.hpp"
#include "lce/common/error.hpp"
#include "support/grad_suite.hpp"

using namespace lce;
using namespace lce::ad;

namespace {

using TD = Tensor<double>;

TD leaf(Shape s, Rng& rng)
{
    auto t = TD::randn(std::move(s), rng);
    t.set_requires_grad(true);
    return t;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("relu, mse and sum of squares basics")
{
    TD x(Shape{2}, std::vector<double>{-1, 2});
    auto r = relu(x);
    CHECK(r.data()[0] == 0);
    CHECK(r.data()[1] == 2);
    CHECK(mse(x, x).item() == 0);

    auto w = TD(Shape{3}, std::vector<double>{1, -2, 3});
    w.set_requires_grad(true);
    sum_squares(w).backward();
    CHECK(w.grad()[0] == 2);
    CHECK(w.grad()[1] == -4);
    CHECK(w.grad()[2] == 6);
}

TEST_CASE("backward on an untracked tensor is a usage error")
{
    TD x(Shape{1}, 1.0);
    CHECK_THROWS_AS(sum(x).backward(), UsageError);
}

TEST_CASE("backward without retain frees the graph; with retain it repeats")
{
    Rng rng(1);
    auto x = leaf({4}, rng);
    auto loss = sum_squares(scale(x, 3.0));
    loss.backward(true);
    std::vector<double> first(x.grad().begin(), x.grad().end());
    x.zero_grad();
    loss.backward(false);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(x.grad()[i] == first[i]);
    CHECK_THROWS_AS(loss.backward(), UsageError);
}

TEST_CASE("conv2d shape arithmetic and identity kernel")
{
    Rng rng(2);
    auto x = TD::randn({2, 16, 64}, rng);
    auto w = TD::randn({32, 2, 3, 3}, rng);
    auto y = conv2d(x, w, TD(), {2, 1});
    CHECK(y.shape() == Shape{32, 8, 32});

    TD id(Shape{2, 2, 1, 1}, std::vector<double>{1, 0, 0, 1});
    auto same = conv2d(x, id, TD());
    for (std::size_t i = 0; i < x.numel(); ++i)
        CHECK(same.data()[i] == x.data()[i]);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d")
{
    Rng rng(3);
    for (int stride : {1, 2}) {
        auto x = TD::randn({2, 3, 8, 16}, rng);
        auto w = TD::randn({5, 3, 3, 3}, rng);
        auto y = conv2d(x, w, TD(), {stride, 1});
        auto v = TD::randn(y.shape(), rng);
        auto xt = conv_transpose2d(v, w, TD(), {stride, 1, stride == 2 ? 1 : 0});
        REQUIRE(xt.shape() == x.shape());
        const double lhs = dot(y.data(), v.data());
        const double rhs = dot(x.data(), xt.data());
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    }
}

TEST_CASE("residual block with zero weights is relu")
{
    Rng rng(4);
    auto x = TD::randn({1, 4, 3, 3}, rng);
    auto y = residual_block(x, TD(Shape{4, 4, 3, 3}, 0.0), TD(Shape{4}, 0.0));
    auto r = relu(x);
    for (std::size_t i = 0; i < x.numel(); ++i)
        CHECK(y.data()[i] == r.data()[i]);
}

TEST_CASE("finite-difference checks of every op")
{
    Rng rng(5);
    for (auto& c : testing::op_grad_cases(rng)) {
        INFO(c.name);
        const auto r = testing::grad_check(c.loss, c.leaves, rng);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("adam drives a quadratic bowl to its minimum")
{
    Rng rng(6);
    ParamStore<double> ps;
    auto& w = ps.add("w", TD::uniform({8}, rng, -1.0, 1.0));
    AdamOptions opt;
    opt.lr = 1e-2;
    for (int i = 0; i < 500; ++i) {
        ps.zero_grad();
        sum_squares(w).backward();
        ps.adam_step(opt);
    }
    double n = 0;
    for (double v : w.data())
        n += v * v;
    CHECK(std::sqrt(n) < 1e-3);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged")
{
    Rng rng(7);
    ParamStore<double> ps;
    auto& w = ps.add("w", TD::randn({4}, rng));
    std::vector<double> before(w.data().begin(), w.data().end());
    w.mutable_grad();
    ps.adam_step({});
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(w.data()[i] == before[i]);
}

TEST_CASE("adam requires gradients")
{
    ParamStore<float> ps;
    ps.add("w", Tensor<float>(Shape{2}, 1.0f));
    CHECK_THROWS_AS(ps.adam_step({}), UsageError);
}

TEST_CASE("checkpoint round trip keeps values and optimizer state")
{
    Rng rng(8);
    ParamStore<float> ps;
    auto& w = ps.add("layer/w", Tensor<float>::randn({3, 2}, rng));
    ps.add("layer/b", Tensor<float>::randn({3}, rng));
    for (auto& n : ps.names())
        ps.get(n).mutable_grad()[0] = 1.0f;
    ps.adam_step({});
    const auto path = (std::filesystem::temp_directory_path() / "lce_ckpt_test.lcew").string();
    save_checkpoint(path, ps, {{"kind", "test"}});

    ParamStore<float> other;
    other.add("layer/w", Tensor<float>(Shape{3, 2}, 0.0f));
    other.add("layer/b", Tensor<float>(Shape{3}, 0.0f));
    const auto meta = load_checkpoint(path, other);
    CHECK(meta.at("kind") == "test");
    CHECK(other.step() == 1);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(other.get("layer/w").data()[i] == w.data()[i]);
    CHECK(other.first_moment("layer/b") == ps.first_moment("layer/b"));
    CHECK(read_checkpoint(path).numel() == 9);

    ParamStore<float> wrong;
    wrong.add("layer/w", Tensor<float>(Shape{2, 3}, 0.0f));
    wrong.add("layer/b", Tensor<float>(Shape{3}, 0.0f));
    CHECK_THROWS_AS(load_checkpoint(path, wrong), IoError);
    std::filesystem::remove(path);
}
