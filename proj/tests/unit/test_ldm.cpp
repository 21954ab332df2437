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

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/ldm/ldm.hpp"
#include "support/gradcheck.hpp"

using namespace lce;
using namespace lce::ldm;
using ad::Shape;
using ad::Tensor;

namespace {

DenoiserConfig small_cfg()
{
    DenoiserConfig c;
    c.latent_h = 2;
    c.latent_w = 8;
    c.set_steps(200);
    return c;
}

}  // namespace

TEST_CASE("schedule identities")
{
    const auto s = make_schedule(1000, 1e-4, 0.02);
    double prod = 1;
    for (int t = 1; t <= 1000; ++t)
        prod *= 1 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
    CHECK(s.alpha_bar[1000] == doctest::Approx(prod).epsilon(1e-12));
    CHECK(s.alpha_bar[1000] == doctest::Approx(4.0e-5).epsilon(0.05));
    CHECK(s.beta_tilde[1] == 0);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        CHECK(s.alpha[t] == 1 - s.beta[t]);
    }
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.1), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.2, 0.1), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), ConfigError);
}

TEST_CASE("forward diffusion limits and reproducibility")
{
    const auto s = make_schedule(100, 1e-8, 0.02);
    Rng rng(1);
    auto z0 = Tensor<double>::randn({4, 2, 2}, rng);
    const auto d = forward_diffuse(z0, 1, s, rng);
    for (std::size_t i = 0; i < z0.numel(); ++i)
        CHECK(std::abs(d.zt.data()[i] - z0.data()[i]) < 1e-3);
    CHECK_THROWS_AS(forward_diffuse(z0, 0, s, rng), DomainError);
    CHECK_THROWS_AS(forward_diffuse(z0, 101, s, rng), DomainError);
    Rng a(3), b(3);
    const auto da = forward_diffuse(z0, 50, s, a), db = forward_diffuse(z0, 50, s, b);
    CHECK(std::equal(da.zt.data().begin(), da.zt.data().end(), db.zt.data().begin()));
    CHECK(std::equal(da.eps.data().begin(), da.eps.data().end(), db.eps.data().begin()));
}

TEST_CASE("denoiser shapes, time dependence and budget")
{
    Rng rng(2);
    DenoiserConfig full;
    const Denoiser<float> d(full, rng);
    CHECK(d.params().numel() <= 60000);
    auto z = Tensor<float>::randn({3, 8, 4, 16}, rng);
    CHECK(d.forward(z, 5).shape() == z.shape());
    auto z1 = Tensor<float>::randn({8, 4, 16}, rng);
    CHECK(d.forward(z1, 7).shape() == z1.shape());
    const auto a = d.forward(z1, 10), b = d.forward(z1, 11);
    double diff = 0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        diff = std::max(diff, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
    CHECK(diff > 0);
    CHECK_THROWS_AS(d.forward(Tensor<float>(Shape{8, 2, 8}), 1), ShapeError);
}

TEST_CASE("denoiser gradients match finite differences")
{
    Rng rng(3);
    const auto cfg = small_cfg();
    Denoiser<double> d(cfg, rng);
    auto z = Tensor<double>::randn({2, 8, 2, 8}, rng);
    z.set_requires_grad(true);
    std::vector<Tensor<double>> leaves{z};
    for (const auto& n : d.params().names())
        leaves.push_back(d.params().get(n));
    const std::vector<int> ts{3, 150};
    auto loss = [&] { return ad::sum_squares(d.forward(z, ts)); };
    CHECK(testing::grad_check(loss, leaves, rng).max_rel_error < 1e-4);
}

TEST_CASE("ancestral sampling closed form with a zero denoiser")
{
    const auto s = make_schedule(1, 0.3, 0.3);
    Rng r1(4), r2(4);
    EpsFn<double> zero = [](const Tensor<double>& z, int) { return Tensor<double>(z.shape(), 0.0); };
    const auto out = ancestral_sample<double>(s, zero, {2, 3}, r1);
    const auto zt = Tensor<double>::randn({2, 3}, r2);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(out.data()[i] == doctest::Approx(zt.data()[i] / std::sqrt(0.7)));
}

TEST_CASE("training loss beats the predict-zero baseline and resumes bit-identically")
{
    Rng rng(5);
    auto cfg = small_cfg();
    cfg.epochs = 20;
    // Structured data: one of two fixed patterns plus small noise, so the
    // denoiser has something to learn beyond predicting zero.
    const auto pa = Tensor<float>::randn({8, 2, 8}, rng), pb = Tensor<float>::randn({8, 2, 8}, rng);
    std::vector<float> v(256 * 128);
    for (std::size_t i = 0; i < 256; ++i)
        for (std::size_t j = 0; j < 128; ++j)
            v[i * 128 + j] = (i % 2 ? pa : pb).data()[j] + 0.1f * static_cast<float>(rng.normal());
    const Tensor<float> latents({256, 8, 2, 8}, v);
    auto full = train_ldm(latents, 1.0, cfg, 77);
    CHECK(full.curve.back().loss < 0.9);

    auto part = train_ldm(latents, 1.0, cfg, 77, {}, 10);
    const auto path = (std::filesystem::temp_directory_path() / "lce_den_test.lcew").string();
    save_denoiser(path, part);
    auto resumed = load_denoiser(path);
    CHECK(resumed.epochs_done == 10);
    continue_training(resumed, latents, 77, 20);
    for (const auto& n : full.model.params().names()) {
        const auto a = full.model.params().get(n).data(), b = resumed.model.params().get(n).data();
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}

TEST_CASE("training objective is invariant to batch order")
{
    Rng rng(6);
    const Denoiser<double> d(small_cfg(), rng);
    auto zt = Tensor<double>::randn({4, 8, 2, 8}, rng), eps = Tensor<double>::randn({4, 8, 2, 8}, rng);
    const std::vector<int> ts{1, 50, 100, 200};
    const double base = ad::mse(d.forward(zt, ts), eps).item();
    const std::size_t per = 8 * 2 * 8;
    std::vector<double> zp(zt.numel()), ep(eps.numel());
    const std::size_t order[4] = {2, 0, 3, 1};
    std::vector<int> tp(4);
    for (std::size_t k = 0; k < 4; ++k) {
        std::copy_n(zt.data().begin() + order[k] * per, per, zp.begin() + k * per);
        std::copy_n(eps.data().begin() + order[k] * per, per, ep.begin() + k * per);
        tp[k] = ts[order[k]];
    }
    const double perm = ad::mse(d.forward(Tensor<double>(zt.shape(), zp), tp), Tensor<double>(eps.shape(), ep)).item();
    CHECK(perm == doctest::Approx(base).epsilon(1e-12));
}
