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

#include <Eigen/SVD>

#include "lce/channels/channels.hpp"
#include "lce/channels/dataset_io.hpp"
#include "lce/common/error.hpp"

using namespace lce;
using namespace lce::channels;

TEST_CASE("single path channel is rank one")
{
    auto cfg = ChannelModelConfig::for_profile(Profile::Small);
    cfg.n_clusters = 1;
    cfg.rays_per_cluster = 1;
    cfg.angle_spread_deg = 0;
    for (auto geo : {Geometry::Fixed, Geometry::PerRealization}) {
        cfg.geometry = geo;
        Rng rng(11);
        const auto h = generate_channel(cfg, rng);
        Eigen::JacobiSVD<CMat> svd(h.data);
        const auto s = svd.singularValues();
        CHECK(s(1) < 1e-10 * s(0));
    }
}

TEST_CASE("channel power is normalized to Nt Nr")
{
    for (auto geo : {Geometry::Fixed, Geometry::PerRealization}) {
        auto cfg = ChannelModelConfig::for_profile(Profile::Small);
        cfg.geometry = geo;
        const auto hs = generate_channels(cfg, 10000, 99);
        double p = 0;
        for (const auto& h : hs)
            p += h.data.squaredNorm();
        p /= 10000.0 * cfg.nt * cfg.nr;
        CHECK(p > 0.95);
        CHECK(p < 1.05);
    }
}

TEST_CASE("same seed gives bit-identical channels")
{
    const auto cfg = ChannelModelConfig::for_profile(Profile::Full);
    Rng a(5), b(5);
    CHECK(generate_channel(cfg, a).data == generate_channel(cfg, b).data);
}

TEST_CASE("invalid channel configs are rejected")
{
    auto cfg = ChannelModelConfig::for_profile(Profile::Small);
    cfg.nt = 12;
    CHECK_THROWS_AS(ChannelGenerator{cfg}, ConfigError);
    cfg = ChannelModelConfig::for_profile(Profile::Small);
    cfg.n_clusters = 0;
    CHECK_THROWS_AS(ChannelGenerator{cfg}, ConfigError);
}

TEST_CASE("pilot constructions")
{
    Rng rng(3);
    const auto dft = make_pilots(PilotKind::DftUnitary, 16, 16, rng);
    const CMat g = dft.data.adjoint() * dft.data - CMat::Identity(16, 16);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-12);

    const auto q = make_pilots(PilotKind::QpskRandom, 38, 64, rng);
    CHECK(q.data.rows() == 38);
    for (Eigen::Index i = 0; i < q.data.rows(); ++i) {
        CHECK(std::abs(q.data.row(i).squaredNorm() - 1.0) < 1e-12);
        for (Eigen::Index j = 0; j < q.data.cols(); ++j)
            CHECK(std::abs(std::abs(q.data(i, j)) - 1.0 / 8.0) < 1e-15);
    }
    CHECK_THROWS_AS(make_pilots(PilotKind::DftUnitary, 10, 16, rng), ConfigError);
}

TEST_CASE("noiseless observation is exact and the SNR definition holds")
{
    const auto cfg = ChannelModelConfig::for_profile(Profile::Small);
    Rng rng(4);
    const auto x = make_pilots(PilotKind::QpskRandom, 10, 16, rng);
    const auto h = generate_channel(cfg, rng);
    const auto clean = observe(h, x, kInfiniteSnr, rng);
    CHECK(clean.sigma2 == 0);
    CHECK(clean.y == x.data * h.data);

    double sig = 0, noise = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto hi = generate_channel(cfg, rng);
        const auto o = observe(hi, x, 7.0, rng);
        const CMat xh = x.data * hi.data;
        sig += xh.squaredNorm();
        noise += (o.y - xh).squaredNorm();
    }
    CHECK(std::abs(10 * std::log10(sig / noise) - 7.0) < 0.2);

    Rng r1(9), r2(9);
    CHECK(observe(h, x, 10.0, r1).y == observe(h, x, 10.0, r2).y);
}

TEST_CASE("tensor layout and round trip")
{
    const auto cfg = ChannelModelConfig::for_profile(Profile::Full);
    Rng rng(6);
    const auto h = generate_channel(cfg, rng);
    const auto t = channel_to_tensor<double>(h);
    CHECK(t.shape() == ad::Shape{2, 16, 64});
    CHECK(t.data()[1] == h.data(1, 0).real());
    CHECK(tensor_to_channel(t).data == h.data);

    ChannelMatrix real{CMat(h.data.real().cast<std::complex<double>>())};
    const auto tr = channel_to_tensor<float>(real);
    for (std::size_t i = 16 * 64; i < 2 * 16 * 64; ++i)
        CHECK(tr.data()[i] == 0.0f);
    CHECK_THROWS_AS(tensor_to_channel(ad::Tensor<double>(ad::Shape{3, 4, 4})), ShapeError);
}

TEST_CASE("nmse conventions")
{
    const auto cfg = ChannelModelConfig::for_profile(Profile::Small);
    Rng rng(7);
    const auto h = generate_channel(cfg, rng);
    ChannelMatrix zero{CMat::Zero(h.nt(), h.nr())};
    ChannelMatrix twice{2.0 * h.data};
    CHECK(nmse_db(h, h) == kNmseFloorDb);
    CHECK(std::abs(nmse_db(h, zero)) < 1e-12);
    CHECK(std::abs(nmse_db(h, twice)) < 1e-12);
    CHECK_THROWS_AS(nmse_db(zero, h), DomainError);
}

TEST_CASE("dataset files round trip and regenerate byte-identically")
{
    const auto cfg = ChannelModelConfig::for_profile(Profile::Small);
    const auto dir = std::filesystem::temp_directory_path() / "lce_ds_test";
    const auto p1 = gen_dataset(cfg, {20, 5, 5}, 42, (dir / "a").string());
    const auto p2 = gen_dataset(cfg, {20, 5, 5}, 42, (dir / "b").string());
    for (int i = 0; i < 3; ++i) {
        CHECK(std::filesystem::file_size(p1[i]) == std::filesystem::file_size(p2[i]));
    }
    const auto a = read_dataset(p1[0]);
    const auto b = read_dataset(p2[0]);
    CHECK(a.values == b.values);
    CHECK(a.count == 20);
    CHECK(a.nr == 4);
    CHECK(a.nt == 16);
    CHECK(a.values.size() == 20u * 2 * 4 * 16);
    const auto test = read_dataset(p1[2]);
    CHECK(test.values != std::vector<float>(a.values.begin(), a.values.begin() + test.values.size()));
    std::filesystem::remove_all(dir);
}
