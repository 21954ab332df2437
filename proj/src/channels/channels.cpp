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

#include "lce/channels/channels.hpp"

#include <cmath>

#include "lce/common/error.hpp"

namespace lce::channels {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Stream id of the fixed-geometry draw; keeps it disjoint from realizations.
constexpr std::uint64_t kGeometryStream = 0x67656f6dULL;

bool is_pow2(int n)
{
    return n > 0 && (n & (n - 1)) == 0;
}

void ula(double angle, int n, Eigen::Ref<Eigen::VectorXcd> out)
{
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    const double phase = kPi * std::sin(angle);
    for (int i = 0; i < n; ++i)
        out(i) = std::polar(norm, phase * i);
}

}  // namespace

ChannelModelConfig ChannelModelConfig::for_profile(Profile p)
{
    ChannelModelConfig c;
    c.profile = p;
    if (p == Profile::Small) {
        c.nt = 16;
        c.nr = 4;
    }
    return c;
}

void ChannelModelConfig::validate() const
{
    if (!is_pow2(nt) || !is_pow2(nr))
        throw ConfigError("nt and nr must be positive powers of two, got nt=" + std::to_string(nt) +
                          " nr=" + std::to_string(nr));
    if (n_clusters < 1 || rays_per_cluster < 1)
        throw ConfigError("n_clusters and rays_per_cluster must be >= 1");
    if (!(angle_spread_deg >= 0) || !std::isfinite(angle_spread_deg))
        throw ConfigError("angle_spread_deg must be finite and >= 0");
}

Profile parse_profile(const std::string& s)
{
    if (s == "full")
        return Profile::Full;
    if (s == "small")
        return Profile::Small;
    throw ConfigError("unknown profile '" + s + "' (expected full or small)");
}

std::string to_string(Profile p)
{
    return p == Profile::Full ? "full" : "small";
}

PilotKind parse_pilot_kind(const std::string& s)
{
    if (s == "qpsk")
        return PilotKind::QpskRandom;
    if (s == "dft")
        return PilotKind::DftUnitary;
    throw ConfigError("unknown pilot kind '" + s + "' (expected qpsk or dft)");
}

std::string to_string(PilotKind k)
{
    return k == PilotKind::QpskRandom ? "qpsk" : "dft";
}

ChannelGenerator::ChannelGenerator(const ChannelModelConfig& cfg) : cfg_(cfg)
{
    cfg_.validate();
    if (cfg_.geometry == Geometry::Fixed) {
        Rng geo(derive_seed(cfg_.seed, kGeometryStream));
        steering(geo, a_t_, a_r_);
    }
}

void ChannelGenerator::steering(Rng& rng, CMat& a_t, CMat& a_r) const
{
    const int paths = cfg_.n_clusters * cfg_.rays_per_cluster;
    const double spread = cfg_.angle_spread_deg * kPi / 180.0;
    a_t.resize(cfg_.nt, paths);
    a_r.resize(cfg_.nr, paths);
    int k = 0;
    for (int c = 0; c < cfg_.n_clusters; ++c) {
        const double tx_center = rng.uniform(-kPi / 2, kPi / 2);
        const double rx_center = rng.uniform(-kPi / 2, kPi / 2);
        for (int r = 0; r < cfg_.rays_per_cluster; ++r, ++k) {
            const double tx = tx_center + (spread > 0 ? rng.laplace(spread) : 0.0);
            const double rx = rx_center + (spread > 0 ? rng.laplace(spread) : 0.0);
            ula(tx, cfg_.nt, a_t.col(k));
            ula(rx, cfg_.nr, a_r.col(k));
        }
    }
}

ChannelMatrix ChannelGenerator::draw(Rng& rng) const
{
    CMat a_t, a_r;
    if (cfg_.geometry == Geometry::PerRealization)
        steering(rng, a_t, a_r);
    const CMat& at = cfg_.geometry == Geometry::Fixed ? a_t_ : a_t;
    const CMat& ar = cfg_.geometry == Geometry::Fixed ? a_r_ : a_r;
    const int paths = static_cast<int>(at.cols());
    Eigen::VectorXcd g(paths);
    for (int k = 0; k < paths; ++k)
        g(k) = rng.complex_normal();
    const double scale = std::sqrt(static_cast<double>(cfg_.nt) * cfg_.nr / paths);
    ChannelMatrix h;
    h.data = scale * (at * g.asDiagonal() * ar.adjoint());
    h.seed = cfg_.seed;
    h.n_clusters = cfg_.n_clusters;
    return h;
}

ChannelMatrix generate_channel(const ChannelModelConfig& cfg, Rng& rng)
{
    return ChannelGenerator(cfg).draw(rng);
}

std::vector<ChannelMatrix> generate_channels(const ChannelModelConfig& cfg, std::size_t count,
                                             std::uint64_t stream_seed)
{
    const ChannelGenerator gen(cfg);
    std::vector<ChannelMatrix> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(stream_seed, i));
        out.push_back(gen.draw(rng));
    }
    return out;
}

CMat dft_matrix(int n)
{
    if (n < 1)
        throw ConfigError("DFT size must be positive");
    CMat f(n, n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k) {
            // Reduce m*k first so the phase stays exact for large n.
            const auto mk = static_cast<double>((static_cast<long>(m) * k) % n);
            f(m, k) = std::polar(norm, -2.0 * kPi * mk / n);
        }
    return f;
}

PilotMatrix make_pilots(PilotKind kind, int np, int nt, Rng& rng)
{
    if (np < 1 || nt < 1)
        throw ConfigError("pilot dimensions must be positive");
    PilotMatrix x;
    x.kind = kind;
    if (kind == PilotKind::DftUnitary) {
        if (np != nt)
            throw ConfigError("DFT pilots need Np = Nt, got Np=" + std::to_string(np) + " Nt=" + std::to_string(nt));
        x.data = dft_matrix(nt);
        return x;
    }
    const double a = 1.0 / std::sqrt(2.0 * nt);
    x.data.resize(np, nt);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < nt; ++j) {
            const auto bits = rng.next_u64();
            x.data(i, j) = {(bits & 1) ? a : -a, (bits & 2) ? a : -a};
        }
    return x;
}

Observation observe(const ChannelMatrix& h, const PilotMatrix& x, double snr_db, Rng& rng)
{
    if (x.data.cols() != h.data.rows())
        throw ShapeError("pilot has " + std::to_string(x.data.cols()) + " columns, channel has " +
                         std::to_string(h.data.rows()) + " tx antennas");
    Observation obs;
    obs.snr_db = snr_db;
    obs.y = x.data * h.data;
    if (std::isinf(snr_db) && snr_db > 0)
        return obs;
    if (std::isnan(snr_db))
        throw DomainError("snr_db is NaN");
    const double signal = obs.y.squaredNorm();
    obs.sigma2 = signal / (static_cast<double>(obs.y.size()) * std::pow(10.0, snr_db / 10.0));
    const double sd = std::sqrt(obs.sigma2);
    for (Eigen::Index j = 0; j < obs.y.cols(); ++j)
        for (Eigen::Index i = 0; i < obs.y.rows(); ++i)
            obs.y(i, j) += sd * rng.complex_normal();
    return obs;
}

template <class T>
ad::Tensor<T> channels_to_tensor(std::span<const ChannelMatrix> hs)
{
    if (hs.empty())
        throw ShapeError("channels_to_tensor: empty batch");
    const auto nt = static_cast<std::size_t>(hs[0].nt()), nr = static_cast<std::size_t>(hs[0].nr());
    const std::size_t plane = nr * nt;
    std::vector<T> v(hs.size() * 2 * plane);
    for (std::size_t b = 0; b < hs.size(); ++b) {
        const auto& h = hs[b].data;
        if (static_cast<std::size_t>(h.rows()) != nt || static_cast<std::size_t>(h.cols()) != nr)
            throw ShapeError("channels_to_tensor: mixed channel shapes in batch");
        T* re = v.data() + b * 2 * plane;
        T* im = re + plane;
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t t = 0; t < nt; ++t) {
                const auto z = h(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r));
                re[r * nt + t] = static_cast<T>(z.real());
                im[r * nt + t] = static_cast<T>(z.imag());
            }
    }
    return ad::Tensor<T>(ad::Shape{hs.size(), 2, nr, nt}, std::move(v));
}

template <class T>
ad::Tensor<T> channel_to_tensor(const ChannelMatrix& h)
{
    auto t = channels_to_tensor<T>(std::span<const ChannelMatrix>(&h, 1));
    return ad::Tensor<T>(ad::Shape{2, t.dim(2), t.dim(3)}, std::vector<T>(t.data().begin(), t.data().end()));
}

template <class T>
std::vector<ChannelMatrix> tensor_to_channels(const ad::Tensor<T>& t)
{
    if (t.rank() != 4 || t.dim(1) != 2)
        throw ShapeError("tensor_to_channels: expected (N, 2, Nr, Nt), got " + ad::shape_str(t.shape()));
    const std::size_t n = t.dim(0), nr = t.dim(2), nt = t.dim(3), plane = nr * nt;
    std::vector<ChannelMatrix> out(n);
    const auto v = t.data();
    for (std::size_t b = 0; b < n; ++b) {
        const T* re = v.data() + b * 2 * plane;
        const T* im = re + plane;
        auto& h = out[b].data;
        h.resize(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nr));
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t c = 0; c < nt; ++c)
                h(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = {static_cast<double>(re[r * nt + c]),
                                                                                  static_cast<double>(im[r * nt + c])};
    }
    return out;
}

template <class T>
ChannelMatrix tensor_to_channel(const ad::Tensor<T>& t)
{
    if (t.rank() == 3 && t.dim(0) == 2)
        return tensor_to_channels(
            ad::Tensor<T>(ad::Shape{1, 2, t.dim(1), t.dim(2)}, std::vector<T>(t.data().begin(), t.data().end())))[0];
    if (t.rank() == 4 && t.dim(0) == 1)
        return tensor_to_channels(t)[0];
    throw ShapeError("tensor_to_channel: expected (2, Nr, Nt), got " + ad::shape_str(t.shape()));
}

template ad::Tensor<float> channel_to_tensor(const ChannelMatrix&);
template ad::Tensor<double> channel_to_tensor(const ChannelMatrix&);
template ad::Tensor<float> channels_to_tensor(std::span<const ChannelMatrix>);
template ad::Tensor<double> channels_to_tensor(std::span<const ChannelMatrix>);
template ChannelMatrix tensor_to_channel(const ad::Tensor<float>&);
template ChannelMatrix tensor_to_channel(const ad::Tensor<double>&);
template std::vector<ChannelMatrix> tensor_to_channels(const ad::Tensor<float>&);
template std::vector<ChannelMatrix> tensor_to_channels(const ad::Tensor<double>&);

double nmse_db(std::span<const ChannelMatrix> h_true, std::span<const ChannelMatrix> h_est)
{
    if (h_true.size() != h_est.size())
        throw ShapeError("nmse_db: batch sizes differ");
    double err = 0, ref = 0;
    for (std::size_t i = 0; i < h_true.size(); ++i) {
        if (h_true[i].data.rows() != h_est[i].data.rows() || h_true[i].data.cols() != h_est[i].data.cols())
            throw ShapeError("nmse_db: channel shapes differ");
        err += (h_true[i].data - h_est[i].data).squaredNorm();
        ref += h_true[i].data.squaredNorm();
    }
    if (ref == 0)
        throw DomainError("nmse_db: reference channels are all zero");
    if (err == 0)
        return kNmseFloorDb;
    return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

double nmse_db(const ChannelMatrix& h_true, const ChannelMatrix& h_est)
{
    return nmse_db(std::span<const ChannelMatrix>(&h_true, 1), std::span<const ChannelMatrix>(&h_est, 1));
}

}  // namespace lce::channels
