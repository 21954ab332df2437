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

#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lce/autodiff/tensor.hpp"
#include "lce/common/rng.hpp"

namespace lce::channels {

using CMat = Eigen::MatrixXcd;

enum class Profile { Full, Small };

/// How the clustered model draws its angles. `Fixed` draws the cluster and
/// ray geometry once from the config seed (one site, many fades, like a fixed
/// CDL profile); `PerRealization` redraws it for every channel.
enum class Geometry { Fixed, PerRealization };

struct ChannelModelConfig {
    int nt = 64;
    int nr = 16;
    int n_clusters = 4;
    int rays_per_cluster = 8;
    double angle_spread_deg = 5.0;
    std::uint64_t seed = 0;
    Profile profile = Profile::Full;
    Geometry geometry = Geometry::Fixed;

    static ChannelModelConfig for_profile(Profile p);
    /// Throws ConfigError for non-positive or non-power-of-two sizes.
    void validate() const;
};

Profile parse_profile(const std::string& s);
std::string to_string(Profile p);

/// H with Nt rows and Nr columns, Y = X H.
struct ChannelMatrix {
    CMat data;
    std::uint64_t seed = 0;
    int n_clusters = 0;

    int nt() const { return static_cast<int>(data.rows()); }
    int nr() const { return static_cast<int>(data.cols()); }
};

enum class PilotKind { QpskRandom, DftUnitary };

PilotKind parse_pilot_kind(const std::string& s);
std::string to_string(PilotKind k);

struct PilotMatrix {
    CMat data;  // (Np, Nt)
    PilotKind kind = PilotKind::QpskRandom;

    int np() const { return static_cast<int>(data.rows()); }
};

struct Observation {
    CMat y;  // (Np, Nr)
    double snr_db = 0;
    double sigma2 = 0;  // per complex entry
};

/// Clustered multipath generator with ULA steering vectors (half-wavelength
/// spacing). H = sqrt(Nt Nr / (C R)) sum_{c,r} g a_t(theta) a_r(phi)^H with
/// unit-norm steering vectors and g ~ CN(0, 1), so E||H||_F^2 = Nt Nr.
class ChannelGenerator {
public:
    explicit ChannelGenerator(const ChannelModelConfig& cfg);

    ChannelMatrix draw(Rng& rng) const;
    const ChannelModelConfig& config() const { return cfg_; }

private:
    ChannelModelConfig cfg_;
    CMat a_t_, a_r_;  // fixed-geometry steering matrices (Nt x CR, Nr x CR)

    void steering(Rng& rng, CMat& a_t, CMat& a_r) const;
};

ChannelMatrix generate_channel(const ChannelModelConfig& cfg, Rng& rng);

/// `count` channels, realization i drawn from derive_seed(stream_seed, i).
std::vector<ChannelMatrix> generate_channels(const ChannelModelConfig& cfg, std::size_t count,
                                             std::uint64_t stream_seed);

/// Unitary DFT matrix, F(m, n) = exp(-2 pi j m n / N) / sqrt(N).
CMat dft_matrix(int n);

PilotMatrix make_pilots(PilotKind kind, int np, int nt, Rng& rng);

/// Y = X H + N. snr_db = +inf gives sigma2 = 0 and Y = X H exactly.
Observation observe(const ChannelMatrix& h, const PilotMatrix& x, double snr_db, Rng& rng);

constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

/// (2, Nr, Nt): plane 0 real, plane 1 imaginary; row = rx antenna, column =
/// tx antenna (i.e. the planes hold H^T).
template <class T>
ad::Tensor<T> channel_to_tensor(const ChannelMatrix& h);
/// (N, 2, Nr, Nt).
template <class T>
ad::Tensor<T> channels_to_tensor(std::span<const ChannelMatrix> hs);
/// Accepts (2, Nr, Nt) or (1, 2, Nr, Nt).
template <class T>
ChannelMatrix tensor_to_channel(const ad::Tensor<T>& t);
template <class T>
std::vector<ChannelMatrix> tensor_to_channels(const ad::Tensor<T>& t);

/// Reported instead of -inf when the estimate is exact.
constexpr double kNmseFloorDb = -300.0;

/// 10 log10(sum ||H - Hhat||^2 / sum ||H||^2).
double nmse_db(const ChannelMatrix& h_true, const ChannelMatrix& h_est);
double nmse_db(std::span<const ChannelMatrix> h_true, std::span<const ChannelMatrix> h_est);

}  // namespace lce::channels
