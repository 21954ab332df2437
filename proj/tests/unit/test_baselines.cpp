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

#include <algorithm>
#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "lce/baselines/baselines.hpp"
#include "lce/common/error.hpp"
#include "support/oracles.hpp"

using namespace lce;
using namespace lce::baselines;
using channels::nmse_db;

namespace {

CMat random_cmat(int r, int c, Rng& rng)
{
    CMat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = rng.complex_normal();
    return m;
}

// Phi as a dense matrix, for cross-checking the operator form.
CMat dense_phi(const CMat& x, const AngularDictionary& d)
{
    const CMat xft = x * d.f_t;
    const CMat fr = d.f_r.conjugate();
    CMat phi(xft.rows() * fr.rows(), xft.cols() * fr.cols());
    for (Eigen::Index i = 0; i < fr.rows(); ++i)
        for (Eigen::Index j = 0; j < fr.cols(); ++j)
            phi.block(i * xft.rows(), j * xft.cols(), xft.rows(), xft.cols()) = fr(i, j) * xft;
    return phi;
}

}  // namespace

TEST_CASE("vec / unvec are column-major inverses")
{
    Rng rng(1);
    const CMat m = random_cmat(3, 2, rng);
    const CVec v = vec(m);
    CHECK(v(1) == m(1, 0));
    CHECK(v(3) == m(0, 1));
    CHECK((unvec(v, 3, 2) - m).norm() == 0);
    CHECK_THROWS_AS(unvec(v, 4, 2), ShapeError);
}

TEST_CASE("LS: exact on unitary noiseless pilots, projection and linearity otherwise")
{
    Rng rng(2);
    const auto cfg = channels::ChannelModelConfig::for_profile(channels::Profile::Small);
    const auto h = channels::generate_channel(cfg, rng);
    const auto dft = channels::make_pilots(channels::PilotKind::DftUnitary, 16, 16, rng);
    const auto obs = channels::observe(h, dft, channels::kInfiniteSnr, rng);
    CHECK(nmse_db(h, ls_estimate(obs.y, dft.data)) < -200);

    const auto q = channels::make_pilots(channels::PilotKind::QpskRandom, 10, 16, rng);
    const auto oq = channels::observe(h, q, channels::kInfiniteSnr, rng);
    const LsEstimator ls(q.data);
    CHECK(!ls.rank_deficient());
    const auto est = ls.estimate(oq.y);
    CHECK((q.data * est.data - oq.y).norm() < 1e-10 * oq.y.norm());
    CHECK(nmse_db(h, est) > -10);
    const auto scaled = ls.estimate(CMat(oq.y * std::complex<double>(2.0, -1.0)));
    CHECK((scaled.data - est.data * std::complex<double>(2.0, -1.0)).norm() < 1e-10 * est.data.norm());

    CMat deficient = q.data;
    deficient.row(1) = deficient.row(0);
    CHECK(LsEstimator(deficient).rank_deficient());
    CHECK_THROWS_AS(ls.estimate(CMat::Zero(9, 4)), ShapeError);
}

TEST_CASE("LMMSE: scalar-covariance shrinkage and prior-mean limit")
{
    Rng rng(3);
    const int nt = 8, nr = 2;
    LmmseModel m;
    const double c = 2.5, sigma2 = 0.7;
    m.c_h = c * CMat::Identity(nt * nr, nt * nr);
    m.mean_h = CVec::Zero(nt * nr);
    m.nt = nt;
    m.nr = nr;
    const CMat x = channels::dft_matrix(nt);
    const CMat y = random_cmat(nt, nr, rng);
    const auto est = lmmse_estimate(y, x, m, sigma2);
    CHECK((est.data - c / (c + sigma2) * x.adjoint() * y).norm() < 1e-9 * y.norm());

    m.mean_h = vec(random_cmat(nt, nr, rng));
    const auto far = lmmse_estimate(y, x, m, 1e12);
    CHECK((vec(far.data) - m.mean_h).norm() < 1e-9 * m.mean_h.norm());
}

TEST_CASE("LMMSE: fitted covariance is Hermitian and the estimator beats LS")
{
    Rng rng(4);
    const int nt = 16, nr = 4;
    const CMat c = testing::kron_exp_covariance(nt, nr, 0.9, 0.6);
    const auto train = testing::gaussian_channels(c, nt, nr, 2000, rng);
    const auto model = fit_lmmse(train);
    CHECK(model.n_train == 2000);
    CHECK((model.c_h - model.c_h.adjoint()).norm() == 0);
    CHECK((model.c_h - c).norm() < 0.2 * c.norm());

    const auto test = testing::gaussian_channels(c, nt, nr, 100, rng);
    const auto x = channels::make_pilots(channels::PilotKind::DftUnitary, nt, nt, rng);
    const LmmseEstimator lmmse(model, x.data);
    const LsEstimator ls(x.data);
    for (double snr : {0.0, 10.0, 20.0}) {
        std::vector<ChannelMatrix> e1, e2;
        for (const auto& h : test) {
            const auto o = channels::observe(h, x, snr, rng);
            e1.push_back(lmmse.estimate(o.y, o.sigma2));
            e2.push_back(ls.estimate(o.y));
        }
        CHECK(nmse_db(test, e1) < nmse_db(test, e2));
    }
    CHECK_THROWS_AS(fit_lmmse(std::span<const ChannelMatrix>(train.data(), 1)), DomainError);
}

TEST_CASE("angular dictionary operators match the dense Kronecker form")
{
    Rng rng(5);
    const auto d = AngularDictionary::make(8, 4);
    CHECK((d.f_t.adjoint() * d.f_t - CMat::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((d.f_r.adjoint() * d.f_r - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    const CMat x = random_cmat(5, 8, rng);
    const CMat phi = dense_phi(x, d);
    const CVec s = vec(random_cmat(8, 4, rng)), r = vec(random_cmat(5, 4, rng));
    CHECK((apply_phi(x * d.f_t, d, s) - phi * s).norm() < 1e-10 * (phi * s).norm());
    CHECK((apply_phi_adjoint(x * d.f_t, d, r) - phi.adjoint() * r).norm() < 1e-10 * (phi.adjoint() * r).norm());
    const double lip = phi_lipschitz(x, d);
    Eigen::JacobiSVD<CMat> svd(phi);
    CHECK(lip == doctest::Approx(svd.singularValues()(0) * svd.singularValues()(0)).epsilon(1e-8));
}

TEST_CASE("OMP: exact recovery of 3-sparse channels, trivial cases")
{
    Rng rng(6);
    const int nt = 16, nr = 4;
    const auto d = AngularDictionary::make(nt, nr);
    for (auto kind : {channels::PilotKind::DftUnitary, channels::PilotKind::QpskRandom}) {
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<int> support;
            const auto h = testing::sparse_angular_channel(nt, nr, 3, rng, &support);
            const auto x = channels::make_pilots(kind, nt, nt, rng);
            const auto o = channels::observe(h, x, channels::kInfiniteSnr, rng);
            const auto res = omp_estimate(o.y, x.data, d, omp_default_k(nt, nr), 1e-9 * o.y.norm());
            CHECK(nmse_db(h, res.h) < -100);
            auto got = res.support;
            std::sort(got.begin(), got.end());
            std::sort(support.begin(), support.end());
            CHECK(got == support);
            for (std::size_t i = 1; i < res.residual_norms.size(); ++i)
                CHECK(res.residual_norms[i] <= res.residual_norms[i - 1] * (1 + 1e-12));
        }
    }
    const auto h = testing::sparse_angular_channel(nt, nr, 3, rng);
    const auto x = channels::make_pilots(channels::PilotKind::QpskRandom, 10, nt, rng);
    const auto o = channels::observe(h, x, 10.0, rng);
    CHECK(nmse_db(h, omp_estimate(o.y, x.data, d, 0, 0).h) == doctest::Approx(0.0));
    CHECK(omp_default_k(10, 4) == 10);
    CHECK(omp_default_tol(0.25, 10, 4) == doctest::Approx(std::sqrt(10.0)));
    CHECK_THROWS_AS(omp_estimate(o.y, x.data, d, 41, 0), DomainError);
}

TEST_CASE("FISTA: LS optimum at lambda 0, kill condition, monotone objective")
{
    Rng rng(7);
    const int nt = 8, nr = 4, np = 16;
    const auto d = AngularDictionary::make(nt, nr);
    const CMat x = random_cmat(np, nt, rng) / std::sqrt(double(nt));
    const CMat y = random_cmat(np, nr, rng);

    // Overdetermined, full rank: the LS optimum is the pseudo-inverse solution.
    const CMat phi = dense_phi(x, d);
    const CVec s_ls = phi.completeOrthogonalDecomposition().solve(vec(y));
    const double f_ls = 0.5 * (vec(y) - phi * s_ls).squaredNorm();
    const auto r0 = fista_estimate(y, x, d, 0.0, 2000);
    CHECK(r0.objective.back() - f_ls < 1e-6);
    CHECK(r0.objective.back() >= f_ls - 1e-9);

    const double lmax = fista_lambda_max(y, x, d);
    CHECK(fista_estimate(y, x, d, lmax * 1.0001, 50).s.norm() == 0);

    const auto r1 = fista_estimate(y, x, d, 0.1 * lmax, 300);
    double worst_rise = 0;
    for (std::size_t i = 6; i < r1.objective.size(); ++i)
        worst_rise = std::max(worst_rise, (r1.objective[i] - r1.objective[i - 1]) / r1.objective[i - 1]);
    CHECK(worst_rise <= 1e-4);
    CHECK(r1.objective.back() < r1.objective[5]);

    // Converged point is a fixed point of the proximal-gradient map.
    const double lip = phi_lipschitz(x, d), lam = 0.1 * lmax;
    CVec v = r1.s - (1.0 / lip) * phi.adjoint() * (phi * r1.s - vec(y));
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double mag = std::abs(v(k)), th = lam / lip;
        v(k) = mag > th ? v(k) * (1 - th / mag) : std::complex<double>(0);
    }
    CHECK((v - r1.s).norm() < 1e-4 * r1.s.norm());

    CHECK_THROWS_AS(fista_estimate(y, x, d, -1, 10), DomainError);
    CHECK_THROWS_AS(fista_estimate(y, x, d, 0, 0), DomainError);
    CHECK(fista_lambda_grid().size() == 7);
}
