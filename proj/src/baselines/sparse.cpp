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

// OMP and FISTA over the virtual-channel (angular) dictionary. Phi is never
// formed: Phi s = vec(X F_t S F_r^H) and Phi^H r = vec((X F_t)^H R F_r).

#include <algorithm>
#include <cmath>

#include "lce/baselines/baselines.hpp"
#include "lce/common/error.hpp"
#include "lce/common/rng.hpp"

namespace lce::baselines {

AngularDictionary AngularDictionary::make(int nt, int nr)
{
    return AngularDictionary{channels::dft_matrix(nt), channels::dft_matrix(nr)};
}

CVec apply_phi(const CMat& xft, const AngularDictionary& d, const CVec& s)
{
    const auto nt = static_cast<int>(d.f_t.rows()), nr = static_cast<int>(d.f_r.rows());
    return vec(xft * unvec(s, nt, nr) * d.f_r.adjoint());
}

CVec apply_phi_adjoint(const CMat& xft, const AngularDictionary& d, const CVec& r)
{
    const auto np = static_cast<int>(xft.rows()), nr = static_cast<int>(d.f_r.rows());
    return vec(xft.adjoint() * unvec(r, np, nr) * d.f_r);
}

namespace {

void check_sizes(const CMat& y, const CMat& x, const AngularDictionary& d)
{
    if (x.cols() != d.f_t.rows() || y.rows() != x.rows() || y.cols() != d.f_r.rows())
        throw ShapeError("sparse estimator: Y " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                         ", X " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         " and dictionary " + std::to_string(d.f_t.rows()) + "/" + std::to_string(d.f_r.rows()) +
                         " do not conform");
}

ChannelMatrix synthesize(const CVec& s, const AngularDictionary& d)
{
    const auto nt = static_cast<int>(d.f_t.rows()), nr = static_cast<int>(d.f_r.rows());
    return ChannelMatrix{d.f_t * unvec(s, nt, nr) * d.f_r.adjoint(), 0, 0};
}

}  // namespace

int omp_default_k(int np, int nr)
{
    return std::max(1, np * nr / 4);
}

double omp_default_tol(double sigma2, int np, int nr)
{
    return std::sqrt(sigma2 * np * nr);
}

OmpResult omp_estimate(const CMat& y, const CMat& x, const AngularDictionary& d, int k_max, double tol)
{
    check_sizes(y, x, d);
    const auto nt = static_cast<int>(d.f_t.rows()), nr = static_cast<int>(d.f_r.rows());
    const auto m = static_cast<Eigen::Index>(y.size());
    if (k_max < 0 || k_max > m)
        throw DomainError("omp: k_max must lie in [0, Np*Nr]");

    const CMat xft = x * d.f_t;
    Eigen::VectorXd atom_norm(nt);
    for (int i = 0; i < nt; ++i)
        atom_norm(i) = xft.col(i).norm();

    const CVec yv = vec(y);
    CVec r = yv;
    CMat q(m, k_max);
    CMat rr = CMat::Zero(k_max, k_max);
    std::vector<char> used(static_cast<std::size_t>(nt) * nr, 0);
    OmpResult out;
    out.residual_norms.push_back(r.norm());

    for (int it = 0; it < k_max && r.norm() >= tol; ++it) {
        const CVec c = apply_phi_adjoint(xft, d, r);
        int best = -1;
        double best_score = -1;
        for (int k = 0; k < nt * nr; ++k) {
            const double an = atom_norm(k % nt);
            if (used[k] || an == 0)
                continue;
            const double score = std::abs(c(k)) / an;
            if (score > best_score) {
                best_score = score;
                best = k;
            }
        }
        if (best < 0)
            break;

        // atom = vec(xft[:, i] conj(f_r[:, j])^T)
        const int i = best % nt, j = best / nt;
        CVec a = vec(xft.col(i) * d.f_r.col(j).conjugate().transpose());
        const double a_norm = a.norm();
        // Modified Gram-Schmidt with one re-orthogonalization pass.
        for (int pass = 0; pass < 2; ++pass)
            for (int p = 0; p < it; ++p) {
                const auto proj = q.col(p).dot(a);
                rr(p, it) += proj;
                a -= proj * q.col(p);
            }
        const double nrm = a.norm();
        if (nrm <= 1e-12 * a_norm)
            break;  // linearly dependent on the active set
        used[best] = 1;
        rr(it, it) = nrm;
        q.col(it) = a / nrm;
        r -= q.col(it) * q.col(it).dot(r);
        out.support.push_back(best);
        out.residual_norms.push_back(r.norm());
    }

    CVec s = CVec::Zero(static_cast<Eigen::Index>(nt) * nr);
    const auto k = static_cast<Eigen::Index>(out.support.size());
    if (k > 0) {
        const CVec z = q.leftCols(k).adjoint() * yv;
        const CVec coef = rr.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(z);
        for (Eigen::Index p = 0; p < k; ++p)
            s(out.support[static_cast<std::size_t>(p)]) = coef(p);
    }
    out.h = synthesize(s, d);
    return out;
}

double phi_lipschitz(const CMat& x, const AngularDictionary& d)
{
    const CMat xft = x * d.f_t;
    const auto n = d.f_t.rows() * d.f_r.rows();
    Rng rng(0x6c697073);
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = rng.complex_normal();
    v.normalize();
    double lambda = 0;
    for (int it = 0; it < 1000; ++it) {
        CVec w = apply_phi_adjoint(xft, d, apply_phi(xft, d, v));
        const double next = w.norm();
        if (next == 0)
            return 0;
        v = w / next;
        const bool done = std::abs(next - lambda) <= 1e-12 * next;
        lambda = next;
        if (done)
            break;
    }
    return lambda;
}

double fista_lambda_max(const CMat& y, const CMat& x, const AngularDictionary& d)
{
    check_sizes(y, x, d);
    return apply_phi_adjoint(x * d.f_t, d, vec(y)).cwiseAbs().maxCoeff();
}

std::vector<double> fista_lambda_grid()
{
    return {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0};
}

FistaResult fista_estimate(const CMat& y, const CMat& x, const AngularDictionary& d, double lambda, int n_iter,
                           double lipschitz)
{
    check_sizes(y, x, d);
    if (!(lambda >= 0))
        throw DomainError("fista: lambda must be >= 0");
    if (n_iter < 1)
        throw DomainError("fista: n_iter must be >= 1");
    const CMat xft = x * d.f_t;
    const double lip = lipschitz > 0 ? lipschitz : phi_lipschitz(x, d);
    const CVec yv = vec(y);
    const auto n = d.f_t.rows() * d.f_r.rows();

    FistaResult out;
    out.s = CVec::Zero(n);
    if (lip == 0) {
        out.h = synthesize(out.s, d);
        return out;
    }
    const double step = 1.0 / lip, thresh = lambda * step;
    CVec z = out.s, s_prev = out.s;
    double t = 1;
    out.objective.reserve(static_cast<std::size_t>(n_iter));
    for (int it = 0; it < n_iter; ++it) {
        CVec v = z - step * apply_phi_adjoint(xft, d, apply_phi(xft, d, z) - yv);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double mag = std::abs(v(k));
            v(k) = mag > thresh ? v(k) * (1.0 - thresh / mag) : std::complex<double>(0);
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = v + ((t - 1.0) / t_next) * (v - s_prev);
        s_prev = v;
        t = t_next;
        out.objective.push_back(0.5 * (yv - apply_phi(xft, d, v)).squaredNorm() + lambda * v.cwiseAbs().sum());
    }
    out.s = s_prev;
    out.h = synthesize(out.s, d);
    return out;
}

}  // namespace lce::baselines
