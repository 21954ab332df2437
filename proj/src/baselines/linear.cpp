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

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lce/baselines/baselines.hpp"
#include "lce/common/error.hpp"

namespace lce::baselines {

CVec vec(const CMat& m)
{
    return Eigen::Map<const CVec>(m.data(), m.size());
}

CMat unvec(const CVec& v, int rows, int cols)
{
    if (v.size() != static_cast<Eigen::Index>(rows) * cols)
        throw ShapeError("unvec: " + std::to_string(v.size()) + " entries for " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    return Eigen::Map<const CMat>(v.data(), rows, cols);
}

LsEstimator::LsEstimator(const CMat& x)
{
    Eigen::BDCSVD<CMat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(x.rows(), x.cols()) * sv(0) * 1e-13;
    Eigen::VectorXd inv(sv.size());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        inv(i) = sv(i) > tol ? 1.0 / sv(i) : 0.0;
        rank += sv(i) > tol;
    }
    rank_deficient_ = rank < std::min(x.rows(), x.cols());
    pinv_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

ChannelMatrix LsEstimator::estimate(const CMat& y) const
{
    if (y.rows() != pinv_.cols())
        throw ShapeError("ls: observation has " + std::to_string(y.rows()) + " rows, pilots have " +
                         std::to_string(pinv_.cols()));
    return ChannelMatrix{pinv_ * y, 0, 0};
}

ChannelMatrix ls_estimate(const CMat& y, const CMat& x)
{
    return LsEstimator(x).estimate(y);
}

LmmseModel fit_lmmse(std::span<const ChannelMatrix> train)
{
    if (train.size() < 2)
        throw DomainError("fit_lmmse: need at least 2 training channels");
    LmmseModel m;
    m.nt = train[0].nt();
    m.nr = train[0].nr();
    m.n_train = static_cast<int>(train.size());
    const Eigen::Index dim = static_cast<Eigen::Index>(m.nt) * m.nr;
    CMat h(dim, static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].nt() != m.nt || train[i].nr() != m.nr)
            throw ShapeError("fit_lmmse: channels of different sizes");
        h.col(static_cast<Eigen::Index>(i)) = vec(train[i].data);
    }
    m.mean_h = h.rowwise().mean();
    h.colwise() -= m.mean_h;
    m.c_h = CMat::Zero(dim, dim);
    m.c_h.selfadjointView<Eigen::Lower>().rankUpdate(h, 1.0 / static_cast<double>(train.size() - 1));
    m.c_h = m.c_h.selfadjointView<Eigen::Lower>();
    return m;
}

namespace {

// A = I_Nr (x) X.
CMat kron_identity(int nr, const CMat& x)
{
    CMat a = CMat::Zero(nr * x.rows(), nr * x.cols());
    for (int j = 0; j < nr; ++j)
        a.block(j * x.rows(), j * x.cols(), x.rows(), x.cols()) = x;
    return a;
}

}  // namespace

LmmseEstimator::LmmseEstimator(const LmmseModel& model, const CMat& x) : model_(&model), x_(x)
{
    if (x.cols() != model.nt)
        throw ShapeError("lmmse: pilots have " + std::to_string(x.cols()) + " columns, model Nt = " +
                         std::to_string(model.nt));
    const CMat a = kron_identity(model.nr, x);
    const CMat cah = model.c_h * a.adjoint();
    CMat inner = a * cah;
    inner = (0.5 * (inner + inner.adjoint())).eval();
    jitter_ = 1e-9 * inner.trace().real() / static_cast<double>(inner.rows());
    Eigen::SelfAdjointEigenSolver<CMat> eig(inner);
    if (eig.info() != Eigen::Success)
        throw NumericalError("lmmse: eigendecomposition failed");
    u_ = eig.eigenvectors();
    lambda_ = eig.eigenvalues();
    gain_ = cah * u_;
}

ChannelMatrix LmmseEstimator::estimate(const CMat& y, double sigma2) const
{
    if (y.rows() != x_.rows() || y.cols() != model_->nr)
        throw ShapeError("lmmse: observation is " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
    const CVec a_m = vec(x_ * unvec(model_->mean_h, model_->nt, model_->nr));
    CVec w = u_.adjoint() * (vec(y) - a_m);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double d = lambda_(i) + sigma2 + jitter_;
        if (!(d > 0))
            throw NumericalError("lmmse: singular inner matrix");
        w(i) /= d;
    }
    const CVec h = model_->mean_h + gain_ * w;
    return ChannelMatrix{unvec(h, model_->nt, model_->nr), 0, 0};
}

ChannelMatrix lmmse_estimate(const CMat& y, const CMat& x, const LmmseModel& model, double sigma2)
{
    return LmmseEstimator(model, x).estimate(y, sigma2);
}

}  // namespace lce::baselines
