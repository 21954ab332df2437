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

#include <span>
#include <vector>

#include <Eigen/Core>

#include "lce/channels/channels.hpp"

namespace lce::baselines {

using channels::ChannelMatrix;
using channels::CMat;
using CVec = Eigen::VectorXcd;

/// Column-major vec(H): rx antenna j occupies entries [j Nt, (j + 1) Nt).
CVec vec(const CMat& m);
CMat unvec(const CVec& v, int rows, int cols);

// -- least squares ----------------------------------------------------------------

/// H_hat = X^+ Y with the pseudo-inverse from a complex SVD (minimum-norm
/// solution when Np < Nt). The pseudo-inverse is computed once per pilot matrix.
class LsEstimator {
public:
    explicit LsEstimator(const CMat& x);
    ChannelMatrix estimate(const CMat& y) const;
    /// True when rank(X) < min(Np, Nt); the estimate is still X^+ Y.
    bool rank_deficient() const { return rank_deficient_; }

private:
    CMat pinv_;
    bool rank_deficient_ = false;
};

ChannelMatrix ls_estimate(const CMat& y, const CMat& x);

// -- LMMSE --------------------------------------------------------------------------

struct LmmseModel {
    CMat c_h;     // (Nt Nr)^2 sample covariance of vec(H)
    CVec mean_h;
    int nt = 0, nr = 0;
    int n_train = 0;
};

LmmseModel fit_lmmse(std::span<const ChannelMatrix> train);

/// h_hat = m + C A^H (A C A^H + sigma2 I)^-1 (vec(Y) - A m), A = I_Nr (x) X.
/// A C A^H is eigendecomposed once per pilot matrix, so every noise level
/// reuses the same factorization. Keeps a reference to `model`.
class LmmseEstimator {
public:
    LmmseEstimator(const LmmseModel& model, const CMat& x);
    ChannelMatrix estimate(const CMat& y, double sigma2) const;

private:
    const LmmseModel* model_;
    CMat x_;
    CMat u_;        // eigenvectors of A C A^H
    Eigen::VectorXd lambda_;
    CMat gain_;     // C A^H U
    double jitter_ = 0;
};

ChannelMatrix lmmse_estimate(const CMat& y, const CMat& x, const LmmseModel& model, double sigma2);

// -- sparse recovery in the angular domain ----------------------------------------------

/// Virtual-channel dictionary: H = F_t S F_r^H with unitary DFT matrices, so
/// vec(Y) = Phi vec(S), Phi = conj(F_r) (x) X F_t.
struct AngularDictionary {
    CMat f_t, f_r;
    static AngularDictionary make(int nt, int nr);
};

/// Phi s and Phi^H r, applied as composed matrix products.
CVec apply_phi(const CMat& xft, const AngularDictionary& d, const CVec& s);
CVec apply_phi_adjoint(const CMat& xft, const AngularDictionary& d, const CVec& r);

struct OmpResult {
    ChannelMatrix h;
    std::vector<int> support;           // atom indices in selection order
    std::vector<double> residual_norms;  // after each iteration (first = ||y||)
};

/// Greedy atom selection by maximal normalized correlation, least-squares
/// re-fit on the active set (incremental QR), stop after k_max atoms or when
/// ||r|| < tol.
OmpResult omp_estimate(const CMat& y, const CMat& x, const AngularDictionary& d, int k_max, double tol);

/// Defaults: k_max = Np Nr / 4, tol = sqrt(sigma2 Np Nr).
int omp_default_k(int np, int nr);
double omp_default_tol(double sigma2, int np, int nr);

struct FistaResult {
    ChannelMatrix h;
    CVec s;
    std::vector<double> objective;  // per iteration
};

/// FISTA on 1/2 ||vec(Y) - Phi s||^2 + lambda ||s||_1 with step 1/L, L the
/// largest eigenvalue of Phi^H Phi (power iteration), phase-preserving
/// complex soft-thresholding. Pass `lipschitz` > 0 to reuse a precomputed L.
FistaResult fista_estimate(const CMat& y, const CMat& x, const AngularDictionary& d, double lambda, int n_iter,
                           double lipschitz = 0);

/// ||Phi^H vec(Y)||_inf, the smallest lambda that zeroes the solution.
double fista_lambda_max(const CMat& y, const CMat& x, const AngularDictionary& d);

/// Largest eigenvalue of Phi^H Phi by power iteration.
double phi_lipschitz(const CMat& x, const AngularDictionary& d);

/// {1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1}.
std::vector<double> fista_lambda_grid();

}  // namespace lce::baselines
