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

// Guided reverse step. Everything here lives in the tensor layout, where a
// channel is stored as H^T planes, so Y = X H becomes Y^T = H^T X^T: the
// measurement operator is a right-multiplication by X^T, and the gluing map
// X^H Y + (I - X^H X) H becomes Y^T conj(X) + H^T (I - X^H X)^T.

#include <cmath>

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/psld/psld.hpp"

namespace lce::psld {

namespace {

using ad::Tensor;
using ldm::DiffusionSchedule;

constexpr double kNormFloor = 1e-8;

void check_t(int t, const DiffusionSchedule& s)
{
    if (t < 1 || t > s.T)
        throw DomainError("timestep " + std::to_string(t) + " outside 1.." + std::to_string(s.T));
}

template <class T>
std::vector<double> per_chain_sum_squares(const Tensor<T>& a)
{
    const std::size_t n = a.dim(0), per = a.numel() / n;
    const auto v = a.data();
    std::vector<double> out(n, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < per; ++j)
            out[b] += static_cast<double>(v[b * per + j]) * v[b * per + j];
    return out;
}

template <class T>
std::vector<T> guidance_weights(const std::vector<double>& ss, bool normalize)
{
    std::vector<T> w(ss.size(), T(1));
    if (normalize)
        for (std::size_t i = 0; i < ss.size(); ++i)
            w[i] = static_cast<T>(1.0 / std::max(std::sqrt(ss[i]), kNormFloor));
    return w;
}

double mean_norm(const std::vector<double>& ss)
{
    double acc = 0;
    for (double v : ss)
        acc += std::sqrt(v);
    return ss.empty() ? 0.0 : acc / static_cast<double>(ss.size());
}

// Tracked forward pass shared by both guidance terms.
template <class T>
struct Forward {
    Tensor<T> zt;  // fresh leaf
    Tensor<T> eps;
    Tensor<T> z0;
    Tensor<T> dhat;  // D(z0 * latent_scale), (N, 2, Nr, Nt)
};

template <class T>
Forward<T> forward(const Tensor<T>& z, int t, const LatentModels<T>& models, const DiffusionSchedule& s,
                   bool stop_gradient)
{
    Forward<T> f;
    f.zt = z.detach();
    f.zt.set_requires_grad(true);
    f.eps = models.eps(f.zt, t);
    f.z0 = tweedie_z0(f.zt, stop_gradient ? f.eps.detach() : f.eps, t, s);
    f.dhat = models.decode(ad::scale(f.z0, static_cast<T>(models.latent_scale)));
    return f;
}

template <class T>
void check_measurement(const Forward<T>& f, const Measurement<T>& m)
{
    const auto& d = f.dhat.shape();
    const auto& y = m.y.shape();
    if (y.size() != 4 || y[0] != d[0] || y[1] != 2 || y[2] != d[2] || y[3] != static_cast<std::size_t>(m.x.rows()) ||
        static_cast<std::size_t>(m.x.cols()) != d[3])
        throw ShapeError("measurement " + ad::shape_str(y) + " with pilots (" + std::to_string(m.x.rows()) + ", " +
                         std::to_string(m.x.cols()) + ") does not match decoder output " + ad::shape_str(d));
}

template <class T>
Tensor<T> residual(const Forward<T>& f, const Measurement<T>& m)
{
    check_measurement(f, m);
    return ad::sub(m.y, ad::complex_right_multiply(f.dhat, channels::CMat(m.x.transpose())));
}

// Z0_hat - E(glue) / latent_scale.
template <class T>
Tensor<T> gluing_residual(const Forward<T>& f, const Measurement<T>& m, const LatentModels<T>& models)
{
    check_measurement(f, m);
    const auto nt = m.x.cols();
    const channels::CMat proj = (channels::CMat::Identity(nt, nt) - m.x.adjoint() * m.x).transpose();
    Tensor<T> glue_y;
    {
        ad::NoGradGuard no_grad;
        glue_y = ad::complex_right_multiply(m.y, channels::CMat(m.x.conjugate()));
    }
    const auto glue = ad::add(glue_y, ad::complex_right_multiply(f.dhat, proj));
    const auto e = ad::scale(models.encode_mean(glue), static_cast<T>(1.0 / models.latent_scale));
    return ad::sub(f.z0, e);
}

// grad_{zt} of sum_n w_n ||a_n||^2; `retain` keeps the graph for a second term.
template <class T>
Tensor<T> weighted_gradient(Forward<T>& f, const Tensor<T>& a, const std::vector<T>& w, bool retain)
{
    f.zt.zero_grad();
    ad::weighted_sum_squares(a, std::span<const T>(w)).backward(retain);
    if (!f.zt.has_grad())
        return Tensor<T>(f.zt.shape(), T(0));
    const auto g = f.zt.grad();
    return Tensor<T>(f.zt.shape(), std::vector<T>(g.begin(), g.end()));
}

template <class T>
T step_coefficient(int t, const DiffusionSchedule& s)
{
    return static_cast<T>((1.0 - s.alpha[t]) / std::sqrt(s.alpha[t]));
}

template <class T>
Tensor<T> axpy(const Tensor<T>& z, T a, const Tensor<T>& g)
{
    ad::NoGradGuard no_grad;
    return ad::sub(z, ad::scale(g, a));
}

}  // namespace

template <class T>
Tensor<T> tweedie_z0(const Tensor<T>& zt, const Tensor<T>& eps, int t, const DiffusionSchedule& s)
{
    check_t(t, s);
    const T inv = static_cast<T>(1.0 / std::sqrt(s.alpha_bar[t]));
    const T c = static_cast<T>(std::sqrt(1.0 - s.alpha_bar[t]));
    return ad::scale(ad::sub(zt, ad::scale(eps, c)), inv);
}

template <class T>
Tensor<T> tweedie_z0(const Tensor<T>& zt, int t, const DiffusionSchedule& s, const ldm::EpsFn<T>& eps)
{
    return tweedie_z0(zt, eps(zt, t), t, s);
}

template <class T>
Tensor<T> prior_step(const Tensor<T>& zt, int t, const DiffusionSchedule& s, const ldm::EpsFn<T>& eps)
{
    ad::NoGradGuard no_grad;
    const auto z = zt.detach();
    return ldm::reverse_mean(z, eps(z, t), t, s);
}

template <class T>
Tensor<T> likelihood_step(const Tensor<T>& z_prime, const Tensor<T>& zt, int t, const Measurement<T>& m,
                          const LatentModels<T>& models, const DiffusionSchedule& s, double eta,
                          const PsldConfig& opt)
{
    check_t(t, s);
    if (eta == 0)
        return z_prime.detach();
    auto f = forward(zt, t, models, s, opt.stop_gradient);
    const auto r = residual(f, m);
    const auto g = weighted_gradient(f, r, guidance_weights<T>(per_chain_sum_squares(r), opt.normalize), false);
    return axpy(z_prime, static_cast<T>(eta) * step_coefficient<T>(t, s), g);
}

template <class T>
Tensor<T> gluing_step(const Tensor<T>& z_dprime, const Tensor<T>& zt, int t, const Measurement<T>& m,
                      const LatentModels<T>& models, const DiffusionSchedule& s, double gamma, const PsldConfig& opt)
{
    check_t(t, s);
    if (gamma == 0)
        return z_dprime.detach();
    auto f = forward(zt, t, models, s, opt.stop_gradient);
    const auto d = gluing_residual(f, m, models);
    const auto g = weighted_gradient(f, d, guidance_weights<T>(per_chain_sum_squares(d), opt.normalize), false);
    return axpy(z_dprime, static_cast<T>(gamma) * step_coefficient<T>(t, s), g);
}

template <class T>
Tensor<T> guided_step(const Tensor<T>& zt, int t, const Measurement<T>& m, const LatentModels<T>& models,
                      const DiffusionSchedule& s, const PsldConfig& cfg, StepRecord* record)
{
    check_t(t, s);
    const double eta = cfg.eta, gamma = cfg.gamma_value();
    const T c = step_coefficient<T>(t, s);

    if (eta == 0 && gamma == 0) {
        // Unguided: nothing to differentiate.
        ad::NoGradGuard no_grad;
        auto f = forward(zt, t, models, s, true);
        const auto out = ldm::reverse_mean(f.zt.detach(), f.eps, t, s);
        if (record) {
            *record = StepRecord{t, mean_norm(per_chain_sum_squares(residual(f, m))),
                                 mean_norm(per_chain_sum_squares(gluing_residual(f, m, models))), 0, 0};
        }
        return out;
    }

    auto f = forward(zt, t, models, s, cfg.stop_gradient);
    Tensor<T> out;
    {
        ad::NoGradGuard no_grad;
        out = ldm::reverse_mean(f.zt.detach(), f.eps.detach(), t, s);
    }
    StepRecord rec{t, 0, 0, 0, 0};

    const auto r = residual(f, m);
    const auto rss = per_chain_sum_squares(r);
    rec.residual = mean_norm(rss);
    if (eta != 0) {
        const auto g = weighted_gradient(f, r, guidance_weights<T>(rss, cfg.normalize), gamma != 0);
        const auto delta = ad::scale(g, static_cast<T>(eta) * c);
        rec.likelihood_step = mean_norm(per_chain_sum_squares(delta));
        out = axpy(out, T(1), delta);
    }

    Tensor<T> d;
    if (gamma != 0) {
        d = gluing_residual(f, m, models);
    } else if (record) {
        ad::NoGradGuard no_grad;
        d = gluing_residual(f, m, models);
    }
    if (d.defined()) {
        const auto dss = per_chain_sum_squares(d);
        rec.gluing_residual = mean_norm(dss);
        if (gamma != 0) {
            const auto g = weighted_gradient(f, d, guidance_weights<T>(dss, cfg.normalize), false);
            const auto delta = ad::scale(g, static_cast<T>(gamma) * c);
            rec.gluing_step = mean_norm(per_chain_sum_squares(delta));
            out = axpy(out, T(1), delta);
        }
    }
    if (record)
        *record = rec;
    return out;
}

template <class T>
Tensor<T> run_chain(Tensor<T> z, const Measurement<T>& m, const LatentModels<T>& models, const DiffusionSchedule& s,
                    const PsldConfig& cfg, GuidanceTrace* trace)
{
    const int steps = cfg.t_steps > 0 ? cfg.t_steps : s.T;
    if (steps > s.T)
        throw ConfigError("t_steps " + std::to_string(steps) + " exceeds the schedule length " + std::to_string(s.T));
    for (int t = steps; t >= 1; --t) {
        StepRecord rec;
        z = guided_step(z, t, m, models, s, cfg, trace ? &rec : nullptr);
        for (T v : z.data())
            if (!std::isfinite(v))
                throw NumericalError("guided chain diverged at t = " + std::to_string(t));
        if (trace)
            trace->steps.push_back(rec);
    }
    return z;
}

#define LCE_INSTANTIATE(T)                                                                                        \
    template Tensor<T> tweedie_z0(const Tensor<T>&, const Tensor<T>&, int, const DiffusionSchedule&);            \
    template Tensor<T> tweedie_z0(const Tensor<T>&, int, const DiffusionSchedule&, const ldm::EpsFn<T>&);        \
    template Tensor<T> prior_step(const Tensor<T>&, int, const DiffusionSchedule&, const ldm::EpsFn<T>&);        \
    template Tensor<T> likelihood_step(const Tensor<T>&, const Tensor<T>&, int, const Measurement<T>&,           \
                                       const LatentModels<T>&, const DiffusionSchedule&, double, const PsldConfig&); \
    template Tensor<T> gluing_step(const Tensor<T>&, const Tensor<T>&, int, const Measurement<T>&,               \
                                   const LatentModels<T>&, const DiffusionSchedule&, double, const PsldConfig&);  \
    template Tensor<T> guided_step(const Tensor<T>&, int, const Measurement<T>&, const LatentModels<T>&,          \
                                   const DiffusionSchedule&, const PsldConfig&, StepRecord*);                    \
    template Tensor<T> run_chain(Tensor<T>, const Measurement<T>&, const LatentModels<T>&,                       \
                                 const DiffusionSchedule&, const PsldConfig&, GuidanceTrace*);

LCE_INSTANTIATE(float)
LCE_INSTANTIATE(double)
#undef LCE_INSTANTIATE

}  // namespace lce::psld
