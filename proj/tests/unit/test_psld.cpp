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
#include <sstream>

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/psld/psld.hpp"

using namespace lce;
using namespace lce::psld;
using ad::Shape;
using ad::Tensor;
using channels::CMat;

namespace {

constexpr int kNr = 4, kNt = 8, kNp = 5;

// Stub networks: eps(z) = a z, D = E = identity on a (2, Nr, Nt) latent.
struct Stub {
    double a = 0.3;
    double latent_scale = 1.7;

    LatentModels<double> models() const
    {
        LatentModels<double> m;
        const double aa = a;
        m.eps = [aa](const Tensor<double>& z, int) { return ad::scale(z, aa); };
        m.decode = [](const Tensor<double>& z) { return z; };
        m.encode_mean = [](const Tensor<double>& x) { return x; };
        m.latent_shape = {2, kNr, kNt};
        m.latent_scale = latent_scale;
        return m;
    }
};

ldm::DiffusionSchedule sched()
{
    return ldm::make_schedule(50, 1e-3, 0.2);
}

// Complex (Nr, Nt) view of sample b of an (N, 2, Nr, Nt) tensor.
CMat plane(const Tensor<double>& t, std::size_t b)
{
    const std::size_t r = t.dim(2), c = t.dim(3);
    const auto d = t.data();
    CMat m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            m(i, j) = {d[((b * 2) * r + i) * c + j], d[((b * 2 + 1) * r + i) * c + j]};
    return m;
}

Tensor<double> from_planes(const std::vector<CMat>& ms)
{
    const std::size_t r = ms[0].rows(), c = ms[0].cols();
    std::vector<double> v(ms.size() * 2 * r * c);
    for (std::size_t b = 0; b < ms.size(); ++b)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                v[((b * 2) * r + i) * c + j] = ms[b](i, j).real();
                v[((b * 2 + 1) * r + i) * c + j] = ms[b](i, j).imag();
            }
    return Tensor<double>({ms.size(), 2, r, c}, std::move(v));
}

CMat random_cmat(int r, int c, Rng& rng)
{
    CMat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = rng.complex_normal();
    return m;
}

Measurement<double> random_measurement(std::size_t n, Rng& rng, int np = kNp)
{
    std::vector<CMat> ys;
    for (std::size_t i = 0; i < n; ++i)
        ys.push_back(random_cmat(kNr, np, rng));
    return Measurement<double>{random_cmat(np, kNt, rng) / std::sqrt(double(kNt)), from_planes(ys)};
}

double max_rel_diff(const Tensor<double>& a, const Tensor<double>& b)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        num = std::max(num, std::abs(a.data()[i] - b.data()[i]));
        den = std::max(den, std::abs(b.data()[i]));
    }
    return num / std::max(den, 1e-300);
}

}  // namespace

TEST_CASE("tweedie estimate: zero eps and inversion identity")
{
    const auto s = sched();
    Rng rng(1);
    const auto zt = Tensor<double>::randn({3, 2, 4}, rng);
    ldm::EpsFn<double> zero = [](const Tensor<double>& z, int) { return Tensor<double>(z.shape(), 0.0); };
    const auto z0 = tweedie_z0(zt, 20, s, zero);
    for (std::size_t i = 0; i < zt.numel(); ++i)
        CHECK(z0.data()[i] == doctest::Approx(zt.data()[i] / std::sqrt(s.alpha_bar[20])));

    const auto x0 = Tensor<double>::randn({3, 2, 4}, rng);
    const auto d = ldm::forward_diffuse(x0, 33, s, rng);
    ldm::EpsFn<double> oracle = [&](const Tensor<double>&, int) { return d.eps; };
    CHECK(max_rel_diff(tweedie_z0(d.zt, 33, s, oracle), x0) < 1e-6);
    CHECK_THROWS_AS(tweedie_z0(zt, 0, s, zero), DomainError);
}

TEST_CASE("tweedie estimate is differentiable through eps")
{
    const auto s = sched();
    Rng rng(2);
    const Stub stub;
    auto zt = Tensor<double>::randn({2, 2, kNr, kNt}, rng);
    zt.set_requires_grad(true);
    ad::sum_squares(tweedie_z0(zt, 10, s, stub.models().eps)).backward();
    const double k = (1 - std::sqrt(1 - s.alpha_bar[10]) * stub.a) / std::sqrt(s.alpha_bar[10]);
    for (std::size_t i = 0; i < zt.numel(); ++i)
        CHECK(zt.grad()[i] == doctest::Approx(2 * k * k * zt.data()[i]));
}

TEST_CASE("prior step is the noiseless DDPM mean")
{
    const auto s = sched();
    Rng rng(3);
    const auto zt = Tensor<double>::randn({2, 3}, rng);
    ldm::EpsFn<double> zero = [](const Tensor<double>& z, int) { return Tensor<double>(z.shape(), 0.0); };
    const auto z = prior_step(zt, 7, s, zero);
    for (std::size_t i = 0; i < zt.numel(); ++i)
        CHECK(z.data()[i] == doctest::Approx(zt.data()[i] / std::sqrt(s.alpha[7])));

    const Stub stub;
    const auto eps = stub.models().eps(zt, 7);
    CHECK(max_rel_diff(prior_step(zt, 7, s, stub.models().eps), ldm::reverse_mean(zt, eps, 7, s)) == 0);
}

TEST_CASE("guided step matches hand-computed closed forms on linear stubs")
{
    const auto s = sched();
    Rng rng(4);
    const Stub stub;
    const auto models = stub.models();
    const auto m = random_measurement(3, rng);
    const auto zt = Tensor<double>::randn({3, 2, kNr, kNt}, rng);
    const int t = 17;
    const double ab = s.alpha_bar[t], al = s.alpha[t];
    const double k = (1 - std::sqrt(1 - ab) * stub.a) / std::sqrt(ab);  // dZ0/dZt
    const double c = (1 - al) / std::sqrt(al);
    const double sc = stub.latent_scale;
    const CMat xt = m.x.transpose();
    const CMat a_glue = m.x.transpose() * m.x.conjugate();  // I - (I - X^H X)^T

    for (bool normalize : {true, false}) {
        PsldConfig cfg;
        cfg.eta = 0.7;
        cfg.gamma = 0.2;
        cfg.normalize = normalize;
        std::vector<CMat> expect;
        for (std::size_t b = 0; b < 3; ++b) {
            const CMat z = plane(zt, b), y = plane(m.y, b);
            const CMat zp = (z - (1 - al) / std::sqrt(1 - ab) * stub.a * z) / std::sqrt(al);
            // ||Y - sc k Z X^T||^2
            const CMat r = y - sc * k * z * xt;
            CMat g1 = -2.0 * sc * k * r * xt.adjoint();
            if (normalize)
                g1 /= r.norm();
            // ||k Z - (Y conj(X) + sc k Z (I - X^H X)^T) / sc||^2 = ||k Z A - Y conj(X) / sc||^2
            const CMat d = k * z * a_glue - y * m.x.conjugate() / sc;
            CMat g2 = 2.0 * k * d * a_glue.adjoint();
            if (normalize)
                g2 /= d.norm();
            expect.push_back(zp - cfg.eta * c * g1 - cfg.gamma_value() * c * g2);
        }
        StepRecord rec;
        const auto got = guided_step(zt, t, m, models, s, cfg, &rec);
        CHECK(max_rel_diff(got, from_planes(expect)) < 1e-6);
        CHECK(rec.t == t);
        CHECK(rec.residual > 0);
        CHECK(rec.likelihood_step > 0);
        CHECK(rec.gluing_step > 0);

        // Same thing, one line at a time.
        const auto zp = prior_step(zt, t, s, models.eps);
        const auto zpp = likelihood_step(zp, zt, t, m, models, s, cfg.eta, cfg);
        const auto z1 = gluing_step(zpp, zt, t, m, models, s, cfg.gamma_value(), cfg);
        CHECK(max_rel_diff(z1, got) < 1e-12);
    }
}

TEST_CASE("stop-gradient variant differentiates only the explicit zt path")
{
    const auto s = sched();
    Rng rng(5);
    const Stub stub;
    const auto m = random_measurement(1, rng);
    const auto zt = Tensor<double>::randn({1, 2, kNr, kNt}, rng);
    PsldConfig cfg;
    cfg.normalize = false;
    cfg.stop_gradient = true;
    const int t = 30;
    const double ab = s.alpha_bar[t], al = s.alpha[t];
    const double k = (1 - std::sqrt(1 - ab) * stub.a) / std::sqrt(ab);
    const CMat z = plane(zt, 0), y = plane(m.y, 0);
    const CMat r = y - stub.latent_scale * k * z * m.x.transpose();
    const CMat g = -2.0 * stub.latent_scale / std::sqrt(ab) * r * m.x.transpose().adjoint();
    const auto zero = Tensor<double>(zt.shape(), 0.0);
    const auto got = likelihood_step(zero, zt, t, m, stub.models(), s, 1.0, cfg);
    CHECK(max_rel_diff(got, from_planes({CMat(-(1 - al) / std::sqrt(al) * g)})) < 1e-6);
}

TEST_CASE("zero step sizes and zero residuals leave the iterate unchanged")
{
    const auto s = sched();
    Rng rng(6);
    const Stub stub;
    const auto models = stub.models();
    auto m = random_measurement(2, rng);
    const auto zt = Tensor<double>::randn({2, 2, kNr, kNt}, rng);
    const auto zp = Tensor<double>::randn({2, 2, kNr, kNt}, rng);
    PsldConfig cfg;
    CHECK(max_rel_diff(likelihood_step(zp, zt, 5, m, models, s, 0.0, cfg), zp) == 0);
    CHECK(max_rel_diff(gluing_step(zp, zt, 5, m, models, s, 0.0, cfg), zp) == 0);

    // Y = X D(Z0_hat) exactly.
    ldm::EpsFn<double> zero = [](const Tensor<double>& z, int) { return Tensor<double>(z.shape(), 0.0); };
    auto zm = models;
    zm.eps = zero;
    const auto dz = ad::scale(tweedie_z0(zt, 5, s, zero), stub.latent_scale);
    m.y = ad::complex_right_multiply(dz, CMat(m.x.transpose()));
    cfg.normalize = false;
    CHECK(max_rel_diff(likelihood_step(zp, zt, 5, m, zm, s, 3.0, cfg), zp) < 1e-12);
}

TEST_CASE("gluing gradient vanishes at a perfect-autoencoder fixed point")
{
    // Unitary X, noiseless Y = X D(Z0_hat), E = D^-1: glue = D(Z0_hat) and the
    // penalty ||Z0_hat - E(D(Z0_hat))|| is identically zero.
    const auto s = sched();
    Rng rng(7);
    const Stub stub;
    auto models = stub.models();
    Measurement<double> m{channels::dft_matrix(kNt), Tensor<double>()};
    const auto zt = Tensor<double>::randn({2, 2, kNr, kNt}, rng);
    const auto dz = ad::scale(tweedie_z0(zt, 9, s, models.eps), stub.latent_scale);
    m.y = ad::complex_right_multiply(dz, CMat(m.x.transpose()));
    PsldConfig cfg;
    cfg.normalize = false;
    const auto zp = Tensor<double>(zt.shape(), 0.0);
    const auto out = gluing_step(zp, zt, 9, m, models, s, 1.0, cfg);
    double norm = 0;
    for (double v : out.data())
        norm += v * v;
    CHECK(std::sqrt(norm) < 1e-6);
}

namespace {

struct SmallNets {
    vae::Vae<double> vae;
    ldm::Denoiser<double> den;
    ldm::DiffusionSchedule sched;
    LatentModels<double> models;

    explicit SmallNets(Rng& rng)
        : vae(vae::VaeConfig::for_profile(channels::Profile::Small), rng),
          den(
              [] {
                  ldm::DenoiserConfig c;
                  c.latent_h = 2;
                  c.latent_w = 8;
                  c.set_steps(200);
                  return c;
              }(),
              rng),
          sched(den.config().schedule())
    {
        models.eps = [this](const Tensor<double>& z, int t) { return den.forward(z, t); };
        models.decode = [this](const Tensor<double>& z) { return vae.decode(z); };
        models.encode_mean = [this](const Tensor<double>& x) { return vae.encode_mean(x); };
        models.latent_shape = den.config().latent_shape();
        models.latent_scale = 1.3;
        vae.params().set_requires_grad(false);
        den.params().set_requires_grad(false);
    }
};

Measurement<double> small_measurement(std::size_t n, Rng& rng)
{
    std::vector<CMat> ys;
    for (std::size_t i = 0; i < n; ++i)
        ys.push_back(random_cmat(4, 10, rng));
    return Measurement<double>{random_cmat(10, 16, rng) / 4.0, from_planes(ys)};
}

double residual_ss(const Tensor<double>& zt, int t, const Measurement<double>& m, const SmallNets& nets)
{
    ad::NoGradGuard g;
    const auto z0 = tweedie_z0(zt, t, nets.sched, nets.models.eps);
    const auto d = nets.models.decode(ad::scale(z0, nets.models.latent_scale));
    const auto r = ad::sub(m.y, ad::complex_right_multiply(d, CMat(m.x.transpose())));
    double acc = 0;
    for (double v : r.data())
        acc += v * v;
    return acc;
}

double gluing_ss(const Tensor<double>& zt, int t, const Measurement<double>& m, const SmallNets& nets)
{
    ad::NoGradGuard g;
    const auto z0 = tweedie_z0(zt, t, nets.sched, nets.models.eps);
    const auto d = nets.models.decode(ad::scale(z0, nets.models.latent_scale));
    const CMat proj = (CMat::Identity(16, 16) - m.x.adjoint() * m.x).transpose();
    const auto glue = ad::add(ad::complex_right_multiply(m.y, CMat(m.x.conjugate())), ad::complex_right_multiply(d, proj));
    const auto e = ad::scale(nets.models.encode_mean(glue), 1.0 / nets.models.latent_scale);
    const auto diff = ad::sub(z0, e);
    double acc = 0;
    for (double v : diff.data())
        acc += v * v;
    return acc;
}

Tensor<double> perturbed(const Tensor<double>& z, std::size_t i, double h)
{
    std::vector<double> v(z.data().begin(), z.data().end());
    v[i] += h;
    return Tensor<double>(z.shape(), std::move(v));
}

}  // namespace

TEST_CASE("both guidance gradients match finite differences through real networks")
{
    Rng rng(8);
    const SmallNets nets(rng);
    const auto m = small_measurement(2, rng);
    const auto zt = Tensor<double>::randn({2, 8, 2, 8}, rng);
    PsldConfig cfg;
    cfg.normalize = false;
    const int t = 40;
    const double c = (1 - nets.sched.alpha[t]) / std::sqrt(nets.sched.alpha[t]);
    const auto zero = Tensor<double>(zt.shape(), 0.0);
    // out = -c * grad  for step size 1 from a zero base.
    const auto g1 = ad::scale(likelihood_step(zero, zt, t, m, nets.models, nets.sched, 1.0, cfg), -1.0 / c);
    const auto g2 = ad::scale(gluing_step(zero, zt, t, m, nets.models, nets.sched, 1.0, cfg), -1.0 / c);

    double worst1 = 0, worst2 = 0, gmax1 = 0, gmax2 = 0;
    for (std::size_t i = 0; i < zt.numel(); ++i) {
        gmax1 = std::max(gmax1, std::abs(g1.data()[i]));
        gmax2 = std::max(gmax2, std::abs(g2.data()[i]));
    }
    const double h = 1e-5;
    for (std::size_t i = 0; i < zt.numel(); i += 7) {
        const auto zp = perturbed(zt, i, h), zm = perturbed(zt, i, -h);
        const double n1 = (residual_ss(zp, t, m, nets) - residual_ss(zm, t, m, nets)) / (2 * h);
        const double n2 = (gluing_ss(zp, t, m, nets) - gluing_ss(zm, t, m, nets)) / (2 * h);
        worst1 = std::max(worst1, std::abs(n1 - g1.data()[i]) / std::max({std::abs(n1), 1e-6 * gmax1}));
        worst2 = std::max(worst2, std::abs(n2 - g2.data()[i]) / std::max({std::abs(n2), 1e-6 * gmax2}));
    }
    CHECK(worst1 < 1e-4);
    CHECK(worst2 < 1e-4);
}

TEST_CASE("a small step along the likelihood direction reduces the residual")
{
    Rng rng(9);
    const SmallNets nets(rng);
    PsldConfig cfg;
    cfg.normalize = false;
    for (int trial = 0; trial < 5; ++trial) {
        const auto m = small_measurement(1, rng);
        const auto zt = Tensor<double>::randn({1, 8, 2, 8}, rng);
        const int t = 1 + rng.uniform_int(0, 199);
        const auto zero = Tensor<double>(zt.shape(), 0.0);
        const auto step = likelihood_step(zero, zt, t, m, nets.models, nets.sched, 1.0, cfg);  // -c grad
        double gn = 0;
        for (double v : step.data())
            gn += v * v;
        const auto moved = ad::add(zt, ad::scale(step, 1e-4 / std::sqrt(gn)));
        CHECK(residual_ss(moved, t, m, nets) < residual_ss(zt, t, m, nets));
    }
}

TEST_CASE("chain without guidance is the deterministic mean chain and ignores Y")
{
    Rng rng(10);
    const SmallNets nets(rng);
    PsldConfig cfg;
    cfg.eta = 0;
    cfg.gamma = 0;
    cfg.t_steps = 20;
    const auto z = Tensor<double>::randn({2, 8, 2, 8}, rng);
    GuidanceTrace trace;
    const auto a = run_chain(z, small_measurement(2, rng), nets.models, nets.sched, cfg, &trace);
    const auto b = run_chain(z, small_measurement(2, rng), nets.models, nets.sched, cfg);
    CHECK(max_rel_diff(a, b) == 0);
    REQUIRE(trace.steps.size() == 20);
    CHECK(trace.steps.front().t == 20);
    CHECK(trace.steps.back().t == 1);
    for (const auto& r : trace.steps) {
        CHECK(r.likelihood_step == 0);
        CHECK(r.gluing_step == 0);
    }

    auto ref = z;
    for (int t = 20; t >= 1; --t)
        ref = ldm::reverse_mean(ref, nets.den.forward(ref, t), t, nets.sched);
    CHECK(max_rel_diff(a, ref) < 1e-12);

    std::ostringstream os;
    trace.write_csv(os);
    CHECK(os.str().rfind("t,residual,gluing_residual,likelihood_step,gluing_step\n", 0) == 0);
}

TEST_CASE("estimator: determinism, chunking, K-sample averaging and shape errors")
{
    Rng rng(11);
    const auto vcfg = vae::VaeConfig::for_profile(channels::Profile::Small);
    vae::TrainedVae v{vae::Vae<float>(vcfg, rng), 2.0, {}};
    ldm::DenoiserConfig dcfg;
    dcfg.latent_h = 2;
    dcfg.latent_w = 8;
    dcfg.set_steps(200);
    ldm::TrainedDenoiser d{ldm::Denoiser<float>(dcfg, rng), 0.8, 0, {}};
    const FrozenModels frozen(v, d);
    CHECK(!v.model.params().get(v.model.params().names()[0]).data().empty());

    auto ccfg = channels::ChannelModelConfig::for_profile(channels::Profile::Small);
    const auto hs = channels::generate_channels(ccfg, 5, 3);
    const auto x = channels::make_pilots(channels::PilotKind::QpskRandom, 10, 16, rng);
    std::vector<channels::Observation> obs;
    for (const auto& h : hs)
        obs.push_back(channels::observe(h, x, 10.0, rng));

    PsldConfig cfg;
    cfg.t_steps = 10;
    cfg.seed = 4;
    const auto a = psld_ce_estimate(obs, x, frozen.models(), frozen.schedule(), cfg);
    const auto b = psld_ce_estimate(obs, x, frozen.models(), frozen.schedule(), cfg);
    REQUIRE(a.estimates.size() == 5);
    CHECK(a.trace.steps.size() == 10);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.estimates[i].nt() == 16);
        CHECK(a.estimates[i].nr() == 4);
        CHECK((a.estimates[i].data - b.estimates[i].data).norm() == 0);
    }

    cfg.chunk = 2;
    const auto c = psld_ce_estimate(obs, x, frozen.models(), frozen.schedule(), cfg);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK((a.estimates[i].data - c.estimates[i].data).norm() <= 1e-4 * a.estimates[i].data.norm());

    cfg.chunk = 256;
    cfg.k_samples = 3;
    const auto k3 = psld_ce_estimate(obs, x, frozen.models(), frozen.schedule(), cfg);
    CHECK(k3.estimates.size() == 5);

    cfg.k_samples = 0;
    CHECK_THROWS_AS(psld_ce_estimate(obs, x, frozen.models(), frozen.schedule(), cfg), ConfigError);
    cfg.k_samples = 1;
    cfg.t_steps = 500;
    CHECK_THROWS_AS(psld_ce_estimate(obs, x, frozen.models(), frozen.schedule(), cfg), ConfigError);

    auto bad = dcfg;
    bad.latent_channels = 4;
    bad.width = 12;
    ldm::TrainedDenoiser d2{ldm::Denoiser<float>(bad, rng), 1.0, 0, {}};
    CHECK_THROWS_AS(FrozenModels(v, d2), ConfigError);

    const auto x2 = channels::make_pilots(channels::PilotKind::QpskRandom, 10, 8, rng);
    CHECK_THROWS_AS(psld_ce_estimate(obs, x2, frozen.models(), frozen.schedule(), PsldConfig{}), ShapeError);
}
