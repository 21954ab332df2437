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

#include "lce/bench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "lce/bench/pipeline.hpp"
#include "lce/common/error.hpp"
#include "lce/common/rng.hpp"

namespace lce::bench {

using channels::ChannelMatrix;
using channels::Observation;

Method parse_method(const std::string& s)
{
    if (s == "ls")
        return Method::Ls;
    if (s == "lmmse")
        return Method::Lmmse;
    if (s == "omp")
        return Method::Omp;
    if (s == "fista")
        return Method::Fista;
    if (s == "psld_ce")
        return Method::PsldCe;
    throw ConfigError("unknown method '" + s + "' (expected ls, lmmse, omp, fista or psld_ce)");
}

std::string to_string(Method m)
{
    switch (m) {
    case Method::Ls: return "ls";
    case Method::Lmmse: return "lmmse";
    case Method::Omp: return "omp";
    case Method::Fista: return "fista";
    case Method::PsldCe: return "psld_ce";
    }
    return "?";
}

int ExperimentConfig::pilots_for(int nt) const
{
    if (np > 0)
        return np;
    return std::max(1, static_cast<int>(std::lround(np_ratio * nt)));
}

void ExperimentConfig::validate() const
{
    if (snr_db.empty())
        throw ConfigError("experiment: SNR grid is empty");
    if (methods.empty())
        throw ConfigError("experiment: no methods");
    if (n_test == 0)
        throw ConfigError("experiment: n_test must be positive");
    if (np < 0 || !(np_ratio > 0))
        throw ConfigError("experiment: np must be >= 0 and np_ratio > 0");
    if (fista_iters < 1)
        throw ConfigError("experiment: fista_iters must be >= 1");
    for (double s : snr_db)
        if (std::isnan(s))
            throw ConfigError("experiment: NaN in SNR grid");
    psld.validate();
}

ExperimentConfig ExperimentConfig::from_config(const Config& cfg)
{
    cfg.check_section("bench", {"pilot_kind", "np", "np_ratio", "snr_db", "methods", "n_test", "n_val", "seed",
                                "output", "timing", "vae", "denoiser", "fista_iters"});
    cfg.check_section("psld", {"eta", "gamma", "t_steps", "k_samples", "normalize", "stop_gradient", "chunk"});
    ExperimentConfig e;
    e.profile = config_profile(cfg);
    e.pilot_kind = channels::parse_pilot_kind(cfg.get_string("bench.pilot_kind", "qpsk"));
    e.np = static_cast<int>(cfg.get_int("bench.np", 0));
    e.np_ratio = cfg.get_double("bench.np_ratio", e.pilot_kind == channels::PilotKind::DftUnitary ? 1.0 : 0.6);
    e.snr_db = cfg.get_doubles("bench.snr_db", e.snr_db);
    std::vector<std::string> names;
    for (auto m : e.methods)
        names.push_back(to_string(m));
    e.methods.clear();
    for (const auto& n : cfg.get_list("bench.methods", names))
        e.methods.push_back(parse_method(n));
    const auto n_test = cfg.get_int("bench.n_test", static_cast<long long>(e.n_test));
    const auto n_val = cfg.get_int("bench.n_val", static_cast<long long>(e.n_val));
    if (n_test < 1 || n_val < 1)
        throw ConfigError("bench.n_test and bench.n_val must be positive");
    e.n_test = static_cast<std::size_t>(n_test);
    e.n_val = static_cast<std::size_t>(n_val);
    e.seed = static_cast<std::uint64_t>(cfg.get_int("bench.seed", 0));
    e.output = cfg.get_string("bench.output", "");
    e.timing = cfg.get_bool("bench.timing", true);
    e.data_dir = cfg.get_string("data.dir", e.data_dir);
    e.vae_path = cfg.get_string("bench.vae", cfg.get_string("vae.out", e.vae_path));
    e.denoiser_path = cfg.get_string("bench.denoiser", cfg.get_string("ldm.out", e.denoiser_path));
    e.fista_iters = static_cast<int>(cfg.get_int("bench.fista_iters", e.fista_iters));

    auto& p = e.psld;
    p.eta = cfg.get_double("psld.eta", p.eta);
    if (cfg.has("psld.gamma"))
        p.gamma = cfg.get_double("psld.gamma", 0);
    p.t_steps = static_cast<int>(cfg.get_int("psld.t_steps", p.t_steps));
    p.k_samples = static_cast<int>(cfg.get_int("psld.k_samples", p.k_samples));
    p.normalize = cfg.get_bool("psld.normalize", p.normalize);
    p.stop_gradient = cfg.get_bool("psld.stop_gradient", p.stop_gradient);
    p.chunk = static_cast<int>(cfg.get_int("psld.chunk", p.chunk));
    e.validate();
    return e;
}

// -- results -----------------------------------------------------------------------

const char* ResultTable::csv_header()
{
    return "method,snr_db,np,pilot_kind,nmse_db,time_ms,seed";
}

void ResultTable::write_csv(std::ostream& os) const
{
    os << csv_header() << "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%g,%d,%s,%.4f,%.3f,%llu\n", to_string(r.method).c_str(), r.snr_db, r.np,
                      channels::to_string(r.pilot_kind).c_str(), r.nmse_db, r.time_ms,
                      static_cast<unsigned long long>(r.seed));
        os << buf;
    }
}

void ResultTable::write_csv(const std::string& path) const
{
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    write_csv(out);
    if (!out)
        throw IoError("write failed for '" + path + "'");
}

const ResultRow& ResultTable::at(Method m, double snr_db) const
{
    for (const auto& r : rows)
        if (r.method == m && r.snr_db == snr_db)
            return r;
    throw UsageError("no result for " + to_string(m) + " at " + std::to_string(snr_db) + " dB");
}

// -- workspace ---------------------------------------------------------------------------

Workspace::Workspace(const ExperimentConfig& cfg) : cfg_(cfg) {}
Workspace::~Workspace() = default;

const channels::Dataset& Workspace::test()
{
    if (!test_)
        test_ = load_split(cfg_.data_dir, channels::Split::Test);
    return *test_;
}

const channels::Dataset& Workspace::val()
{
    if (!val_)
        val_ = load_split(cfg_.data_dir, channels::Split::Val);
    return *val_;
}

const baselines::LmmseModel& Workspace::lmmse()
{
    if (!lmmse_) {
        const auto train = load_split(cfg_.data_dir, channels::Split::Train);
        lmmse_ = baselines::fit_lmmse(train.channels());
    }
    return *lmmse_;
}

const psld::FrozenModels& Workspace::models()
{
    if (!models_) {
        const auto v = load_vae_checkpoint(cfg_.vae_path);
        const auto d = load_denoiser_checkpoint(cfg_.denoiser_path);
        models_ = std::make_unique<psld::FrozenModels>(v, d);
    }
    return *models_;
}

// -- cells ---------------------------------------------------------------------------------

std::uint64_t pilot_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t test_noise_seed(std::uint64_t seed, std::size_t cell) { return derive_seed(derive_seed(seed, 2), cell); }
std::uint64_t sampler_seed(std::uint64_t seed, std::size_t cell) { return derive_seed(derive_seed(seed, 3), cell); }
std::uint64_t val_noise_seed(std::uint64_t seed, std::size_t cell) { return derive_seed(derive_seed(seed, 4), cell); }

std::vector<Observation> make_observations(std::span<const ChannelMatrix> hs, const channels::PilotMatrix& x,
                                           double snr_db, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<Observation> out;
    out.reserve(hs.size());
    for (const auto& h : hs)
        out.push_back(channels::observe(h, x, snr_db, rng));
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v)
{
    if (v.empty())
        return 0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Applies `f` to every observation, timing each call.
template <class F>
CellOutput per_sample(std::span<const Observation> obs, F&& f)
{
    CellOutput out;
    std::vector<double> times;
    times.reserve(obs.size());
    for (const auto& o : obs) {
        const auto t0 = Clock::now();
        out.estimates.push_back(f(o));
        times.push_back(ms_since(t0));
    }
    out.time_ms = median(std::move(times));
    return out;
}

std::vector<ChannelMatrix> first_channels(const channels::Dataset& ds, std::size_t n, const char* what)
{
    if (ds.count < n)
        throw ConfigError(std::string(what) + " split has " + std::to_string(ds.count) + " samples, " +
                          std::to_string(n) + " requested");
    std::vector<ChannelMatrix> hs;
    hs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        hs.push_back(ds.channel(i));
    return hs;
}

/// Grid factor (times ||Phi^H y||_inf) with the lowest validation NMSE.
double tune_fista(Workspace& ws, const ExperimentConfig& cfg, const channels::PilotMatrix& x,
                  const baselines::AngularDictionary& d, double lip, double snr_db, std::size_t cell)
{
    const auto hs = first_channels(ws.val(), std::min(cfg.n_val, ws.val().count), "validation");
    const auto obs = make_observations(hs, x, snr_db, val_noise_seed(cfg.seed, cell));
    double best = std::numeric_limits<double>::infinity(), best_factor = 0;
    for (double factor : baselines::fista_lambda_grid()) {
        std::vector<ChannelMatrix> est;
        est.reserve(obs.size());
        for (const auto& o : obs) {
            const double lam = factor * baselines::fista_lambda_max(o.y, x.data, d);
            est.push_back(baselines::fista_estimate(o.y, x.data, d, lam, cfg.fista_iters, lip).h);
        }
        const double nmse = channels::nmse_db(hs, est);
        if (nmse < best) {
            best = nmse;
            best_factor = factor;
        }
    }
    return best_factor;
}

}  // namespace

CellOutput run_method(Method m, Workspace& ws, const ExperimentConfig& cfg, const channels::PilotMatrix& x,
                      std::span<const Observation> obs, double snr_db, std::size_t cell)
{
    switch (m) {
    case Method::Ls: {
        const baselines::LsEstimator ls(x.data);
        return per_sample(obs, [&](const Observation& o) { return ls.estimate(o.y); });
    }
    case Method::Lmmse: {
        const baselines::LmmseEstimator lmmse(ws.lmmse(), x.data);
        return per_sample(obs, [&](const Observation& o) { return lmmse.estimate(o.y, o.sigma2); });
    }
    case Method::Omp: {
        const int nr = static_cast<int>(ws.test().nr);
        const auto d = baselines::AngularDictionary::make(static_cast<int>(x.data.cols()), nr);
        const int k = baselines::omp_default_k(x.np(), nr);
        return per_sample(obs, [&](const Observation& o) {
            return baselines::omp_estimate(o.y, x.data, d, k, baselines::omp_default_tol(o.sigma2, x.np(), nr)).h;
        });
    }
    case Method::Fista: {
        const auto d = baselines::AngularDictionary::make(static_cast<int>(x.data.cols()),
                                                          static_cast<int>(ws.test().nr));
        const double lip = baselines::phi_lipschitz(x.data, d);
        const double factor = tune_fista(ws, cfg, x, d, lip, snr_db, cell);
        auto out = per_sample(obs, [&](const Observation& o) {
            const double lam = factor * baselines::fista_lambda_max(o.y, x.data, d);
            return baselines::fista_estimate(o.y, x.data, d, lam, cfg.fista_iters, lip).h;
        });
        out.fista_lambda = factor;
        return out;
    }
    case Method::PsldCe: {
        const auto& fm = ws.models();
        auto pc = cfg.psld;
        pc.seed = sampler_seed(cfg.seed, cell);
        const auto t0 = Clock::now();
        auto res = psld::psld_ce_estimate(obs, x, fm.models(), fm.schedule(), pc);
        CellOutput out;
        out.time_ms = ms_since(t0) / static_cast<double>(std::max<std::size_t>(1, obs.size()));
        out.estimates = std::move(res.estimates);
        out.trace = std::move(res.trace);
        return out;
    }
    }
    throw UsageError("run_method: unknown method");
}

ResultTable run_experiment(const ExperimentConfig& cfg, std::ostream* log)
{
    cfg.validate();
    Workspace ws(cfg);
    const auto& test = ws.test();
    const auto hs = first_channels(test, cfg.n_test, "test");
    const int nt = static_cast<int>(test.nt);
    Rng prng(pilot_seed(cfg.seed));
    const auto x = channels::make_pilots(cfg.pilot_kind, cfg.pilots_for(nt), nt, prng);

    ResultTable table;
    for (std::size_t cell = 0; cell < cfg.snr_db.size(); ++cell) {
        const double snr = cfg.snr_db[cell];
        const auto obs = make_observations(hs, x, snr, test_noise_seed(cfg.seed, cell));
        for (auto m : cfg.methods) {
            const auto out = run_method(m, ws, cfg, x, obs, snr, cell);
            ResultRow row;
            row.method = m;
            row.snr_db = snr;
            row.np = x.np();
            row.pilot_kind = cfg.pilot_kind;
            row.nmse_db = channels::nmse_db(hs, out.estimates);
            row.time_ms = cfg.timing ? out.time_ms : 0.0;
            row.seed = cfg.seed;
            table.rows.push_back(row);
            if (log) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%-8s %s Np=%d SNR %6g dB: NMSE %8.3f dB  (%.3f ms/estimate)\n",
                              to_string(m).c_str(), channels::to_string(cfg.pilot_kind).c_str(), x.np(), snr,
                              row.nmse_db, out.time_ms);
                *log << buf << std::flush;
            }
        }
    }
    if (!cfg.output.empty())
        table.write_csv(cfg.output);
    return table;
}

}  // namespace lce::bench
