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

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lce/baselines/baselines.hpp"
#include "lce/bench/config.hpp"
#include "lce/channels/dataset_io.hpp"
#include "lce/psld/psld.hpp"

namespace lce::bench {

enum class Method { Ls, Lmmse, Omp, Fista, PsldCe };

Method parse_method(const std::string& s);
std::string to_string(Method m);

/// One SNR sweep for one pilot configuration.
///
/// Config keys: top-level `profile`; [bench] pilot_kind, np (0 = derive from
/// np_ratio), np_ratio, snr_db, methods, n_test, n_val, seed, output, timing,
/// vae, denoiser, fista_iters; [psld] eta, gamma, t_steps, k_samples,
/// normalize, stop_gradient, chunk; [data] dir.
struct ExperimentConfig {
    channels::Profile profile = channels::Profile::Small;
    channels::PilotKind pilot_kind = channels::PilotKind::QpskRandom;
    int np = 0;
    double np_ratio = 1.0;
    std::vector<double> snr_db{0, 10, 20};
    std::vector<Method> methods{Method::Ls, Method::Lmmse, Method::Omp, Method::Fista, Method::PsldCe};
    std::size_t n_test = 200;
    std::size_t n_val = 100;  // FISTA lambda tuning
    std::uint64_t seed = 0;
    std::string output;       // CSV path; empty = do not write
    bool timing = true;       // false writes time_ms = 0 (byte-stable reruns)
    std::string data_dir = "data";
    std::string vae_path = "models/vae.lcew";
    std::string denoiser_path = "models/denoiser.lcew";
    int fista_iters = 200;
    psld::PsldConfig psld;

    /// Np for a transmitter with `nt` antennas: `np` if set, else
    /// round(np_ratio * nt), at least 1.
    int pilots_for(int nt) const;
    void validate() const;
    static ExperimentConfig from_config(const Config& cfg);
};

struct ResultRow {
    Method method = Method::Ls;
    double snr_db = 0;
    int np = 0;
    channels::PilotKind pilot_kind = channels::PilotKind::QpskRandom;
    double nmse_db = 0;
    double time_ms = 0;
    std::uint64_t seed = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    static const char* csv_header();  // "method,snr_db,np,pilot_kind,nmse_db,time_ms,seed"
    void write_csv(std::ostream& os) const;
    void write_csv(const std::string& path) const;
    /// First row matching (method, snr); throws UsageError if absent.
    const ResultRow& at(Method m, double snr_db) const;
};

/// Datasets and models an experiment needs, loaded on first use.
class Workspace {
public:
    explicit Workspace(const ExperimentConfig& cfg);
    ~Workspace();

    const channels::Dataset& test();
    const channels::Dataset& val();
    const baselines::LmmseModel& lmmse();
    const psld::FrozenModels& models();

private:
    const ExperimentConfig& cfg_;
    std::optional<channels::Dataset> test_, val_;
    std::optional<baselines::LmmseModel> lmmse_;
    std::unique_ptr<psld::FrozenModels> models_;
};

/// Noisy observations of `hs` through `x` at `snr_db`, drawn from one
/// stream seeded with `seed`.
std::vector<channels::Observation> make_observations(std::span<const channels::ChannelMatrix> hs,
                                                     const channels::PilotMatrix& x, double snr_db,
                                                     std::uint64_t seed);

struct CellOutput {
    std::vector<channels::ChannelMatrix> estimates;
    double time_ms = 0;  // per estimate: median for per-sample methods, batch mean for PSLD-CE
    psld::GuidanceTrace trace;
    double fista_lambda = 0;  // chosen grid factor (FISTA only)
};

/// Runs one method on one (pilot, SNR) cell. `cell` indexes the SNR grid
/// and selects the validation-noise and sampler streams.
CellOutput run_method(Method m, Workspace& ws, const ExperimentConfig& cfg, const channels::PilotMatrix& x,
                      std::span<const channels::Observation> obs, double snr_db, std::size_t cell);

/// Every (method, SNR) cell in grid order (SNR outer, methods inner). Writes
/// cfg.output when set; progress goes to `log` if given.
ResultTable run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Stream seeds derived from the experiment seed.
std::uint64_t pilot_seed(std::uint64_t seed);
std::uint64_t test_noise_seed(std::uint64_t seed, std::size_t cell);
std::uint64_t val_noise_seed(std::uint64_t seed, std::size_t cell);
std::uint64_t sampler_seed(std::uint64_t seed, std::size_t cell);

}  // namespace lce::bench
