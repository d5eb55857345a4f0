// Copyright 2026 The kerrmetro Authors.

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver for the Kerr interferometer scans.
//
//   kerrmetro --command qfi-scan --n-range 20:100:10 --eta 0.9,1.0 --out fig2.csv
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kerrmetro/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

namespace ex = kerrmetro::experiment;

struct Flags {
    std::string command;
    std::string n_range;
    std::string eta;
    double chi = 0.0;
    double phi = 0.0;
    int k = 0;
    int m = 0;
    std::vector<double> alpha;
    int grid_points = 0;
    std::uint64_t seed = 0;
    int restarts = 0;
    int max_n = 0;
    unsigned threads = 0;
    std::string out;
    std::string cache;
    std::string format;
    std::string config;
    bool verbose = false;
};

int emit(const ex::RunOutput &run) {
    if (run.config.out.empty()) {
        ex::write(std::cout, run);
    } else {
        std::ofstream file(run.config.out);
        if (!file) {
            spdlog::error("cannot open {} for writing", run.config.out);
            return kExitConfig;
        }
        ex::write(file, run);
        spdlog::info("wrote {} records to {}", run.records.size(), run.config.out);
    }
    if (run.failure) {
        spdlog::error("numerical failure: {}", *run.failure);
        return kExitNumerical;
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("kerrmetro"));

    CLI::App app{"Kerr-nonlinear interferometer metrology scans"};
    app.set_version_flag("--version", std::string(ex::kCodeVersion));
    Flags f;
    auto *command = app.add_option("--command", f.command,
                                   "pure-qfi | qfi-scan | optimize-scan | readout-scan | single");
    auto *n_range = app.add_option("--n-range", f.n_range, "photon numbers A:B:S");
    auto *eta = app.add_option("--eta", f.eta, "comma-separated transmissivities");
    auto *chi = app.add_option("--chi", f.chi, "Kerr strength (default 1e-8)");
    auto *phi = app.add_option("--phi", f.phi, "evaluation phase (default 0)");
    auto *k = app.add_option("--k", f.k, "N00N-type branch index");
    auto *m = app.add_option("--m", f.m, "coincidence order of the readout (default N)");
    auto *alpha = app.add_option("--alpha", f.alpha, "superposition coefficients (single)")
                      ->delimiter(',');
    auto *grid = app.add_option("--grid-points", f.grid_points, "phase grid size on [0, pi]");
    auto *seed = app.add_option("--seed", f.seed, "optimizer seed");
    auto *restarts = app.add_option("--restarts", f.restarts, "random optimizer restarts");
    auto *max_n = app.add_option("--max-n", f.max_n, "upper bound on N");
    auto *threads = app.add_option("--threads", f.threads, "worker threads (0 = all cores)");
    auto *out = app.add_option("--out", f.out, "output file (default stdout)");
    auto *cache = app.add_option("--cache", f.cache, "optimization cache directory");
    auto *format = app.add_option("--format", f.format, "csv | json");
    app.add_option("--config", f.config, "JSON config file; flags override its values");
    app.add_flag("-v,--verbose", f.verbose, "debug logging");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitConfig;
    }
    spdlog::set_level(f.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        ex::ExperimentConfig config;
        if (!f.config.empty()) {
            config = ex::load_config_file(f.config);
        }
        if (*command) {
            config.command = ex::parse_command(f.command);
        }
        if (*n_range) {
            config.n_range = ex::parse_n_range(f.n_range);
        }
        if (*eta) {
            config.eta_list = ex::parse_eta_list(f.eta);
        }
        if (*chi) {
            config.chi = f.chi;
        }
        if (*phi) {
            config.phi = f.phi;
        }
        if (*k) {
            config.k = f.k;
        }
        if (*m) {
            config.m = f.m;
        }
        if (*alpha) {
            config.alpha = f.alpha;
        }
        if (*grid) {
            config.grid_points = f.grid_points;
        }
        if (*seed) {
            config.seed = f.seed;
        }
        if (*restarts) {
            config.restarts = f.restarts;
        }
        if (*max_n) {
            config.max_n = f.max_n;
        }
        if (*threads) {
            config.threads = f.threads;
        }
        if (*out) {
            config.out = f.out;
        }
        if (*cache) {
            config.cache_dir = f.cache;
        }
        if (*format) {
            config.format = ex::parse_format(f.format);
        }
        if (config.command == ex::Command::single && !*command && f.config.empty()) {
            spdlog::info("no --command given; running a single point");
        }
        return emit(ex::run(config));
    } catch (const kerrmetro::ConfigError &e) {
        spdlog::error("configuration error: {}", e.what());
        return kExitConfig;
    } catch (const kerrmetro::TruncationError &e) {
        spdlog::error("configuration error: {}", e.what());
        return kExitConfig;
    } catch (const kerrmetro::UndefinedBoundError &e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    } catch (const std::runtime_error &e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    }
}
