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

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "kerrmetro/estimation.hpp"
#include "kerrmetro/optimizer.hpp"
#include "kerrmetro/parallel.hpp"

#ifndef KERRMETRO_VERSION
#define KERRMETRO_VERSION "0.0.0"
#endif

namespace kerrmetro::experiment {

using Json = nlohmann::ordered_json;

inline constexpr const char *kCodeVersion = KERRMETRO_VERSION;
/// Bumped whenever a change to the optimizer invalidates cached results.
inline constexpr const char *kOptimizerVersion = "simplex-hyperspherical-1";

inline constexpr const char *kCsvColumns = "command,N,k_or_alpha_digest,eta,chi,phi_star,qfi,"
                                           "qcrb,delta_phi_min,wall_time_ms,seed,code_version";

enum class Command { pure_qfi, qfi_scan, optimize_scan, readout_scan, single };
enum class Format { csv, json };

inline std::string to_string(Command c) {
    switch (c) {
    case Command::pure_qfi:
        return "pure-qfi";
    case Command::qfi_scan:
        return "qfi-scan";
    case Command::optimize_scan:
        return "optimize-scan";
    case Command::readout_scan:
        return "readout-scan";
    case Command::single:
        return "single";
    }
    return "?";
}

inline Command parse_command(const std::string &s) {
    for (Command c : {Command::pure_qfi, Command::qfi_scan, Command::optimize_scan,
                      Command::readout_scan, Command::single}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    throw ConfigError("unknown command '" + s + "'");
}

inline Format parse_format(const std::string &s) {
    if (s == "csv") {
        return Format::csv;
    }
    if (s == "json") {
        return Format::json;
    }
    throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

namespace detail {

inline long parse_integer(const std::string &s, const char *what) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception &) {
        throw ConfigError(std::string("invalid ") + what + " '" + s + "'");
    }
}

inline double parse_real(const std::string &s, const char *what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception &) {
        throw ConfigError(std::string("invalid ") + what + " '" + s + "'");
    }
}

inline std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        parts.push_back(item);
    }
    if (!s.empty() && s.back() == sep) {
        parts.emplace_back();
    }
    return parts;
}

} // namespace detail

/// "A", "A:B" or "A:B:S" (inclusive, step S defaulting to 1).
inline std::vector<int> parse_n_range(const std::string &spec) {
    const auto parts = detail::split(spec, ':');
    if (parts.empty() || parts.size() > 3) {
        throw ConfigError("n-range must look like A:B:S, got '" + spec + "'");
    }
    const long a = detail::parse_integer(parts[0], "n-range start");
    const long b = parts.size() > 1 ? detail::parse_integer(parts[1], "n-range end") : a;
    const long step = parts.size() > 2 ? detail::parse_integer(parts[2], "n-range step") : 1;
    if (a < 1 || b < a || step < 1) {
        throw ConfigError("n-range '" + spec + "' is empty or has N < 1");
    }
    std::vector<int> out;
    for (long n = a; n <= b; n += step) {
        out.push_back(static_cast<int>(n));
    }
    return out;
}

/// Comma-separated transmissivities, e.g. "0.9,1.0".
inline std::vector<double> parse_eta_list(const std::string &spec) {
    std::vector<double> out;
    for (const auto &p : detail::split(spec, ',')) {
        out.push_back(detail::parse_real(p, "eta"));
    }
    if (out.empty()) {
        throw ConfigError("empty eta list");
    }
    return out;
}

struct ExperimentConfig {
    Command command = Command::single;
    /// Empty means the per-command default (see resolved()).
    std::vector<int> n_range;
    std::vector<double> eta_list{1.0};
    double chi = 1e-8;
    double phi = 0.0;
    std::optional<int> k;
    std::optional<int> m;
    std::optional<std::vector<double>> alpha;
    int grid_points = 2001;
    std::uint64_t seed = 0;
    int restarts = 16;
    std::optional<int> max_n;
    std::string out;
    std::string cache_dir;
    Format format = Format::csv;
    /// Worker threads for scan points; 0 uses every hardware thread.
    unsigned threads = 0;

    /// Fill per-command defaults and apply --max-n.
    [[nodiscard]] ExperimentConfig resolved() const {
        ExperimentConfig c = *this;
        const bool optimizing = c.command == Command::optimize_scan ||
                                (c.command == Command::readout_scan && !c.k.has_value());
        if (optimizing && !c.max_n) {
            c.max_n = 15;
        }
        if (c.n_range.empty()) {
            switch (c.command) {
            case Command::qfi_scan:
                c.n_range = parse_n_range("10:100:10");
                break;
            case Command::pure_qfi:
                c.n_range = parse_n_range("1:20");
                break;
            case Command::optimize_scan:
            case Command::readout_scan:
                c.n_range = parse_n_range("1:" + std::to_string(*c.max_n));
                break;
            case Command::single:
                c.n_range = {1};
                break;
            }
        }
        if (c.max_n) {
            const auto before = c.n_range.size();
            std::erase_if(c.n_range, [&](int n) { return n > *c.max_n; });
            if (c.n_range.size() != before) {
                spdlog::warn("dropping {} N values above --max-n {}", before - c.n_range.size(),
                             *c.max_n);
            }
        }
        return c;
    }

    void validate() const {
        if (n_range.empty()) {
            throw ConfigError("N range is empty");
        }
        for (int n : n_range) {
            if (n < 1) {
                throw ConfigError("N must be >= 1");
            }
        }
        if (eta_list.empty()) {
            throw ConfigError("eta list is empty");
        }
        for (double eta : eta_list) {
            LossParams::equal(eta).validate();
        }
        if (!(chi >= 0.0) || !std::isfinite(chi)) {
            throw ConfigError("chi must be a finite non-negative number");
        }
        if (!std::isfinite(phi)) {
            throw ConfigError("phi must be finite");
        }
        if (grid_points < 1) {
            throw ConfigError("grid-points must be >= 1");
        }
        if (restarts < 1) {
            throw ConfigError("restarts must be >= 1");
        }
        if (k && alpha) {
            throw ConfigError("give either k or alpha, not both");
        }
        for (int n : n_range) {
            if (k && (*k < 0 || *k > n)) {
                throw ConfigError("k must lie in [0, N] for every N in the range");
            }
            if (alpha && alpha->size() != static_cast<std::size_t>(SuperpositionSpec::tau(n) + 1)) {
                throw ConfigError("alpha must have floor(N/2)+1 entries");
            }
        }
        if (m && *m < 1) {
            throw ConfigError("m must be >= 1");
        }
        if (max_n && *max_n < 1) {
            throw ConfigError("max-n must be >= 1");
        }
    }

    [[nodiscard]] Json to_json() const {
        Json j;
        j["command"] = to_string(command);
        j["n_range"] = n_range;
        j["eta"] = eta_list;
        j["chi"] = chi;
        j["phi"] = phi;
        j["k"] = k ? Json(*k) : Json(nullptr);
        j["m"] = m ? Json(*m) : Json(nullptr);
        j["alpha"] = alpha ? Json(*alpha) : Json(nullptr);
        j["grid_points"] = grid_points;
        j["seed"] = seed;
        j["restarts"] = restarts;
        j["max_n"] = max_n ? Json(*max_n) : Json(nullptr);
        j["format"] = format == Format::csv ? "csv" : "json";
        j["threads"] = threads;
        return j;
    }

    /// Overlay the fields present in a JSON config document.
    void merge_json(const Json &j) {
        if (!j.is_object()) {
            throw ConfigError("config file must hold a JSON object");
        }
        try {
            for (const auto &[key, value] : j.items()) {
                if (key == "command") {
                    command = parse_command(value.get<std::string>());
                } else if (key == "n_range") {
                    n_range = value.is_string() ? parse_n_range(value.get<std::string>())
                                                : value.get<std::vector<int>>();
                } else if (key == "eta") {
                    eta_list = value.is_array() ? value.get<std::vector<double>>()
                                                : std::vector<double>{value.get<double>()};
                } else if (key == "chi") {
                    chi = value.get<double>();
                } else if (key == "phi") {
                    phi = value.get<double>();
                } else if (key == "k") {
                    k = value.is_null() ? std::nullopt : std::optional<int>(value.get<int>());
                } else if (key == "m") {
                    m = value.is_null() ? std::nullopt : std::optional<int>(value.get<int>());
                } else if (key == "alpha") {
                    alpha = value.is_null() ? std::nullopt
                                            : std::optional(value.get<std::vector<double>>());
                } else if (key == "grid_points") {
                    grid_points = value.get<int>();
                } else if (key == "seed") {
                    seed = value.get<std::uint64_t>();
                } else if (key == "restarts") {
                    restarts = value.get<int>();
                } else if (key == "max_n") {
                    max_n = value.is_null() ? std::nullopt : std::optional<int>(value.get<int>());
                } else if (key == "out") {
                    out = value.get<std::string>();
                } else if (key == "cache") {
                    cache_dir = value.get<std::string>();
                } else if (key == "format") {
                    format = parse_format(value.get<std::string>());
                } else if (key == "threads") {
                    threads = value.get<unsigned>();
                } else {
                    throw ConfigError("unknown config key '" + key + "'");
                }
            }
        } catch (const Json::exception &e) {
            throw ConfigError(std::string("malformed config value: ") + e.what());
        }
    }
};

inline ExperimentConfig load_config_file(const std::filesystem::path &path,
                                         ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception &e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    base.merge_json(j);
    return base;
}

struct ResultRecord {
    std::string command;
    int N = 0;
    std::string k_or_alpha_digest;
    double eta = 1.0;
    double chi = 0.0;
    double phi_star = 0.0;
    double qfi = 0.0;
    /// 1/sqrt(qfi); +inf when qfi = 0.
    double qcrb = std::numeric_limits<double>::infinity();
    /// NaN when the command does not evaluate a readout.
    double delta_phi_min = std::numeric_limits<double>::quiet_NaN();
    double wall_time_ms = 0.0;
    std::uint64_t seed = 0;
    std::string code_version = kCodeVersion;
    /// Fields beyond the fixed CSV columns (JSON output only).
    Json extras = Json::object();
};

inline double qcrb_or_inf(double qfi_value) {
    return qfi_value > 0.0 ? qcrb(qfi_value) : std::numeric_limits<double>::infinity();
}

struct RunOutput {
    ExperimentConfig config;
    std::vector<ResultRecord> records;
    /// Per-command summary (e.g. fitted slopes), echoed as CSV comments.
    Json summary = Json::object();
    /// Set when the run stopped on an unrecoverable numerical error.
    std::optional<std::string> failure;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex_digest(std::string_view data) {
    return fmt::format("{:016x}", fnv1a64(data));
}

inline std::string alpha_digest(const std::vector<double> &alpha) {
    std::string bytes;
    for (double a : alpha) {
        bytes += fmt::format("{:.17g};", a);
    }
    return "alpha:" + hex_digest(bytes);
}

inline std::string k_label(int k) { return "k=" + std::to_string(k); }

/// Least-squares slope of log(y) against log(x) over the points with y > 0.
inline std::optional<double> loglog_slope(const std::vector<double> &x,
                                          const std::vector<double> &y) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            const double lx = std::log(x[i]);
            const double ly = std::log(y[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++count;
        }
    }
    const double denom = count * sxx - sx * sx;
    if (count < 2 || denom <= 0.0) {
        return std::nullopt;
    }
    return (count * sxy - sx * sy) / denom;
}

/// Optimization results stored as one JSON document per digest of
/// (N, eta, chi, phi, seed, restarts, optimizer version).
class OptimizationCache {
  public:
    explicit OptimizationCache(std::filesystem::path dir) : dir_{std::move(dir)} {
        if (!dir_.empty()) {
            std::filesystem::create_directories(dir_);
        }
    }

    [[nodiscard]] bool enabled() const noexcept { return !dir_.empty(); }

    static Json key(const OptimizationProblem &p) {
        Json k;
        k["kind"] = "optimize";
        k["N"] = p.N;
        k["eta"] = fmt::format("{:.17g}", p.eta);
        k["chi"] = fmt::format("{:.17g}", p.chi);
        k["phi"] = fmt::format("{:.17g}", p.phi_eval);
        k["seed"] = p.seed;
        k["restarts"] = p.restarts;
        k["max_evals"] = p.max_evals;
        k["tol"] = fmt::format("{:.17g}", p.tol);
        k["optimizer"] = kOptimizerVersion;
        return k;
    }

    [[nodiscard]] std::filesystem::path path_for(const OptimizationProblem &p) const {
        return dir_ / (hex_digest(key(p).dump()) + ".json");
    }

    /// Cached outcome if present and re-validated by one objective evaluation.
    [[nodiscard]] std::optional<OptimizationOutcome> load(const OptimizationProblem &p) const {
        if (!enabled()) {
            return std::nullopt;
        }
        const auto path = path_for(p);
        std::ifstream in(path);
        if (!in) {
            return std::nullopt;
        }
        try {
            const Json doc = Json::parse(in);
            if (doc.at("key") != key(p)) {
                spdlog::warn("cache entry {} has a foreign key; recomputing", path.string());
                return std::nullopt;
            }
            OptimizationOutcome out;
            out.alpha_star = doc.at("alpha_star").get<std::vector<double>>();
            out.qfi_star = doc.at("qfi_star").get<double>();
            out.evaluations = doc.at("evaluations").get<int>();
            out.converged = doc.at("converged").get<bool>();
            for (const auto &r : doc.at("per_restart")) {
                out.per_restart.push_back({r.at("start").get<std::string>(),
                                           r.at("seed").get<std::uint64_t>(),
                                           r.at("best").get<double>(),
                                           r.at("evaluations").get<int>(),
                                           r.at("converged").get<bool>()});
            }
            const double check = qfi_objective(out.alpha_star, p);
            if (std::abs(check - out.qfi_star) > 1e-9 * std::max(1.0, std::abs(out.qfi_star))) {
                spdlog::warn("cache entry {} failed re-validation ({} vs {}); recomputing",
                             path.string(), check, out.qfi_star);
                return std::nullopt;
            }
            return out;
        } catch (const std::exception &e) {
            spdlog::warn("unreadable cache entry {}: {}; recomputing", path.string(), e.what());
            return std::nullopt;
        }
    }

    void store(const OptimizationProblem &p, const OptimizationOutcome &o) const {
        if (!enabled()) {
            return;
        }
        Json doc;
        doc["key"] = key(p);
        doc["alpha_star"] = o.alpha_star;
        doc["qfi_star"] = o.qfi_star;
        doc["evaluations"] = o.evaluations;
        doc["converged"] = o.converged;
        doc["per_restart"] = Json::array();
        for (const auto &r : o.per_restart) {
            doc["per_restart"].push_back({{"start", r.start},
                                          {"seed", r.seed},
                                          {"best", r.best},
                                          {"evaluations", r.evaluations},
                                          {"converged", r.converged}});
        }
        // Write then rename so a crashed run never leaves a torn entry.
        const auto path = path_for(p);
        const auto tmp = std::filesystem::path(path.string() + ".tmp");
        {
            std::ofstream out(tmp);
            out << doc.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path);
    }

  private:
    std::filesystem::path dir_;
};

namespace detail {

class Stopwatch {
  public:
    [[nodiscard]] double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline ResultRecord base_record(const ExperimentConfig &c, int n, double eta) {
    ResultRecord r;
    r.command = to_string(c.command);
    r.N = n;
    r.eta = eta;
    r.chi = c.chi;
    r.phi_star = c.phi;
    r.seed = c.seed;
    return r;
}

inline OptimizationProblem problem_for(const ExperimentConfig &c, int n, double eta,
                                       unsigned threads) {
    OptimizationProblem p;
    p.N = n;
    p.eta = eta;
    p.chi = c.chi;
    p.phi_eval = c.phi;
    p.restarts = c.restarts;
    p.seed = c.seed;
    p.threads = threads;
    return p;
}

inline OptimizationOutcome optimize_cached(const OptimizationCache &cache,
                                           const OptimizationProblem &p, bool *from_cache) {
    if (auto hit = cache.load(p)) {
        *from_cache = true;
        return *hit;
    }
    *from_cache = false;
    auto outcome = optimize_alpha(p);
    cache.store(p, outcome);
    return outcome;
}

struct Point {
    int n;
    double eta;
};

inline std::vector<Point> grid_points(const ExperimentConfig &c) {
    std::vector<Point> pts;
    for (int n : c.n_range) {
        for (double eta : c.eta_list) {
            pts.push_back({n, eta});
        }
    }
    return pts;
}

/// Evaluate fn on every point in parallel, keeping records in point order.
/// Stops at the first numerical failure and keeps the records before it.
template <typename Fn>
void run_points(const ExperimentConfig &c, RunOutput &out, Fn &&fn) {
    const auto pts = grid_points(c);
    std::vector<std::optional<ResultRecord>> slots(pts.size());
    std::vector<std::string> errors(pts.size());
    parallel_for(pts.size(), c.threads, [&](std::size_t i) {
        try {
            slots[i] = fn(pts[i]);
        } catch (const NumericalError &e) {
            errors[i] = e.what();
        } catch (const std::runtime_error &e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!slots[i]) {
            out.failure = fmt::format("N={} eta={}: {}", pts[i].n, pts[i].eta, errors[i]);
            return;
        }
        out.records.push_back(std::move(*slots[i]));
    }
}

} // namespace detail

/// Numerical and analytic lossless Fisher information for every (N, k).
inline RunOutput run_pure_qfi(const ExperimentConfig &config) {
    RunOutput out{config};
    std::vector<std::pair<int, int>> pts;
    for (int n : config.n_range) {
        if (config.k) {
            pts.emplace_back(n, *config.k);
        } else {
            for (int k = 0; k <= n; ++k) {
                pts.emplace_back(n, k);
            }
        }
    }
    std::vector<ResultRecord> recs(pts.size());
    parallel_for(pts.size(), config.threads, [&](std::size_t i) {
        const auto [n, k] = pts[i];
        detail::Stopwatch clock;
        auto r = detail::base_record(config, n, 1.0);
        r.k_or_alpha_digest = k_label(k);
        r.qfi = qfi(PhasedFamily(NoonLikeSpec{n, k}, config.chi, 1.0), config.phi).qfi;
        r.qcrb = qcrb_or_inf(r.qfi);
        const double analytic = qfi_pure_analytic(n, k, config.chi);
        r.extras["k"] = k;
        r.extras["qfi_analytic"] = analytic;
        r.extras["relative_gap"] = std::abs(r.qfi - analytic) / std::max(1.0, analytic);
        r.wall_time_ms = clock.elapsed_ms();
        recs[i] = std::move(r);
    });
    double worst = 0.0;
    for (auto &r : recs) {
        worst = std::max(worst, r.extras["relative_gap"].get<double>());
        out.records.push_back(std::move(r));
    }
    out.summary["max_relative_gap"] = worst;
    if (worst > 1e-9) {
        out.failure = fmt::format("numerical and analytic QFI differ by {:.3g}", worst);
    }
    return out;
}

/// Max-over-k lossy N00N-type Fisher information per (N, eta), with the
/// log-log slope over the upper half of the N range for each eta.
inline RunOutput run_qfi_scan(const ExperimentConfig &config) {
    RunOutput out{config};
    detail::run_points(config, out, [&](detail::Point p) {
        detail::Stopwatch clock;
        auto r = detail::base_record(config, p.n, p.eta);
        const auto scan = max_qfi_over_k(p.n, p.eta, config.chi, config.phi);
        r.k_or_alpha_digest = k_label(scan.k_star);
        r.qfi = scan.qfi_star;
        r.qcrb = qcrb_or_inf(r.qfi);
        r.extras["k_star"] = scan.k_star;
        r.extras["qfi_per_k"] = scan.per_k;
        r.wall_time_ms = clock.elapsed_ms();
        return r;
    });
    const int lo = *std::min_element(config.n_range.begin(), config.n_range.end());
    const int hi = *std::max_element(config.n_range.begin(), config.n_range.end());
    const double mid = 0.5 * (lo + hi);
    Json slopes = Json::array();
    for (double eta : config.eta_list) {
        std::vector<double> x, y;
        for (const auto &r : out.records) {
            if (r.eta == eta && r.N >= mid) {
                x.push_back(r.N);
                y.push_back(r.qfi);
            }
        }
        const auto s = loglog_slope(x, y);
        slopes.push_back({{"eta", eta},
                          {"n_min", x.empty() ? 0 : static_cast<int>(x.front())},
                          {"n_max", x.empty() ? 0 : static_cast<int>(x.back())},
                          {"slope", s ? Json(*s) : Json(nullptr)}});
    }
    out.summary["loglog_slope"] = slopes;
    return out;
}

/// Optimized superposition inputs per (N, eta), cached on disk.
inline RunOutput run_optimize_scan(const ExperimentConfig &config) {
    RunOutput out{config};
    const OptimizationCache cache(config.cache_dir);
    detail::run_points(config, out, [&](detail::Point p) {
        detail::Stopwatch clock;
        auto r = detail::base_record(config, p.n, p.eta);
        const auto problem = detail::problem_for(config, p.n, p.eta, 1);
        bool cached = false;
        const auto o = detail::optimize_cached(cache, problem, &cached);
        r.k_or_alpha_digest = alpha_digest(o.alpha_star);
        r.qfi = o.qfi_star;
        r.qcrb = qcrb_or_inf(r.qfi);
        r.extras["alpha_star"] = o.alpha_star;
        r.extras["converged"] = o.converged;
        r.extras["evaluations"] = o.evaluations;
        r.extras["from_cache"] = cached;
        r.extras["coefficients"] = "real";
        r.wall_time_ms = clock.elapsed_ms();
        return r;
    });
    return out;
}

/// Minimum error-propagation uncertainty of the m-photon readout (m = N by
/// default) for the optimized input, or the N00N-type input when k is given.
inline RunOutput run_readout_scan(const ExperimentConfig &config) {
    RunOutput out{config};
    const OptimizationCache cache(config.cache_dir);
    const auto grid = uniform_grid(0.0, std::numbers::pi, config.grid_points);
    detail::run_points(config, out, [&](detail::Point p) {
        detail::Stopwatch clock;
        auto r = detail::base_record(config, p.n, p.eta);
        InputSpec input;
        if (config.k) {
            input = NoonLikeSpec{p.n, *config.k};
            r.k_or_alpha_digest = k_label(*config.k);
        } else {
            bool cached = false;
            const auto o = detail::optimize_cached(
                cache, detail::problem_for(config, p.n, p.eta, 1), &cached);
            input = SuperpositionSpec::normalized(p.n, o.alpha_star);
            r.k_or_alpha_digest = alpha_digest(o.alpha_star);
            r.extras["alpha_star"] = o.alpha_star;
            r.extras["from_cache"] = cached;
        }
        const int m = config.m.value_or(p.n);
        r.extras["m"] = m;
        const PhasedFamily family(input, config.chi, p.eta);
        try {
            const auto res = min_delta_phi(family, measurement_mm(m, family.basis()), grid);
            r.phi_star = res.argmin_phi;
            r.delta_phi_min = res.min_delta_phi;
            r.extras["inverse_delta_phi"] = 1.0 / res.min_delta_phi;
            // kbar = 1, so 1/dx coincides with 1/dphi.
            r.extras["inverse_delta_x"] = 1.0 / res.min_delta_phi;
        } catch (const DegenerateOperatingPointError &) {
            r.delta_phi_min = std::numeric_limits<double>::infinity();
            r.extras["flag"] = "no_operating_point";
        }
        r.qfi = qfi(family, r.phi_star).qfi;
        r.qcrb = qcrb_or_inf(r.qfi);
        r.wall_time_ms = clock.elapsed_ms();
        return r;
    });
    return out;
}

/// One fully specified point: QFI and bound at phi, moments and delta_phi of
/// the chosen readout at phi, and its minimum over the phase grid.
inline RunOutput run_single(const ExperimentConfig &config) {
    RunOutput out{config};
    const int n = config.n_range.front();
    const double eta = config.eta_list.front();
    detail::Stopwatch clock;
    auto r = detail::base_record(config, n, eta);
    InputSpec input;
    if (config.alpha) {
        input = SuperpositionSpec::normalized(n, *config.alpha);
        r.k_or_alpha_digest = alpha_digest(*config.alpha);
        r.extras["alpha"] = std::get<SuperpositionSpec>(input).alpha;
    } else {
        input = NoonLikeSpec{n, config.k.value_or(0)};
        r.k_or_alpha_digest = k_label(config.k.value_or(0));
    }
    const PhasedFamily family(input, config.chi, eta);
    r.qfi = qfi(family, config.phi).qfi;
    r.qcrb = qcrb_or_inf(r.qfi);
    if (config.m) {
        const auto obs = measurement_mm(*config.m, family.basis());
        const auto mom = moments(family.rho(config.phi), obs);
        r.extras["m"] = *config.m;
        r.extras["mean"] = mom.mean;
        r.extras["variance"] = mom.variance;
        try {
            r.extras["delta_phi"] = delta_phi(family, obs, config.phi);
        } catch (const DegenerateOperatingPointError &) {
            r.extras["delta_phi"] = nullptr;
            r.extras["flag"] = "degenerate_operating_point";
        }
        try {
            const auto res = min_delta_phi(
                family, obs, uniform_grid(0.0, std::numbers::pi, config.grid_points));
            r.delta_phi_min = res.min_delta_phi;
            r.extras["argmin_phi"] = res.argmin_phi;
            r.extras["qfi_at_argmin"] = qfi(family, res.argmin_phi).qfi;
        } catch (const DegenerateOperatingPointError &) {
            r.delta_phi_min = std::numeric_limits<double>::infinity();
        }
    }
    r.wall_time_ms = clock.elapsed_ms();
    out.records.push_back(std::move(r));
    return out;
}

/// Resolve defaults, validate, and dispatch.
inline RunOutput run(const ExperimentConfig &raw) {
    const ExperimentConfig config = raw.resolved();
    config.validate();
    if (config.command != Command::single &&
        (config.n_range.size() > 1 || config.eta_list.size() > 1)) {
        spdlog::info("{}: {} N values x {} eta values", to_string(config.command),
                     config.n_range.size(), config.eta_list.size());
    }
    switch (config.command) {
    case Command::pure_qfi:
        return run_pure_qfi(config);
    case Command::qfi_scan:
        return run_qfi_scan(config);
    case Command::optimize_scan:
        return run_optimize_scan(config);
    case Command::readout_scan:
        return run_readout_scan(config);
    case Command::single:
        return run_single(config);
    }
    throw ConfigError("unhandled command");
}

inline std::string format_real(double v) {
    if (std::isnan(v)) {
        return "";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    // Shortest representation that round-trips.
    return fmt::format("{}", v);
}

inline std::string csv_row(const ResultRecord &r) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{:.3f},{},{}", r.command, r.N,
                       r.k_or_alpha_digest, format_real(r.eta), format_real(r.chi),
                       format_real(r.phi_star), format_real(r.qfi), format_real(r.qcrb),
                       format_real(r.delta_phi_min), r.wall_time_ms, r.seed, r.code_version);
}

/// '#' header lines (version, config echo), the fixed columns, one row per
/// record, then '#' trailer lines for the summary and per-record extras.
inline void write_csv(std::ostream &os, const RunOutput &run) {
    os << "# kerrmetro " << kCodeVersion << '\n';
    os << "# config " << run.config.to_json().dump() << '\n';
    os << kCsvColumns << '\n';
    for (const auto &r : run.records) {
        os << csv_row(r) << '\n';
    }
    if (!run.summary.empty()) {
        os << "# summary " << run.summary.dump() << '\n';
    }
    for (const auto &r : run.records) {
        Json e = r.extras;
        e.erase("qfi_per_k");
        if (!e.empty()) {
            os << "# extras N=" << r.N << " eta=" << format_real(r.eta) << ' ' << e.dump()
               << '\n';
        }
    }
    if (run.failure) {
        os << "# failure " << *run.failure << '\n';
    }
}

inline Json record_json(const ResultRecord &r) {
    const auto real = [](double v) -> Json {
        if (std::isnan(v)) {
            return nullptr;
        }
        if (std::isinf(v)) {
            return v > 0 ? "inf" : "-inf";
        }
        return v;
    };
    Json j;
    j["command"] = r.command;
    j["N"] = r.N;
    j["k_or_alpha_digest"] = r.k_or_alpha_digest;
    j["eta"] = r.eta;
    j["chi"] = r.chi;
    j["phi_star"] = real(r.phi_star);
    j["qfi"] = real(r.qfi);
    j["qcrb"] = real(r.qcrb);
    j["delta_phi_min"] = real(r.delta_phi_min);
    j["wall_time_ms"] = r.wall_time_ms;
    j["seed"] = r.seed;
    j["code_version"] = r.code_version;
    j["extras"] = r.extras;
    return j;
}

inline void write_json(std::ostream &os, const RunOutput &run) {
    Json doc;
    doc["code_version"] = kCodeVersion;
    doc["config"] = run.config.to_json();
    doc["columns"] = detail::split(kCsvColumns, ',');
    doc["records"] = Json::array();
    for (const auto &r : run.records) {
        doc["records"].push_back(record_json(r));
    }
    doc["summary"] = run.summary;
    doc["failure"] = run.failure ? Json(*run.failure) : Json(nullptr);
    os << doc.dump(2) << '\n';
}

inline void write(std::ostream &os, const RunOutput &run) {
    if (run.config.format == Format::json) {
        write_json(os, run);
    } else {
        write_csv(os, run);
    }
}

/// Parse a CSV written by write_csv back into records (fixed columns only).
inline std::vector<ResultRecord> read_csv(std::istream &in) {
    const auto real = [](const std::string &s) {
        if (s.empty()) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        return detail::parse_real(s, "CSV field");
    };
    std::vector<ResultRecord> out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header) {
            if (line != kCsvColumns) {
                throw ConfigError("unexpected CSV header: " + line);
            }
            header = true;
            continue;
        }
        const auto f = detail::split(line, ',');
        if (f.size() != 12) {
            throw ConfigError("CSV row has " + std::to_string(f.size()) + " fields");
        }
        ResultRecord r;
        r.command = f[0];
        r.N = static_cast<int>(detail::parse_integer(f[1], "N"));
        r.k_or_alpha_digest = f[2];
        r.eta = real(f[3]);
        r.chi = real(f[4]);
        r.phi_star = real(f[5]);
        r.qfi = real(f[6]);
        r.qcrb = real(f[7]);
        r.delta_phi_min = real(f[8]);
        r.wall_time_ms = real(f[9]);
        r.seed = static_cast<std::uint64_t>(detail::parse_integer(f[10], "seed"));
        r.code_version = f[11];
        // The bound is a derived column: recompute it rather than trust the file.
        const double expected = qcrb_or_inf(r.qfi);
        if (std::isfinite(expected) &&
            std::abs(expected - r.qcrb) > 1e-12 * std::max(1.0, expected)) {
            throw NumericalError("CSV row N=" + f[1] + " has qcrb != 1/sqrt(qfi)");
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace kerrmetro::experiment
