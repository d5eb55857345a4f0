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

/**
 * @file
 * Search for the fixed-N superposition input that maximizes the quantum
 * Fisher information under a given photon loss.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <spdlog/spdlog.h>

#include "kerrmetro/estimation.hpp"
#include "kerrmetro/parallel.hpp"

namespace kerrmetro {

struct OptimizationProblem {
    int N = 1;
    double eta = 1.0;
    double chi = 1e-8;
    double phi_eval = 0.0;
    int restarts = 16;
    int max_evals = 20000;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    /// Worker threads for the restarts; 0 picks the hardware concurrency.
    unsigned threads = 0;

    void validate() const {
        if (N < 1) {
            throw ConfigError("OptimizationProblem: N must be >= 1");
        }
        LossParams::equal(eta).validate();
        if (!(chi >= 0.0)) {
            throw ConfigError("OptimizationProblem: chi must be non-negative");
        }
        if (restarts < 1) {
            throw ConfigError("OptimizationProblem: restarts must be >= 1");
        }
        if (max_evals < 1 || !(tol > 0.0)) {
            throw ConfigError("OptimizationProblem: invalid budget or tolerance");
        }
    }
};

struct RestartRecord {
    /// "noon-k<k>" for deterministic N00N-type starts, "random" otherwise.
    std::string start;
    std::uint64_t seed = 0;
    double best = 0.0;
    int evaluations = 0;
    bool converged = false;
};

struct OptimizationOutcome {
    std::vector<double> alpha_star;
    double qfi_star = 0.0;
    int evaluations = 0;
    bool converged = false;
    std::vector<RestartRecord> per_restart;
};

/// Fisher information of the lossy superposition built from alpha after
/// rescaling alpha onto the normalization surface.
inline double qfi_objective(const std::vector<double> &alpha, const OptimizationProblem &problem) {
    const int tau = SuperpositionSpec::tau(problem.N);
    if (static_cast<int>(alpha.size()) != tau + 1) {
        throw ConfigError("qfi_objective: expected " + std::to_string(tau + 1) +
                          " coefficients");
    }
    const PhasedFamily family(SuperpositionSpec::normalized(problem.N, alpha), problem.chi,
                              problem.eta);
    return qfi(family, problem.phi_eval).qfi;
}

/// Hyperspherical angles (tau of them) -> unit vector with tau + 1 entries.
inline std::vector<double> angles_to_unit(const std::vector<double> &angles) {
    std::vector<double> u(angles.size() + 1);
    double running = 1.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        u[i] = running * std::cos(angles[i]);
        running *= std::sin(angles[i]);
    }
    u.back() = running;
    return u;
}

inline std::vector<double> unit_to_angles(const std::vector<double> &u) {
    if (u.size() < 2) {
        return {};
    }
    std::vector<double> angles(u.size() - 1);
    for (std::size_t i = 0; i + 2 < u.size(); ++i) {
        double tail = 0.0;
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            tail += u[j] * u[j];
        }
        angles[i] = std::atan2(std::sqrt(tail), u[i]);
    }
    angles.back() = std::atan2(u.back(), u[u.size() - 2]);
    return angles;
}

/// Coefficients alpha on the normalization surface for a point on the unit sphere.
inline std::vector<double> unit_to_alpha(int n, const std::vector<double> &u) {
    std::vector<double> alpha(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        alpha[k] = u[k] / std::sqrt(SuperpositionSpec::weight(n, static_cast<int>(k)));
    }
    return alpha;
}

namespace detail {

inline void disable_gsl_abort() {
    static std::once_flag once;
    std::call_once(once, [] { gsl_set_error_handler_off(); });
}

struct SimplexRun {
    std::vector<double> angles;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

struct SimplexContext {
    const OptimizationProblem *problem = nullptr;
    int evaluations = 0;
    std::exception_ptr error;
};

inline double negative_qfi(const gsl_vector *x, void *params) {
    auto *ctx = static_cast<SimplexContext *>(params);
    if (ctx->error) {
        return GSL_NAN;
    }
    try {
        std::vector<double> angles(x->size);
        for (std::size_t i = 0; i < x->size; ++i) {
            angles[i] = gsl_vector_get(x, i);
        }
        ++ctx->evaluations;
        return -qfi_objective(unit_to_alpha(ctx->problem->N, angles_to_unit(angles)),
                              *ctx->problem);
    } catch (...) {
        ctx->error = std::current_exception();
        return GSL_NAN;
    }
}

/// Nelder-Mead (GSL nmsimplex2) on the angle coordinates, stopped when the
/// simplex size drops to problem.tol or the evaluation budget runs out.
inline SimplexRun run_simplex(const OptimizationProblem &problem,
                              const std::vector<double> &start) {
    disable_gsl_abort();
    const std::size_t dim = start.size();
    SimplexContext ctx{&problem, 0, nullptr};
    gsl_multimin_function fn{&negative_qfi, dim, &ctx};

    gsl_vector *x = gsl_vector_alloc(dim);
    gsl_vector *step = gsl_vector_alloc(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        gsl_vector_set(x, i, start[i]);
        gsl_vector_set(step, i, 0.25);
    }
    gsl_multimin_fminimizer *s =
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);

    SimplexRun run;
    int status = gsl_multimin_fminimizer_set(s, &fn, x, step);
    while (status == GSL_SUCCESS && !ctx.error) {
        if (gsl_multimin_fminimizer_size(s) <= problem.tol) {
            run.converged = true;
            break;
        }
        if (ctx.evaluations >= problem.max_evals) {
            break;
        }
        status = gsl_multimin_fminimizer_iterate(s);
    }
    run.angles.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        run.angles[i] = gsl_vector_get(s->x, i);
    }
    run.value = -s->fval;
    run.evaluations = ctx.evaluations;

    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    if (ctx.error) {
        std::rethrow_exception(ctx.error);
    }
    if (status != GSL_SUCCESS && status != GSL_ENOPROG) {
        throw NumericalError(std::string("simplex search failed: ") + gsl_strerror(status));
    }
    return run;
}

inline std::vector<double> random_unit(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> u(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto &v : u) {
            v = normal(gen);
            norm += v * v;
        }
    }
    norm = std::sqrt(norm);
    for (auto &v : u) {
        v /= norm;
    }
    return u;
}

} // namespace detail

/// Multi-start simplex maximization of qfi_objective over real alpha.
///
/// Starts: the N00N point e_0, the best single-branch point e_k when it is
/// not e_0, and `restarts` points drawn uniformly from the unit sphere with
/// std::mt19937_64 seeded by seed + restart index.
inline OptimizationOutcome optimize_alpha(const OptimizationProblem &problem) {
    problem.validate();
    const int n = problem.N;
    const int tau = SuperpositionSpec::tau(n);
    const auto dim = static_cast<std::size_t>(tau + 1);

    OptimizationOutcome out;
    if (tau == 0) {
        const std::vector<double> u{1.0};
        out.alpha_star = unit_to_alpha(n, u);
        out.qfi_star = qfi_objective(out.alpha_star, problem);
        out.evaluations = 1;
        out.converged = true;
        out.per_restart.push_back({"noon-k0", problem.seed, out.qfi_star, 1, true});
        return out;
    }

    struct Start {
        std::string label;
        std::uint64_t seed;
        std::vector<double> unit;
    };
    std::vector<Start> starts;

    int best_k = 0;
    double best_k_value = -1.0;
    int single_branch_evals = 0;
    for (int k = 0; k <= tau; ++k) {
        std::vector<double> e(dim, 0.0);
        e[static_cast<std::size_t>(k)] = 1.0;
        const double v = qfi_objective(unit_to_alpha(n, e), problem);
        ++single_branch_evals;
        if (v > best_k_value) {
            best_k_value = v;
            best_k = k;
        }
    }
    {
        std::vector<double> e0(dim, 0.0);
        e0[0] = 1.0;
        starts.push_back({"noon-k0", problem.seed, e0});
    }
    if (best_k != 0) {
        std::vector<double> ek(dim, 0.0);
        ek[static_cast<std::size_t>(best_k)] = 1.0;
        starts.push_back({"noon-k" + std::to_string(best_k), problem.seed, ek});
    }
    for (int r = 0; r < problem.restarts; ++r) {
        const std::uint64_t s = problem.seed + static_cast<std::uint64_t>(r);
        starts.push_back({"random", s, detail::random_unit(dim, s)});
    }
    spdlog::debug("optimize_alpha: N={} eta={} {} starts (mt19937_64, seed {})", n,
                  problem.eta, starts.size(), problem.seed);

    std::vector<detail::SimplexRun> runs(starts.size());
    parallel_for(starts.size(), problem.threads, [&](std::size_t i) {
        runs[i] = detail::run_simplex(problem, unit_to_angles(starts[i].unit));
    });

    std::size_t winner = 0;
    out.evaluations = single_branch_evals;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.per_restart.push_back({starts[i].label, starts[i].seed, runs[i].value,
                                   runs[i].evaluations, runs[i].converged});
        out.evaluations += runs[i].evaluations;
        if (runs[i].value > runs[winner].value) {
            winner = i;
        }
    }
    out.alpha_star = SuperpositionSpec::normalized(
                         n, unit_to_alpha(n, angles_to_unit(runs[winner].angles)))
                         .alpha;
    // The global sign is unphysical; report the largest coefficient positive.
    const auto largest = std::max_element(
        out.alpha_star.begin(), out.alpha_star.end(),
        [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*largest < 0.0) {
        for (auto &a : out.alpha_star) {
            a = -a;
        }
    }
    out.qfi_star = runs[winner].value;
    out.converged = runs[winner].converged;
    return out;
}

} // namespace kerrmetro
