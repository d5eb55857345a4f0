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

#include <algorithm>

#include <catch_amalgamated.hpp>

#include "kerrmetro/optimizer.hpp"
#include "test_helpers.hpp"

using namespace kerrmetro;
using namespace kerrmetro::testing;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OptimizationProblem small_problem(int n, double eta) {
    OptimizationProblem p;
    p.N = n;
    p.eta = eta;
    p.restarts = 4;
    p.max_evals = 4000;
    p.tol = 1e-9;
    p.seed = 17;
    p.threads = 2;
    return p;
}

double normalization(int n, const std::vector<double> &alpha) {
    double s = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        s += SuperpositionSpec::weight(n, static_cast<int>(k)) * alpha[k] * alpha[k];
    }
    return s;
}

} // namespace

TEST_CASE("qfi_objective examples", "[optimizer]") {
    for (int n : {1, 3, 6}) {
        OptimizationProblem p;
        p.N = n;
        p.eta = 1.0;
        p.chi = 0.0;
        std::vector<double> e0(static_cast<std::size_t>(SuperpositionSpec::tau(n) + 1), 0.0);
        e0[0] = 1.0;
        CHECK_THAT(qfi_objective(e0, p), WithinRel(double(n * n), 1e-12));
    }
    for (double eta : {1.0, 0.6}) {
        OptimizationProblem p;
        p.N = 6;
        p.eta = eta;
        p.chi = 0.0;
        const std::vector<double> middle{0.0, 0.0, 0.0, 1.0};
        if (eta == 1.0) {
            CHECK_THAT(qfi_objective(middle, p), WithinAbs(0.0, 1e-12));
        } else {
            CHECK(qfi_objective(middle, p) >= 0.0);
        }
    }
    {
        // Direct single-point evaluation through the closed form.
        OptimizationProblem p;
        p.N = 4;
        p.eta = 0.9;
        const std::vector<double> mixed{0.5, 0.3, 0.2};
        const auto spec = SuperpositionSpec::normalized(4, mixed);
        const double direct = qfi(PhasedFamily(spec, p.chi, p.eta), 0.0).qfi;
        CHECK(qfi_objective(mixed, p) == direct);
        const double noon = qfi(PhasedFamily(NoonLikeSpec{4, 0}, p.chi, p.eta), 0.0).qfi;
        CHECK_THAT(qfi_objective({1.0, 0.0, 0.0}, p), WithinRel(noon, 1e-12));
    }
    CHECK_THROWS_AS(qfi_objective({1.0, 0.0}, small_problem(6, 0.5)), ConfigError);
}

TEST_CASE("qfi_objective is invariant under positive scaling", "[optimizer][property]") {
    const auto p = small_problem(7, 0.8);
    const std::vector<double> alpha{0.3, -0.7, 0.2, 0.5};
    const double base = qfi_objective(alpha, p);
    for (double scale : {1e-3, 0.5, 3.0, 1e4}) {
        std::vector<double> scaled = alpha;
        for (auto &a : scaled) {
            a *= scale;
        }
        REQUIRE_THAT(qfi_objective(scaled, p), WithinRel(base, 1e-12));
    }
}

TEST_CASE("hyperspherical coordinates round-trip", "[optimizer]") {
    const std::vector<double> u{0.1, -0.5, 0.3, 0.8};
    const double norm = std::sqrt(0.01 + 0.25 + 0.09 + 0.64);
    const auto back = angles_to_unit(unit_to_angles(u));
    REQUIRE(back.size() == u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        CHECK_THAT(back[i], WithinAbs(u[i] / norm, 1e-14));
    }
}

TEST_CASE("optimize_alpha without loss selects the N00N input", "[optimizer]") {
    for (int n : {2, 4, 7}) {
        auto p = small_problem(n, 1.0);
        const auto out = optimize_alpha(p);
        CHECK_THAT(normalization(n, out.alpha_star), WithinAbs(1.0, 1e-10));
        CHECK(2.0 * out.alpha_star[0] * out.alpha_star[0] >= 1.0 - 1e-6);
        CHECK_THAT(out.qfi_star, WithinRel(qfi_pure_analytic(n, 0, p.chi), 1e-6));
    }
}

TEST_CASE("optimize_alpha with a single photon", "[optimizer]") {
    for (double eta : {1.0, 0.5}) {
        auto p = small_problem(1, eta);
        p.chi = 0.0;
        const auto out = optimize_alpha(p);
        REQUIRE(out.alpha_star.size() == 1);
        CHECK_THAT(out.alpha_star[0], WithinAbs(std::sqrt(0.5), 1e-15));
        CHECK_THAT(out.qfi_star, WithinRel(eta, 1e-12));
        CHECK(out.converged);
    }
}

TEST_CASE("optimize_alpha dominates every N00N-type input", "[optimizer][property]") {
    for (int n : {2, 3, 5, 6, 8, 10, 12}) {
        for (double eta : {0.9, 0.6}) {
            auto p = small_problem(n, eta);
            p.restarts = 2;
            const auto out = optimize_alpha(p);
            const auto scan = max_qfi_over_k(n, eta, p.chi, p.phi_eval);
            for (double v : scan.per_k) {
                REQUIRE(out.qfi_star >= v * (1.0 - 1e-12));
            }
            REQUIRE_THAT(normalization(n, out.alpha_star), WithinAbs(1.0, 1e-10));
            REQUIRE_THAT(qfi_objective(out.alpha_star, p), WithinRel(out.qfi_star, 1e-9));
        }
    }
}

TEST_CASE("optimize_alpha reports the best restart", "[optimizer][property]") {
    const auto out = optimize_alpha(small_problem(6, 0.9));
    REQUIRE(out.per_restart.size() >= 5);
    double best = -1.0;
    int evals = 0;
    for (const auto &r : out.per_restart) {
        best = std::max(best, r.best);
        evals += r.evaluations;
    }
    CHECK(out.qfi_star == best);
    CHECK(out.evaluations >= evals);
    CHECK(out.per_restart.front().start == "noon-k0");
}

TEST_CASE("optimize_alpha is deterministic for a fixed seed", "[optimizer][property]") {
    auto p = small_problem(6, 0.8);
    const auto a = optimize_alpha(p);
    const auto b = optimize_alpha(p);
    CHECK(a.qfi_star == b.qfi_star);
    CHECK(a.alpha_star == b.alpha_star);
    CHECK(a.evaluations == b.evaluations);
    p.threads = 1;
    const auto c = optimize_alpha(p);
    CHECK(a.qfi_star == c.qfi_star);
    CHECK(a.alpha_star == c.alpha_star);
}

TEST_CASE("optimization problem validation", "[optimizer]") {
    auto p = small_problem(4, 0.9);
    p.restarts = 0;
    CHECK_THROWS_AS(optimize_alpha(p), ConfigError);
    p = small_problem(0, 0.9);
    CHECK_THROWS_AS(optimize_alpha(p), ConfigError);
    p = small_problem(4, 1.2);
    CHECK_THROWS_AS(optimize_alpha(p), ConfigError);
}
