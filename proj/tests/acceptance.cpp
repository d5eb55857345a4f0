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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here and must not be loosened to get green.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "kerrmetro/experiment.hpp"
#include "kerrmetro/optimizer.hpp"
#include "test_helpers.hpp"

using namespace kerrmetro;
using kerrmetro::testing::kraus_route;
using kerrmetro::testing::max_abs_diff;
using kerrmetro::testing::random_hermitian;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double rel_floor1(double value, double reference) {
    return std::abs(value - reference) / std::max(1.0, std::abs(reference));
}

// Optimizations shared by criteria 6-8, keyed by (N, eta).
class OptimizedInputs {
  public:
    const OptimizationOutcome &get(int n, double eta) {
        const auto key = std::make_pair(n, eta);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            OptimizationProblem p;
            p.N = n;
            p.eta = eta;
            p.threads = 0;
            it = cache_.emplace(key, optimize_alpha(p)).first;
        }
        return it->second;
    }

  private:
    std::map<std::pair<int, double>, OptimizationOutcome> cache_;
};

OptimizedInputs optimized;

// 1. Numerical lossless QFI against the closed form.
Verdict pure_qfi_exactness() {
    double worst = 0.0;
    int points = 0;
    for (int n = 1; n <= 40; ++n) {
        for (int k = 0; k <= n; ++k) {
            for (double chi : {0.0, 1e-8, 0.1}) {
                const double numeric = qfi(PhasedFamily(NoonLikeSpec{n, k}, chi, 1.0), 0.0).qfi;
                worst = std::max(worst, rel_floor1(numeric, qfi_pure_analytic(n, k, chi)));
                ++points;
            }
        }
    }
    return {worst <= 1e-9,
            "max relative error " + fmt_g(worst) + " over " + std::to_string(points) +
                " points (tol 1e-9)"};
}

// 2. Closed-form lossy outputs against the generic Kraus composition.
Verdict channel_correctness() {
    double worst_elem = 0.0;
    double worst_trace = 0.0;
    int states = 0;
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    for (int n = 1; n <= 10; ++n) {
        std::vector<InputSpec> inputs;
        for (int k = 0; k <= n; ++k) {
            inputs.emplace_back(NoonLikeSpec{n, k});
        }
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<double> raw(static_cast<std::size_t>(SuperpositionSpec::tau(n) + 1));
            for (auto &a : raw) {
                a = coeff(gen);
            }
            inputs.emplace_back(SuperpositionSpec::normalized(n, raw));
        }
        for (const auto &input : inputs) {
            for (double eta : {0.3, 0.7, 1.0}) {
                for (double phi : {0.0, 0.4}) {
                    for (double chi : {1e-8, 0.1}) {
                        const auto closed =
                            std::holds_alternative<NoonLikeSpec>(input)
                                ? lossy_noon({input, eta, phi, chi})
                                : lossy_superposition({input, eta, phi, chi});
                        const auto oracle = kraus_route(input, eta, phi, chi);
                        worst_elem = std::max(worst_elem, max_abs_diff(closed.matrix().to_dense(),
                                                                       oracle.matrix().to_dense()));
                        worst_trace = std::max(
                            {worst_trace, std::abs(closed.matrix().trace().real() - 1.0),
                             std::abs(oracle.matrix().trace().real() - 1.0)});
                        ++states;
                    }
                }
            }
        }
    }
    return {worst_elem <= 1e-11 && worst_trace <= 1e-10,
            "max elementwise gap " + fmt_g(worst_elem) + " (tol 1e-11), max trace error " +
                fmt_g(worst_trace) + " (tol 1e-10), " + std::to_string(states) + " states"};
}

// 3. Log-log slope of the max-over-k QFI on N = 20..100.
Verdict fig2_scaling() {
    std::vector<double> ns;
    for (int n = 20; n <= 100; n += 10) {
        ns.push_back(n);
    }
    std::map<double, double> slope;
    for (double eta : {1.0, 0.9}) {
        std::vector<double> f;
        for (double n : ns) {
            f.push_back(max_qfi_over_k(static_cast<int>(n), eta, 1e-8, 0.0,
                                       default_thread_count())
                            .qfi_star);
        }
        slope[eta] = experiment::loglog_slope(ns, f).value_or(0.0);
    }
    const bool ok = std::abs(slope[1.0] - 2.0) <= 0.05 && std::abs(slope[0.9] - 1.0) <= 0.15;
    return {ok, "slope " + fmt_g(slope[1.0]) + " at eta=1 (2.00 +- 0.05), " + fmt_g(slope[0.9]) +
                    " at eta=0.9 (1.0 +- 0.15)"};
}

// 4. The N-photon readout of the N00N input reaches the bound.
Verdict qcrb_saturation() {
    double worst = 0.0;
    for (int n : {1, 3, 5, 7, 9}) {
        for (double chi : {0.0, 0.1}) {
            const PhasedFamily family(NoonLikeSpec{n, 0}, chi, 1.0);
            const auto res = min_delta_phi(family, measurement_mm(n, family.basis()));
            const double bound = 1.0 / (n + chi * n * n / 2.0);
            worst = std::max(worst, std::abs(res.min_delta_phi - bound) / bound);
        }
    }
    return {worst <= 1e-6, "max relative gap to 1/(N + chi N^2/2) " + fmt_g(worst) +
                               " (tol 1e-6)"};
}

// 5. Single-photon-difference readout of the |(N+1)/2,(N-1)/2> input.
Verdict two_component_readout() {
    double worst = 0.0;
    for (int n : {1, 3, 5, 7, 9, 11}) {
        for (double chi : {0.0, 1e-8, 0.1}) {
            const PhasedFamily family(NoonLikeSpec{n, (n - 1) / 2}, chi, 1.0);
            const auto res = min_delta_phi(family, measurement_m(family.basis()));
            const double a = (n * n + 2.0 * n - 1.0) / 2.0;
            const double c1 = (n + 1.0) / 2.0;
            const double theta = 1.0 + chi * n / 2.0;
            const double expected = std::sqrt(a) / (c1 * theta);
            worst = std::max(worst, std::abs(res.min_delta_phi - expected) / expected);
        }
    }
    return {worst <= 1e-9, "max relative gap to sqrt(A)/(C1 theta) " + fmt_g(worst) +
                               " (tol 1e-9)"};
}

// 6. Optimized inputs dominate every N00N-type input; no loss gives N00N.
Verdict optimizer_dominance() {
    double worst_margin = std::numeric_limits<double>::infinity();
    std::string where;
    for (double eta : {0.6, 0.8, 0.9}) {
        for (int n = 1; n <= 12; ++n) {
            const auto &o = optimized.get(n, eta);
            const double noon = max_qfi_over_k(n, eta, 1e-8, 0.0).qfi_star;
            const double margin = o.qfi_star - noon;
            if (margin < worst_margin) {
                worst_margin = margin;
                where = "N=" + std::to_string(n) + " eta=" + fmt_g(eta);
            }
        }
    }
    double worst_lossless = 0.0;
    double worst_weight = 1.0;
    for (int n = 1; n <= 12; ++n) {
        const auto &o = optimized.get(n, 1.0);
        worst_lossless = std::max(worst_lossless,
                                  std::abs(o.qfi_star - qfi_pure_analytic(n, 0, 1e-8)) /
                                      qfi_pure_analytic(n, 0, 1e-8));
        worst_weight = std::min(worst_weight, 2.0 * o.alpha_star[0] * o.alpha_star[0]);
    }
    const bool ok = worst_margin >= -1e-9 && worst_lossless <= 1e-6 && worst_weight >= 1 - 1e-6;
    return {ok, "min (optimized - best N00N) " + fmt_g(worst_margin) + " at " + where +
                    " (tol -1e-9); eta=1 max rel gap " + fmt_g(worst_lossless) +
                    " (tol 1e-6), min k=0 weight " + fmt_g(worst_weight)};
}

// 7. Super-linear growth of the optimized QFI at 40% loss.
Verdict fig3_persistence() {
    std::vector<double> ns, f;
    for (int n = 6; n <= 14; ++n) {
        ns.push_back(n);
        f.push_back(optimized.get(n, 0.6).qfi_star);
    }
    const double slope = experiment::loglog_slope(ns, f).value_or(0.0);
    return {slope > 1.0, "log-log slope on N=6..14 at eta=0.6: " + fmt_g(slope) + " (> 1); F(6)=" +
                             fmt_g(f.front()) + " F(14)=" + fmt_g(f.back())};
}

// 8. The m = N readout of optimized inputs saturates under loss.
Verdict fig4_saturation() {
    std::map<double, std::pair<double, double>> inv;
    for (double eta : {0.9, 1.0}) {
        for (int n : {11, 15}) {
            const auto &o = optimized.get(n, eta);
            const PhasedFamily family(SuperpositionSpec::normalized(n, o.alpha_star), 1e-8, eta);
            const double v =
                1.0 / min_delta_phi(family, measurement_mm(n, family.basis())).min_delta_phi;
            (n == 11 ? inv[eta].first : inv[eta].second) = v;
        }
    }
    const double lossy = inv[0.9].second / inv[0.9].first;
    const double clean = inv[1.0].second / inv[1.0].first;
    return {lossy < clean, "1/dphi growth N=11->15: " + fmt_g(lossy) + " at eta=0.9 vs " +
                               fmt_g(clean) + " at eta=1"};
}

// 9. Module invariants, re-checked end to end.
Verdict invariant_suite() {
    std::vector<std::string> failures;
    int checks = 0;
    const auto expect = [&](bool ok, const std::string &what) {
        ++checks;
        if (!ok) {
            failures.push_back(what);
        }
    };

    for (int nmax : {0, 1, 7, 100}) {
        const TwoModeBasis basis(nmax);
        bool ok = true;
        for (Index i = 0; i < basis.dimension(); ++i) {
            const auto s = basis.state_of(i);
            ok = ok && basis.flat_index(s) == i && s.total() <= nmax;
        }
        expect(ok, "index round trip nmax=" + std::to_string(nmax));
    }

    std::mt19937_64 gen(5);
    for (Index dim : {1, 17, 120}) {
        const Matrix h = random_hermitian(dim, gen);
        const auto es = eigh(h);
        const Matrix back = es.vectors * es.values.cast<Complex>().asDiagonal() *
                            es.vectors.adjoint();
        const Matrix gram = es.vectors.adjoint() * es.vectors;
        expect((back - h).norm() <= 1e-10 * h.norm() &&
                   (gram - Matrix::Identity(dim, dim)).norm() <= 1e-10,
               "eigendecomposition residual dim=" + std::to_string(dim));
    }

    for (int n = 1; n <= 10; ++n) {
        const PhasedFamily family(NoonLikeSpec{n, n / 3}, 0.1, 0.7);
        const auto rho = family.rho(0.3);
        const auto d = family.rho_prime(0.3);
        const Matrix l = sld(rho, d).matrix().to_dense();
        const Matrix r = rho.matrix().to_dense();
        const Matrix dd = d.matrix().to_dense();
        const auto es = eigh(r);
        Matrix p = Matrix::Zero(r.rows(), r.cols());
        for (Index j = 0; j < es.values.size(); ++j) {
            if (es.values(j) > 1e-12 * es.values.maxCoeff()) {
                p += es.vectors.col(j) * es.vectors.col(j).adjoint();
            }
        }
        const Matrix diff = dd - 0.5 * (l * r + r * l);
        expect((p * diff + diff * p - p * diff * p).norm() <= 1e-8 * dd.norm(),
               "SLD reconstruction N=" + std::to_string(n));
    }

    for (int n = 1; n <= 8; ++n) {
        for (double eta : {0.5, 0.9}) {
            const PhasedFamily family(
                SuperpositionSpec::normalized(
                    n, std::vector<double>(
                           static_cast<std::size_t>(SuperpositionSpec::tau(n) + 1), 1.0)),
                0.05, eta);
            const Matrix a = family.rho_prime_analytic(0.2).matrix().to_dense();
            const Matrix f = family.rho_prime_finite_difference(0.2, 1e-3).matrix().to_dense();
            expect((a - f).norm() <= 1e-6 * a.norm(),
                   "derivative cross-check N=" + std::to_string(n) + " eta=" + fmt_g(eta));
        }
    }

    const auto grid = uniform_grid(0.0, std::numbers::pi, 401);
    for (int n : {2, 3, 4}) {
        for (double eta : {1.0, 0.8}) {
            const PhasedFamily family(NoonLikeSpec{n, 0}, 0.1, eta);
            for (int m = 1; m <= n; ++m) {
                try {
                    const auto res = min_delta_phi(family, measurement_mm(m, family.basis()), grid);
                    expect(res.min_delta_phi >= qcrb(qfi(family, res.argmin_phi).qfi) - 1e-9,
                           "readout vs QCRB N=" + std::to_string(n) + " m=" + std::to_string(m));
                } catch (const DegenerateOperatingPointError &) {
                }
            }
        }
    }

    {
        OptimizationProblem p;
        p.N = 6;
        p.eta = 0.8;
        p.restarts = 3;
        p.seed = 11;
        p.threads = 1;
        const auto a = optimize_alpha(p);
        const auto b = optimize_alpha(p);
        expect(a.qfi_star == b.qfi_star && a.alpha_star == b.alpha_star &&
                   a.evaluations == b.evaluations,
               "deterministic optimizer replay");
        experiment::ExperimentConfig cfg;
        cfg.command = experiment::Command::qfi_scan;
        cfg.n_range = {4, 8};
        cfg.eta_list = {0.7, 1.0};
        const auto r1 = experiment::run(cfg);
        cfg.threads = 2;
        const auto r2 = experiment::run(cfg);
        bool same = r1.records.size() == r2.records.size();
        for (std::size_t i = 0; same && i < r1.records.size(); ++i) {
            same = r1.records[i].qfi == r2.records[i].qfi &&
                   r1.records[i].k_or_alpha_digest == r2.records[i].k_or_alpha_digest;
        }
        expect(same, "deterministic scan replay across thread counts");
    }

    std::string detail = std::to_string(checks - static_cast<int>(failures.size())) + "/" +
                         std::to_string(checks) + " invariant checks hold";
    for (const auto &f : failures) {
        detail += "; failed: " + f;
    }
    return {failures.empty(), detail};
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"pure-QFI exactness", pure_qfi_exactness},
        {"channel correctness", channel_correctness},
        {"QFI scaling with N (eta = 1, 0.9)", fig2_scaling},
        {"QCRB saturation at m = N", qcrb_saturation},
        {"two-component readout closed form", two_component_readout},
        {"optimizer dominance and lossless reduction", optimizer_dominance},
        {"super-linear optimized QFI at eta = 0.6", fig3_persistence},
        {"readout saturation under loss", fig4_saturation},
        {"invariant suite", invariant_suite},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %zu (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}
