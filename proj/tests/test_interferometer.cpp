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

#include <random>

#include <catch_amalgamated.hpp>

#include "kerrmetro/estimation.hpp"
#include "kerrmetro/interferometer.hpp"
#include "test_helpers.hpp"

using namespace kerrmetro;
using namespace kerrmetro::testing;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("g_tilde", "[interferometer]") {
    CHECK(g_tilde(0, 0.7) == 0.0);
    CHECK_THAT(g_tilde(2, 0.1), WithinRel(2.2, 1e-15));
    CHECK(g_tilde(10, 0.0) == 10.0);
    CHECK_THROWS(g_tilde(-1, 0.0));
}

TEST_CASE("generator_h diagonal entries", "[interferometer]") {
    const TwoModeBasis basis(6);
    const auto h = generator_h(basis, 0.2);
    for (int n = 0; n <= 3; ++n) {
        CHECK(h.matrix()({n, n}, {n, n}) == Complex(0.0, 0.0));
    }
    CHECK_THAT(generator_h(basis, 0.0).matrix()({1, 0}, {1, 0}).real(), WithinAbs(-0.5, 1e-15));
    CHECK_THAT(h.matrix()({0, 3}, {0, 3}).real(), WithinRel(1.95, 1e-14));
    CHECK_THAT(h.matrix()({0, 3}, {0, 3}).real(),
               WithinRel((g_tilde(3, 0.2) - g_tilde(0, 0.2)) / 2.0, 1e-15));
}

TEST_CASE("apply_phase examples", "[interferometer]") {
    const TwoModeBasis basis(4);
    const auto psi = noon_like({3, 1}, basis);
    CHECK(max_abs_diff(apply_phase(psi, 0.0, 0.3).amplitudes(), psi.amplitudes()) == 0.0);

    // Single photon: relative phase phi (1 + chi/2) between the branches.
    const double chi = 0.4;
    const double phi = 0.7;
    const auto evolved = apply_phase(noon_like({1, 0}, basis), phi, chi);
    const Complex ratio = evolved.amplitude(0, 1) / evolved.amplitude(1, 0);
    CHECK_THAT(std::arg(ratio), WithinAbs(phi * (1.0 + chi / 2.0), 1e-14));

    const auto nn = PureState::fock(basis, 2, 2);
    CHECK(apply_phase(nn, 1.3, 0.2).amplitude(2, 2) == Complex(1.0, 0.0));
}

TEST_CASE("apply_phase composes additively and preserves T blocks", "[interferometer][property]") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(-3.0, 3.0);
    const TwoModeBasis basis(8);
    for (int trial = 0; trial < 20; ++trial) {
        Vector v(basis.dimension());
        for (Index i = 0; i < v.size(); ++i) {
            v(i) = Complex(normal(gen), normal(gen));
        }
        // Zero out every block but one to check that nothing leaks.
        const int t = trial % basis.block_count();
        for (Index i = 0; i < v.size(); ++i) {
            if (basis.state_of(i).total() != t) {
                v(i) = 0.0;
            }
        }
        const auto psi = PureState::normalized(basis, v);
        const double chi = 0.05 * trial;
        const double a = phase(gen);
        const double b = phase(gen);
        const auto two_step = apply_phase(apply_phase(psi, a, chi), b, chi);
        const auto one_step = apply_phase(psi, a + b, chi);
        REQUIRE(max_abs_diff(two_step.amplitudes(), one_step.amplitudes()) < 1e-12);
        for (Index i = 0; i < v.size(); ++i) {
            if (basis.state_of(i).total() != t) {
                REQUIRE(one_step.amplitudes()(i) == Complex(0.0, 0.0));
            }
        }
        REQUIRE_THAT(one_step.amplitudes().norm(), WithinAbs(1.0, 1e-14));
    }
}

TEST_CASE("noon_like examples", "[interferometer]") {
    const TwoModeBasis basis(4);
    const double r = 1.0 / std::sqrt(2.0);
    const auto s10 = noon_like({1, 0}, basis);
    CHECK_THAT(s10.amplitude(1, 0).real(), WithinAbs(r, 1e-15));
    CHECK_THAT(s10.amplitude(0, 1).real(), WithinAbs(r, 1e-15));

    const auto s31 = noon_like({3, 1}, basis);
    CHECK_THAT(s31.amplitude(2, 1).real(), WithinAbs(r, 1e-15));
    CHECK_THAT(s31.amplitude(1, 2).real(), WithinAbs(r, 1e-15));

    const auto s21 = noon_like({2, 1}, basis);
    CHECK_THAT(s21.amplitude(1, 1).real(), WithinAbs(1.0, 1e-15));

    CHECK_THROWS_AS(noon_like({3, 4}, basis), ConfigError);
    CHECK_THROWS_AS(noon_like({5, 0}, basis), TruncationError);
}

TEST_CASE("noon_like(N,k) and noon_like(N,N-k) give the same density operator",
          "[interferometer][property]") {
    for (int n = 1; n <= 9; ++n) {
        const TwoModeBasis basis(n);
        for (int k = 0; k <= n; ++k) {
            const auto a = DensityOperator::from_pure(noon_like({n, k}, basis));
            const auto b = DensityOperator::from_pure(noon_like({n, n - k}, basis));
            REQUIRE(max_abs_diff(a.matrix().to_dense(), b.matrix().to_dense()) < 1e-15);
        }
    }
}

TEST_CASE("superposition_state examples", "[interferometer]") {
    const TwoModeBasis basis(4);
    const double r = 1.0 / std::sqrt(2.0);
    {
        const auto psi = superposition_state({2, {r, 0.0}}, basis);
        CHECK(max_abs_diff(psi.amplitudes(), noon_like({2, 0}, basis).amplitudes()) < 1e-15);
    }
    {
        const auto psi = superposition_state({3, {0.5, 0.5}}, basis);
        CHECK_THAT(psi.amplitudes().norm(), WithinAbs(1.0, 1e-15));
        for (auto [n1, n2] : {std::pair{3, 0}, {0, 3}, {2, 1}, {1, 2}}) {
            CHECK_THAT(psi.amplitude(n1, n2).real(), WithinAbs(0.5, 1e-15));
        }
    }
    {
        const auto psi = superposition_state({2, {0.0, 0.5}}, basis);
        CHECK_THAT(psi.amplitude(1, 1).real(), WithinAbs(1.0, 1e-15));
    }
    CHECK_THROWS_AS(superposition_state({3, {1.0, 1.0}}, basis), ConfigError);
    CHECK_THROWS_AS(superposition_state({3, {0.5}}, basis), ConfigError);
}

TEST_CASE("SuperpositionSpec normalization rule", "[interferometer]") {
    const auto spec = SuperpositionSpec::normalized(4, {1.0, 2.0, 3.0});
    CHECK_THAT(2 * spec.alpha[0] * spec.alpha[0] + 2 * spec.alpha[1] * spec.alpha[1] +
                   4 * spec.alpha[2] * spec.alpha[2],
               WithinAbs(1.0, 1e-15));
    CHECK(SuperpositionSpec::tau(5) == 2);
    CHECK(SuperpositionSpec::tau(6) == 3);
    CHECK_THROWS_AS(SuperpositionSpec::normalized(4, {0.0, 0.0, 0.0}), ConfigError);
}

TEST_CASE("beam_splitter examples", "[interferometer]") {
    const TwoModeBasis basis(3);
    const auto vac = beam_splitter(PureState::fock(basis, 0, 0));
    CHECK_THAT(std::abs(vac.amplitude(0, 0)), WithinAbs(1.0, 1e-15));

    const auto split = beam_splitter(PureState::fock(basis, 1, 0));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK_THAT(split.amplitude(1, 0).real(), WithinAbs(r, 1e-15));
    CHECK_THAT(split.amplitude(0, 1).imag(), WithinAbs(r, 1e-15));
    CHECK_THAT(std::abs(split.amplitude(0, 1).real()), WithinAbs(0.0, 1e-15));

    // Two passes swap the modes with phases, which flips the sign of M.
    const auto m = measurement_m(basis);
    const auto twice = beam_splitter(beam_splitter(m));
    CHECK(max_abs_diff(twice.matrix().to_dense(), -m.matrix().to_dense()) < 1e-13);
}

TEST_CASE("beam_splitter is unitary and consistent between states and operators",
          "[interferometer][property]") {
    const TwoModeBasis basis(10);
    const BlockMatrix u = beam_splitter_unitary(basis);
    const BlockMatrix uu = u * u.adjoint();
    REQUIRE(max_abs_diff(uu.to_dense(), Matrix::Identity(basis.dimension(), basis.dimension())) <
            1e-12);
    const auto m = measurement_mm(2, basis);
    const auto m_out = beam_splitter(m);
    for (int k = 0; k <= 5; ++k) {
        const auto psi = noon_like({10 - (k % 3), k}, basis);
        const auto evolved = apply_phase(psi, 0.37 * k, 0.1);
        REQUIRE_THAT(expectation(beam_splitter(evolved), m_out),
                     WithinAbs(expectation(evolved, m), 1e-9));
    }
}

TEST_CASE("4 Var(H) equals the numerical QFI on lossless families", "[interferometer][property]") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    for (int n = 1; n <= 9; ++n) {
        const TwoModeBasis basis(n);
        for (double chi : {0.0, 0.1}) {
            std::vector<double> raw(static_cast<std::size_t>(SuperpositionSpec::tau(n) + 1));
            for (auto &a : raw) {
                a = coeff(gen);
            }
            const auto spec = SuperpositionSpec::normalized(n, raw);
            const PhasedFamily family(spec, chi, 1.0);
            const auto psi = family.state(0.4);
            const auto mom = moments(psi, generator_h(basis, chi));
            const double numeric = qfi(family, 0.4).qfi;
            REQUIRE(rel_or_abs(numeric, 4.0 * mom.variance, 1e-12) < 1e-9);
        }
    }
}

TEST_CASE("interferometer parameters", "[interferometer]") {
    InterferometerParams p{0.1, 2.0};
    CHECK_NOTHROW(p.validate());
    CHECK(p.x_of_phi(1.0) == 0.5);
    CHECK_THROWS_AS((InterferometerParams{-0.1, 1.0}.validate()), ConfigError);
    CHECK_THROWS_AS((InterferometerParams{0.1, 0.0}.validate()), ConfigError);
}
