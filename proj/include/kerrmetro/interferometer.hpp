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
 * Kerr-nonlinear phase dynamics of the two interferometer arms and the
 * fixed-photon-number input states fed into them.
 *
 * Arm j picks up U_j = exp(i phi_j G_j) with G_j = N_j + (chi/2) N_j^2 and
 * the split phi_1 = -phi/2, phi_2 = +phi/2, so the relative phase is
 * generated by H = (G_2 - G_1)/2.
 */

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "kerrmetro/fock.hpp"

namespace kerrmetro {

/// Nonlinear phase per photon and wave number; phi = kbar * x.
struct InterferometerParams {
    double chi = 0.0;
    double kbar = 1.0;

    void validate() const {
        if (!(chi >= 0.0)) {
            throw ConfigError("chi must be non-negative");
        }
        if (!(kbar > 0.0)) {
            throw ConfigError("kbar must be positive");
        }
    }

    [[nodiscard]] double x_of_phi(double phi) const { return phi / kbar; }
};

/// (|N-k, k> + |k, N-k>)/sqrt(2).
struct NoonLikeSpec {
    int N = 1;
    int k = 0;

    void validate() const {
        if (N < 1) {
            throw ConfigError("NoonLikeSpec: N must be >= 1");
        }
        if (k < 0 || k > N) {
            throw ConfigError("NoonLikeSpec: k=" + std::to_string(k) + " outside [0, " +
                              std::to_string(N) + "]");
        }
    }

    /// Even N with k = N/2: both kets are |N/2, N/2>.
    [[nodiscard]] bool degenerate() const noexcept { return 2 * k == N; }
};

/// sum_k alpha_k (|N-k, k> + |k, N-k>), k = 0..tau, real alpha.
struct SuperpositionSpec {
    int N = 1;
    std::vector<double> alpha;

    [[nodiscard]] static int tau(int n) noexcept { return n / 2; }

    /// Contribution of alpha_k^2 to the squared norm: 2, or 4 for the
    /// coinciding middle term of even N.
    [[nodiscard]] static double weight(int n, int k) noexcept {
        return (n % 2 == 0 && 2 * k == n) ? 4.0 : 2.0;
    }

    [[nodiscard]] double norm_squared() const {
        double s = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            s += weight(N, static_cast<int>(k)) * alpha[k] * alpha[k];
        }
        return s;
    }

    void validate() const {
        if (N < 1) {
            throw ConfigError("SuperpositionSpec: N must be >= 1");
        }
        if (static_cast<int>(alpha.size()) != tau(N) + 1) {
            throw ConfigError("SuperpositionSpec: expected " + std::to_string(tau(N) + 1) +
                              " coefficients, got " + std::to_string(alpha.size()));
        }
        if (std::abs(norm_squared() - 1.0) > tolerance::norm) {
            throw ConfigError("SuperpositionSpec: coefficients are not normalized");
        }
    }

    /// Rescale arbitrary nonzero coefficients onto the normalization surface.
    static SuperpositionSpec normalized(int n, std::vector<double> raw) {
        SuperpositionSpec spec{n, std::move(raw)};
        if (static_cast<int>(spec.alpha.size()) != tau(n) + 1) {
            throw ConfigError("SuperpositionSpec: expected " + std::to_string(tau(n) + 1) +
                              " coefficients");
        }
        const double s = spec.norm_squared();
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ConfigError("SuperpositionSpec: cannot normalize a zero vector");
        }
        const double scale = 1.0 / std::sqrt(s);
        for (auto &a : spec.alpha) {
            a *= scale;
        }
        return spec;
    }

    /// All weight on branch k.
    static SuperpositionSpec unit(int n, int k) {
        std::vector<double> raw(static_cast<std::size_t>(tau(n) + 1), 0.0);
        raw.at(static_cast<std::size_t>(k)) = 1.0;
        return normalized(n, std::move(raw));
    }
};

/// G~_n = n + (chi/2) n^2.
inline double g_tilde(int n, double chi) {
    if (n < 0) {
        throw std::invalid_argument("g_tilde: negative photon number");
    }
    const double dn = n;
    return dn + 0.5 * chi * dn * dn;
}

/// Eigenvalue of H on |n1, n2>.
inline double phase_frequency(int n1, int n2, double chi) {
    return 0.5 * (g_tilde(n2, chi) - g_tilde(n1, chi));
}

/// G(k) = G~_{N-k} - G~_k.
inline double branch_gap(int n, int k, double chi) {
    return g_tilde(n - k, chi) - g_tilde(k, chi);
}

/// H = (G_2 - G_1)/2, diagonal in the Fock basis.
inline HermitianOperator generator_h(const TwoModeBasis &basis, double chi) {
    return HermitianOperator(BlockMatrix::diagonal(
        basis, [chi](TwoModeIndex s) { return phase_frequency(s.n1, s.n2, chi); }));
}

/// exp(i phi H) |psi>.
inline PureState apply_phase(const PureState &psi, double phi, double chi) {
    const auto &basis = psi.basis();
    Vector out = psi.amplitudes();
    for (Index i = 0; i < out.size(); ++i) {
        const auto s = basis.state_of(i);
        out(i) *= std::polar(1.0, phi * phase_frequency(s.n1, s.n2, chi));
    }
    return {basis, std::move(out)};
}

/// Normalized (|N-k,k> + |k,N-k>); the degenerate even-N, k = N/2 case is |N/2,N/2>.
inline PureState noon_like(const NoonLikeSpec &spec, const TwoModeBasis &basis) {
    spec.validate();
    if (spec.N > basis.n_total_max()) {
        throw TruncationError("noon_like: N exceeds basis truncation");
    }
    Vector v = Vector::Zero(basis.dimension());
    v(basis.flat_index(spec.N - spec.k, spec.k)) += 1.0;
    v(basis.flat_index(spec.k, spec.N - spec.k)) += 1.0;
    return PureState::normalized(basis, std::move(v));
}

inline PureState superposition_state(const SuperpositionSpec &spec, const TwoModeBasis &basis) {
    spec.validate();
    if (spec.N > basis.n_total_max()) {
        throw TruncationError("superposition_state: N exceeds basis truncation");
    }
    Vector v = Vector::Zero(basis.dimension());
    for (int k = 0; k < static_cast<int>(spec.alpha.size()); ++k) {
        const double a = spec.alpha[static_cast<std::size_t>(k)];
        v(basis.flat_index(spec.N - k, k)) += a;
        v(basis.flat_index(k, spec.N - k)) += a;
    }
    return PureState(basis, std::move(v));
}

/// Unitary of the symmetric 50:50 beam splitter, a1^dag -> (a1^dag + i a2^dag)/sqrt2,
/// a2^dag -> (i a1^dag + a2^dag)/sqrt2, i.e. |1,0> -> (|1,0> + i|0,1>)/sqrt2.
inline BlockMatrix beam_splitter_unitary(const TwoModeBasis &basis) {
    BlockMatrix u(basis);
    const auto log_binom = [](int n, int r) {
        return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
    };
    const Complex powers_of_i[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int t = 0; t < basis.block_count(); ++t) {
        Matrix &b = u.block(t);
        for (int n1 = 0; n1 <= t; ++n1) {
            const int n2 = t - n1;
            for (int j = 0; j <= n1; ++j) {
                for (int l = 0; l <= n2; ++l) {
                    const int a = j + l;
                    const double log_mag = log_binom(n1, j) + log_binom(n2, l) +
                                           0.5 * (std::lgamma(a + 1.0) +
                                                  std::lgamma(t - a + 1.0) -
                                                  std::lgamma(n1 + 1.0) -
                                                  std::lgamma(n2 + 1.0)) -
                                           0.5 * t * std::numbers::ln2;
                    b(a, n1) += std::exp(log_mag) * powers_of_i[(n1 - j + l) % 4];
                }
            }
        }
    }
    return u;
}

/// Internal-mode state -> port state.
inline PureState beam_splitter(const PureState &psi) {
    const auto &basis = psi.basis();
    const BlockMatrix u = beam_splitter_unitary(basis);
    Vector out(basis.dimension());
    for (int t = 0; t < basis.block_count(); ++t) {
        const Index off = TwoModeBasis::block_offset(t);
        out.segment(off, t + 1) = u.block(t) * psi.amplitudes().segment(off, t + 1);
    }
    return PureState::normalized(basis, std::move(out));
}

/// O -> U O U^dagger with the same unitary as beam_splitter(PureState).
inline HermitianOperator beam_splitter(const HermitianOperator &obs) {
    const BlockMatrix u = beam_splitter_unitary(obs.basis());
    return HermitianOperator(u * obs.matrix() * u.adjoint());
}

} // namespace kerrmetro
