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
 * Photon loss in the interferometer arms, modelled as a beam splitter of
 * transmissivity eta in each arm.
 *
 * Two independent routes are provided: the generic Kraus channel acting on
 * any density operator, and closed-form expressions for the lossy output of
 * phase-evolved N00N-type and fixed-N superposition inputs. The closed forms
 * are written as a list of PhaseTerm entries so that the phi-dependence (and
 * its exact derivative) can be evaluated cheaply at many phases.
 */

#pragma once

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "kerrmetro/fock.hpp"
#include "kerrmetro/interferometer.hpp"

namespace kerrmetro {

/// Transmissivities of the loss beam splitters in arm 1 (a) and arm 2 (b).
struct LossParams {
    double eta_a = 1.0;
    double eta_b = 1.0;

    static LossParams equal(double eta) { return {eta, eta}; }

    void validate() const {
        if (!(eta_a >= 0.0 && eta_a <= 1.0) || !(eta_b >= 0.0 && eta_b <= 1.0)) {
            throw ConfigError("transmissivity must lie in [0, 1]");
        }
    }
};

using InputSpec = std::variant<NoonLikeSpec, SuperpositionSpec>;

inline int photon_number(const InputSpec &input) {
    return std::visit([](const auto &s) { return s.N; }, input);
}

inline void validate(const InputSpec &input) {
    std::visit([](const auto &s) { s.validate(); }, input);
}

struct LossyStateParams {
    InputSpec input;
    double eta = 1.0;
    double phi = 0.0;
    double chi = 0.0;

    void validate() const {
        kerrmetro::validate(input);
        LossParams::equal(eta).validate();
        if (!(chi >= 0.0)) {
            throw ConfigError("chi must be non-negative");
        }
    }
};

/// K_q = (1-eta)^{q/2} eta^{n/2} a^q / sqrt(q!) on the chosen mode.
inline SparseMatrix kraus_element(Mode mode, int q, double eta, const TwoModeBasis &basis) {
    if (q < 0) {
        throw std::invalid_argument("kraus_element: negative q");
    }
    LossParams::equal(eta).validate();
    std::vector<Eigen::Triplet<Complex>> entries;
    for (Index col = 0; col < basis.dimension(); ++col) {
        const auto s = basis.state_of(col);
        const int n = (mode == Mode::first) ? s.n1 : s.n2;
        if (n < q) {
            continue;
        }
        const double w = std::pow(1.0 - eta, q) * std::pow(eta, n - q) *
                         falling_factorial(n, q) / factorial(q);
        if (w == 0.0) {
            continue;
        }
        const TwoModeIndex target =
            (mode == Mode::first) ? TwoModeIndex{s.n1 - q, s.n2} : TwoModeIndex{s.n1, s.n2 - q};
        entries.emplace_back(basis.flat_index(target), col, Complex(std::sqrt(w), 0.0));
    }
    SparseMatrix out(basis.dimension(), basis.dimension());
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
}

/// rho -> sum_{q,p} K_{a,q} K_{b,p} rho K_{b,p}^dag K_{a,q}^dag. The two arms
/// act on different modes, so the double sum is applied one mode at a time.
inline DensityOperator apply_loss(const DensityOperator &rho, const LossParams &loss) {
    loss.validate();
    const auto &basis = rho.basis();
    Matrix current = rho.matrix().to_dense();
    const auto channel = [&](Mode mode, double eta) {
        if (eta == 1.0) {
            return;
        }
        Matrix out = Matrix::Zero(current.rows(), current.cols());
        for (int q = 0; q <= basis.n_total_max(); ++q) {
            const SparseMatrix k = kraus_element(mode, q, eta, basis);
            const Matrix left = k * current;
            out.noalias() += left * SparseMatrix(k.adjoint());
        }
        current = std::move(out);
    };
    channel(Mode::first, loss.eta_a);
    channel(Mode::second, loss.eta_b);
    return DensityOperator::from_dense(current, basis);
}

/// One closed-form contribution weight * exp(i phi omega) to the (row, col)
/// element of a phi-dependent density operator.
struct PhaseTerm {
    TwoModeIndex row;
    TwoModeIndex col;
    double weight = 0.0;
    double omega = 0.0;
};

/// rho(phi) = sum_t weight_t exp(i phi omega_t) |row_t><col_t|.
struct PhaseTermFamily {
    TwoModeBasis basis{0};
    std::vector<PhaseTerm> terms;

    [[nodiscard]] BlockMatrix evaluate(double phi) const {
        BlockMatrix out(basis);
        for (const auto &t : terms) {
            out.add(t.row, t.col, t.weight * std::polar(1.0, phi * t.omega));
        }
        return out;
    }

    /// Exact d rho / d phi.
    [[nodiscard]] BlockMatrix derivative(double phi) const {
        BlockMatrix out(basis);
        for (const auto &t : terms) {
            out.add(t.row, t.col,
                    Complex(0.0, t.omega) * t.weight * std::polar(1.0, phi * t.omega));
        }
        return out;
    }
};

namespace detail {

/// x^e with the convention 0^0 = 1, in log form (-inf for a zero result).
inline double log_power(double base, int exponent) {
    if (exponent == 0) {
        return 0.0;
    }
    if (base == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return exponent * std::log(base);
}

/// log B_pq = log[(1-eta)^{p+q} eta^{N-p-q} / (p! q!)].
inline double log_loss_weight(int n, int p, int q, double eta) {
    return log_power(1.0 - eta, p + q) + log_power(eta, n - p - q) -
           std::lgamma(p + 1.0) - std::lgamma(q + 1.0);
}

/// 0.5 * log of a product of four falling factorials; -inf if any vanishes.
inline double half_log_p4(int n_a, int m_a, int n_b, int m_b, int n_c, int m_c, int n_d,
                          int m_d) {
    return 0.5 * (log_falling_factorial(n_a, m_a) + log_falling_factorial(n_b, m_b) +
                  log_falling_factorial(n_c, m_c) + log_falling_factorial(n_d, m_d));
}

inline void push_term(std::vector<PhaseTerm> &terms, TwoModeIndex row, TwoModeIndex col,
                      double sign_and_scale, double log_magnitude, double omega) {
    if (!std::isfinite(log_magnitude) || sign_and_scale == 0.0) {
        return;
    }
    terms.push_back({row, col, sign_and_scale * std::exp(log_magnitude), omega});
}

} // namespace detail

/// Closed-form lossy output of the phase-evolved (|N-k,k> + |k,N-k>)/sqrt2
/// input under equal loss eta. Four sums over the photons q (arm 1) and p
/// (arm 2) lost; terms whose falling factorials vanish are dropped.
inline PhaseTermFamily lossy_noon_terms(const NoonLikeSpec &spec, double eta, double chi) {
    spec.validate();
    LossParams::equal(eta).validate();
    const int n = spec.N;
    const int k = spec.k;
    const double gap = branch_gap(n, k, chi);
    // Branch weight |1/sqrt2|^2; the coinciding kets of the degenerate case
    // are counted four times, so each carries a quarter.
    const double half = spec.degenerate() ? 0.25 : 0.5;

    PhaseTermFamily family{TwoModeBasis(n), {}};
    auto &terms = family.terms;
    for (int q = 0; q <= n; ++q) {
        for (int p = 0; p + q <= n; ++p) {
            const double log_b = detail::log_loss_weight(n, p, q, eta);
            if (!std::isfinite(log_b)) {
                continue;
            }
            const TwoModeIndex first{n - k - q, k - p};
            const TwoModeIndex second{k - q, n - k - p};
            detail::push_term(terms, first, first, half,
                              log_b + detail::half_log_p4(k, p, k, p, n - k, q, n - k, q), 0.0);
            detail::push_term(terms, first, second, half,
                              log_b + detail::half_log_p4(k, p, k, q, n - k, q, n - k, p),
                              -gap);
            detail::push_term(terms, second, first, half,
                              log_b + detail::half_log_p4(k, q, k, p, n - k, p, n - k, q),
                              gap);
            detail::push_term(terms, second, second, half,
                              log_b + detail::half_log_p4(k, q, k, q, n - k, p, n - k, p), 0.0);
        }
    }
    return family;
}

/// Closed-form lossy output of the phase-evolved fixed-N superposition
/// sum_k alpha_k (|N-k,k> + |k,N-k>) under equal loss eta.
inline PhaseTermFamily lossy_superposition_terms(const SuperpositionSpec &spec, double eta,
                                                 double chi) {
    spec.validate();
    LossParams::equal(eta).validate();
    const int n = spec.N;
    const int tau = SuperpositionSpec::tau(n);

    PhaseTermFamily family{TwoModeBasis(n), {}};
    auto &terms = family.terms;
    for (int k = 0; k <= tau; ++k) {
        const double ak = spec.alpha[static_cast<std::size_t>(k)];
        if (ak == 0.0) {
            continue;
        }
        const double gk = branch_gap(n, k, chi);
        for (int l = 0; l <= tau; ++l) {
            const double al = spec.alpha[static_cast<std::size_t>(l)];
            if (al == 0.0) {
                continue;
            }
            const double gl = branch_gap(n, l, chi);
            const double coeff = ak * al;
            for (int q = 0; q <= n; ++q) {
                for (int p = 0; p + q <= n; ++p) {
                    const double log_b = detail::log_loss_weight(n, p, q, eta);
                    if (!std::isfinite(log_b)) {
                        continue;
                    }
                    const TwoModeIndex ket_a{n - k - q, k - p};
                    const TwoModeIndex ket_b{k - q, n - k - p};
                    const TwoModeIndex bra_a{n - l - q, l - p};
                    const TwoModeIndex bra_b{l - q, n - l - p};
                    detail::push_term(
                        terms, ket_a, bra_a, coeff,
                        log_b + detail::half_log_p4(k, p, l, p, n - k, q, n - l, q),
                        -0.5 * (gk - gl));
                    detail::push_term(
                        terms, ket_a, bra_b, coeff,
                        log_b + detail::half_log_p4(k, p, l, q, n - k, q, n - l, p),
                        -0.5 * (gk + gl));
                    detail::push_term(
                        terms, ket_b, bra_a, coeff,
                        log_b + detail::half_log_p4(k, q, l, p, n - k, p, n - l, q),
                        0.5 * (gk + gl));
                    detail::push_term(
                        terms, ket_b, bra_b, coeff,
                        log_b + detail::half_log_p4(k, q, l, q, n - k, p, n - l, p),
                        0.5 * (gk - gl));
                }
            }
        }
    }
    return family;
}

inline PhaseTermFamily lossy_terms(const InputSpec &input, double eta, double chi) {
    return std::visit(
        [&](const auto &spec) -> PhaseTermFamily {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, NoonLikeSpec>) {
                return lossy_noon_terms(spec, eta, chi);
            } else {
                return lossy_superposition_terms(spec, eta, chi);
            }
        },
        input);
}

inline DensityOperator lossy_noon(const LossyStateParams &params) {
    params.validate();
    const auto *spec = std::get_if<NoonLikeSpec>(&params.input);
    if (spec == nullptr) {
        throw ConfigError("lossy_noon: input is not a NOON-like spec");
    }
    return DensityOperator(lossy_noon_terms(*spec, params.eta, params.chi).evaluate(params.phi));
}

inline DensityOperator lossy_superposition(const LossyStateParams &params) {
    params.validate();
    const auto *spec = std::get_if<SuperpositionSpec>(&params.input);
    if (spec == nullptr) {
        throw ConfigError("lossy_superposition: input is not a superposition spec");
    }
    return DensityOperator(
        lossy_superposition_terms(*spec, params.eta, params.chi).evaluate(params.phi));
}

} // namespace kerrmetro
