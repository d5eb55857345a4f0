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
 * Metrological figures of merit for phi-parameterized output states:
 * symmetric logarithmic derivative, quantum Fisher information, the
 * quantum Cramer-Rao bound, photon-counting observables and the
 * error-propagation uncertainty of their read-out.
 *
 * Throughout, `qfi` denotes the Fisher information itself, so the
 * Cramer-Rao bound reads delta_phi >= 1/sqrt(qfi).
 */

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

#include "kerrmetro/fock.hpp"
#include "kerrmetro/interferometer.hpp"
#include "kerrmetro/loss.hpp"
#include "kerrmetro/parallel.hpp"

namespace kerrmetro {

struct DerivativeMode {
    enum class Kind { analytic, finite_difference };
    Kind kind = Kind::analytic;
    double step = 1e-3;

    static DerivativeMode analytic() { return {}; }
    static DerivativeMode finite_difference(double h) { return {Kind::finite_difference, h}; }
};

/// phi -> rho(phi) for a given input, Kerr strength and equal arm loss.
///
/// Lossless families are evolved as state vectors and differentiated as
/// i[H, rho]; lossy families use the closed-form channel output and its
/// term-by-term phase derivative.
class PhasedFamily {
  public:
    PhasedFamily(InputSpec input, double chi, double eta, DerivativeMode mode = {})
        : input_{std::move(input)}, chi_{chi}, eta_{eta}, mode_{mode},
          basis_{photon_number(input_)} {
        kerrmetro::validate(input_);
        LossParams::equal(eta_).validate();
        if (!(chi_ >= 0.0)) {
            throw ConfigError("chi must be non-negative");
        }
        if (eta_ == 1.0) {
            pure_ = std::visit(
                [&](const auto &spec) -> PureState {
                    using T = std::decay_t<decltype(spec)>;
                    if constexpr (std::is_same_v<T, NoonLikeSpec>) {
                        return noon_like(spec, basis_);
                    } else {
                        return superposition_state(spec, basis_);
                    }
                },
                input_);
        } else {
            terms_ = lossy_terms(input_, eta_, chi_);
        }
    }

    [[nodiscard]] const TwoModeBasis &basis() const noexcept { return basis_; }
    [[nodiscard]] const InputSpec &input() const noexcept { return input_; }
    [[nodiscard]] double chi() const noexcept { return chi_; }
    [[nodiscard]] double eta() const noexcept { return eta_; }
    [[nodiscard]] const DerivativeMode &mode() const noexcept { return mode_; }
    [[nodiscard]] bool lossless() const noexcept { return pure_.has_value(); }

    /// Evolved input state; only defined for lossless families.
    [[nodiscard]] PureState state(double phi) const {
        if (!pure_) {
            throw std::logic_error("PhasedFamily::state: family is lossy");
        }
        return apply_phase(*pure_, phi, chi_);
    }

    [[nodiscard]] DensityOperator rho(double phi) const {
        if (pure_) {
            return DensityOperator::from_pure(state(phi));
        }
        return DensityOperator(terms_.evaluate(phi));
    }

    [[nodiscard]] HermitianOperator rho_prime(double phi) const {
        if (mode_.kind == DerivativeMode::Kind::finite_difference) {
            return rho_prime_finite_difference(phi, mode_.step);
        }
        return rho_prime_analytic(phi);
    }

    [[nodiscard]] HermitianOperator rho_prime_analytic(double phi) const {
        if (pure_) {
            // rho(phi) = e^{i phi H} rho_0 e^{-i phi H}.
            const BlockMatrix h = generator_h(basis_, chi_).matrix();
            const BlockMatrix r = rho(phi).matrix();
            BlockMatrix comm = h * r - r * h;
            comm *= Complex(0.0, 1.0);
            return HermitianOperator(std::move(comm));
        }
        return HermitianOperator(terms_.derivative(phi));
    }

    /// Central differences at h and h/2 combined by one Richardson step.
    [[nodiscard]] HermitianOperator rho_prime_finite_difference(double phi, double h) const {
        if (!(h >= 1e-8 * std::max(1.0, std::abs(phi)))) {
            throw NumericalError("finite-difference step " + std::to_string(h) +
                                 " is too small: cancellation dominates");
        }
        const auto central = [&](double step) {
            BlockMatrix d = rho(phi + step).matrix() - rho(phi - step).matrix();
            d *= Complex(1.0 / (2.0 * step), 0.0);
            return d;
        };
        BlockMatrix coarse = central(h);
        BlockMatrix fine = central(0.5 * h);
        fine *= Complex(4.0 / 3.0, 0.0);
        coarse *= Complex(1.0 / 3.0, 0.0);
        return HermitianOperator(fine - coarse);
    }

  private:
    InputSpec input_;
    double chi_;
    double eta_;
    DerivativeMode mode_;
    TwoModeBasis basis_;
    std::optional<PureState> pure_;
    PhaseTermFamily terms_;
};

inline HermitianOperator rho_prime(const PhasedFamily &family, double phi) {
    return family.rho_prime(phi);
}

struct QfiResult {
    double qfi = 0.0;
    double rank_cutoff = 0.0;
    RealVector spectrum;
};

/// Relative rank cutoff: eigenvalue pairs with p_j + p_k below
/// kRankCutoff * max(p) are treated as kernel.
inline constexpr double kRankCutoff = 1e-12;

namespace detail {

/// Connected components of the union sparsity graph of two equally sized
/// square blocks. Singleton indices on which both matrices vanish are omitted.
inline std::vector<std::vector<Index>> coupled_components(const Matrix &a, const Matrix &b) {
    const Index n = a.rows();
    std::vector<Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    const auto find = [&](Index i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            auto &pi = parent[static_cast<std::size_t>(i)];
            pi = parent[static_cast<std::size_t>(pi)];
            i = pi;
        }
        return i;
    };
    std::vector<bool> touched(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < n; ++c) {
        for (Index r = 0; r < n; ++r) {
            if (a(r, c) != 0.0 || b(r, c) != 0.0) {
                touched[static_cast<std::size_t>(r)] = true;
                touched[static_cast<std::size_t>(c)] = true;
                const Index pr = find(r);
                const Index pc = find(c);
                if (pr != pc) {
                    parent[static_cast<std::size_t>(std::max(pr, pc))] = std::min(pr, pc);
                }
            }
        }
    }
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        if (touched[static_cast<std::size_t>(i)]) {
            groups[static_cast<std::size_t>(find(i))].push_back(i);
        }
    }
    std::vector<std::vector<Index>> out;
    for (auto &g : groups) {
        if (!g.empty()) {
            out.push_back(std::move(g));
        }
    }
    return out;
}

inline Matrix gather(const Matrix &m, const std::vector<Index> &idx) {
    const auto n = static_cast<Index>(idx.size());
    Matrix out(n, n);
    for (Index c = 0; c < n; ++c) {
        for (Index r = 0; r < n; ++r) {
            out(r, c) = m(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

/// rho and rho' in the eigenbasis of rho on one coupled component.
struct ComponentSpectrum {
    int total = 0;
    std::vector<Index> members;
    RealVector p;
    Matrix vectors;
    Matrix rho_prime_eig;
};

inline std::vector<ComponentSpectrum> component_spectra(const BlockMatrix &rho,
                                                        const BlockMatrix &rho_prime) {
    require_same_basis(rho.basis(), rho_prime.basis(), "component_spectra");
    std::vector<ComponentSpectrum> out;
    for (int t = 0; t < rho.basis().block_count(); ++t) {
        const Matrix &r = rho.block(t);
        const Matrix &d = rho_prime.block(t);
        for (auto &members : coupled_components(r, d)) {
            ComponentSpectrum cs;
            cs.total = t;
            const auto es = eigh(gather(r, members));
            cs.p = es.values;
            cs.vectors = es.vectors;
            cs.rho_prime_eig = es.vectors.adjoint() * gather(d, members) * es.vectors;
            cs.members = std::move(members);
            out.push_back(std::move(cs));
        }
    }
    return out;
}

inline double largest_eigenvalue(const std::vector<ComponentSpectrum> &spectra) {
    double m = 0.0;
    for (const auto &cs : spectra) {
        if (cs.p.size() > 0) {
            m = std::max(m, cs.p.maxCoeff());
        }
    }
    return m;
}

} // namespace detail

/// Symmetric logarithmic derivative: L_jk = 2 rho'_jk / (p_j + p_k) in the
/// eigenbasis of rho, zero where p_j + p_k <= rank_tol. Without an explicit
/// tolerance the relative cutoff kRankCutoff * max(p) is used.
inline HermitianOperator sld(const DensityOperator &rho, const HermitianOperator &rho_prime,
                             std::optional<double> rank_tol = std::nullopt) {
    auto spectra = detail::component_spectra(rho.matrix(), rho_prime.matrix());
    const double cut = rank_tol.value_or(kRankCutoff * detail::largest_eigenvalue(spectra));
    BlockMatrix out(rho.basis());
    for (auto &cs : spectra) {
        clamp_probabilities(cs.p);
        const Index n = cs.p.size();
        Matrix l = Matrix::Zero(n, n);
        for (Index c = 0; c < n; ++c) {
            for (Index r = 0; r < n; ++r) {
                const double s = cs.p(r) + cs.p(c);
                if (s > cut) {
                    l(r, c) = 2.0 * cs.rho_prime_eig(r, c) / s;
                }
            }
        }
        const Matrix back = cs.vectors * l * cs.vectors.adjoint();
        Matrix &blk = out.block(cs.total);
        for (Index c = 0; c < n; ++c) {
            for (Index r = 0; r < n; ++r) {
                blk(cs.members[static_cast<std::size_t>(r)],
                    cs.members[static_cast<std::size_t>(c)]) = back(r, c);
            }
        }
    }
    out.hermitize();
    return HermitianOperator(std::move(out));
}

/// Tr[rho L^2] = sum_{p_j + p_k > cut} 2 |rho'_jk|^2 / (p_j + p_k).
inline QfiResult qfi(const DensityOperator &rho, const HermitianOperator &rho_prime) {
    auto spectra = detail::component_spectra(rho.matrix(), rho_prime.matrix());
    QfiResult result;
    result.rank_cutoff = kRankCutoff * detail::largest_eigenvalue(spectra);

    std::vector<double> spectrum;
    spectrum.reserve(static_cast<std::size_t>(rho.basis().dimension()));
    double total = 0.0;
    for (auto &cs : spectra) {
        for (Index i = 0; i < cs.p.size(); ++i) {
            spectrum.push_back(cs.p(i));
        }
        clamp_probabilities(cs.p);
        const Index n = cs.p.size();
        for (Index c = 0; c < n; ++c) {
            for (Index r = 0; r < n; ++r) {
                const double s = cs.p(r) + cs.p(c);
                if (s > result.rank_cutoff) {
                    total += 2.0 * std::norm(cs.rho_prime_eig(r, c)) / s;
                }
            }
        }
    }
    // States outside every coupled component carry zero weight.
    spectrum.resize(static_cast<std::size_t>(rho.basis().dimension()), 0.0);
    std::sort(spectrum.begin(), spectrum.end());
    result.spectrum = Eigen::Map<const RealVector>(spectrum.data(),
                                                   static_cast<Index>(spectrum.size()));
    result.qfi = total;
    return result;
}

inline QfiResult qfi(const PhasedFamily &family, double phi) {
    return qfi(family.rho(phi), family.rho_prime(phi));
}

/// (N - 2k + chi N^2/2 - chi N k)^2, the lossless Fisher information of the
/// N00N-type input with branch index k.
inline double qfi_pure_analytic(int n, int k, double chi) {
    NoonLikeSpec{n, k}.validate();
    const double g = branch_gap(n, k, chi);
    return g * g;
}

/// 1/sqrt(qfi).
inline double qcrb(double qfi_value) {
    if (!(qfi_value > 0.0)) {
        throw UndefinedBoundError("Cramer-Rao bound undefined for Fisher information " +
                                  std::to_string(qfi_value));
    }
    return 1.0 / std::sqrt(qfi_value);
}

struct KScanResult {
    int k_star = 0;
    double qfi_star = 0.0;
    std::vector<double> per_k;
};

/// Values within this relative distance of the running maximum count as ties
/// in max_qfi_over_k (k and N-k agree only up to rounding).
inline constexpr double kTieTolerance = 1e-12;

/// Lossy N00N-type Fisher information for every k in [0, N]; the maximum
/// goes to the smallest maximizing k.
inline KScanResult max_qfi_over_k(int n, double eta, double chi, double phi,
                                  unsigned threads = 1) {
    KScanResult out;
    out.per_k.assign(static_cast<std::size_t>(n + 1), 0.0);
    parallel_for(static_cast<std::size_t>(n + 1), threads, [&](std::size_t k) {
        const PhasedFamily family(NoonLikeSpec{n, static_cast<int>(k)}, chi, eta);
        out.per_k[k] = qfi(family, phi).qfi;
    });
    out.k_star = 0;
    out.qfi_star = out.per_k[0];
    for (int k = 1; k <= n; ++k) {
        if (out.per_k[static_cast<std::size_t>(k)] > out.qfi_star * (1.0 + kTieTolerance)) {
            out.qfi_star = out.per_k[static_cast<std::size_t>(k)];
            out.k_star = k;
        }
    }
    return out;
}

/// Photon-count difference at the output ports, expressed in the internal
/// modes: M = i(a2^dag a1 - a1^dag a2).
inline HermitianOperator measurement_m(const TwoModeBasis &basis) {
    BlockMatrix m(basis);
    for (int t = 0; t < basis.block_count(); ++t) {
        Matrix &b = m.block(t);
        for (int n1 = 0; n1 <= t; ++n1) {
            const int n2 = t - n1;
            if (n1 > 0) {
                b(n1 - 1, n1) += Complex(0.0, std::sqrt(double(n1) * (n2 + 1)));
            }
            if (n2 > 0) {
                b(n1 + 1, n1) += Complex(0.0, -std::sqrt(double(n2) * (n1 + 1)));
            }
        }
    }
    return HermitianOperator(std::move(m));
}

/// m-photon coincidence observable M_m = i[(a1^dag)^m a2^m - a1^m (a2^dag)^m].
/// Note M_1 = -M.
inline HermitianOperator measurement_mm(int m, const TwoModeBasis &basis) {
    if (m < 1) {
        throw ConfigError("measurement_mm: m must be >= 1");
    }
    BlockMatrix out(basis);
    for (int t = 0; t < basis.block_count(); ++t) {
        Matrix &b = out.block(t);
        for (int n1 = 0; n1 <= t; ++n1) {
            const int n2 = t - n1;
            if (n2 >= m) {
                const double amp = std::exp(
                    0.5 * (log_falling_factorial(n2, m) + log_falling_factorial(n1 + m, m)));
                b(n1 + m, n1) += Complex(0.0, amp);
            }
            if (n1 >= m) {
                const double amp = std::exp(
                    0.5 * (log_falling_factorial(n1, m) + log_falling_factorial(n2 + m, m)));
                b(n1 - m, n1) += Complex(0.0, -amp);
            }
        }
    }
    return HermitianOperator(std::move(out));
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean Tr[rho O] and variance Tr[rho (O - mean)^2]. The variance is
/// accumulated as sum_j p_j |(O - mean) v_j|^2 over the eigenvectors of rho,
/// which stays non-negative and accurate when it is small against |O|^2.
inline Moments moments(const DensityOperator &rho, const HermitianOperator &obs) {
    require_same_basis(rho.basis(), obs.basis(), "moments");
    Moments out;
    out.mean = expectation(rho, obs);
    for (int t = 0; t < rho.basis().block_count(); ++t) {
        const Matrix &r = rho.matrix().block(t);
        if (r.cwiseAbs().maxCoeff() == 0.0) {
            continue;
        }
        auto es = eigh(r);
        clamp_probabilities(es.values);
        Matrix centered = obs.matrix().block(t);
        centered.diagonal().array() -= out.mean;
        const Matrix shifted = centered * es.vectors;
        for (Index j = 0; j < es.values.size(); ++j) {
            out.variance += es.values(j) * shifted.col(j).squaredNorm();
        }
    }
    return out;
}

inline Moments moments(const PureState &psi, const HermitianOperator &obs) {
    require_same_basis(psi.basis(), obs.basis(), "moments");
    Moments out;
    out.mean = expectation(psi, obs);
    for (int t = 0; t < psi.basis().block_count(); ++t) {
        const auto seg = psi.amplitudes().segment(TwoModeBasis::block_offset(t), t + 1);
        Vector shifted = obs.matrix().block(t) * seg - out.mean * seg;
        out.variance += shifted.squaredNorm();
    }
    return out;
}

/// Operating points with |d<O>/dphi| < kDegeneracyThreshold * |O| are degenerate.
inline constexpr double kDegeneracyThreshold = 1e-12;

/// Refinement ignores phases where |d<O>/dphi| drops below this fraction of
/// its largest value on the grid.
inline constexpr double kRefineSlopeFloor = 1e-6;

struct PointReadout {
    double phi = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double slope = 0.0;
    double delta_phi = std::numeric_limits<double>::infinity();
    bool degenerate = true;
};

namespace detail {
inline PointReadout readout_at(const PhasedFamily &family, const HermitianOperator &obs,
                               double phi, double obs_norm) {
    PointReadout out;
    out.phi = phi;
    const DensityOperator r = family.rho(phi);
    const Moments mom = moments(r, obs);
    out.mean = mom.mean;
    out.variance = mom.variance;
    out.slope = detail::checked_real(trace_of_product(family.rho_prime(phi).matrix(),
                                                      obs.matrix()),
                                     obs_norm, "delta_phi");
    out.degenerate = std::abs(out.slope) < kDegeneracyThreshold * obs_norm;
    if (!out.degenerate) {
        out.delta_phi = std::sqrt(out.variance) / std::abs(out.slope);
    }
    return out;
}
} // namespace detail

/// Error-propagation uncertainty sqrt(Var O) / |d<O>/dphi| at phi.
inline double delta_phi(const PhasedFamily &family, const HermitianOperator &obs, double phi) {
    require_same_basis(family.basis(), obs.basis(), "delta_phi");
    const auto pt = detail::readout_at(family, obs, phi, operator_norm(obs));
    if (pt.degenerate) {
        throw DegenerateOperatingPointError("d<O>/dphi vanishes at phi=" + std::to_string(phi));
    }
    return pt.delta_phi;
}

struct ReadoutResult {
    std::vector<double> phi_grid;
    std::vector<double> mean;
    std::vector<double> variance;
    /// +inf at degenerate grid points.
    std::vector<double> delta_phi;
    double min_delta_phi = std::numeric_limits<double>::infinity();
    double argmin_phi = 0.0;
    /// Smallest delta_phi on the grid alone, before refinement.
    double grid_min_delta_phi = std::numeric_limits<double>::infinity();
};

/// `points` equally spaced phases on [lo, hi].
inline std::vector<double> uniform_grid(double lo, double hi, int points) {
    if (points < 1) {
        throw ConfigError("grid needs at least one point");
    }
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        g[static_cast<std::size_t>(i)] =
            points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    }
    return g;
}

inline std::vector<double> default_phi_grid() { return uniform_grid(0.0, std::numbers::pi, 2001); }

/// Scan delta_phi over a phase grid, then refine the best grid bracket by
/// golden-section search down to a 1e-10 wide interval.
inline ReadoutResult min_delta_phi(const PhasedFamily &family, const HermitianOperator &obs,
                                   const std::vector<double> &grid) {
    require_same_basis(family.basis(), obs.basis(), "min_delta_phi");
    if (grid.empty()) {
        throw ConfigError("min_delta_phi: empty phase grid");
    }
    const double obs_norm = operator_norm(obs);
    ReadoutResult out;
    out.phi_grid = grid;
    std::optional<std::size_t> best;
    double max_slope = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto pt = detail::readout_at(family, obs, grid[i], obs_norm);
        out.mean.push_back(pt.mean);
        out.variance.push_back(pt.variance);
        out.delta_phi.push_back(pt.delta_phi);
        max_slope = std::max(max_slope, std::abs(pt.slope));
        if (!pt.degenerate && (!best || pt.delta_phi < out.delta_phi[*best])) {
            best = i;
        }
    }
    if (!best) {
        throw DegenerateOperatingPointError("no non-degenerate operating point on the grid");
    }
    out.grid_min_delta_phi = out.delta_phi[*best];
    out.min_delta_phi = out.grid_min_delta_phi;
    out.argmin_phi = grid[*best];
    if (grid.size() < 2) {
        return out;
    }

    const double slope_floor = kRefineSlopeFloor * max_slope;
    const auto objective = [&](double phi) {
        const auto pt = detail::readout_at(family, obs, phi, obs_norm);
        if (pt.degenerate || std::abs(pt.slope) < slope_floor) {
            return std::numeric_limits<double>::infinity();
        }
        return pt.delta_phi;
    };
    double lo = grid[*best == 0 ? 0 : *best - 1];
    double hi = grid[std::min(*best + 1, grid.size() - 1)];
    if (lo > hi) {
        std::swap(lo, hi);
    }
    constexpr double inv_golden = 0.6180339887498949;
    double x1 = hi - inv_golden * (hi - lo);
    double x2 = lo + inv_golden * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    while (hi - lo > 1e-10) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_golden * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_golden * (hi - lo);
            f2 = objective(x2);
        }
    }
    const double x = f1 <= f2 ? x1 : x2;
    const double f = std::min(f1, f2);
    if (f < out.min_delta_phi) {
        out.min_delta_phi = f;
        out.argmin_phi = x;
    }
    return out;
}

inline ReadoutResult min_delta_phi(const PhasedFamily &family, const HermitianOperator &obs) {
    return min_delta_phi(family, obs, default_phi_grid());
}

} // namespace kerrmetro
