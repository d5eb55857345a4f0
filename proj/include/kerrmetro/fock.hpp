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
 * Truncated two-mode Fock space: basis layout, block-diagonal operator
 * storage, state types and Hermitian eigendecomposition.
 *
 * States are laid out graded by total photon number T = n1 + n2. Block T
 * occupies the flat indices [T(T+1)/2, (T+1)(T+2)/2) and within a block n1
 * ascends, so every operator that conserves T is a direct sum of dense
 * (T+1)x(T+1) blocks.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <spdlog/spdlog.h>

#include "kerrmetro/errors.hpp"

namespace kerrmetro {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Index = Eigen::Index;

namespace tolerance {
inline constexpr double hermitian = 1e-12;
inline constexpr double trace = 1e-10;
inline constexpr double psd = 1e-10;
inline constexpr double norm = 1e-12;
inline constexpr double block = 1e-12;
inline constexpr double imaginary_residue = 1e-10;
} // namespace tolerance

/// n!/(n-m)!, zero when m > n. Exact integer arithmetic up to n = 20,
/// log-Gamma beyond (20! is the largest factorial representable in 64 bits).
inline double falling_factorial(int n, int m) {
    if (n < 0 || m < 0) {
        throw std::invalid_argument("falling_factorial: negative argument");
    }
    if (m > n) {
        return 0.0;
    }
    if (n <= 20) {
        std::uint64_t r = 1;
        for (int i = n - m + 1; i <= n; ++i) {
            r *= static_cast<std::uint64_t>(i);
        }
        return static_cast<double>(r);
    }
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(n - m + 1.0));
}

/// log(n!/(n-m)!); -inf when m > n.
inline double log_falling_factorial(int n, int m) {
    if (n < 0 || m < 0) {
        throw std::invalid_argument("log_falling_factorial: negative argument");
    }
    if (m > n) {
        return -std::numeric_limits<double>::infinity();
    }
    if (n <= 20) {
        return std::log(falling_factorial(n, m));
    }
    return std::lgamma(n + 1.0) - std::lgamma(n - m + 1.0);
}

inline double factorial(int n) { return falling_factorial(n, n); }

/// Occupation numbers of the two internal modes.
struct TwoModeIndex {
    int n1 = 0;
    int n2 = 0;

    [[nodiscard]] constexpr int total() const noexcept { return n1 + n2; }
    friend constexpr bool operator==(TwoModeIndex, TwoModeIndex) = default;
};

/// Two-mode Fock basis truncated on the total photon number.
class TwoModeBasis {
  public:
    explicit TwoModeBasis(int n_total_max) : n_total_max_{n_total_max} {
        if (n_total_max < 0) {
            throw std::invalid_argument("TwoModeBasis: negative truncation");
        }
    }

    [[nodiscard]] int n_total_max() const noexcept { return n_total_max_; }
    [[nodiscard]] int block_count() const noexcept { return n_total_max_ + 1; }

    [[nodiscard]] Index dimension() const noexcept {
        return block_offset(n_total_max_ + 1);
    }

    [[nodiscard]] static constexpr Index block_offset(int total) noexcept {
        return static_cast<Index>(total) * (total + 1) / 2;
    }

    [[nodiscard]] static constexpr Index block_size(int total) noexcept {
        return total + 1;
    }

    [[nodiscard]] bool contains(int n1, int n2) const noexcept {
        return n1 >= 0 && n2 >= 0 && n1 + n2 <= n_total_max_;
    }

    [[nodiscard]] Index flat_index(int n1, int n2) const {
        if (!contains(n1, n2)) {
            throw TruncationError("state |" + std::to_string(n1) + "," +
                                  std::to_string(n2) +
                                  "> outside truncation n_total_max=" +
                                  std::to_string(n_total_max_));
        }
        return block_offset(n1 + n2) + n1;
    }

    [[nodiscard]] Index flat_index(TwoModeIndex s) const {
        return flat_index(s.n1, s.n2);
    }

    [[nodiscard]] TwoModeIndex state_of(Index i) const {
        if (i < 0 || i >= dimension()) {
            throw TruncationError("flat index " + std::to_string(i) +
                                  " outside basis of dimension " +
                                  std::to_string(dimension()));
        }
        // Largest T with T(T+1)/2 <= i; the sqrt estimate is corrected for
        // rounding in both directions.
        auto total = static_cast<int>(
            (std::sqrt(8.0 * static_cast<double>(i) + 1.0) - 1.0) / 2.0);
        while (block_offset(total + 1) <= i) {
            ++total;
        }
        while (block_offset(total) > i) {
            --total;
        }
        const auto n1 = static_cast<int>(i - block_offset(total));
        return {n1, total - n1};
    }

    friend bool operator==(const TwoModeBasis &, const TwoModeBasis &) = default;

  private:
    int n_total_max_;
};

inline Index flat_index(int n1, int n2, const TwoModeBasis &basis) {
    return basis.flat_index(n1, n2);
}

inline void require_same_basis(const TwoModeBasis &a, const TwoModeBasis &b,
                               const char *where) {
    if (!(a == b)) {
        throw BasisMismatchError(std::string(where) + ": basis mismatch (" +
                                 std::to_string(a.n_total_max()) + " vs " +
                                 std::to_string(b.n_total_max()) + ")");
    }
}

/// Operator that conserves total photon number, stored as one dense block
/// per T. Block T is indexed by n1 in [0, T].
class BlockMatrix {
  public:
    explicit BlockMatrix(TwoModeBasis basis) : basis_{basis} {
        blocks_.reserve(static_cast<std::size_t>(basis_.block_count()));
        for (int t = 0; t < basis_.block_count(); ++t) {
            blocks_.push_back(Matrix::Zero(t + 1, t + 1));
        }
    }

    BlockMatrix(TwoModeBasis basis, std::vector<Matrix> blocks)
        : basis_{basis}, blocks_{std::move(blocks)} {
        if (static_cast<int>(blocks_.size()) != basis_.block_count()) {
            throw StructureError("BlockMatrix: wrong number of blocks");
        }
        for (int t = 0; t < basis_.block_count(); ++t) {
            const auto &b = blocks_[static_cast<std::size_t>(t)];
            if (b.rows() != t + 1 || b.cols() != t + 1) {
                throw StructureError("BlockMatrix: block " + std::to_string(t) +
                                     " has wrong shape");
            }
        }
    }

    static BlockMatrix identity(TwoModeBasis basis) {
        BlockMatrix out(basis);
        for (auto &b : out.blocks_) {
            b.setIdentity();
        }
        return out;
    }

    template <typename Fn> static BlockMatrix diagonal(TwoModeBasis basis, Fn &&fn) {
        BlockMatrix out(basis);
        for (int t = 0; t < basis.block_count(); ++t) {
            for (int n1 = 0; n1 <= t; ++n1) {
                out.block(t)(n1, n1) = Complex(fn(TwoModeIndex{n1, t - n1}));
            }
        }
        return out;
    }

    [[nodiscard]] const TwoModeBasis &basis() const noexcept { return basis_; }
    [[nodiscard]] const std::vector<Matrix> &blocks() const noexcept { return blocks_; }

    [[nodiscard]] const Matrix &block(int total) const {
        return blocks_.at(static_cast<std::size_t>(total));
    }
    [[nodiscard]] Matrix &block(int total) {
        return blocks_.at(static_cast<std::size_t>(total));
    }

    [[nodiscard]] Complex operator()(TwoModeIndex row, TwoModeIndex col) const {
        (void)basis_.flat_index(row);
        (void)basis_.flat_index(col);
        if (row.total() != col.total()) {
            return {0.0, 0.0};
        }
        return block(row.total())(row.n1, col.n1);
    }

    /// Accumulate into the (row, col) element; both must share a block.
    void add(TwoModeIndex row, TwoModeIndex col, Complex value) {
        (void)basis_.flat_index(row);
        (void)basis_.flat_index(col);
        if (row.total() != col.total()) {
            throw StructureError("BlockMatrix::add: element couples T=" +
                                 std::to_string(row.total()) + " and T=" +
                                 std::to_string(col.total()));
        }
        block(row.total())(row.n1, col.n1) += value;
    }

    [[nodiscard]] Matrix to_dense() const {
        const Index dim = basis_.dimension();
        Matrix out = Matrix::Zero(dim, dim);
        for (int t = 0; t < basis_.block_count(); ++t) {
            const Index off = TwoModeBasis::block_offset(t);
            out.block(off, off, t + 1, t + 1) = block(t);
        }
        return out;
    }

    [[nodiscard]] Complex trace() const {
        Complex tr{0.0, 0.0};
        for (const auto &b : blocks_) {
            tr += b.trace();
        }
        return tr;
    }

    [[nodiscard]] BlockMatrix adjoint() const {
        BlockMatrix out(basis_);
        for (std::size_t t = 0; t < blocks_.size(); ++t) {
            out.blocks_[t] = blocks_[t].adjoint();
        }
        return out;
    }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (const auto &b : blocks_) {
            if (b.size() > 0) {
                m = std::max(m, b.cwiseAbs().maxCoeff());
            }
        }
        return m;
    }

    /// max |A - A^dagger| over all elements.
    [[nodiscard]] double hermitian_deviation() const {
        double m = 0.0;
        for (const auto &b : blocks_) {
            m = std::max(m, (b - b.adjoint()).cwiseAbs().maxCoeff());
        }
        return m;
    }

    /// Replace A by (A + A^dagger)/2.
    void hermitize() {
        for (auto &b : blocks_) {
            Matrix h = (b + b.adjoint()) * 0.5;
            b = std::move(h);
        }
    }

    BlockMatrix &operator+=(const BlockMatrix &o) {
        require_same_basis(basis_, o.basis_, "BlockMatrix::operator+=");
        for (std::size_t t = 0; t < blocks_.size(); ++t) {
            blocks_[t] += o.blocks_[t];
        }
        return *this;
    }

    BlockMatrix &operator-=(const BlockMatrix &o) {
        require_same_basis(basis_, o.basis_, "BlockMatrix::operator-=");
        for (std::size_t t = 0; t < blocks_.size(); ++t) {
            blocks_[t] -= o.blocks_[t];
        }
        return *this;
    }

    BlockMatrix &operator*=(Complex s) {
        for (auto &b : blocks_) {
            b *= s;
        }
        return *this;
    }

    friend BlockMatrix operator+(BlockMatrix a, const BlockMatrix &b) { return a += b; }
    friend BlockMatrix operator-(BlockMatrix a, const BlockMatrix &b) { return a -= b; }
    friend BlockMatrix operator*(BlockMatrix a, Complex s) { return a *= s; }
    friend BlockMatrix operator*(Complex s, BlockMatrix a) { return a *= s; }

    friend BlockMatrix operator*(const BlockMatrix &a, const BlockMatrix &b) {
        require_same_basis(a.basis_, b.basis_, "BlockMatrix::operator*");
        BlockMatrix out(a.basis_);
        for (std::size_t t = 0; t < a.blocks_.size(); ++t) {
            out.blocks_[t].noalias() = a.blocks_[t] * b.blocks_[t];
        }
        return out;
    }

  private:
    TwoModeBasis basis_;
    std::vector<Matrix> blocks_;
};

/// Tr[A B] without forming the product.
inline Complex trace_of_product(const BlockMatrix &a, const BlockMatrix &b) {
    require_same_basis(a.basis(), b.basis(), "trace_of_product");
    Complex tr{0.0, 0.0};
    for (int t = 0; t < a.basis().block_count(); ++t) {
        tr += a.block(t).cwiseProduct(b.block(t).transpose()).sum();
    }
    return tr;
}

/// One nonzero total-photon-number block of a dense operator.
struct Block {
    int total = 0;
    Matrix matrix;
};

namespace detail {

inline double off_block_mass(const Matrix &dense, const TwoModeBasis &basis) {
    double worst = 0.0;
    for (Index c = 0; c < dense.cols(); ++c) {
        const int tc = basis.state_of(c).total();
        for (Index r = 0; r < dense.rows(); ++r) {
            if (basis.state_of(r).total() != tc) {
                worst = std::max(worst, std::abs(dense(r, c)));
            }
        }
    }
    return worst;
}

inline void require_block_diagonal(const Matrix &dense, const TwoModeBasis &basis,
                                   double tol) {
    if (dense.rows() != basis.dimension() || dense.cols() != basis.dimension()) {
        throw BasisMismatchError("dense operator shape does not match basis dimension");
    }
    const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
    const double off = off_block_mass(dense, basis);
    if (off > tol * scale) {
        throw StructureError("operator is not block-diagonal in total photon "
                             "number (largest off-block element " +
                             std::to_string(off) + ")");
    }
}

} // namespace detail

/// Slice a dense operator into its T-blocks. Off-block elements up to `tol`
/// (relative to the largest element, floor 1) are discarded; larger ones
/// raise StructureError.
inline BlockMatrix to_blocks(const Matrix &dense, const TwoModeBasis &basis,
                             double tol = tolerance::block) {
    detail::require_block_diagonal(dense, basis, tol);
    BlockMatrix out(basis);
    for (int t = 0; t < basis.block_count(); ++t) {
        const Index off = TwoModeBasis::block_offset(t);
        out.block(t) = dense.block(off, off, t + 1, t + 1);
    }
    return out;
}

/// Nonzero T-blocks of a dense operator, ascending in T.
inline std::vector<Block> block_split(const Matrix &dense, const TwoModeBasis &basis,
                                      double tol = tolerance::block) {
    const BlockMatrix bm = to_blocks(dense, basis, tol);
    std::vector<Block> out;
    for (int t = 0; t < basis.block_count(); ++t) {
        if (bm.block(t).cwiseAbs().maxCoeff() > 0.0) {
            out.push_back({t, bm.block(t)});
        }
    }
    return out;
}

/// Inverse of block_split.
inline Matrix direct_sum(const std::vector<Block> &blocks, const TwoModeBasis &basis) {
    BlockMatrix bm(basis);
    for (const auto &b : blocks) {
        if (b.total < 0 || b.total > basis.n_total_max() ||
            b.matrix.rows() != b.total + 1 || b.matrix.cols() != b.total + 1) {
            throw StructureError("direct_sum: malformed block at T=" +
                                 std::to_string(b.total));
        }
        bm.block(b.total) = b.matrix;
    }
    return bm.to_dense();
}

/// Normalized state vector over a TwoModeBasis.
class PureState {
  public:
    PureState(TwoModeBasis basis, Vector amplitudes)
        : basis_{basis}, amplitudes_{std::move(amplitudes)} {
        if (amplitudes_.size() != basis_.dimension()) {
            throw BasisMismatchError("PureState: amplitude vector has wrong length");
        }
        if (std::abs(amplitudes_.norm() - 1.0) > tolerance::norm) {
            throw std::invalid_argument("PureState: amplitudes are not normalized (norm " +
                                        std::to_string(amplitudes_.norm()) + ")");
        }
    }

    static PureState normalized(TwoModeBasis basis, Vector amplitudes) {
        const double n = amplitudes.norm();
        if (n == 0.0) {
            throw std::invalid_argument("PureState: zero vector");
        }
        amplitudes /= n;
        return {basis, std::move(amplitudes)};
    }

    static PureState fock(TwoModeBasis basis, int n1, int n2) {
        Vector v = Vector::Zero(basis.dimension());
        v(basis.flat_index(n1, n2)) = 1.0;
        return {basis, std::move(v)};
    }

    [[nodiscard]] const TwoModeBasis &basis() const noexcept { return basis_; }
    [[nodiscard]] const Vector &amplitudes() const noexcept { return amplitudes_; }
    [[nodiscard]] Complex amplitude(int n1, int n2) const {
        return amplitudes_(basis_.flat_index(n1, n2));
    }

  private:
    TwoModeBasis basis_;
    Vector amplitudes_;
};

/// Hermitian operator conserving total photon number.
class HermitianOperator {
  public:
    explicit HermitianOperator(BlockMatrix m) : matrix_{std::move(m)} {
        const double scale = std::max(1.0, matrix_.max_abs());
        const double dev = matrix_.hermitian_deviation();
        if (dev > tolerance::hermitian * scale) {
            throw NumericalError("HermitianOperator: deviation from Hermiticity " +
                                 std::to_string(dev));
        }
        matrix_.hermitize();
    }

    static HermitianOperator identity(TwoModeBasis basis) {
        return HermitianOperator(BlockMatrix::identity(basis));
    }

    static HermitianOperator from_dense(const Matrix &dense, const TwoModeBasis &basis) {
        return HermitianOperator(to_blocks(dense, basis));
    }

    [[nodiscard]] const BlockMatrix &matrix() const noexcept { return matrix_; }
    [[nodiscard]] const TwoModeBasis &basis() const noexcept { return matrix_.basis(); }

  private:
    BlockMatrix matrix_;
};

/// Density operator: Hermitian, unit trace, positive semidefinite.
class DensityOperator {
  public:
    explicit DensityOperator(BlockMatrix m) : matrix_{std::move(m)} {
        const double dev = matrix_.hermitian_deviation();
        if (dev > tolerance::hermitian) {
            throw NumericalError("DensityOperator: deviation from Hermiticity " +
                                 std::to_string(dev));
        }
        matrix_.hermitize();
        const Complex tr = matrix_.trace();
        if (std::abs(tr - 1.0) > tolerance::trace) {
            throw NumericalError("DensityOperator: trace " + std::to_string(tr.real()) +
                                 " differs from 1");
        }
    }

    static DensityOperator from_pure(const PureState &psi) {
        const auto &basis = psi.basis();
        BlockMatrix m(basis);
        const auto &v = psi.amplitudes();
        for (int t = 0; t < basis.block_count(); ++t) {
            const auto seg = v.segment(TwoModeBasis::block_offset(t), t + 1);
            m.block(t).noalias() = seg * seg.adjoint();
        }
        return DensityOperator(std::move(m));
    }

    static DensityOperator from_dense(const Matrix &dense, const TwoModeBasis &basis) {
        return DensityOperator(to_blocks(dense, basis));
    }

    [[nodiscard]] const BlockMatrix &matrix() const noexcept { return matrix_; }
    [[nodiscard]] const TwoModeBasis &basis() const noexcept { return matrix_.basis(); }

    /// Tr[rho^2].
    [[nodiscard]] double purity() const {
        return trace_of_product(matrix_, matrix_).real();
    }

  private:
    BlockMatrix matrix_;
};

inline std::vector<Block> block_split(const DensityOperator &rho) {
    std::vector<Block> out;
    const auto &m = rho.matrix();
    for (int t = 0; t < rho.basis().block_count(); ++t) {
        if (m.block(t).cwiseAbs().maxCoeff() > 0.0) {
            out.push_back({t, m.block(t)});
        }
    }
    return out;
}

namespace detail {
inline double checked_real(Complex value, double scale, const char *where) {
    if (std::abs(value.imag()) > tolerance::imaginary_residue * std::max(1.0, scale)) {
        throw NumericalError(std::string(where) + ": imaginary residue " +
                             std::to_string(value.imag()));
    }
    return value.real();
}
} // namespace detail

/// <psi|O|psi>.
inline double expectation(const PureState &psi, const HermitianOperator &obs) {
    require_same_basis(psi.basis(), obs.basis(), "expectation");
    Complex acc{0.0, 0.0};
    const auto &v = psi.amplitudes();
    for (int t = 0; t < psi.basis().block_count(); ++t) {
        const auto seg = v.segment(TwoModeBasis::block_offset(t), t + 1);
        acc += seg.dot(obs.matrix().block(t) * seg);
    }
    return detail::checked_real(acc, obs.matrix().max_abs(), "expectation");
}

/// Tr[rho O].
inline double expectation(const DensityOperator &rho, const HermitianOperator &obs) {
    require_same_basis(rho.basis(), obs.basis(), "expectation");
    return detail::checked_real(trace_of_product(rho.matrix(), obs.matrix()),
                                obs.matrix().max_abs(), "expectation");
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
struct EigenSystem {
    RealVector values;
    Matrix vectors;
};

/// Dense Hermitian eigendecomposition.
inline EigenSystem eigh(const Matrix &a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("eigh: matrix is not square");
    }
    if (a.size() == 0) {
        return {RealVector(0), Matrix(0, 0)};
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigh: eigensolver failed to converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Blockwise eigendecomposition, assembled over the full basis and sorted
/// ascending. Eigenvectors are block-supported.
inline EigenSystem eigh(const BlockMatrix &m) {
    const auto &basis = m.basis();
    const Index dim = basis.dimension();
    RealVector values(dim);
    Matrix vectors = Matrix::Zero(dim, dim);
    for (int t = 0; t < basis.block_count(); ++t) {
        const auto es = eigh(m.block(t));
        const Index off = TwoModeBasis::block_offset(t);
        values.segment(off, t + 1) = es.values;
        vectors.block(off, off, t + 1, t + 1) = es.vectors;
    }
    std::vector<Index> order(static_cast<std::size_t>(dim));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index i, Index j) { return values(i) < values(j); });
    EigenSystem out{RealVector(dim), Matrix(dim, dim)};
    for (Index i = 0; i < dim; ++i) {
        out.values(i) = values(order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

inline EigenSystem eigh(const HermitianOperator &obs) { return eigh(obs.matrix()); }
inline EigenSystem eigh(const DensityOperator &rho) { return eigh(rho.matrix()); }

/// Clamp round-off negatives in a spectrum used as probabilities. Values
/// below -tolerance::psd mean the operator is not PSD.
inline void clamp_probabilities(RealVector &p) {
    int clamped = 0;
    for (Index i = 0; i < p.size(); ++i) {
        if (p(i) < 0.0) {
            if (p(i) < -tolerance::psd) {
                throw NumericalError("negative eigenvalue " + std::to_string(p(i)) +
                                     " in density operator");
            }
            p(i) = 0.0;
            ++clamped;
        }
    }
    if (clamped > 0) {
        spdlog::debug("clamped {} round-off negative eigenvalue(s) to zero", clamped);
    }
}

/// Smallest eigenvalue >= -tol.
inline bool is_psd(const DensityOperator &rho, double tol = tolerance::psd) {
    for (const auto &b : rho.matrix().blocks()) {
        if (eigh(b).values.minCoeff() < -tol) {
            return false;
        }
    }
    return true;
}

/// Largest |eigenvalue| of a Hermitian operator.
inline double operator_norm(const HermitianOperator &obs) {
    double m = 0.0;
    for (const auto &b : obs.matrix().blocks()) {
        m = std::max(m, eigh(b).values.cwiseAbs().maxCoeff());
    }
    return m;
}

enum class Mode { first = 1, second = 2 };

/// Matrix of a^m on the chosen mode: |n> -> sqrt(n!/(n-m)!) |n-m>, zero for n < m.
inline SparseMatrix lowering_power(Mode mode, int m, const TwoModeBasis &basis) {
    if (m < 0) {
        throw std::invalid_argument("lowering_power: negative power");
    }
    std::vector<Eigen::Triplet<Complex>> entries;
    for (Index col = 0; col < basis.dimension(); ++col) {
        const auto s = basis.state_of(col);
        const int n = (mode == Mode::first) ? s.n1 : s.n2;
        if (n < m) {
            continue;
        }
        const TwoModeIndex target =
            (mode == Mode::first) ? TwoModeIndex{s.n1 - m, s.n2} : TwoModeIndex{s.n1, s.n2 - m};
        entries.emplace_back(basis.flat_index(target), col,
                             Complex(std::sqrt(falling_factorial(n, m)), 0.0));
    }
    SparseMatrix out(basis.dimension(), basis.dimension());
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
}

/// N_j = a_j^dagger a_j.
inline HermitianOperator number_operator(Mode mode, const TwoModeBasis &basis) {
    return HermitianOperator(BlockMatrix::diagonal(basis, [mode](TwoModeIndex s) {
        return static_cast<double>(mode == Mode::first ? s.n1 : s.n2);
    }));
}

} // namespace kerrmetro
