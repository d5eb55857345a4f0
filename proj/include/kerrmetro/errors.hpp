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
 * Exception types raised by the kerrmetro library.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace kerrmetro {

/// A Fock index or photon number lies outside the basis truncation.
class TruncationError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// An operator violates the block structure it is required to have.
class StructureError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Two objects built over different bases were combined.
class BasisMismatchError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Eigensolver failure, cancellation, or a violated numerical invariant.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Error propagation is undefined at the requested operating point(s).
class DegenerateOperatingPointError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

/// The Cramer-Rao bound is undefined for a vanishing Fisher information.
class UndefinedBoundError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Invalid user-supplied parameters or configuration.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

} // namespace kerrmetro
