// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The lce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace lce {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values (dimensions, hyperparameters, pilot kinds).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or matrix shapes do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// API misuse, e.g. backward on an untracked tensor.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A factorization or solve failed numerically.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// File format or filesystem failures.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace lce
