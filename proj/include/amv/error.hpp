/*
 Copyright 2026 The amv Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <stdexcept>
#include <string>

namespace amv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: configuration, grid, mismatched sizes.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared where a finite value is required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// A fixed-point iteration grew its residual for several iterations in a row.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// A fixed-point iteration hit its iteration cap above tolerance and the
/// caller asked for that to be fatal.
class NotConvergedError : public Error {
public:
    using Error::Error;
};

}  // namespace amv
