// Copyright 2026 The respdl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace respdl {

// Error taxonomy. The CLI maps these onto exit codes: usage errors exit 1,
// data-side errors exit 2, numerical failures exit 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files (RIFF headers, cache/ checkpoint containers).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that uses a codec or variant we do not decode.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Text parse failure; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf during training or inference.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace respdl
