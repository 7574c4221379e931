// Copyright 2026 The LVCC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LVCC_ERRORS_HPP_
#define LVCC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace lvcc {

// Base of every error raised by the library. The CLI maps these to a
// diagnostic line and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or image dimensions violate an operation's contract.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error("dimension error: " + what) {}
};

// Invalid configuration: unknown extractor, q out of range, missing
// prerequisite checkpoint, malformed config file.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error("configuration error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error("numeric error: " + what) {}
};

// Container or file has a bad magic, version or header field.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what)
      : Error("format error: " + what) {}
};

class EncodeError : public Error {
 public:
  explicit EncodeError(const std::string& what)
      : Error("encode error: " + what) {}
};

// Payload is truncated or inconsistent with the tables used to read it.
class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what)
      : Error("decode error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io error: " + what) {}
};

}  // namespace lvcc

#endif  // LVCC_ERRORS_HPP_
