// Copyright 2026 The CFSM Authors.
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

#ifndef CFSM_ERRORS_HPP_
#define CFSM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfsm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed definition document: not valid JSON, or a value of the wrong
// JSON type. Carries a byte offset into the source text when known.
class SyntaxError : public Error {
 public:
  explicit SyntaxError(const std::string& what, std::size_t byte_offset = 0)
      : Error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Structurally valid document that violates a machine/model invariant
// (missing reserved states, dangling state reference, duplicate priority...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Base for condition-checker backend failures.
class CheckerError : public Error {
 public:
  using Error::Error;
};

// Remote backend unavailable after the configured retry attempts.
class RemoteError : public CheckerError {
 public:
  using CheckerError::CheckerError;
};

// Remote backend reachable but its output could not be interpreted.
class ProtocolError : public CheckerError {
 public:
  using CheckerError::CheckerError;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

// Codification gave up after the draft budget; keeps every rejection reason.
class CodificationError : public Error {
 public:
  CodificationError(const std::string& what, std::vector<std::string> diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

class UnknownBenchmark : public Error {
 public:
  using Error::Error;
};

class JudgeError : public Error {
 public:
  using Error::Error;
};

class PredictorError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfsm

#endif  // CFSM_ERRORS_HPP_
