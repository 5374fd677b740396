// Copyright 2026 The mvrag Authors
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
#include <string_view>

namespace mvrag {

enum class Errc {
  // corpus
  DuplicateId,
  EmptyText,
  ParseError,
  UnknownFormat,
  CountMismatch,
  // graph
  UnknownEntity,
  UnknownUnit,
  SchemaVersionMismatch,
  IoError,
  // index / embedding
  ProviderError,
  DimensionMismatch,
  // ranking
  DanglingSourceReference,
  InvalidConfig,
  // execution
  InvalidQuery,
  InvalidPlan,
  MissingBinding,
  PreconditionViolation,
  // model gateway
  ModelError,
  AuthError,
  UnparseableOutput,
  UnmatchedScript,
  // evaluation
  EmptyInput,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mvrag
