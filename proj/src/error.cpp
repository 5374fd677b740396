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

#include "mvrag/error.hpp"

namespace mvrag {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyText: return "EmptyText";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownFormat: return "UnknownFormat";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::UnknownUnit: return "UnknownUnit";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case Errc::IoError: return "IoError";
    case Errc::ProviderError: return "ProviderError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DanglingSourceReference: return "DanglingSourceReference";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidQuery: return "InvalidQuery";
    case Errc::InvalidPlan: return "InvalidPlan";
    case Errc::MissingBinding: return "MissingBinding";
    case Errc::PreconditionViolation: return "PreconditionViolation";
    case Errc::ModelError: return "ModelError";
    case Errc::AuthError: return "AuthError";
    case Errc::UnparseableOutput: return "UnparseableOutput";
    case Errc::UnmatchedScript: return "UnmatchedScript";
    case Errc::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace mvrag
