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

#include <string>
#include <string_view>

namespace mvrag {

/// Unicode NFC normalization of UTF-8 text. Invalid sequences become U+FFFD.
std::string nfc(std::string_view utf8);

/// NFC, then trims and collapses every run of Unicode whitespace to one space.
std::string normalize_whitespace(std::string_view utf8);

/// Answer normalization used for string accuracy: lowercase, punctuation
/// removed, articles "a"/"an"/"the" removed, whitespace collapsed.
/// Idempotent.
std::string normalize_answer_text(std::string_view utf8);

/// Locale-independent lowercase (full Unicode case mapping).
std::string to_lower(std::string_view utf8);

std::string trim(std::string_view s);

}  // namespace mvrag
