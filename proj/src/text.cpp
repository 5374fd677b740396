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

#include "mvrag/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <vector>

#include "mvrag/error.hpp"

namespace mvrag {
namespace {

icu::UnicodeString to_nfc_unicode(std::string_view utf8) {
  auto text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw Error(Errc::ProviderError, "ICU NFC normalizer unavailable");
  }
  icu::UnicodeString out = normalizer->normalize(text, status);
  if (U_FAILURE(status)) return text;
  return out;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

// Splits on Unicode whitespace, dropping empty tokens.
std::vector<icu::UnicodeString> split_ws(const icu::UnicodeString& s) {
  std::vector<icu::UnicodeString> tokens;
  icu::UnicodeString current;
  for (int32_t i = 0; i < s.length();) {
    UChar32 c = s.char32At(i);
    if (u_isUWhiteSpace(c)) {
      if (!current.isEmpty()) tokens.push_back(current);
      current.remove();
    } else {
      current.append(c);
    }
    i = s.moveIndex32(i, 1);
  }
  if (!current.isEmpty()) tokens.push_back(current);
  return tokens;
}

bool is_punct(UChar32 c) {
  if (u_ispunct(c)) return true;
  // ASCII symbols ($, +, <, =, >, ^, `, |, ~) are not in the P* categories.
  return c < 0x80 && c > 0x20 && !u_isalnum(c);
}

}  // namespace

std::string nfc(std::string_view utf8) { return to_utf8(to_nfc_unicode(utf8)); }

std::string normalize_whitespace(std::string_view utf8) {
  const auto tokens = split_ws(to_nfc_unicode(utf8));
  icu::UnicodeString joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined.append(UChar32{' '});
    joined.append(tokens[i]);
  }
  return to_utf8(joined);
}

std::string to_lower(std::string_view utf8) {
  auto s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  s.toLower(icu::Locale::getRoot());
  return to_utf8(s);
}

std::string normalize_answer_text(std::string_view utf8) {
  icu::UnicodeString s = to_nfc_unicode(utf8);
  s.toLower(icu::Locale::getRoot());

  icu::UnicodeString stripped;
  for (int32_t i = 0; i < s.length(); i = s.moveIndex32(i, 1)) {
    UChar32 c = s.char32At(i);
    if (!is_punct(c)) stripped.append(c);
  }

  icu::UnicodeString out;
  bool first = true;
  for (const auto& token : split_ws(stripped)) {
    if (token == "a" || token == "an" || token == "the") continue;
    if (!first) out.append(UChar32{' '});
    out.append(token);
    first = false;
  }
  return to_utf8(out);
}

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n\f\v");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace mvrag
