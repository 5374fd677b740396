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

#include <map>
#include <string>
#include <string_view>

namespace mvrag::prompts {

std::string_view graph_extraction();
std::string_view decomposition();
std::string_view step_answer();
std::string_view final_answer();
std::string_view judge();

/// Single-pass substitution of `{name}` placeholders. Unknown names and other
/// braces (the JSON examples inside templates) are copied through untouched,
/// and substituted values are never rescanned.
std::string render(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

}  // namespace mvrag::prompts
