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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvrag/text.hpp"

namespace mvrag {

/// A verifiable passage; the atomic unit of ranking and generation context.
struct EvidenceUnit {
  std::string id;
  std::string title;
  std::string text;

  friend bool operator==(const EvidenceUnit&, const EvidenceUnit&) = default;
};

struct PassageRecord {
  std::string id;
  std::string title;
  std::string text;
};

struct QARecord {
  std::string id;
  std::string question;
  std::string gold_answer;
  std::string question_type;
  // Gold answers for intermediate plan steps, keyed by step id. Only
  // hand-built fixtures carry these; slot diagnostics fall back to a
  // heuristic judge when absent.
  std::map<int, std::string> gold_slot_answers;
};

/// Immutable, ordered collection of evidence units with unique ids.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::string source_name, std::vector<EvidenceUnit> units);

  const std::vector<EvidenceUnit>& units() const noexcept { return units_; }
  std::size_t size() const noexcept { return units_.size(); }
  bool empty() const noexcept { return units_.empty(); }
  const std::string& source_name() const noexcept { return source_name_; }

  const EvidenceUnit& operator[](std::size_t i) const { return units_[i]; }
  const EvidenceUnit* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  // Equality covers the units only; the source label is not persisted.
  friend bool operator==(const Corpus& a, const Corpus& b) { return a.units_ == b.units_; }

 private:
  std::string source_name_;
  std::vector<EvidenceUnit> units_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Normalizes whitespace (after NFC) and preserves order.
/// Throws DuplicateId or EmptyText.
Corpus ingest_passages(std::span<const PassageRecord> records, std::string source_name = {});

enum class BenchmarkFormat { HotpotQA, TwoWikiMultiHopQA, MuSiQue, Generic };

/// Accepts "hotpotqa", "2wikimultihopqa" (or "2wiki"), "musique", "generic".
BenchmarkFormat parse_benchmark_format(std::string_view tag);
std::string_view format_tag(BenchmarkFormat format);

struct Benchmark {
  Corpus corpus;
  std::vector<QARecord> questions;
};

/// Reads a JSON array (or JSON Lines) file of question records. Every
/// supporting and distractor passage lands in the corpus exactly once,
/// deduplicated on (title, normalized text). Unit ids are "c000000",
/// "c000001", ... in first-appearance order.
Benchmark load_benchmark(const std::filesystem::path& path, BenchmarkFormat format);

/// Parses already-decoded records; `source_name` labels the corpus.
Benchmark parse_benchmark(std::string_view content, BenchmarkFormat format,
                          std::string source_name);

/// Throws CountMismatch when the corpus does not hold `expected` units.
void check_passage_count(const Corpus& corpus, std::size_t expected);

void persist_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

/// Text fed to the text-evidence view: "title. body", or body when untitled.
std::string evidence_text(const EvidenceUnit& unit);

}  // namespace mvrag
