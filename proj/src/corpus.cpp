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

#include "mvrag/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "mvrag/error.hpp"

namespace mvrag {

using nlohmann::json;

Corpus::Corpus(std::string source_name, std::vector<EvidenceUnit> units)
    : source_name_(std::move(source_name)), units_(std::move(units)) {
  by_id_.reserve(units_.size());
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (!by_id_.emplace(units_[i].id, i).second) {
      throw Error(Errc::DuplicateId, "duplicate evidence unit id '" + units_[i].id + "'");
    }
  }
}

const EvidenceUnit* Corpus::find(std::string_view id) const {
  auto i = index_of(id);
  return i ? &units_[*i] : nullptr;
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

Corpus ingest_passages(std::span<const PassageRecord> records, std::string source_name) {
  std::vector<EvidenceUnit> units;
  units.reserve(records.size());
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) {
      throw Error(Errc::DuplicateId, "duplicate evidence unit id '" + r.id + "'");
    }
    auto text = normalize_whitespace(r.text);
    if (text.empty()) throw Error(Errc::EmptyText, "evidence unit '" + r.id + "' has no text");
    units.push_back({r.id, normalize_whitespace(r.title), std::move(text)});
  }
  return Corpus(std::move(source_name), std::move(units));
}

BenchmarkFormat parse_benchmark_format(std::string_view tag) {
  const auto t = to_lower(tag);
  if (t == "hotpotqa") return BenchmarkFormat::HotpotQA;
  if (t == "2wikimultihopqa" || t == "2wiki") return BenchmarkFormat::TwoWikiMultiHopQA;
  if (t == "musique") return BenchmarkFormat::MuSiQue;
  if (t == "generic") return BenchmarkFormat::Generic;
  throw Error(Errc::UnknownFormat, "unknown dataset format '" + std::string(tag) + "'");
}

std::string_view format_tag(BenchmarkFormat format) {
  switch (format) {
    case BenchmarkFormat::HotpotQA: return "hotpotqa";
    case BenchmarkFormat::TwoWikiMultiHopQA: return "2wikimultihopqa";
    case BenchmarkFormat::MuSiQue: return "musique";
    case BenchmarkFormat::Generic: return "generic";
  }
  return "generic";
}

namespace {

struct RawPassage {
  std::string title;
  std::string text;
};

std::string string_field(const json& j, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = j.find(key);
    if (it != j.end() && it->is_string()) return it->get<std::string>();
  }
  return {};
}

std::string join_sentences(const json& sentences) {
  if (sentences.is_string()) return sentences.get<std::string>();
  if (!sentences.is_array()) throw Error(Errc::ParseError, "passage sentences must be a list");
  std::string out;
  for (const auto& s : sentences) {
    if (!s.is_string()) throw Error(Errc::ParseError, "passage sentence is not a string");
    if (!out.empty()) out += ' ';
    out += s.get<std::string>();
  }
  return out;
}

// HotpotQA and 2WikiMultiHopQA: "context": [[title, [sentence, ...]], ...]
std::vector<RawPassage> context_passages(const json& record) {
  std::vector<RawPassage> out;
  auto it = record.find("context");
  if (it == record.end()) return out;
  if (it->is_object()) {
    // Some exports use {"title": [...], "sentences": [[...], ...]}.
    const auto& titles = it->at("title");
    const auto& sents = it->at("sentences");
    if (!titles.is_array() || !sents.is_array() || titles.size() != sents.size()) {
      throw Error(Errc::ParseError, "malformed context object");
    }
    for (std::size_t i = 0; i < titles.size(); ++i) {
      out.push_back({titles[i].get<std::string>(), join_sentences(sents[i])});
    }
    return out;
  }
  if (!it->is_array()) throw Error(Errc::ParseError, "context must be a list");
  for (const auto& entry : *it) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string()) {
      throw Error(Errc::ParseError, "context entry must be [title, sentences]");
    }
    out.push_back({entry[0].get<std::string>(), join_sentences(entry[1])});
  }
  return out;
}

std::vector<RawPassage> musique_passages(const json& record) {
  std::vector<RawPassage> out;
  auto it = record.find("paragraphs");
  if (it == record.end()) return out;
  if (!it->is_array()) throw Error(Errc::ParseError, "paragraphs must be a list");
  for (const auto& p : *it) {
    out.push_back({string_field(p, {"title"}), string_field(p, {"paragraph_text", "text"})});
  }
  return out;
}

std::vector<RawPassage> generic_passages(const json& record) {
  std::vector<RawPassage> out;
  auto it = record.find("passages");
  if (it == record.end()) return out;
  if (!it->is_array()) throw Error(Errc::ParseError, "passages must be a list");
  for (const auto& p : *it) {
    if (!p.is_object()) throw Error(Errc::ParseError, "passage must be an object");
    out.push_back({string_field(p, {"title"}), string_field(p, {"text"})});
  }
  return out;
}

std::vector<json> decode_records(std::string_view content) {
  std::size_t first = content.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  try {
    if (content[first] == '[') {
      json doc = json::parse(content);
      return doc.get<std::vector<json>>();
    }
    std::vector<json> records;
    std::istringstream lines{std::string(content)};
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      records.push_back(json::parse(line));
    }
    return records;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

std::string unit_id(std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%06zu", ordinal);
  return buf;
}

}  // namespace

Benchmark parse_benchmark(std::string_view content, BenchmarkFormat format,
                          std::string source_name) {
  Benchmark out;
  std::vector<EvidenceUnit> units;
  std::map<std::pair<std::string, std::string>, std::size_t> identity;

  const auto records = decode_records(content);
  for (std::size_t qi = 0; qi < records.size(); ++qi) {
    const json& r = records[qi];
    if (!r.is_object()) throw Error(Errc::ParseError, "question record is not an object");

    QARecord qa;
    qa.id = string_field(r, {"_id", "id"});
    if (qa.id.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "q%04zu", qi);
      qa.id = buf;
    }
    qa.question = normalize_whitespace(string_field(r, {"question"}));
    qa.gold_answer = normalize_whitespace(string_field(r, {"answer", "gold_answer"}));
    qa.question_type = string_field(r, {"type", "question_type"});
    if (qa.question.empty()) throw Error(Errc::ParseError, "record " + qa.id + " has no question");
    if (qa.gold_answer.empty()) throw Error(Errc::ParseError, "record " + qa.id + " has no answer");
    if (auto it = r.find("slot_answers"); it != r.end() && it->is_object()) {
      for (const auto& [k, v] : it->items()) qa.gold_slot_answers[std::stoi(k)] = v.get<std::string>();
    }

    std::vector<RawPassage> passages;
    switch (format) {
      case BenchmarkFormat::HotpotQA:
      case BenchmarkFormat::TwoWikiMultiHopQA: passages = context_passages(r); break;
      case BenchmarkFormat::MuSiQue: passages = musique_passages(r); break;
      case BenchmarkFormat::Generic: passages = generic_passages(r); break;
    }
    for (auto& p : passages) {
      auto title = normalize_whitespace(p.title);
      auto text = normalize_whitespace(p.text);
      if (text.empty()) throw Error(Errc::EmptyText, "empty passage in record " + qa.id);
      auto key = std::make_pair(title, text);
      if (identity.contains(key)) continue;
      identity.emplace(key, units.size());
      units.push_back({unit_id(units.size()), std::move(title), std::move(text)});
    }
    out.questions.push_back(std::move(qa));
  }
  out.corpus = Corpus(std::move(source_name), std::move(units));
  return out;
}

Benchmark load_benchmark(const std::filesystem::path& path, BenchmarkFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_benchmark(buffer.str(), format, path.stem().string());
}

void check_passage_count(const Corpus& corpus, std::size_t expected) {
  if (corpus.size() != expected) {
    throw Error(Errc::CountMismatch, "corpus holds " + std::to_string(corpus.size()) +
                                         " passages, expected " + std::to_string(expected));
  }
}

void persist_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& u : corpus.units()) doc.push_back({{"id", u.id}, {"title", u.title}, {"text", u.text}});
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (!doc.is_array()) throw Error(Errc::ParseError, "corpus file must hold a JSON array");
  std::vector<PassageRecord> records;
  records.reserve(doc.size());
  for (const auto& o : doc) {
    records.push_back({string_field(o, {"id"}), string_field(o, {"title"}), string_field(o, {"text"})});
  }
  return ingest_passages(records, path.stem().string());
}

std::string evidence_text(const EvidenceUnit& unit) {
  if (unit.title.empty()) return unit.text;
  return unit.title + ". " + unit.text;
}

}  // namespace mvrag
