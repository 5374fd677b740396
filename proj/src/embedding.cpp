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

#include "mvrag/embedding.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <string_view>

#include "mvrag/error.hpp"
#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbeddingProvider& provider) {
  if (texts.empty()) return {};
  auto vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) {
    throw Error(Errc::ProviderError, "provider returned " + std::to_string(vectors.size()) +
                                         " vectors for " + std::to_string(texts.size()) + " texts");
  }
  const auto dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim || dim == 0) throw Error(Errc::DimensionMismatch, "inconsistent embedding dimensions");
    if (!v.allFinite()) throw Error(Errc::ProviderError, "embedding has non-finite entries");
  }
  return vectors;
}

namespace {

constexpr std::array<std::string_view, 32> kStopwords = {
    "a",    "an",   "and",  "are",  "as",   "at",   "be",   "by",   "did",  "do",   "does",
    "for",  "from", "has",  "he",   "her",  "his",  "in",   "is",   "it",   "of",   "on",
    "or",   "she",  "that", "the",  "to",   "was",  "what", "which", "who", "with"};

bool is_stopword(std::string_view token) {
  for (auto s : kStopwords) {
    if (s == token) return true;
  }
  return false;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // final avalanche so low bits are usable as a bucket index
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw Error(Errc::InvalidConfig, "embedding dimension must be positive");
}

std::string HashEmbedder::id() const {
  return "hash-" + std::to_string(dimension_) + "-" + std::to_string(seed_);
}

EmbeddingVector HashEmbedder::embed_one(std::string_view text) const {
  EmbeddingVector v = EmbeddingVector::Zero(static_cast<Eigen::Index>(dimension_));
  const std::string lowered = to_lower(text);
  std::string token;
  auto flush = [&] {
    if (!token.empty() && !is_stopword(token)) {
      const auto h = fnv1a(token, seed_);
      const auto bucket = static_cast<Eigen::Index>(h % dimension_);
      v[bucket] += (h >> 63) ? 1.0 : -1.0;
    }
    token.clear();
  };
  for (unsigned char c : lowered) {
    if (std::isalnum(c) || c >= 0x80) token += static_cast<char>(c);
    else flush();
  }
  flush();
  return v;
}

std::vector<EmbeddingVector> HashEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t batch_size)
    : endpoint_(std::move(endpoint)), batch_size_(batch_size == 0 ? 1 : batch_size) {
  if (endpoint_.url.empty()) throw Error(Errc::InvalidConfig, "embedding endpoint URL is not set");
}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += batch_size_) {
    const auto batch = texts.subspan(begin, std::min(batch_size_, texts.size() - begin));
    json body = {{"model", endpoint_.model}, {"input", std::vector<std::string>(batch.begin(), batch.end())}};
    json reply = post_json_with_retry(endpoint_, body);

    std::vector<std::vector<double>> rows;
    try {
      if (auto data = reply.find("data"); data != reply.end()) {
        for (const auto& item : *data) rows.push_back(item.at("embedding").get<std::vector<double>>());
      } else {
        rows = reply.at("embeddings").get<std::vector<std::vector<double>>>();
      }
    } catch (const json::exception& e) {
      throw Error(Errc::ProviderError, std::string("unexpected embedding response: ") + e.what());
    }
    if (rows.size() != batch.size()) throw Error(Errc::ProviderError, "embedding batch size mismatch");
    for (const auto& r : rows) {
      out.push_back(Eigen::Map<const EmbeddingVector>(r.data(), static_cast<Eigen::Index>(r.size())));
    }
  }
  return out;
}

}  // namespace mvrag
