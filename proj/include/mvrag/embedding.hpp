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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvrag/gateway.hpp"

namespace mvrag {

template <typename Scalar>
using Embedding = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using EmbeddingVector = Embedding<double>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
  virtual std::string id() const = 0;
};

/// Embeds through `provider` and checks the result: one finite vector per
/// input, all of one dimension. Throws ProviderError or DimensionMismatch.
std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbeddingProvider& provider);

/// Deterministic test embedder: signed feature hashing of lowercased word
/// tokens (minus a short stopword list) into a fixed number of buckets.
/// Texts sharing words land close together, which is enough for fixtures.
class HashEmbedder : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::string id() const override;
  EmbeddingVector embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

/// Embedding service client: POST {model, input: [...]} and read either
/// data[i].embedding or embeddings[i] from the reply.
class HttpEmbedder : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(HttpEndpoint endpoint, std::size_t batch_size = 64);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::string id() const override { return "http:" + endpoint_.model; }

 private:
  HttpEndpoint endpoint_;
  std::size_t batch_size_;
};

}  // namespace mvrag
