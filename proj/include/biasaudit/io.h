/*
 * Copyright 2026 The biasaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Readers and writers for the on-disk formats.
//
// Embedding file layout (little-endian throughout):
//   8 bytes   magic "BIAUD1\0\0"
//   4 bytes   header length L (uint32)
//   L bytes   UTF-8 JSON header
//             {"count":N,"dim":D,"dtype":"f32le","ids":[...],
//              "model_id":"...","version":1}
//   N*D*4     IEEE-754 float32 values, row-major
//
// Annotations, predictions and retrieval pairs are JSON-lines files; the
// attribute schema is a single JSON document.

#ifndef BIASAUDIT_IO_H_
#define BIASAUDIT_IO_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"

namespace biasaudit {

inline constexpr std::string_view kEmbeddingMagic{"BIAUD1\0\0", 8};

std::string SerializeEmbeddings(const EmbeddingSet& embeddings);
absl::StatusOr<EmbeddingSet> ParseEmbeddings(std::string_view bytes);

absl::StatusOr<EmbeddingSet> LoadEmbeddings(const std::string& path);
absl::Status WriteEmbeddings(const EmbeddingSet& embeddings,
                             const std::string& path);

absl::StatusOr<std::string> ReadFile(const std::string& path);
absl::Status WriteFile(const std::string& path, std::string_view contents);

absl::StatusOr<AttributeSchema> ParseAttributeSchema(std::string_view json);
absl::StatusOr<AttributeSchema> LoadAttributeSchema(const std::string& path);
std::string SerializeAttributeSchema(const AttributeSchema& schema);

// {"id":..., "attributes":{"gender":"female", ...}}. A label may also be a
// list of labels (one per depicted person).
absl::StatusOr<AnnotationTable> ParseAnnotations(std::string_view jsonl,
                                                 const AttributeSchema& schema);
absl::StatusOr<AnnotationTable> LoadAnnotations(const std::string& path,
                                                const AttributeSchema& schema);
// Schema implied by an annotation file: every attribute seen, with its
// distinct labels sorted.
absl::StatusOr<AttributeSchema> InferAttributeSchema(std::string_view jsonl);
std::string SerializeAnnotations(const AnnotationTable& annotations);

// vqa:        {"id","qid","question","pred","gt":[...]}
// captioning: {"id","caption","origin":"gt"|"pred"}
// scored:     {"id","metric","value"}
absl::StatusOr<PredictionSet> ParsePredictions(std::string_view jsonl,
                                               TaskKind task);
absl::StatusOr<PredictionSet> LoadPredictions(const std::string& path,
                                              TaskKind task);
std::string SerializePredictions(const PredictionSet& predictions);

// Image -> correct text ids. One {"image":id,"texts":[...]} object per line.
using RetrievalPairs = std::map<std::string, std::vector<std::string>>;
absl::StatusOr<RetrievalPairs> ParsePairs(std::string_view jsonl);
absl::StatusOr<RetrievalPairs> LoadPairs(const std::string& path);
std::string SerializePairs(const RetrievalPairs& pairs);

// Hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view bytes);

}  // namespace biasaudit

#endif  // BIASAUDIT_IO_H_
