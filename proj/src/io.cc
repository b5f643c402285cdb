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

#include "biasaudit/io.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "absl/strings/str_cat.h"
#include "biasaudit/status_macros.h"
#include "nlohmann/json.hpp"

namespace biasaudit {
namespace {

using nlohmann::json;

void AppendU32(uint32_t value, std::string* out) {
  for (int i = 0; i < 4; ++i) {
    out->push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

uint32_t ReadU32(const char* data) {
  uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<uint32_t>(static_cast<unsigned char>(data[i]))
             << (8 * i);
  }
  return value;
}

void AppendF32(float value, std::string* out) {
  AppendU32(std::bit_cast<uint32_t>(value), out);
}

float ReadF32(const char* data) { return std::bit_cast<float>(ReadU32(data)); }

absl::Status LineError(size_t line, std::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("line ", line, ": ", std::string(what)));
}

// Calls `fn(line_number, object)` for every non-blank line.
template <typename Fn>
absl::Status ForEachJsonLine(std::string_view jsonl, Fn fn) {
  size_t line_number = 0;
  size_t start = 0;
  while (start <= jsonl.size()) {
    size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    ++line_number;
    std::string_view line = jsonl.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      json object = json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (object.is_discarded() || !object.is_object()) {
        return LineError(line_number, "not a JSON object");
      }
      RETURN_IF_ERROR(fn(line_number, object));
    }
    start = end + 1;
  }
  return absl::OkStatus();
}

absl::StatusOr<std::string> StringField(const json& object,
                                        const char* field, size_t line) {
  const auto it = object.find(field);
  if (it == object.end() || !it->is_string()) {
    return LineError(line, absl::StrCat("missing string field \"", field, "\""));
  }
  return it->get<std::string>();
}

}  // namespace

std::string SerializeEmbeddings(const EmbeddingSet& embeddings) {
  json header;
  header["version"] = 1;
  header["dtype"] = "f32le";
  header["count"] = embeddings.size();
  header["dim"] = embeddings.dim();
  header["model_id"] = embeddings.model_id();
  header["ids"] = embeddings.ids();
  const std::string header_text = header.dump();

  std::string out(kEmbeddingMagic);
  AppendU32(static_cast<uint32_t>(header_text.size()), &out);
  out += header_text;
  out.reserve(out.size() + embeddings.values().size() * 4);
  for (const float value : embeddings.values()) AppendF32(value, &out);
  return out;
}

absl::StatusOr<EmbeddingSet> ParseEmbeddings(std::string_view bytes) {
  if (bytes.size() < kEmbeddingMagic.size() ||
      bytes.substr(0, kEmbeddingMagic.size()) != kEmbeddingMagic) {
    return absl::InvalidArgumentError("Embedding file: bad magic bytes");
  }
  size_t offset = kEmbeddingMagic.size();
  if (bytes.size() < offset + 4) {
    return absl::InvalidArgumentError(
        "Embedding file: truncated header length");
  }
  const uint32_t header_length = ReadU32(bytes.data() + offset);
  offset += 4;
  if (bytes.size() - offset < header_length) {
    return absl::InvalidArgumentError("Embedding file: truncated header");
  }
  const json header = json::parse(bytes.substr(offset, header_length),
                                  nullptr, /*allow_exceptions=*/false);
  offset += header_length;
  if (header.is_discarded() || !header.is_object()) {
    return absl::InvalidArgumentError(
        "Embedding file: header is not a JSON object");
  }
  const auto field = [&](const char* name) -> const json* {
    const auto it = header.find(name);
    return it == header.end() ? nullptr : &*it;
  };
  const json* version = field("version");
  if (version == nullptr || !version->is_number_integer() || *version != 1) {
    return absl::InvalidArgumentError(
        "Embedding file: unsupported header version");
  }
  const json* dtype = field("dtype");
  if (dtype == nullptr || *dtype != "f32le") {
    return absl::InvalidArgumentError("Embedding file: dtype must be f32le");
  }
  const json* count = field("count");
  const json* dim = field("dim");
  if (count == nullptr || !count->is_number_unsigned() || dim == nullptr ||
      !dim->is_number_unsigned() || dim->get<uint64_t>() < 1) {
    return absl::InvalidArgumentError(
        "Embedding file: count must be >= 0 and dim >= 1");
  }
  const json* model_id = field("model_id");
  if (model_id == nullptr || !model_id->is_string()) {
    return absl::InvalidArgumentError("Embedding file: missing model_id");
  }
  const json* ids_json = field("ids");
  if (ids_json == nullptr || !ids_json->is_array()) {
    return absl::InvalidArgumentError("Embedding file: missing ids");
  }
  const uint64_t rows = count->get<uint64_t>();
  const uint64_t cols = dim->get<uint64_t>();
  if (ids_json->size() != rows) {
    return absl::InvalidArgumentError(
        absl::StrCat("Embedding file: header lists ", ids_json->size(),
                     " ids but count is ", rows));
  }
  std::vector<std::string> ids;
  ids.reserve(rows);
  for (const auto& id : *ids_json) {
    if (!id.is_string()) {
      return absl::InvalidArgumentError("Embedding file: ids must be strings");
    }
    ids.push_back(id.get<std::string>());
  }
  const uint64_t payload = rows * cols * 4;
  if (bytes.size() - offset < payload) {
    return absl::InvalidArgumentError(absl::StrCat(
        "Embedding file: truncated payload (", bytes.size() - offset,
        " bytes, expected ", payload, ")"));
  }
  if (bytes.size() - offset > payload) {
    return absl::InvalidArgumentError(
        "Embedding file: trailing bytes after payload");
  }
  std::vector<float> values(rows * cols);
  for (size_t i = 0; i < values.size(); ++i) {
    values[i] = ReadF32(bytes.data() + offset + 4 * i);
  }
  return EmbeddingSet::Create(model_id->get<std::string>(), std::move(ids),
                              cols, std::move(values));
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("Cannot open ", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

absl::Status WriteFile(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::PermissionDeniedError(
        absl::StrCat("Cannot write ", path));
  }
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    return absl::DataLossError(absl::StrCat("Short write to ", path));
  }
  return absl::OkStatus();
}

absl::StatusOr<EmbeddingSet> LoadEmbeddings(const std::string& path) {
  ASSIGN_OR_RETURN(const std::string bytes, ReadFile(path));
  auto parsed = ParseEmbeddings(bytes);
  if (!parsed.ok()) {
    return absl::Status(parsed.status().code(),
                        absl::StrCat(path, ": ", parsed.status().message()));
  }
  return parsed;
}

absl::Status WriteEmbeddings(const EmbeddingSet& embeddings,
                             const std::string& path) {
  return WriteFile(path, SerializeEmbeddings(embeddings));
}

absl::StatusOr<AttributeSchema> ParseAttributeSchema(std::string_view text) {
  const json root = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded() || !root.is_object() ||
      !root.contains("attributes") || !root["attributes"].is_array()) {
    return absl::InvalidArgumentError(
        "Attribute schema must be {\"attributes\":[...]}");
  }
  AttributeSchema schema;
  for (const auto& entry : root["attributes"]) {
    if (!entry.is_object() || !entry.contains("name") ||
        !entry["name"].is_string() || !entry.contains("demographics") ||
        !entry["demographics"].is_array()) {
      return absl::InvalidArgumentError(
          "Attribute entries need \"name\" and \"demographics\"");
    }
    std::vector<std::string> demographics;
    for (const auto& label : entry["demographics"]) {
      if (!label.is_string()) {
        return absl::InvalidArgumentError("Demographics must be strings");
      }
      demographics.push_back(label.get<std::string>());
    }
    ASSIGN_OR_RETURN(auto attribute,
                     MakeProtectedAttribute(entry["name"].get<std::string>(),
                                            std::move(demographics)));
    if (schema.Find(attribute.name).ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("Attribute \"", attribute.name, "\" declared twice"));
    }
    schema.attributes.push_back(std::move(attribute));
  }
  return schema;
}

absl::StatusOr<AttributeSchema> LoadAttributeSchema(const std::string& path) {
  ASSIGN_OR_RETURN(const std::string text, ReadFile(path));
  return ParseAttributeSchema(text);
}

std::string SerializeAttributeSchema(const AttributeSchema& schema) {
  json attributes = json::array();
  for (const auto& attribute : schema.attributes) {
    attributes.push_back(
        {{"name", attribute.name}, {"demographics", attribute.demographics}});
  }
  return json{{"attributes", attributes}}.dump(2) + "\n";
}

absl::StatusOr<AnnotationTable> ParseAnnotations(
    std::string_view jsonl, const AttributeSchema& schema) {
  AnnotationTable table(schema);
  RETURN_IF_ERROR(ForEachJsonLine(
      jsonl, [&](size_t line, const json& object) -> absl::Status {
        ASSIGN_OR_RETURN(const std::string id, StringField(object, "id", line));
        if (table.Contains(id)) {
          return LineError(line, absl::StrCat("duplicate id \"", id, "\""));
        }
        table.Touch(id);
        const auto attributes = object.find("attributes");
        if (attributes == object.end()) return absl::OkStatus();
        if (!attributes->is_object()) {
          return LineError(line, "\"attributes\" must be an object");
        }
        for (const auto& [name, value] : attributes->items()) {
          std::vector<std::string> labels;
          if (value.is_string()) {
            labels.push_back(value.get<std::string>());
          } else if (value.is_array()) {
            for (const auto& label : value) {
              if (!label.is_string()) {
                return LineError(line, "labels must be strings");
              }
              labels.push_back(label.get<std::string>());
            }
          } else if (!value.is_null()) {
            return LineError(line, "labels must be strings");
          }
          const absl::Status added = table.Add(id, name, std::move(labels));
          if (!added.ok()) return LineError(line, std::string(added.message()));
        }
        return absl::OkStatus();
      }));
  return table;
}

absl::StatusOr<AnnotationTable> LoadAnnotations(const std::string& path,
                                                const AttributeSchema& schema) {
  ASSIGN_OR_RETURN(const std::string text, ReadFile(path));
  return ParseAnnotations(text, schema);
}

absl::StatusOr<AttributeSchema> InferAttributeSchema(std::string_view jsonl) {
  std::map<std::string, std::set<std::string>> labels_of;
  RETURN_IF_ERROR(ForEachJsonLine(
      jsonl, [&](size_t line, const json& object) -> absl::Status {
        const auto attributes = object.find("attributes");
        if (attributes == object.end()) return absl::OkStatus();
        if (!attributes->is_object()) {
          return LineError(line, "\"attributes\" must be an object");
        }
        for (const auto& [name, value] : attributes->items()) {
          auto& labels = labels_of[name];
          if (value.is_string()) {
            labels.insert(value.get<std::string>());
          } else if (value.is_array()) {
            for (const auto& label : value) {
              if (!label.is_string()) {
                return LineError(line, "labels must be strings");
              }
              labels.insert(label.get<std::string>());
            }
          }
        }
        return absl::OkStatus();
      }));
  AttributeSchema schema;
  for (auto& [name, labels] : labels_of) {
    ASSIGN_OR_RETURN(
        ProtectedAttribute attribute,
        MakeProtectedAttribute(name, std::vector<std::string>(labels.begin(),
                                                              labels.end())));
    schema.attributes.push_back(std::move(attribute));
  }
  return schema;
}

std::string SerializeAnnotations(const AnnotationTable& annotations) {
  std::string out;
  for (const auto& [id, attributes] : annotations.rows()) {
    json object{{"id", id}, {"attributes", json::object()}};
    for (const auto& [name, labels] : attributes) {
      if (labels.size() == 1) {
        object["attributes"][name] = labels.front();
      } else {
        object["attributes"][name] = labels;
      }
    }
    out += object.dump();
    out += '\n';
  }
  return out;
}

absl::StatusOr<PredictionSet> ParsePredictions(std::string_view jsonl,
                                               TaskKind task) {
  PredictionSet set;
  set.task = task;
  RETURN_IF_ERROR(ForEachJsonLine(
      jsonl, [&](size_t line, const json& object) -> absl::Status {
        ASSIGN_OR_RETURN(std::string id, StringField(object, "id", line));
        switch (task) {
          case TaskKind::kVqa: {
            VqaEntry entry;
            entry.id = std::move(id);
            ASSIGN_OR_RETURN(entry.qid, StringField(object, "qid", line));
            if (object.contains("question")) {
              ASSIGN_OR_RETURN(entry.question,
                               StringField(object, "question", line));
            }
            ASSIGN_OR_RETURN(entry.pred, StringField(object, "pred", line));
            const auto gt = object.find("gt");
            if (gt == object.end() || !gt->is_array() || gt->empty()) {
              return LineError(line, "\"gt\" must be a non-empty list");
            }
            for (const auto& answer : *gt) {
              if (!answer.is_string()) {
                return LineError(line, "ground-truth answers must be strings");
              }
              entry.gt.push_back(answer.get<std::string>());
            }
            set.vqa.push_back(std::move(entry));
            break;
          }
          case TaskKind::kCaptioning: {
            CaptionEntry entry;
            entry.id = std::move(id);
            ASSIGN_OR_RETURN(entry.caption,
                             StringField(object, "caption", line));
            ASSIGN_OR_RETURN(const std::string origin,
                             StringField(object, "origin", line));
            if (origin == "gt") {
              entry.origin = CaptionOrigin::kGroundTruth;
            } else if (origin == "pred") {
              entry.origin = CaptionOrigin::kGenerated;
            } else {
              return LineError(line, "\"origin\" must be \"gt\" or \"pred\"");
            }
            set.captions.push_back(std::move(entry));
            break;
          }
          case TaskKind::kScored: {
            ScoredEntry entry;
            entry.id = std::move(id);
            ASSIGN_OR_RETURN(entry.metric, StringField(object, "metric", line));
            const auto value = object.find("value");
            if (value == object.end() || !value->is_number()) {
              return LineError(line, "\"value\" must be a finite number");
            }
            entry.value = value->get<double>();
            if (!std::isfinite(entry.value)) {
              return LineError(line, "\"value\" must be a finite number");
            }
            set.scored.push_back(std::move(entry));
            break;
          }
        }
        return absl::OkStatus();
      }));
  RETURN_IF_ERROR(ValidatePredictions(set));
  return set;
}

absl::StatusOr<PredictionSet> LoadPredictions(const std::string& path,
                                              TaskKind task) {
  ASSIGN_OR_RETURN(const std::string text, ReadFile(path));
  return ParsePredictions(text, task);
}

std::string SerializePredictions(const PredictionSet& predictions) {
  std::string out;
  const auto emit = [&out](const json& object) {
    out += object.dump();
    out += '\n';
  };
  for (const auto& e : predictions.vqa) {
    emit({{"id", e.id},
          {"qid", e.qid},
          {"question", e.question},
          {"pred", e.pred},
          {"gt", e.gt}});
  }
  for (const auto& e : predictions.captions) {
    emit({{"id", e.id},
          {"caption", e.caption},
          {"origin",
           e.origin == CaptionOrigin::kGroundTruth ? "gt" : "pred"}});
  }
  for (const auto& e : predictions.scored) {
    emit({{"id", e.id}, {"metric", e.metric}, {"value", e.value}});
  }
  return out;
}

absl::StatusOr<RetrievalPairs> ParsePairs(std::string_view jsonl) {
  RetrievalPairs pairs;
  RETURN_IF_ERROR(ForEachJsonLine(
      jsonl, [&](size_t line, const json& object) -> absl::Status {
        ASSIGN_OR_RETURN(const std::string image,
                         StringField(object, "image", line));
        const auto texts = object.find("texts");
        if (texts == object.end() || !texts->is_array()) {
          return LineError(line, "\"texts\" must be a list");
        }
        auto& slot = pairs[image];
        for (const auto& text : *texts) {
          if (!text.is_string()) return LineError(line, "text ids are strings");
          slot.push_back(text.get<std::string>());
        }
        return absl::OkStatus();
      }));
  return pairs;
}

absl::StatusOr<RetrievalPairs> LoadPairs(const std::string& path) {
  ASSIGN_OR_RETURN(const std::string text, ReadFile(path));
  return ParsePairs(text);
}

std::string SerializePairs(const RetrievalPairs& pairs) {
  std::string out;
  for (const auto& [image, texts] : pairs) {
    out += json{{"image", image}, {"texts", texts}}.dump();
    out += '\n';
  }
  return out;
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
             nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[i]);
  }
  return hex.str();
}

}  // namespace biasaudit
