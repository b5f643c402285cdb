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

#ifndef BIASAUDIT_MEASUREMENT_H_
#define BIASAUDIT_MEASUREMENT_H_

#include <optional>
#include <span>
#include <string>
#include <utility>

namespace biasaudit {

// A metric value that may be undefined. Undefined values always carry a
// reason and are reported as null, never as NaN or 0.
struct Measurement {
  std::optional<double> value;
  std::string reason;

  static Measurement Of(double v) { return {v, {}}; }
  static Measurement Undefined(std::string why) {
    return {std::nullopt, std::move(why)};
  }
  bool defined() const { return value.has_value(); }
};

// KL divergence (nats) between the L1-normalized scores and the uniform
// distribution over the same demographics, with 0 * log(0) = 0. Undefined
// when a score is missing or negative, or when all scores are zero.
Measurement KlFromUniform(std::span<const std::optional<double>> scores);

}  // namespace biasaudit

#endif  // BIASAUDIT_MEASUREMENT_H_
