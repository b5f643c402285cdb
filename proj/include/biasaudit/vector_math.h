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

#ifndef BIASAUDIT_VECTOR_MATH_H_
#define BIASAUDIT_VECTOR_MATH_H_

#include <cmath>
#include <cstddef>
#include <span>

namespace biasaudit {

template <typename T, typename U>
double Dot(std::span<const T> a, std::span<const U> b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

template <typename T>
double Norm(std::span<const T> a) {
  return std::sqrt(Dot(a, a));
}

// Cosine similarity; both vectors must have non-zero norm.
template <typename T, typename U>
double Cosine(std::span<const T> a, std::span<const U> b) {
  return Dot(a, b) / (Norm(a) * Norm(b));
}

}  // namespace biasaudit

#endif  // BIASAUDIT_VECTOR_MATH_H_
