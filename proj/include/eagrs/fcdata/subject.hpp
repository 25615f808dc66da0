// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "eagrs/matrix.hpp"

namespace eagrs::fcdata {

inline constexpr int kLabelTD = 0;
inline constexpr int kLabelASD = 1;

struct Subject {
  std::string id;
  Matrix fc;  // R x R Pearson FC
  int label = kLabelTD;
  std::string site;
};

inline std::vector<int> labels_of(const std::vector<Subject>& subjects) {
  std::vector<int> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.label);
  return out;
}

}  // namespace eagrs::fcdata
