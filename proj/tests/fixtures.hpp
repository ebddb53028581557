// Copyright 2026 The ctalign Authors.
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

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(CTALIGN_FIXTURES) + "/" + name; }

// Tab-separated rows, skipping '#' comments and the header line.
inline std::vector<std::vector<std::string>> read_tsv(const std::string& name) {
  std::ifstream in(path(name));
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

struct ExpectedLabels {
  std::string id;
  std::array<bool, 6> present{};
  std::vector<std::string> negated;
};

inline std::vector<ExpectedLabels> labeler_expected() {
  std::vector<ExpectedLabels> out;
  for (const auto& row : read_tsv("labeler_expected.tsv")) {
    ExpectedLabels e;
    e.id = row.at(0);
    for (std::size_t k = 0; k < 6; ++k) e.present[k] = row.at(k + 1) == "1";
    if (row.at(7) != "-") {
      std::stringstream ss(row.at(7));
      std::string kw;
      while (std::getline(ss, kw, ',')) e.negated.push_back(kw);
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace fixtures
