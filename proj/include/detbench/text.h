// Copyright 2026 The Detbench Authors.
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

// Small text helpers shared by the file formats.

#ifndef DETBENCH_TEXT_H_
#define DETBENCH_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace detbench {

// Shortest decimal that round-trips to the same double.
std::string FormatShortest(double value);

// Fixed 4 decimals, truncated toward zero (the convention of the published
// result tables). A 1e-9 guard absorbs binary representation error, so 0.6
// prints as 0.6000 rather than 0.5999.
std::string FormatTruncated4(double value);

std::string_view Trim(std::string_view s);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> SplitLines(std::string_view text);

// RFC 4180 style: fields may be double-quoted, "" escapes a quote.
std::vector<std::string> SplitCsvRow(std::string_view line);
std::string CsvField(std::string_view field);

// Strict numeric parsing; throws a parse Error naming `what`.
double ParseDouble(std::string_view text, std::string_view what);
int ParseInt(std::string_view text, std::string_view what);

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view contents);

}  // namespace detbench

#endif  // DETBENCH_TEXT_H_
