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

#ifndef DETBENCH_STATUS_H_
#define DETBENCH_STATUS_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace detbench {

// Broad failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kInvariant,
  kEmptyResult,
  kNotFound,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error InvalidArgument(const std::string& message) {
  return Error(ErrorKind::kInvalidArgument, message);
}
inline Error ParseError(const std::string& message) {
  return Error(ErrorKind::kParse, message);
}
inline Error InvariantError(const std::string& message) {
  return Error(ErrorKind::kInvariant, message);
}
inline Error EmptyResultError(const std::string& message) {
  return Error(ErrorKind::kEmptyResult, message);
}

// Strict mode turns recoverable input problems into errors; lenient mode
// repairs them and records a warning.
enum class Strictness { kLenient, kStrict };

// Collects non-fatal diagnostics. Functions accept a nullable pointer.
struct Warnings {
  std::vector<std::string> messages;

  void Add(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const { return messages.empty(); }
  size_t size() const { return messages.size(); }
};

inline void Warn(Warnings* warnings, std::string message) {
  if (warnings != nullptr) warnings->Add(std::move(message));
}

}  // namespace detbench

#endif  // DETBENCH_STATUS_H_
