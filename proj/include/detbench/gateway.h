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

// HTTP front end for collecting detections and serving evaluation reports.
//
//   POST /api/v1/detections   submit one image's detections
//   GET  /api/v1/reports      ?iou=0.5&cs=0.3,0.5,0.75,0.9
//   GET  /api/v1/health
//
// Submissions are appended to a line-delimited JSON log (one submission per
// line) which is the only source of truth: a restarted server replays it.

#ifndef DETBENCH_GATEWAY_H_
#define DETBENCH_GATEWAY_H_

#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/dataset.h"
#include "detbench/geometry.h"

namespace httplib {
class Server;
}

namespace detbench {

struct Submission {
  std::string submission_id;
  std::string image_id;
  std::string received_at;
  std::string submitter;
  std::optional<std::string> dedup_key;
  bool no_finding = false;
  std::vector<Detection> detections;
};

struct FieldError {
  std::string field;
  std::string message;
};

// Validates a POST body. On success `errors` is empty and `submission` holds
// everything except submission_id and received_at.
struct SubmissionParse {
  Submission submission;
  std::vector<FieldError> errors;
};
SubmissionParse ParseSubmissionPayload(std::string_view body,
                                       const GroundTruthMap* known_images);

std::string SubmissionToJsonLine(const Submission& s);
Submission SubmissionFromJsonLine(std::string_view line);

class SubmissionStore {
 public:
  enum class Outcome { kCreated, kDuplicate, kConflict };
  struct AppendResult {
    Outcome outcome = Outcome::kCreated;
    Submission submission;
  };

  // Opens (creating if needed) and replays the log. A torn final line left by
  // a crash is discarded and truncated away.
  explicit SubmissionStore(std::string path);
  ~SubmissionStore();

  SubmissionStore(const SubmissionStore&) = delete;
  SubmissionStore& operator=(const SubmissionStore&) = delete;

  // Durably appends (write + fsync) before returning. A resent dedup key
  // with an identical payload returns the stored submission; a differing
  // payload is a conflict and nothing is written.
  AppendResult Append(Submission draft);

  std::vector<Submission> Snapshot() const;
  // Detections of every stored submission, in log order.
  std::vector<Detection> AllDetections() const;
  size_t size() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  int fd_ = -1;
  std::mutex append_mu_;
  mutable std::shared_mutex data_mu_;
  std::vector<Submission> submissions_;
};

// Detections file (ToDetectionsCsv format) for an offline replay of the
// store.
std::string ExportStoreCsv(const SubmissionStore& store);

// Immutable record of every served report, appended to its own log.
struct StoredReport {
  std::string report_id;
  double iou_threshold = 0.5;
  std::vector<double> cs_list;
  std::string created_at;
  std::string payload;  // the structured report body as served
};

class ReportLog {
 public:
  explicit ReportLog(std::string path);
  StoredReport Append(double iou, std::vector<double> cs_list, std::string payload);
  std::vector<StoredReport> Load() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
  size_t next_ = 1;
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::string report_id;  // set when a report was stored
};

class GatewayService {
 public:
  // `reports` may be null, in which case served reports are not recorded.
  GatewayService(SubmissionStore* store, std::optional<GroundTruthMap> gts,
                 ReportLog* reports = nullptr);

  HttpReply Submit(std::string_view body);
  // Missing parameters use IoU 0.5 and the default confidence sweep.
  HttpReply Report(std::optional<std::string> iou,
                   std::optional<std::string> cs);
  HttpReply Health() const;

  void Register(httplib::Server& server);

 private:
  SubmissionStore* store_;
  std::optional<GroundTruthMap> gts_;
  ReportLog* reports_;
};

}  // namespace detbench

#endif  // DETBENCH_GATEWAY_H_
