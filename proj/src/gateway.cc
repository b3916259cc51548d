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

#include "detbench/gateway.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>

#include "detbench/eval.h"
#include "detbench/report.h"
#include "detbench/text.h"
#include "httplib.h"
#include "json.hpp"

namespace detbench {
namespace {

using Json = nlohmann::ordered_json;

std::string NowUtc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms.count()));
  return buf;
}

Json DetectionJson(const Detection& d) {
  Json j;
  j["image_id"] = d.image_id;
  j["class"] = std::string(ClassName(d.class_id));
  j["confidence"] = d.confidence;
  j["xmin"] = d.box.xmin;
  j["ymin"] = d.box.ymin;
  j["xmax"] = d.box.xmax;
  j["ymax"] = d.box.ymax;
  return j;
}

// Everything a client controls; the dedup comparison key.
Json PayloadJson(const Submission& s) {
  Json j;
  j["image_id"] = s.image_id;
  j["submitter"] = s.submitter;
  j["no_finding"] = s.no_finding;
  j["detections"] = Json::array();
  for (const Detection& d : s.detections) j["detections"].push_back(DetectionJson(d));
  return j;
}

Json ErrorsJson(const std::vector<FieldError>& errors) {
  Json j;
  j["errors"] = Json::array();
  for (const FieldError& e : errors) {
    j["errors"].push_back({{"field", e.field}, {"message", e.message}});
  }
  return j;
}

HttpReply JsonReply(int status, const Json& j) {
  return {status, j.dump() + "\n", "application/json", ""};
}

HttpReply MessageReply(int status, const std::string& message) {
  return JsonReply(status, Json{{"error", message}});
}

void WriteAll(int fd, std::string_view data, const std::string& path) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::kNotFound,
                  "write to " + path + " failed: " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<size_t>(n));
  }
}

// Parses a threshold in (0, 1]; nullopt when malformed or out of range.
std::optional<double> ParseUnitThreshold(std::string_view text) {
  try {
    const double v = ParseDouble(text, "threshold");
    if (v > 0.0 && v <= 1.0) return v;
  } catch (const Error&) {
  }
  return std::nullopt;
}

}  // namespace

SubmissionParse ParseSubmissionPayload(std::string_view body,
                                       const GroundTruthMap* known_images) {
  SubmissionParse out;
  auto fail = [&out](std::string field, std::string message) {
    out.errors.push_back({std::move(field), std::move(message)});
  };
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::exception&) {
    fail("body", "request body is not valid JSON");
    return out;
  }
  if (!doc.is_object()) {
    fail("body", "request body must be a JSON object");
    return out;
  }
  Submission& s = out.submission;
  if (!doc.contains("image_id") || !doc["image_id"].is_string() ||
      doc["image_id"].get<std::string>().empty()) {
    fail("image_id", "required non-empty string");
  } else {
    s.image_id = doc["image_id"].get<std::string>();
    if (known_images != nullptr && !known_images->contains(s.image_id)) {
      fail("image_id", "unknown image '" + s.image_id + "'");
    }
  }
  if (doc.contains("submitter")) {
    if (doc["submitter"].is_string()) {
      s.submitter = doc["submitter"].get<std::string>();
    } else {
      fail("submitter", "must be a string");
    }
  }
  if (doc.contains("dedup_key")) {
    if (doc["dedup_key"].is_string() && !doc["dedup_key"].get<std::string>().empty()) {
      s.dedup_key = doc["dedup_key"].get<std::string>();
    } else {
      fail("dedup_key", "must be a non-empty string");
    }
  }
  if (doc.contains("no_finding")) {
    if (doc["no_finding"].is_boolean()) {
      s.no_finding = doc["no_finding"].get<bool>();
    } else {
      fail("no_finding", "must be a boolean");
    }
  }
  if (!doc.contains("detections") || !doc["detections"].is_array()) {
    if (!s.no_finding || doc.contains("detections")) {
      fail("detections", "required list of detections");
    }
  } else {
    const Json& list = doc["detections"];
    if (list.empty() && !s.no_finding) {
      fail("detections", "empty; set no_finding to submit an image without findings");
    }
    if (!list.empty() && s.no_finding) {
      fail("no_finding", "cannot be set when detections are present");
    }
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string prefix = "detections[" + std::to_string(i) + "].";
      const Json& d = list[i];
      if (!d.is_object()) {
        fail("detections[" + std::to_string(i) + "]", "must be an object");
        continue;
      }
      Detection det;
      det.image_id = s.image_id;
      bool ok = true;
      if (d.contains("image_id") &&
          (!d["image_id"].is_string() || d["image_id"].get<std::string>() != s.image_id)) {
        fail(prefix + "image_id", "must match the submission image_id");
        ok = false;
      }
      if (!d.contains("class") || !d["class"].is_string()) {
        fail(prefix + "class", "required string");
        ok = false;
      } else if (auto id = TryParseClassName(d["class"].get<std::string>())) {
        det.class_id = *id;
      } else {
        fail(prefix + "class", "unknown class '" + d["class"].get<std::string>() +
                                   "'; expected CategoryI, CategoryII, CategoryIII, "
                                   "CategoryIV, DTI or Unstageable");
        ok = false;
      }
      if (!d.contains("confidence") || !d["confidence"].is_number()) {
        fail(prefix + "confidence", "required number");
        ok = false;
      } else {
        det.confidence = d["confidence"].get<double>();
        if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
          fail(prefix + "confidence", "must lie in [0, 1]");
          ok = false;
        }
      }
      double coords[4] = {0, 0, 0, 0};
      const char* names[4] = {"xmin", "ymin", "xmax", "ymax"};
      bool coords_ok = true;
      for (int k = 0; k < 4; ++k) {
        if (!d.contains(names[k]) || !d[names[k]].is_number()) {
          fail(prefix + names[k], "required number");
          coords_ok = false;
        } else {
          coords[k] = d[names[k]].get<double>();
        }
      }
      if (coords_ok) {
        det.box = {coords[0], coords[1], coords[2], coords[3]};
        if (!(det.box.xmin < det.box.xmax)) {
          fail(prefix + "xmax", "must be greater than xmin");
          coords_ok = false;
        }
        if (!(det.box.ymin < det.box.ymax)) {
          fail(prefix + "ymax", "must be greater than ymin");
          coords_ok = false;
        }
      }
      if (ok && coords_ok) s.detections.push_back(det);
    }
  }
  return out;
}

std::string SubmissionToJsonLine(const Submission& s) {
  Json j;
  j["submission_id"] = s.submission_id;
  j["image_id"] = s.image_id;
  j["received_at"] = s.received_at;
  j["submitter"] = s.submitter;
  j["dedup_key"] = s.dedup_key ? Json(*s.dedup_key) : Json(nullptr);
  j["no_finding"] = s.no_finding;
  j["detections"] = Json::array();
  for (const Detection& d : s.detections) j["detections"].push_back(DetectionJson(d));
  return j.dump();
}

Submission SubmissionFromJsonLine(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw ParseError("malformed submission log line: " + std::string(e.what()));
  }
  try {
    Submission s;
    s.submission_id = j.at("submission_id").get<std::string>();
    s.image_id = j.at("image_id").get<std::string>();
    s.received_at = j.value("received_at", "");
    s.submitter = j.value("submitter", "");
    if (j.contains("dedup_key") && j["dedup_key"].is_string()) {
      s.dedup_key = j["dedup_key"].get<std::string>();
    }
    s.no_finding = j.value("no_finding", false);
    for (const Json& d : j.at("detections")) {
      Detection det;
      det.image_id = d.value("image_id", s.image_id);
      det.class_id = ParseClassName(d.at("class").get<std::string>());
      det.confidence = d.at("confidence").get<double>();
      det.box = {d.at("xmin").get<double>(), d.at("ymin").get<double>(),
                 d.at("xmax").get<double>(), d.at("ymax").get<double>()};
      s.detections.push_back(std::move(det));
    }
    return s;
  } catch (const Json::exception& e) {
    throw ParseError("invalid submission log record: " + std::string(e.what()));
  }
}

SubmissionStore::SubmissionStore(std::string path) : path_(std::move(path)) {
  std::string contents;
  {
    std::FILE* f = std::fopen(path_.c_str(), "rb");
    if (f != nullptr) {
      char buf[1 << 16];
      size_t n;
      while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) contents.append(buf, n);
      std::fclose(f);
    }
  }
  // Everything after the last newline is a torn write.
  const size_t last_nl = contents.rfind('\n');
  const size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (complete < contents.size()) {
    if (::truncate(path_.c_str(), static_cast<off_t>(complete)) != 0) {
      throw Error(ErrorKind::kNotFound, "cannot truncate torn log " + path_);
    }
  }
  for (std::string_view line : SplitLines(std::string_view(contents).substr(0, complete))) {
    if (Trim(line).empty()) continue;
    submissions_.push_back(SubmissionFromJsonLine(line));
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorKind::kNotFound,
                "cannot open submission log " + path_ + ": " + std::strerror(errno));
  }
}

SubmissionStore::~SubmissionStore() {
  if (fd_ >= 0) ::close(fd_);
}

SubmissionStore::AppendResult SubmissionStore::Append(Submission draft) {
  std::lock_guard<std::mutex> append_lock(append_mu_);
  if (draft.dedup_key) {
    std::shared_lock<std::shared_mutex> read_lock(data_mu_);
    for (const Submission& s : submissions_) {
      if (s.dedup_key != draft.dedup_key) continue;
      const bool same = PayloadJson(s) == PayloadJson(draft);
      return {same ? Outcome::kDuplicate : Outcome::kConflict, s};
    }
  }
  char id[32];
  std::snprintf(id, sizeof(id), "s%08zu", size() + 1);
  draft.submission_id = id;
  draft.received_at = NowUtc();
  for (Detection& d : draft.detections) d.image_id = draft.image_id;

  WriteAll(fd_, SubmissionToJsonLine(draft) + "\n", path_);
  if (::fsync(fd_) != 0) {
    throw Error(ErrorKind::kNotFound, "fsync of " + path_ + " failed");
  }
  std::unique_lock<std::shared_mutex> write_lock(data_mu_);
  submissions_.push_back(draft);
  return {Outcome::kCreated, std::move(draft)};
}

std::vector<Submission> SubmissionStore::Snapshot() const {
  std::shared_lock<std::shared_mutex> lock(data_mu_);
  return submissions_;
}

std::vector<Detection> SubmissionStore::AllDetections() const {
  std::shared_lock<std::shared_mutex> lock(data_mu_);
  std::vector<Detection> out;
  for (const Submission& s : submissions_) {
    out.insert(out.end(), s.detections.begin(), s.detections.end());
  }
  return out;
}

size_t SubmissionStore::size() const {
  std::shared_lock<std::shared_mutex> lock(data_mu_);
  return submissions_.size();
}

std::string ExportStoreCsv(const SubmissionStore& store) {
  return ToDetectionsCsv(store.AllDetections());
}

ReportLog::ReportLog(std::string path) : path_(std::move(path)) {
  next_ = Load().size() + 1;
}

StoredReport ReportLog::Append(double iou, std::vector<double> cs_list,
                               std::string payload) {
  std::lock_guard<std::mutex> lock(mu_);
  StoredReport r;
  char id[32];
  std::snprintf(id, sizeof(id), "r%08zu", next_);
  r.report_id = id;
  r.iou_threshold = iou;
  r.cs_list = std::move(cs_list);
  r.created_at = NowUtc();
  r.payload = std::move(payload);
  Json j;
  j["report_id"] = r.report_id;
  j["iou"] = r.iou_threshold;
  j["cs"] = r.cs_list;
  j["created_at"] = r.created_at;
  j["payload"] = Json::parse(r.payload);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorKind::kNotFound, "cannot open report log " + path_);
  try {
    WriteAll(fd, j.dump() + "\n", path_);
    ::fsync(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  ++next_;
  return r;
}

std::vector<StoredReport> ReportLog::Load() const {
  std::vector<StoredReport> out;
  std::string contents;
  try {
    contents = ReadFile(path_);
  } catch (const Error&) {
    return out;
  }
  for (std::string_view line : SplitLines(contents)) {
    if (Trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception&) {
      continue;  // torn tail
    }
    StoredReport r;
    r.report_id = j.value("report_id", "");
    r.iou_threshold = j.value("iou", 0.5);
    r.cs_list = j.value("cs", std::vector<double>{});
    r.created_at = j.value("created_at", "");
    r.payload = j.contains("payload") ? j["payload"].dump(2) + "\n" : "";
    out.push_back(std::move(r));
  }
  return out;
}

GatewayService::GatewayService(SubmissionStore* store,
                               std::optional<GroundTruthMap> gts,
                               ReportLog* reports)
    : store_(store), gts_(std::move(gts)), reports_(reports) {}

HttpReply GatewayService::Submit(std::string_view body) {
  SubmissionParse parsed =
      ParseSubmissionPayload(body, gts_ ? &*gts_ : nullptr);
  if (!parsed.errors.empty()) return JsonReply(400, ErrorsJson(parsed.errors));
  const SubmissionStore::AppendResult result =
      store_->Append(std::move(parsed.submission));
  Json reply{{"submission_id", result.submission.submission_id},
             {"image_id", result.submission.image_id}};
  switch (result.outcome) {
    case SubmissionStore::Outcome::kCreated:
      return JsonReply(201, reply);
    case SubmissionStore::Outcome::kDuplicate:
      return JsonReply(200, reply);
    case SubmissionStore::Outcome::kConflict:
      return JsonReply(409, Json{{"error", "dedup_key already used with a different payload"},
                                 {"submission_id", result.submission.submission_id}});
  }
  return MessageReply(500, "unreachable");
}

HttpReply GatewayService::Report(std::optional<std::string> iou,
                                 std::optional<std::string> cs) {
  double iou_threshold = 0.5;
  if (iou) {
    auto v = ParseUnitThreshold(*iou);
    if (!v) return MessageReply(422, "iou must be a number in (0, 1]");
    iou_threshold = *v;
  }
  std::vector<double> cs_list = kDefaultConfidenceSweep;
  if (cs) {
    cs_list.clear();
    for (const std::string& part : SplitCsvRow(*cs)) {
      auto v = ParseUnitThreshold(part);
      if (!v) return MessageReply(422, "cs must be a comma list of numbers in (0, 1]");
      cs_list.push_back(*v);
    }
    if (!std::is_sorted(cs_list.begin(), cs_list.end())) {
      return MessageReply(422, "cs thresholds must be ascending");
    }
  }
  if (!gts_) return MessageReply(503, "ground-truth manifest not loaded");
  try {
    const std::vector<Detection> detections = store_->AllDetections();
    const std::vector<EvalReport> reports =
        Sweep(detections, *gts_, iou_threshold, cs_list);
    HttpReply reply{200, FormatReportsStructured(reports), "application/json", ""};
    if (reports_ != nullptr) {
      reply.report_id = reports_->Append(iou_threshold, cs_list, reply.body).report_id;
    }
    return reply;
  } catch (const Error& e) {
    return MessageReply(500, e.what());
  }
}

HttpReply GatewayService::Health() const {
  return JsonReply(200, Json{{"submissions", store_->size()},
                             {"manifest_loaded", gts_.has_value()}});
}

void GatewayService::Register(httplib::Server& server) {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
    if (!reply.report_id.empty()) res.set_header("X-Report-Id", reply.report_id);
  };
  server.Post("/api/v1/detections",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, Submit(req.body));
              });
  server.Get("/api/v1/reports",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               std::optional<std::string> iou;
               std::optional<std::string> cs;
               if (req.has_param("iou")) iou = req.get_param_value("iou");
               if (req.has_param("cs")) cs = req.get_param_value("cs");
               send(res, Report(iou, cs));
             });
  server.Get("/api/v1/health",
             [this, send](const httplib::Request&, httplib::Response& res) {
               send(res, Health());
             });
}

}  // namespace detbench
