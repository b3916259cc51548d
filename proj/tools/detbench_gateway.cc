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

#include <csignal>
#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "detbench/dataset.h"
#include "detbench/gateway.h"
#include "detbench/status.h"
#include "detbench/text.h"
#include "httplib.h"

namespace {

httplib::Server* g_server = nullptr;

void HandleSignal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detbench_gateway: detection submission and report service"};
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string manifest;
  std::string store_path = "submissions.jsonl";
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--manifest", manifest, "Ground-truth manifest or canonical CSV");
  app.add_option("--store-path", store_path, "Append-only submission log");
  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<detbench::GroundTruthMap> gts;
    if (!manifest.empty()) {
      gts = detbench::ToGroundTruth(
          detbench::ParseGroundTruthText(detbench::ReadFile(manifest)));
    }
    detbench::SubmissionStore store(store_path);
    detbench::ReportLog reports(store_path + ".reports");
    detbench::GatewayService service(&store, std::move(gts), &reports);

    httplib::Server server;
    service.Register(server);
    g_server = &server;
    std::signal(SIGINT, HandleSignal);
    std::signal(SIGTERM, HandleSignal);
    std::fprintf(stderr, "listening on %s:%d (%zu stored submissions)\n", host.c_str(),
                 port, store.size());
    if (!server.listen(host, port)) {
      std::fprintf(stderr, "error: cannot listen on %s:%d\n", host.c_str(), port);
      return 1;
    }
  } catch (const detbench::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == detbench::ErrorKind::kParse ? 2 : 1;
  }
  return 0;
}
