// Copyright 2026 The Atlas Audit Authors
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


#ifndef ATLAS_SERVICE_H_
#define ATLAS_SERVICE_H_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/fields.h"

namespace atlas {

// Immutable state behind the query service.
struct AtlasIndex {
  Corpus corpus;
  FieldResolver resolver;
  Eigen::MatrixXd map2d;  // n x 2
  std::string map_method = "pca";
  std::map<std::string, nlohmann::json> reports;  // section -> document
};

// Report sections the service will pick up from a report directory.
const std::vector<std::string>& ServedSections();

// Builds the 2-d PCA map and loads <section>.json for every served section
// present in `report_dir` (skipped when empty).
AtlasIndex BuildAtlasIndex(Corpus corpus, FieldResolver resolver,
                           const std::filesystem::path& report_dir = {});

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline constexpr std::size_t kDefaultMapLimit = 50000;

// Request handlers as pure functions of (index, request). The HTTP layer
// only routes to these.
class AtlasService {
 public:
  explicit AtlasService(std::shared_ptr<const AtlasIndex> index);
  ~AtlasService();

  AtlasService(const AtlasService&) = delete;
  AtlasService& operator=(const AtlasService&) = delete;

  HttpResponse Health() const;
  HttpResponse Summary() const;
  HttpResponse Query(std::string_view content_type,
                     const std::string& body) const;
  // Parameters: fields (comma separated), offset, limit.
  HttpResponse Map(const std::map<std::string, std::string>& params) const;
  HttpResponse Report(std::string_view section) const;
  HttpResponse Sample(std::string_view id) const;

  // Binds and serves until Stop(); returns false when binding fails.
  // port 0 picks a free port, reported through `on_bound` before serving.
  bool Listen(const std::string& host, int port,
              const std::function<void(int)>& on_bound = {});
  void Stop();

 private:
  struct Server;
  std::shared_ptr<const AtlasIndex> index_;
  std::unique_ptr<Server> server_;
};

// Error body used by every non-2xx response.
HttpResponse ErrorResponse(int status, std::string_view code,
                           const std::string& message,
                           nlohmann::json extra = nlohmann::json::object());

}  // namespace atlas

#endif  // ATLAS_SERVICE_H_
