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


#include "atlas/service.h"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <utility>

#include "atlas/errors.h"
#include "atlas/geometry.h"
#include "atlas/report.h"
#include "atlas/retrieval.h"
#include "atlas/version.h"

namespace atlas {
namespace {

using nlohmann::json;

HttpResponse JsonResponse(const json& doc) {
  return {200, CanonicalJson(doc), "application/json"};
}

int StatusOf(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidInput:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kEmptyPool:
      return 422;
    case ErrorCode::kComputation:
    case ErrorCode::kIo:
      break;
  }
  return 500;
}

HttpResponse FromError(const Error& e) {
  return ErrorResponse(StatusOf(e.code()), ErrorCodeName(e.code()), e.what());
}

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool IsJsonContentType(std::string_view value) {
  const std::size_t semi = value.find(';');
  std::string media = Lower(value.substr(0, semi));
  media.erase(0, media.find_first_not_of(" \t"));
  media.erase(media.find_last_not_of(" \t") + 1);
  return media == "application/json";
}

std::size_t ParseCount(const std::map<std::string, std::string>& params,
                       const std::string& key, std::size_t fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const std::string& s = it->second;
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "query parameter '" + key + "' must be a non-negative integer");
  }
  return v;
}

std::vector<std::string> SplitFields(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    if (comma > start) out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& ServedSections() {
  static const std::vector<std::string> kSections = {
      "ingest",  "novelty",   "similarity", "density",   "holes",
      "probes",  "retrieval", "divergence", "manifest"};
  return kSections;
}

AtlasIndex BuildAtlasIndex(Corpus corpus, FieldResolver resolver,
                           const std::filesystem::path& report_dir) {
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(corpus.size()), 2);
  const std::size_t p = std::min<std::size_t>({2, corpus.size(), corpus.dim()});
  if (corpus.size() >= 2 && p >= 1) {
    const ReducedMatrix r = PcaReduce(corpus.embeddings(), p);
    map.leftCols(static_cast<Eigen::Index>(p)) = r.values;
  }
  std::map<std::string, json> reports;
  if (!report_dir.empty()) {
    for (const auto& name : ServedSections()) {
      const auto path = report_dir / (name + ".json");
      if (!std::filesystem::exists(path)) continue;
      try {
        reports[name] = json::parse(ReadTextFile(path));
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kInvalidInput,
                    "report " + path.filename().string() +
                        " is not valid JSON: " + e.what());
      }
    }
  }
  return AtlasIndex{std::move(corpus), std::move(resolver), std::move(map),
                    "pca", std::move(reports)};
}

HttpResponse ErrorResponse(int status, std::string_view code,
                           const std::string& message, json extra) {
  json err = {{"code", code}, {"message", message}, {"status", status}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  return {status, CanonicalJson({{"error", err}}), "application/json"};
}

struct AtlasService::Server {
  httplib::Server http;
  std::atomic<bool> stop_requested{false};
};

AtlasService::AtlasService(std::shared_ptr<const AtlasIndex> index)
    : index_(std::move(index)), server_(std::make_unique<Server>()) {
  if (!index_ ||
      static_cast<std::size_t>(index_->map2d.rows()) != index_->corpus.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "map must hold one point per corpus sample");
  }
}

AtlasService::~AtlasService() = default;

HttpResponse AtlasService::Health() const {
  const Corpus& c = index_->corpus;
  return JsonResponse({{"status", "ok"},
                       {"version", kVersion},
                       {"n_samples", c.size()},
                       {"n_datasets", c.Datasets().size()},
                       {"dim", c.dim()}});
}

HttpResponse AtlasService::Summary() const {
  return JsonResponse(CorpusSummaryJson(index_->corpus, index_->resolver));
}

HttpResponse AtlasService::Query(std::string_view content_type,
                                 const std::string& body) const {
  if (!IsJsonContentType(content_type)) {
    return ErrorResponse(415, "unsupported_media_type",
                         "POST /query requires Content-Type: application/json");
  }
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    return ErrorResponse(400, ErrorCodeName(ErrorCode::kInvalidArgument),
                         std::string("malformed JSON body: ") + e.what());
  }
  try {
    const RetrievalQuery q = QueryFromJson(doc);
    const auto hits = Search(index_->corpus, index_->resolver, q);
    return JsonResponse(
        {{"k", q.k}, {"results", SearchResultJson(index_->corpus, hits)}});
  } catch (const Error& e) {
    return FromError(e);
  }
}

HttpResponse AtlasService::Map(
    const std::map<std::string, std::string>& params) const {
  try {
    for (const auto& [key, value] : params) {
      if (key != "fields" && key != "offset" && key != "limit") {
        throw Error(ErrorCode::kInvalidArgument,
                    "unknown query parameter '" + key + "'");
      }
    }
    std::vector<std::string> fields;
    if (auto it = params.find("fields"); it != params.end()) {
      fields = SplitFields(it->second);
    }
    for (const auto& f : fields) {
      if (!index_->resolver.IsValid(f)) {
        throw Error(ErrorCode::kInvalidArgument, "unknown field '" + f + "'");
      }
    }
    const std::size_t n = index_->corpus.size();
    const std::size_t offset = ParseCount(params, "offset", 0);
    const std::size_t limit = ParseCount(params, "limit", kDefaultMapLimit);
    const std::size_t begin = std::min(offset, n);
    const std::size_t end = begin + std::min(limit, n - begin);
    json points = json::array();
    for (std::size_t i = begin; i < end; ++i) {
      const MetadataRecord& r = index_->corpus.record(i);
      json p = {{"id", r.id},
                {"dataset", r.dataset},
                {"x", index_->map2d(static_cast<Eigen::Index>(i), 0)},
                {"y", index_->map2d(static_cast<Eigen::Index>(i), 1)}};
      if (!fields.empty()) {
        json values = json::object();
        for (const auto& f : fields) {
          auto v = index_->resolver.Value(r, f);
          values[f] = v ? json(*v) : json(nullptr);
        }
        p["fields"] = values;
      }
      points.push_back(std::move(p));
    }
    return JsonResponse({{"method", index_->map_method},
                         {"total", n},
                         {"offset", offset},
                         {"limit", limit},
                         {"returned", end - begin},
                         {"fields", fields},
                         {"points", points}});
  } catch (const Error& e) {
    return FromError(e);
  }
}

HttpResponse AtlasService::Report(std::string_view section) const {
  auto it = index_->reports.find(std::string(section));
  if (it == index_->reports.end()) {
    return ErrorResponse(
        404, ErrorCodeName(ErrorCode::kNotFound),
        "report section '" + std::string(section) + "' is not available",
        {{"section", section}});
  }
  return JsonResponse(it->second);
}

HttpResponse AtlasService::Sample(std::string_view id) const {
  const auto row = index_->corpus.IndexOf(id);
  if (!row) {
    return ErrorResponse(404, ErrorCodeName(ErrorCode::kNotFound),
                         "unknown sample id '" + std::string(id) + "'",
                         {{"id", id}});
  }
  const auto i = static_cast<Eigen::Index>(*row);
  return JsonResponse({{"id", std::string(id)},
                       {"row", *row},
                       {"metadata", RecordToJson(index_->corpus.record(*row))},
                       {"map", {{"x", index_->map2d(i, 0)},
                                {"y", index_->map2d(i, 1)}}}});
}

bool AtlasService::Listen(const std::string& host, int port,
                          const std::function<void(int)>& on_bound) {
  httplib::Server& http = server_->http;
  const auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  http.Get("/health", [this, send](const httplib::Request&,
                                   httplib::Response& res) {
    send(res, Health());
  });
  http.Get("/corpus/summary", [this, send](const httplib::Request&,
                                           httplib::Response& res) {
    send(res, Summary());
  });
  http.Post("/query", [this, send](const httplib::Request& req,
                                   httplib::Response& res) {
    send(res, Query(req.get_header_value("Content-Type"), req.body));
  });
  http.Get("/map", [this, send](const httplib::Request& req,
                                httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params[k] = v;
    send(res, Map(params));
  });
  http.Get(R"(/report/([^/]+))", [this, send](const httplib::Request& req,
                                             httplib::Response& res) {
    send(res, Report(req.matches[1].str()));
  });
  http.Get(R"(/sample/([^/]+))", [this, send](const httplib::Request& req,
                                             httplib::Response& res) {
    send(res, Sample(req.matches[1].str()));
  });
  http.set_error_handler([send](const httplib::Request& req,
                                httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send(res, ErrorResponse(404, "not_found",
                              "no route for " + req.method + " " + req.path));
    } else {
      send(res, ErrorResponse(res.status, "http_error", "request failed"));
    }
  });
  http.set_exception_handler([send](const httplib::Request&,
                                    httplib::Response& res,
                                    std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send(res, ErrorResponse(500, "internal", message));
  });

  int bound = port;
  if (port == 0) {
    bound = http.bind_to_any_port(host);
    if (bound < 0) return false;
  } else if (!http.bind_to_port(host, port)) {
    return false;
  }
  if (on_bound) on_bound(bound);
  if (server_->stop_requested) return true;
  return http.listen_after_bind();
}

void AtlasService::Stop() {
  server_->stop_requested = true;
  server_->http.stop();
}

}  // namespace atlas
