#pragma once

#include <memory>
#include <string>

#include "vannot/service/service.hpp"

namespace httplib {
class Server;
}

namespace vannot::service {

// JSON over HTTP for the annotation UI.
//
//   GET  /videos
//   POST /sessions                         {"video_id", "user_id"}
//   GET  /sessions/{id}
//   GET  /sessions/{id}/map                VIMP bytes (normalized volume)
//   GET  /sessions/{id}/edges/{frame}      ?threshold=N; raw 8-bit magnitudes,
//                                          X-Width / X-Height / X-Threshold headers
//   POST /sessions/{id}/strokes            [{frame, cx, cy, radius, strength, polarity}]
//                                          returns VIMP bytes
//   POST /sessions/{id}/encode             {"job_id"}
//   GET  /sessions/{id}/encode/{job}       {"state", "stats"?, "error"?}
//   GET  /sessions/{id}/video
//   POST /sessions/{id}/finalize           {"path"}
//
// Errors are {"error": message} with 400 (bad input), 403 (policy; adds
// "remaining_seconds"), 404, 409 (adds "job_id" when a job is in the way),
// 412 (precondition), 501 (capability) or 500.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns the bound port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
};

Stroke stroke_from_json(const nlohmann::json& j);

}  // namespace vannot::service
