#include "vannot/service/http.hpp"

#include <httplib.h>

#include <fstream>

#include "vannot/errors.hpp"
#include "vannot/vimp.hpp"

namespace vannot::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kBinary = "application/octet-stream";

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("request body is not JSON: ") + e.what());
  }
}

std::string field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
    throw ArgumentError(std::string("missing string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

void send_error(httplib::Response& res, std::exception_ptr ep) {
  json body;
  int status = 500;
  try {
    std::rethrow_exception(ep);
  } catch (const NotFoundError& e) {
    status = 404;
    body["error"] = e.what();
  } catch (const ConflictError& e) {
    status = 409;
    body["error"] = e.what();
    if (e.blocking_id().rfind("job-", 0) == 0) body["job_id"] = e.blocking_id();
  } catch (const PolicyError& e) {
    status = 403;
    body["error"] = e.what();
    body["remaining_seconds"] = e.remaining_seconds();
  } catch (const PreconditionError& e) {
    status = 412;
    body["error"] = e.what();
  } catch (const CapabilityError& e) {
    status = 501;
    body["error"] = e.what();
  } catch (const ArgumentError& e) {
    status = 400;
    body["error"] = e.what();
  } catch (const FormatError& e) {
    status = 400;
    body["error"] = e.what();
  } catch (const std::exception& e) {
    body["error"] = e.what();
  } catch (...) {
    body["error"] = "unknown error";
  }
  send_json(res, body, status);
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (...) {
      send_error(res, std::current_exception());
    }
  };
}

}  // namespace

Stroke stroke_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("stroke must be an object");
  Stroke s;
  try {
    s.frame = j.at("frame").get<int>();
    s.cx = j.at("cx").get<int>();
    s.cy = j.at("cy").get<int>();
    s.radius = j.at("radius").get<double>();
    if (j.contains("strength")) {
      const int v = j.at("strength").get<int>();
      if (v < 0 || v > 255) throw ArgumentError("stroke strength must be in [0, 255]");
      s.strength = static_cast<std::uint8_t>(v);
    }
    if (j.contains("polarity")) {
      const auto p = j.at("polarity").get<std::string>();
      if (p == "paint") {
        s.polarity = Polarity::kPaint;
      } else if (p == "erase") {
        s.polarity = Polarity::kErase;
      } else {
        throw ArgumentError("stroke polarity must be 'paint' or 'erase'");
      }
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("bad stroke: ") + e.what());
  }
  return s;
}

HttpServer::HttpServer(Service& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& svc = service_;
  auto& s = *server_;

  s.Get("/videos", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& v : svc.videos().list()) {
      out.push_back({{"id", v.id},
                     {"width", v.width},
                     {"height", v.height},
                     {"frames", v.frames},
                     {"fps", v.fps.value()},
                     {"bitrate", v.bitrate},
                     {"flow_ready", svc.videos().flow_ready(v.id)}});
    }
    send_json(res, out);
  }));

  s.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const std::string id = svc.create_session(field(body, "video_id"), field(body, "user_id"));
    send_json(res, {{"session_id", id}, {"remaining_seconds", svc.remaining_seconds(id)}}, 201);
  }));

  s.Get("/sessions/:id", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, svc.summary(req.path_params.at("id")));
  }));

  s.Get("/sessions/:id/map", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    res.set_content(svc.map_bytes(req.path_params.at("id")), kBinary);
  }));

  s.Get("/sessions/:id/edges/:frame",
        guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          int frame = 0;
          int threshold = kDefaultEdgeThreshold;
          try {
            frame = std::stoi(req.path_params.at("frame"));
            if (req.has_param("threshold")) threshold = std::stoi(req.get_param_value("threshold"));
          } catch (const std::logic_error&) {
            throw ArgumentError("frame and threshold must be integers");
          }
          if (threshold < 0 || threshold > 255) throw ArgumentError("threshold must be in [0, 255]");
          const EdgeMask m =
              svc.edges(req.path_params.at("id"), frame, static_cast<std::uint8_t>(threshold));
          const auto& v = m.magnitude.values();
          res.set_header("X-Width", std::to_string(m.magnitude.width()));
          res.set_header("X-Height", std::to_string(m.magnitude.height()));
          res.set_header("X-Threshold", std::to_string(threshold));
          res.set_content(reinterpret_cast<const char*>(v.data()), v.size(), kBinary);
        }));

  s.Post("/sessions/:id/strokes",
         guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           if (!body.is_array()) throw ArgumentError("expected a JSON array of strokes");
           std::vector<Stroke> strokes;
           for (const auto& j : body) strokes.push_back(stroke_from_json(j));
           res.set_content(vimp_bytes(svc.submit_strokes(req.path_params.at("id"), strokes)), kBinary);
         }));

  s.Post("/sessions/:id/encode", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, {{"job_id", svc.request_encode(req.path_params.at("id"))}}, 202);
  }));

  s.Get("/sessions/:id/encode/:job",
        guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          const JobStatus st = svc.job(req.path_params.at("id"), req.path_params.at("job"));
          json out = {{"job_id", st.job_id}, {"iteration", st.iteration}, {"state", to_string(st.state)}};
          if (st.state == JobState::kDone) out["stats"] = st.stats;
          if (st.state == JobState::kFailed) out["error"] = st.error;
          send_json(res, out);
        }));

  s.Get("/sessions/:id/video", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const VideoAsset a = svc.video(req.path_params.at("id"));
    std::ifstream in(a.path, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.set_content(std::move(bytes), a.content_type);
  }));

  s.Post("/sessions/:id/finalize",
         guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           send_json(res, {{"path", svc.finalize(req.path_params.at("id")).string()}});
         }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace vannot::service
