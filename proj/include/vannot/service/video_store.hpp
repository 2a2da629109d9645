#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vannot/flow.hpp"
#include "vannot/mock_codec.hpp"
#include "vannot/video.hpp"

namespace vannot::service {

// Ids double as directory names: 1-64 of [A-Za-z0-9_.-], not starting with '.'.
void validate_id(const std::string& id, const char* what);

struct VideoInfo {
  std::string id;
  int width = 0;   // original (unpadded)
  int height = 0;
  int frames = 0;
  Rational fps;
  double bitrate = 0.0;  // bits per second, fixed per video
};

// Videos under <root>/<id>/: source.y4m, video.json, flow/flow_NNNNNN.vflo.
// Decoded frames, codec rate tables and flow stores are loaded on first use
// and shared read-only afterwards.
class VideoStore {
 public:
  explicit VideoStore(std::filesystem::path root);

  VideoInfo ingest(const std::string& id, const FrameSequence& seq, double bitrate);
  VideoInfo ingest_file(const std::string& id, const std::filesystem::path& y4m, double bitrate);
  void set_bitrate(const std::string& id, double bitrate);

  bool exists(const std::string& id) const;
  VideoInfo info(const std::string& id) const;  // NotFoundError
  std::vector<VideoInfo> list() const;

  std::filesystem::path dir(const std::string& id) const { return root_ / id; }
  std::filesystem::path source_path(const std::string& id) const { return dir(id) / "source.y4m"; }

  std::shared_ptr<const FrameSequence> sequence(const std::string& id) const;
  std::shared_ptr<const MockCodec> codec(const std::string& id) const;
  std::shared_ptr<FlowStore> flows(const std::string& id) const;

  bool flow_ready(const std::string& id) const;
  int precompute_flow(const std::string& id, const FlowParams& params);
  // Replaces the stored flow with externally computed fields (N-1 of them).
  int import_flow(const std::string& id, std::istream& in);

 private:
  void write_info(const VideoInfo& info) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::shared_ptr<const FrameSequence>> sequences_;
  mutable std::map<std::string, std::shared_ptr<const MockCodec>> codecs_;
  mutable std::map<std::string, std::shared_ptr<FlowStore>> flows_;
};

}  // namespace vannot::service
