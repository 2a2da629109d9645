#include "vannot/service/video_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <istream>

#include "fsutil.hpp"
#include "vannot/errors.hpp"
#include "vannot/y4m.hpp"

namespace vannot::service {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_id(const std::string& id, const char* what) {
  const bool ok = !id.empty() && id.size() <= 64 && id.front() != '.' &&
                  std::all_of(id.begin(), id.end(), [](unsigned char c) {
                    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
                  });
  if (!ok) throw ArgumentError(std::string("invalid ") + what + " '" + id + "'");
}

namespace {

json info_json(const VideoInfo& v) {
  return {{"id", v.id},
          {"width", v.width},
          {"height", v.height},
          {"frames", v.frames},
          {"fps", v.fps.value()},
          {"fps_num", v.fps.num},
          {"fps_den", v.fps.den},
          {"bitrate", v.bitrate}};
}

VideoInfo info_from_json(const json& j) {
  VideoInfo v;
  v.id = j.at("id").get<std::string>();
  v.width = j.at("width").get<int>();
  v.height = j.at("height").get<int>();
  v.frames = j.at("frames").get<int>();
  v.fps = {j.at("fps_num").get<std::uint32_t>(), j.at("fps_den").get<std::uint32_t>()};
  v.bitrate = j.at("bitrate").get<double>();
  return v;
}

}  // namespace

VideoStore::VideoStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

void VideoStore::write_info(const VideoInfo& info) const {
  atomic_write(dir(info.id) / "video.json", info_json(info).dump(2) + "\n");
}

VideoInfo VideoStore::ingest(const std::string& id, const FrameSequence& seq, double bitrate) {
  validate_id(id, "video id");
  if (bitrate <= 0) throw ArgumentError("bitrate must be positive");
  if (seq.frames.empty()) throw ArgumentError("cannot ingest an empty sequence");
  if (exists(id)) throw ConflictError("video '" + id + "' already exists", id);
  fs::create_directories(dir(id) / "flow");
  const auto tmp = source_path(id).string() + ".tmp";
  write_y4m_file(seq, tmp);
  fs::rename(tmp, source_path(id));
  VideoInfo info{id, seq.orig_width, seq.orig_height, static_cast<int>(seq.frames.size()),
                 seq.frame_rate, bitrate};
  write_info(info);
  return info;
}

VideoInfo VideoStore::ingest_file(const std::string& id, const fs::path& y4m, double bitrate) {
  return ingest(id, load_y4m_file(y4m), bitrate);
}

void VideoStore::set_bitrate(const std::string& id, double bitrate) {
  if (bitrate <= 0) throw ArgumentError("bitrate must be positive");
  VideoInfo v = info(id);
  v.bitrate = bitrate;
  write_info(v);
}

bool VideoStore::exists(const std::string& id) const {
  return fs::exists(dir(id) / "video.json");
}

VideoInfo VideoStore::info(const std::string& id) const {
  validate_id(id, "video id");
  if (!exists(id)) throw NotFoundError("unknown video '" + id + "'");
  try {
    return info_from_json(json::parse(read_all(dir(id) / "video.json")));
  } catch (const json::exception& e) {
    throw FormatError("video '" + id + "': bad video.json: " + e.what());
  }
}

std::vector<VideoInfo> VideoStore::list() const {
  std::vector<VideoInfo> out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    const std::string id = entry.path().filename().string();
    if (exists(id)) out.push_back(info(id));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::shared_ptr<const FrameSequence> VideoStore::sequence(const std::string& id) const {
  info(id);
  {
    std::lock_guard lock(mu_);
    if (auto it = sequences_.find(id); it != sequences_.end()) return it->second;
  }
  auto seq = std::make_shared<const FrameSequence>(load_y4m_file(source_path(id)));
  std::lock_guard lock(mu_);
  return sequences_.emplace(id, std::move(seq)).first->second;
}

std::shared_ptr<const MockCodec> VideoStore::codec(const std::string& id) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = codecs_.find(id); it != codecs_.end()) return it->second;
  }
  auto codec = std::make_shared<const MockCodec>(sequence(id));
  std::lock_guard lock(mu_);
  return codecs_.emplace(id, std::move(codec)).first->second;
}

std::shared_ptr<FlowStore> VideoStore::flows(const std::string& id) const {
  info(id);
  std::lock_guard lock(mu_);
  auto& slot = flows_[id];
  if (!slot) slot = std::make_shared<FlowStore>(dir(id) / "flow");
  return slot;
}

bool VideoStore::flow_ready(const std::string& id) const {
  const VideoInfo v = info(id);
  auto store = flows(id);
  for (int t = 0; t + 1 < v.frames; ++t) {
    if (!store->contains(t)) return false;
  }
  return true;
}

int VideoStore::precompute_flow(const std::string& id, const FlowParams& params) {
  const auto seq = sequence(id);
  if (seq->frames.size() < 2) return 0;
  return precompute_sequence(*seq, params, *flows(id));
}

int VideoStore::import_flow(const std::string& id, std::istream& in) {
  const VideoInfo v = info(id);
  const auto fields = vannot::import_flow(in);
  if (static_cast<int>(fields.size()) != v.frames - 1) {
    throw FormatError("flow import: expected " + std::to_string(v.frames - 1) + " fields, got " +
                      std::to_string(fields.size()));
  }
  for (const auto& f : fields) {
    if (f.width() != v.width || f.height() != v.height) {
      throw FormatError("flow import: fields are " + std::to_string(f.width()) + "x" +
                        std::to_string(f.height()) + " but the video is " +
                        std::to_string(v.width) + "x" + std::to_string(v.height));
    }
    if (f.from_frame < 0 || f.from_frame >= v.frames - 1) {
      throw FormatError("flow import: field from_frame " + std::to_string(f.from_frame) +
                        " out of range");
    }
  }
  auto store = flows(id);
  for (const auto& f : fields) store->put(f);
  return static_cast<int>(fields.size());
}

}  // namespace vannot::service
