#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vannot/edges.hpp"
#include "vannot/external_encoder.hpp"
#include "vannot/importance.hpp"
#include "vannot/propagation.hpp"
#include "vannot/service/video_store.hpp"

namespace vannot::service {

// Milliseconds since the Unix epoch; injectable for tests.
using Clock = std::function<std::int64_t()>;
std::int64_t system_millis();

inline constexpr int kDefaultMinSeconds = 180;
inline constexpr std::uint8_t kDefaultEdgeThreshold = 64;

struct ServiceConfig {
  std::filesystem::path data_dir;
  std::string codec = "mock";  // "mock" or "external"
  std::optional<ExternalAdapter> adapter;
  int min_seconds = kDefaultMinSeconds;
  DecayPolicy decay;
  Clock clock = system_millis;
};

enum class JobState { kQueued, kRunning, kDone, kFailed };
const char* to_string(JobState s);

struct JobStatus {
  std::string job_id;
  int iteration = 0;
  JobState state = JobState::kQueued;
  std::string error;
  nlohmann::json stats;  // null until done
};

// Bytes the UI can play back: a Y4M reconstruction (mock) or the encoder's
// bitstream (external).
struct VideoAsset {
  std::filesystem::path path;
  std::string content_type;
};

// Session state lives under <data_dir>/sessions/<id>/:
//   manifest.json            ids, timestamps, stroke log, jobs, snapshot index
//   raw.vimp, normalized.vimp
//   snapshots/NNNN/          volume.vimp, dqp.vdqp, stats.json, recon.y4m, bitstream
//   final/                   written once by finalize
// Every mutation rewrites the affected files atomically before returning, so
// a restarted service reloads exactly what was last acknowledged. Jobs that
// were queued or running at shutdown come back as failed.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  VideoStore& videos() { return videos_; }
  const ServiceConfig& config() const { return config_; }

  std::string create_session(const std::string& video_id, const std::string& user_id);
  // Validates every stroke first; applies, propagates and renormalizes.
  // Returns the normalized volume.
  ImportanceVolume submit_strokes(const std::string& session_id, std::span<const Stroke> strokes);
  std::string request_encode(const std::string& session_id);
  JobStatus job(const std::string& session_id, const std::string& job_id) const;
  // Blocks until the job is terminal or the timeout expires.
  JobStatus wait_job(const std::string& session_id, const std::string& job_id,
                     std::chrono::milliseconds timeout = std::chrono::minutes(5)) const;
  // Path of the stored final normalized map.
  std::filesystem::path finalize(const std::string& session_id);

  std::string map_bytes(const std::string& session_id) const;  // VIMP, normalized
  ImportanceVolume raw_volume(const std::string& session_id) const;
  EdgeMask edges(const std::string& session_id, int frame,
                 std::uint8_t threshold = kDefaultEdgeThreshold) const;
  VideoAsset video(const std::string& session_id) const;
  nlohmann::json summary(const std::string& session_id) const;
  long remaining_seconds(const std::string& session_id) const;

  std::vector<std::string> session_ids() const;
  std::filesystem::path session_dir(const std::string& session_id) const;
  // Files the service would write for the session right now (relative path ->
  // bytes); equal to the on-disk copies whenever the service is idle.
  std::map<std::string, std::string> persisted_state(const std::string& session_id) const;

  // Waits until the worker queue is empty and idle.
  void drain();

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id) const;
  void persist(const Session& s) const;
  nlohmann::json manifest(const Session& s) const;
  void load_sessions();
  void enqueue(std::function<void()> task);
  void worker_loop();
  void run_encode(const std::shared_ptr<Session>& s, const std::string& job_id);
  void ensure_baseline(const std::string& video_id);
  void run_baseline(const std::string& video_id);
  EncodeResult encode(const std::string& video_id, const DeltaQpMap& dqp,
                      const std::filesystem::path& work_dir) const;

  ServiceConfig config_;
  VideoStore videos_;
  std::filesystem::path sessions_root_;

  mutable std::mutex mu_;  // sessions_, baselines_
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::string> baselines_;  // video id -> state

  mutable std::mutex queue_mu_;
  mutable std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace vannot::service
