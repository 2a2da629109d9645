#include "vannot/service/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "fsutil.hpp"
#include "vannot/errors.hpp"
#include "vannot/metrics.hpp"
#include "vannot/qp_map.hpp"
#include "vannot/vimp.hpp"
#include "vannot/y4m.hpp"

namespace vannot::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::int64_t system_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

const char* to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "failed";
}

namespace {

JobState job_state_from(const std::string& s) {
  if (s == "queued") return JobState::kQueued;
  if (s == "running") return JobState::kRunning;
  if (s == "done") return JobState::kDone;
  if (s == "failed") return JobState::kFailed;
  throw FormatError("unknown job state '" + s + "'");
}

bool terminal(JobState s) { return s == JobState::kDone || s == JobState::kFailed; }

// JSON has no NaN or infinity; both are stored as null.
json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string new_token() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::string ordinal_name(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", n);
  return buf;
}

json stroke_json(const Stroke& s, std::int64_t at_ms) {
  return {{"frame", s.frame},
          {"cx", s.cx},
          {"cy", s.cy},
          {"radius", s.radius},
          {"strength", s.strength},
          {"polarity", s.polarity == Polarity::kPaint ? "paint" : "erase"},
          {"at_ms", at_ms}};
}

json stats_json(const EncodeResult& r, const DeltaQpMap& dqp, const std::optional<RegionMetrics>& region) {
  double lo = 0, hi = 0, sum = 0;
  std::size_t n = 0;
  for (const auto& f : dqp.frames) {
    for (float v : f.values()) {
      lo = n == 0 ? v : std::min(lo, static_cast<double>(v));
      hi = n == 0 ? v : std::max(hi, static_cast<double>(v));
      sum += v;
      ++n;
    }
  }
  json j = {{"codec", r.codec},
            {"target_bits", r.target_bits},
            {"total_bits", r.total_bits()},
            {"per_frame_bits", r.per_frame_bits},
            {"pass1_bits", r.pass1_bits},
            {"frame_qp_offsets", r.frame_qp_offsets},
            {"base_qp", real(r.base_qp)},
            {"iterations", r.iterations},
            {"rate_converged", r.rate_converged},
            {"psnr_overall", real(r.psnr_overall)},
            {"dqp_min", lo},
            {"dqp_max", hi},
            {"dqp_mean", n ? sum / static_cast<double>(n) : 0.0},
            {"region", nullptr}};
  if (region) {
    j["region"] = {{"psnr_in", real(region->psnr_in)},
                   {"psnr_out", real(region->psnr_out)},
                   {"weighted_psnr", real(region->weighted_psnr)},
                   {"threshold", region->threshold},
                   {"pixels_in", region->pixels_in},
                   {"pixels_out", region->pixels_out}};
  }
  return j;
}

}  // namespace

struct Service::Session {
  mutable std::mutex mu;
  mutable std::condition_variable changed;
  std::string id;
  std::string user_id;
  std::string video_id;
  std::string codec;
  double bitrate = 0.0;
  int min_seconds = kDefaultMinSeconds;
  std::int64_t created_ms = 0;
  std::optional<std::int64_t> finalized_ms;
  ImportanceVolume raw;
  ImportanceVolume normalized;
  json strokes = json::array();
  struct Job {
    std::string id;
    int iteration = 0;
    JobState state = JobState::kQueued;
    std::string error;
    std::int64_t queued_ms = 0;
    std::optional<std::int64_t> finished_ms;
  };
  std::vector<Job> jobs;
  std::vector<int> snapshots;  // iterations with a completed snapshot
  std::map<int, json> stats;   // by iteration

  Job* job(const std::string& job_id) {
    for (auto& j : jobs) {
      if (j.id == job_id) return &j;
    }
    return nullptr;
  }
};

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      videos_(config_.data_dir / "videos"),
      sessions_root_(config_.data_dir / "sessions") {
  if (config_.codec != "mock" && config_.codec != "external") {
    throw ArgumentError("codec must be 'mock' or 'external', got '" + config_.codec + "'");
  }
  if (config_.min_seconds < 0) throw ArgumentError("min_seconds must be >= 0");
  if (!config_.clock) config_.clock = system_millis;
  fs::create_directories(sessions_root_);
  load_sessions();
  worker_ = std::thread([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

// ---------------------------------------------------------------------------
// Worker

void Service::enqueue(std::function<void()> task) {
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(std::move(task));
  }
  queue_cv_.notify_all();
}

void Service::worker_loop() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      task = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    task();
    {
      std::lock_guard lock(queue_mu_);
      busy_ = false;
    }
    queue_cv_.notify_all();
  }
}

void Service::drain() {
  std::unique_lock lock(queue_mu_);
  queue_cv_.wait(lock, [this] { return stopping_ || (queue_.empty() && !busy_); });
}

// ---------------------------------------------------------------------------
// Persistence

fs::path Service::session_dir(const std::string& session_id) const {
  return sessions_root_ / session_id;
}

json Service::manifest(const Session& s) const {
  json jobs = json::array();
  for (const auto& j : s.jobs) {
    jobs.push_back({{"job_id", j.id},
                    {"iteration", j.iteration},
                    {"state", to_string(j.state)},
                    {"error", j.error},
                    {"queued_ms", j.queued_ms},
                    {"finished_ms", j.finished_ms ? json(*j.finished_ms) : json(nullptr)}});
  }
  return {{"version", 1},
          {"session_id", s.id},
          {"user_id", s.user_id},
          {"video_id", s.video_id},
          {"codec", s.codec},
          {"bitrate", s.bitrate},
          {"min_seconds", s.min_seconds},
          {"created_ms", s.created_ms},
          {"finalized_ms", s.finalized_ms ? json(*s.finalized_ms) : json(nullptr)},
          {"width", s.raw.width},
          {"height", s.raw.height},
          {"frames", s.raw.frame_count()},
          {"strokes", s.strokes},
          {"jobs", jobs},
          {"snapshots", s.snapshots}};
}

std::map<std::string, std::string> Service::persisted_state(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  return {{"manifest.json", manifest(*s).dump(2) + "\n"},
          {"raw.vimp", vimp_bytes(s->raw)},
          {"normalized.vimp", vimp_bytes(s->normalized)}};
}

void Service::persist(const Session& s) const {
  const auto dir = session_dir(s.id);
  atomic_write(dir / "raw.vimp", vimp_bytes(s.raw));
  atomic_write(dir / "normalized.vimp", vimp_bytes(s.normalized));
  // The manifest goes last: it is the commit point.
  atomic_write(dir / "manifest.json", manifest(s).dump(2) + "\n");
}

void Service::load_sessions() {
  for (const auto& entry : fs::directory_iterator(sessions_root_)) {
    const auto path = entry.path() / "manifest.json";
    if (!entry.is_directory() || !fs::exists(path)) continue;
    auto s = std::make_shared<Session>();
    try {
      const json m = json::parse(read_all(path));
      s->id = m.at("session_id").get<std::string>();
      s->user_id = m.at("user_id").get<std::string>();
      s->video_id = m.at("video_id").get<std::string>();
      s->codec = m.at("codec").get<std::string>();
      s->bitrate = m.at("bitrate").get<double>();
      s->min_seconds = m.at("min_seconds").get<int>();
      s->created_ms = m.at("created_ms").get<std::int64_t>();
      if (!m.at("finalized_ms").is_null()) s->finalized_ms = m.at("finalized_ms").get<std::int64_t>();
      s->strokes = m.at("strokes");
      for (const auto& j : m.at("jobs")) {
        Session::Job job;
        job.id = j.at("job_id").get<std::string>();
        job.iteration = j.at("iteration").get<int>();
        job.state = job_state_from(j.at("state").get<std::string>());
        job.error = j.at("error").get<std::string>();
        job.queued_ms = j.at("queued_ms").get<std::int64_t>();
        if (!j.at("finished_ms").is_null()) job.finished_ms = j.at("finished_ms").get<std::int64_t>();
        s->jobs.push_back(std::move(job));
      }
      s->snapshots = m.at("snapshots").get<std::vector<int>>();
    } catch (const json::exception& e) {
      throw FormatError("session manifest " + path.string() + ": " + e.what());
    }
    s->raw = read_vimp_file(entry.path() / "raw.vimp");
    s->normalized = read_vimp_file(entry.path() / "normalized.vimp");
    for (int it : s->snapshots) {
      const auto stats_path = entry.path() / "snapshots" / ordinal_name(it) / "stats.json";
      if (fs::exists(stats_path)) s->stats[it] = json::parse(read_all(stats_path));
    }
    bool interrupted = false;
    for (auto& j : s->jobs) {
      if (!terminal(j.state)) {
        j.state = JobState::kFailed;
        j.error = "interrupted by a service restart";
        j.finished_ms = config_.clock();
        interrupted = true;
      }
    }
    if (interrupted) persist(*s);
    sessions_.emplace(s->id, std::move(s));
  }
}

// ---------------------------------------------------------------------------
// Sessions

std::shared_ptr<Service::Session> Service::find(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + session_id + "'");
  return it->second;
}

std::vector<std::string> Service::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

std::string Service::create_session(const std::string& video_id, const std::string& user_id) {
  if (user_id.empty() || user_id.size() > 128) throw ArgumentError("user_id must be 1-128 characters");
  const VideoInfo v = videos_.info(video_id);
  if (!videos_.flow_ready(video_id)) {
    throw PreconditionError("flow for video '" + video_id +
                            "' is not precomputed; run `vannot flow --id " + video_id + "` first");
  }
  auto s = std::make_shared<Session>();
  s->id = new_token();
  s->user_id = user_id;
  s->video_id = video_id;
  s->codec = config_.codec;
  s->bitrate = v.bitrate;
  s->min_seconds = config_.min_seconds;
  s->created_ms = config_.clock();
  s->raw = new_volume(v.width, v.height, v.frames);
  s->normalized = s->raw;
  fs::create_directories(session_dir(s->id));
  persist(*s);
  {
    std::lock_guard lock(mu_);
    sessions_.emplace(s->id, s);
  }
  ensure_baseline(video_id);
  return s->id;
}

ImportanceVolume Service::submit_strokes(const std::string& session_id, std::span<const Stroke> strokes) {
  auto s = find(session_id);
  auto flows = videos_.flows(s->video_id);
  std::lock_guard lock(s->mu);
  if (s->finalized_ms) throw ConflictError("session '" + session_id + "' is finalized", session_id);
  for (const auto& st : strokes) validate_stroke(st, s->raw);
  const std::int64_t now = config_.clock();
  for (const auto& st : strokes) {
    propagate_stroke(s->raw, stroke_kernel(st), *flows, config_.decay);
    s->strokes.push_back(stroke_json(st, now));
  }
  s->normalized = normalize(s->raw).volume;
  persist(*s);
  return s->normalized;
}

long Service::remaining_seconds(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  const std::int64_t left = std::int64_t{s->min_seconds} * 1000 - (config_.clock() - s->created_ms);
  return left <= 0 ? 0 : static_cast<long>((left + 999) / 1000);
}

fs::path Service::finalize(const std::string& session_id) {
  const long remaining = remaining_seconds(session_id);
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  if (s->finalized_ms) throw ConflictError("session '" + session_id + "' is already finalized", session_id);
  if (remaining > 0) {
    throw PolicyError("session '" + session_id + "' needs " + std::to_string(remaining) +
                          " more seconds of annotation before it can be finalized",
                      remaining);
  }
  const auto dir = session_dir(session_id) / "final";
  atomic_write(dir / "raw.vimp", vimp_bytes(s->raw));
  atomic_write(dir / "normalized.vimp", vimp_bytes(s->normalized));
  s->finalized_ms = config_.clock();
  atomic_write(dir / "manifest.json", manifest(*s).dump(2) + "\n");
  persist(*s);
  return dir / "normalized.vimp";
}

std::string Service::map_bytes(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  return vimp_bytes(s->normalized);
}

ImportanceVolume Service::raw_volume(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  return s->raw;
}

EdgeMask Service::edges(const std::string& session_id, int frame, std::uint8_t threshold) const {
  auto s = find(session_id);
  auto seq = videos_.sequence(s->video_id);
  if (frame < 0 || frame >= static_cast<int>(seq->frames.size())) {
    throw ArgumentError("frame " + std::to_string(frame) + " out of range");
  }
  EdgeMask m = sobel_edges(seq->frames[static_cast<std::size_t>(frame)], threshold);
  m.magnitude = crop(m.magnitude, seq->orig_width, seq->orig_height);
  return m;
}

VideoAsset Service::video(const std::string& session_id) const {
  auto s = find(session_id);
  std::unique_lock lock(s->mu);
  if (!s->snapshots.empty()) {
    const auto dir = session_dir(session_id) / "snapshots" / ordinal_name(s->snapshots.back());
    if (fs::exists(dir / "recon.y4m")) return {dir / "recon.y4m", "video/x-yuv4mpeg"};
    return {dir / "bitstream.bin", "application/octet-stream"};
  }
  const std::string video_id = s->video_id;
  lock.unlock();
  const auto base = videos_.dir(video_id) / "baseline";
  if (fs::exists(base / "recon.y4m")) return {base / "recon.y4m", "video/x-yuv4mpeg"};
  if (fs::exists(base / "bitstream.bin")) return {base / "bitstream.bin", "application/octet-stream"};
  throw PreconditionError("no encode of video '" + video_id + "' is available yet");
}

json Service::summary(const std::string& session_id) const {
  const long remaining = remaining_seconds(session_id);
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  json m = manifest(*s);
  m.erase("strokes");
  m["stroke_count"] = s->strokes.size();
  m["remaining_seconds"] = remaining;
  return m;
}

// ---------------------------------------------------------------------------
// Encoding

EncodeResult Service::encode(const std::string& video_id, const DeltaQpMap& dqp,
                             const fs::path& work_dir) const {
  EncoderConfig cfg;
  cfg.target_bitrate = videos_.info(video_id).bitrate;
  if (config_.codec == "external") {
    std::optional<ExternalAdapter> adapter = config_.adapter;
    if (adapter) adapter->work_dir = work_dir;
    return external_encode(videos_.source_path(video_id), dqp, cfg, adapter);
  }
  return videos_.codec(video_id)->encode_two_pass(&dqp, cfg);
}

void Service::ensure_baseline(const std::string& video_id) {
  {
    std::lock_guard lock(mu_);
    if (baselines_.count(video_id)) return;
    if (fs::exists(videos_.dir(video_id) / "baseline" / "stats.json")) {
      baselines_[video_id] = "done";
      return;
    }
    baselines_[video_id] = "queued";
  }
  enqueue([this, video_id] { run_baseline(video_id); });
}

void Service::run_baseline(const std::string& video_id) {
  const auto dir = videos_.dir(video_id) / "baseline";
  std::string state = "done";
  try {
    const VideoInfo v = videos_.info(video_id);
    const auto seq = videos_.sequence(video_id);
    const auto zero = DeltaQpMap::zero(seq->mb_cols(), seq->mb_rows(), v.frames);
    const EncodeResult r = encode(video_id, zero, dir / "work");
    if (r.codec == "mock") {
      atomic_write(dir / "bitstream.vmck", r.bitstream);
      std::ostringstream y4m;
      write_y4m(r.reconstruction, y4m);
      atomic_write(dir / "recon.y4m", std::move(y4m).str());
    } else {
      atomic_write(dir / "bitstream.bin", read_all(r.bitstream_path));
    }
    atomic_write(dir / "stats.json", stats_json(r, zero, std::nullopt).dump(2) + "\n");
  } catch (const std::exception& e) {
    state = std::string("failed: ") + e.what();
  }
  std::lock_guard lock(mu_);
  baselines_[video_id] = state;
}

std::string Service::request_encode(const std::string& session_id) {
  auto s = find(session_id);
  std::string job_id;
  {
    std::lock_guard lock(s->mu);
    if (s->finalized_ms) throw ConflictError("session '" + session_id + "' is finalized", session_id);
    for (const auto& j : s->jobs) {
      if (!terminal(j.state)) {
        throw ConflictError("session '" + session_id + "' already has encode job " + j.id +
                                " in flight",
                            j.id);
      }
    }
    Session::Job job;
    job.iteration = static_cast<int>(s->jobs.size()) + 1;
    job.id = "job-" + ordinal_name(job.iteration);
    job.queued_ms = config_.clock();
    job_id = job.id;
    s->jobs.push_back(job);
    persist(*s);
  }
  enqueue([this, s, job_id] { run_encode(s, job_id); });
  return job_id;
}

void Service::run_encode(const std::shared_ptr<Session>& s, const std::string& job_id) {
  ImportanceVolume volume;
  std::string video_id;
  int iteration = 0;
  {
    std::lock_guard lock(s->mu);
    Session::Job* job = s->job(job_id);
    job->state = JobState::kRunning;
    iteration = job->iteration;
    volume = s->normalized;
    video_id = s->video_id;
    persist(*s);
  }
  s->changed.notify_all();

  const auto dir = session_dir(s->id) / "snapshots" / ordinal_name(iteration);
  json stats;
  std::string error;
  try {
    const DeltaQpMap dqp = to_delta_qp(block_means(volume));
    const EncodeResult r = encode(video_id, dqp, dir / "work");
    std::optional<RegionMetrics> region;
    if (r.codec == "mock") {
      try {
        region = region_metrics(*videos_.sequence(video_id), r.reconstruction, volume);
      } catch (const DegenerateRegionError&) {
      }
    }
    stats = stats_json(r, dqp, region);
    stats["iteration"] = iteration;
    stats["job_id"] = job_id;
    atomic_write(dir / "volume.vimp", vimp_bytes(volume));
    atomic_write(dir / "dqp.vdqp", qpmap_bytes(dqp));
    if (r.codec == "mock") {
      atomic_write(dir / "bitstream.vmck", r.bitstream);
      std::ostringstream y4m;
      write_y4m(r.reconstruction, y4m);
      atomic_write(dir / "recon.y4m", std::move(y4m).str());
    } else {
      atomic_write(dir / "bitstream.bin", read_all(r.bitstream_path));
    }
    atomic_write(dir / "stats.json", stats.dump(2) + "\n");
  } catch (const std::exception& e) {
    error = e.what();
  }

  {
    std::lock_guard lock(s->mu);
    Session::Job* job = s->job(job_id);
    job->finished_ms = config_.clock();
    if (error.empty()) {
      job->state = JobState::kDone;
      s->snapshots.push_back(iteration);
      s->stats[iteration] = stats;
    } else {
      job->state = JobState::kFailed;
      job->error = error;
    }
    persist(*s);
  }
  s->changed.notify_all();
}

JobStatus Service::job(const std::string& session_id, const std::string& job_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  Session::Job* j = s->job(job_id);
  if (!j) throw NotFoundError("session '" + session_id + "' has no job '" + job_id + "'");
  JobStatus st{j->id, j->iteration, j->state, j->error, nullptr};
  if (j->state == JobState::kDone) st.stats = s->stats.at(j->iteration);
  return st;
}

JobStatus Service::wait_job(const std::string& session_id, const std::string& job_id,
                            std::chrono::milliseconds timeout) const {
  auto s = find(session_id);
  {
    std::unique_lock lock(s->mu);
    s->changed.wait_for(lock, timeout, [&] {
      Session::Job* j = s->job(job_id);
      return !j || terminal(j->state);
    });
  }
  return job(session_id, job_id);
}

}  // namespace vannot::service
