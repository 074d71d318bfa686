// SPDX-License-Identifier: Apache-2.0
#pragma once

// Client side of the detection bridge: newline-delimited JSON exchanged with
// an external detector over the stdio of a spawned process or a unix socket.
//
//   request:  {"v":1,"id":N,"op":"detect","images":[...],"class_filter":"person"}
//   response: {"v":1,"id":N,"detections":[[{"xmin":..,"ymin":..,"xmax":..,"ymax":..,
//                                           "objectness":..,"class":".."}],...]}
//   error:    {"v":1,"id":N,"error":"message"}

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvpatch/detector.hpp"
#include "mvpatch/error.hpp"
#include "mvpatch/png_io.hpp"

extern char** environ;

namespace mvpatch {

inline constexpr int kBridgeProtocolVersion = 1;

// ---------------------------------------------------------------------------
// Message codec
// ---------------------------------------------------------------------------

inline std::string encode_detect_request(std::int64_t id, const std::vector<std::string>& images,
                                         const std::string& class_filter = "person") {
  nlohmann::json j;
  j["v"] = kBridgeProtocolVersion;
  j["id"] = id;
  j["op"] = "detect";
  j["images"] = images;
  j["class_filter"] = class_filter;
  return j.dump();
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* field, const std::string& where) {
  if (!obj.is_object() || !obj.contains(field)) {
    fail(ErrorKind::ProtocolError, where + " is missing the \"" + field + "\" field");
  }
  return obj.at(field);
}

inline double require_number(const nlohmann::json& obj, const char* field, const std::string& where) {
  const auto& v = require_field(obj, field, where);
  if (!v.is_number()) fail(ErrorKind::ProtocolError, where + " field \"" + field + "\" is not a number");
  return v.get<double>();
}

}  // namespace detail

/// Parses one response line.  Validates version, id and shape; a bridge
/// error reply is raised as BridgeError carrying the bridge's message.
inline std::vector<std::vector<Detection>> decode_detect_response(const std::string& line, std::int64_t expected_id,
                                                                  std::size_t expected_images) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ProtocolError, std::string("reply is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::ProtocolError, "reply is not a JSON object");
  const auto& v = detail::require_field(j, "v", "reply");
  if (!v.is_number_integer()) fail(ErrorKind::ProtocolError, "reply field \"v\" is not an integer");
  if (v.get<int>() != kBridgeProtocolVersion) {
    fail(ErrorKind::VersionMismatch, "bridge speaks protocol v" + std::to_string(v.get<int>()) + ", client speaks v" +
                                         std::to_string(kBridgeProtocolVersion));
  }
  const auto& id = detail::require_field(j, "id", "reply");
  if (!id.is_number_integer()) fail(ErrorKind::ProtocolError, "reply field \"id\" is not an integer");
  if (j.contains("error")) {
    const auto& e = j.at("error");
    fail(ErrorKind::BridgeError, "bridge reported: " + (e.is_string() ? e.get<std::string>() : e.dump()));
  }
  if (id.get<std::int64_t>() != expected_id) {
    fail(ErrorKind::ProtocolError, "reply id " + std::to_string(id.get<std::int64_t>()) + " does not match request id " +
                                       std::to_string(expected_id));
  }
  const auto& dets = detail::require_field(j, "detections", "reply");
  if (!dets.is_array()) fail(ErrorKind::ProtocolError, "reply field \"detections\" is not an array");
  if (dets.size() != expected_images) {
    fail(ErrorKind::ProtocolError, "reply has " + std::to_string(dets.size()) + " detection lists for " +
                                       std::to_string(expected_images) + " images");
  }
  std::vector<std::vector<Detection>> out;
  out.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& per_image = dets[i];
    if (!per_image.is_array()) fail(ErrorKind::ProtocolError, "detections[" + std::to_string(i) + "] is not an array");
    std::vector<Detection> list;
    for (std::size_t k = 0; k < per_image.size(); ++k) {
      const std::string where = "detections[" + std::to_string(i) + "][" + std::to_string(k) + "]";
      const auto& d = per_image[k];
      Detection det;
      det.bbox = {detail::require_number(d, "xmin", where), detail::require_number(d, "ymin", where),
                  detail::require_number(d, "xmax", where), detail::require_number(d, "ymax", where)};
      det.objectness = detail::require_number(d, "objectness", where);
      const auto& cls = detail::require_field(d, "class", where);
      if (!cls.is_string()) fail(ErrorKind::ProtocolError, where + " field \"class\" is not a string");
      det.class_label = cls.get<std::string>();
      if (!det.bbox.valid()) fail(ErrorKind::ProtocolError, where + " has an invalid box");
      if (!(det.objectness >= 0.0 && det.objectness <= 1.0)) {
        fail(ErrorKind::ProtocolError, where + " objectness is outside [0, 1]");
      }
      list.push_back(std::move(det));
    }
    out.push_back(std::move(list));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

/// A bidirectional line channel over a pair of file descriptors.
class LineChannel {
 public:
  LineChannel() = default;
  LineChannel(int read_fd, int write_fd, bool is_socket = false)
      : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  LineChannel(LineChannel&& o) noexcept { *this = std::move(o); }
  LineChannel& operator=(LineChannel&& o) noexcept {
    if (this != &o) {
      close_all();
      read_fd_ = std::exchange(o.read_fd_, -1);
      write_fd_ = std::exchange(o.write_fd_, -1);
      is_socket_ = o.is_socket_;
      buffer_ = std::move(o.buffer_);
    }
    return *this;
  }
  ~LineChannel() { close_all(); }

  void write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = is_socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                   : ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::BridgeUnavailable, std::string("write to bridge failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  /// Next line without its terminator; nullopt on end of stream.
  std::optional<std::string> read_line() {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::BridgeUnavailable, std::string("read from bridge failed: ") + std::strerror(errno));
      }
      if (n == 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close_write() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) {
      ::close(write_fd_);
      write_fd_ = -1;
    } else if (write_fd_ >= 0 && is_socket_) {
      ::shutdown(write_fd_, SHUT_WR);
    }
  }

 private:
  void close_all() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

  int read_fd_ = -1;
  int write_fd_ = -1;
  bool is_socket_ = false;
  std::string buffer_;
};

/// Spawns `/bin/sh -c command` with its stdin/stdout connected to a channel.
/// The child's stderr is inherited.
class BridgeProcess {
 public:
  explicit BridgeProcess(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) fail(ErrorKind::BridgeUnavailable, "pipe() failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      fail(ErrorKind::BridgeUnavailable, "pipe() failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      fail(ErrorKind::BridgeUnavailable, "cannot spawn bridge command: " + command);
    }
    // A bridge that exits early must surface as an error, not a signal.
    ::signal(SIGPIPE, SIG_IGN);
    channel_ = LineChannel(from_child[0], to_child[1]);
  }
  BridgeProcess(const BridgeProcess&) = delete;
  BridgeProcess& operator=(const BridgeProcess&) = delete;

  ~BridgeProcess() {
    channel_.close_write();
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  LineChannel& channel() { return channel_; }

 private:
  pid_t pid_ = -1;
  LineChannel channel_;
};

inline LineChannel connect_unix_socket(const std::string& path) {
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) fail(ErrorKind::BridgeUnavailable, "socket() failed");
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) {
    ::close(fd);
    fail(ErrorKind::BridgeUnavailable, "socket path too long: " + path);
  }
  std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    fail(ErrorKind::BridgeUnavailable, "cannot connect to bridge socket " + path + ": " + std::strerror(errno));
  }
  return LineChannel(fd, fd, true);
}

/// Request/reply client; one request in flight, ids increase from 1.
class BridgeClient {
 public:
  explicit BridgeClient(LineChannel& channel) : channel_(channel) {}

  std::vector<std::vector<Detection>> detect(const std::vector<std::string>& image_paths,
                                             const std::string& class_filter = "person") {
    const std::int64_t id = next_id_++;
    channel_.write_line(encode_detect_request(id, image_paths, class_filter));
    const auto line = channel_.read_line();
    if (!line) fail(ErrorKind::BridgeUnavailable, "bridge closed the connection without replying");
    return decode_detect_response(*line, id, image_paths.size());
  }

 private:
  LineChannel& channel_;
  std::int64_t next_id_ = 1;
};

/// How to reach a bridge: a shell command to spawn, or a unix socket path.
struct BridgeConfig {
  std::string command;
  std::string socket_path;
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path() / "mvpatch-bridge";
  std::string class_filter = "person";

  /// Accepts "bridge:<command>" or "bridge-unix:<path>".
  static std::optional<BridgeConfig> from_selector(const std::string& selector) {
    BridgeConfig c;
    if (selector.rfind("bridge:", 0) == 0) {
      c.command = selector.substr(7);
      if (c.command.empty()) return std::nullopt;
      return c;
    }
    if (selector.rfind("bridge-unix:", 0) == 0) {
      c.socket_path = selector.substr(12);
      if (c.socket_path.empty()) return std::nullopt;
      return c;
    }
    return std::nullopt;
  }
};

/// Sends the named image files to the bridge and returns one detection list
/// per image, in order.
inline std::vector<std::vector<Detection>> bridge_detect(BridgeClient& client, const std::vector<std::string>& paths,
                                                         const std::string& class_filter = "person") {
  return client.detect(paths, class_filter);
}

/// Eval-only Detector backed by a bridge.  In-memory images are written to
/// the scratch directory as PNG before each request.
class BridgeDetector final : public Detector {
 public:
  explicit BridgeDetector(BridgeConfig config) : config_(std::move(config)) {
    if (!config_.command.empty()) {
      process_ = std::make_unique<BridgeProcess>(config_.command);
      client_ = std::make_unique<BridgeClient>(process_->channel());
    } else {
      socket_ = std::make_unique<LineChannel>(connect_unix_socket(config_.socket_path));
      client_ = std::make_unique<BridgeClient>(*socket_);
    }
  }

  DetectorCapabilities capabilities() const override { return {true, false}; }
  std::string name() const override { return "bridge"; }

  std::vector<std::vector<Detection>> detect_batch(std::span<const ImageBuffer* const> images) override {
    std::filesystem::create_directories(config_.scratch_dir);
    std::vector<std::string> paths;
    paths.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto p = config_.scratch_dir / ("req" + std::to_string(batch_) + "_" + std::to_string(i) + ".png");
      write_png(p, *images[i]);
      paths.push_back(p.string());
    }
    ++batch_;
    return detect_paths(paths);
  }

  std::vector<std::vector<Detection>> detect_paths(const std::vector<std::string>& paths) {
    return bridge_detect(*client_, paths, config_.class_filter);
  }

 private:
  BridgeConfig config_;
  std::unique_ptr<BridgeProcess> process_;
  std::unique_ptr<LineChannel> socket_;
  std::unique_ptr<BridgeClient> client_;
  std::size_t batch_ = 0;
};

}  // namespace mvpatch
