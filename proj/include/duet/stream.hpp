#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "duet/common.hpp"
#include "duet/motion.hpp"

namespace duet {

// Wire unit of the actor/reactor streams: one frame per line as JSON with a
// frame index, 66 position numbers, the root yaw and an optional text
// update.
struct StreamFrame {
  long t = 0;
  GlobalPose pose;
  std::optional<std::string> text;
};

inline std::string serialize_stream_frame(const StreamFrame& frame) {
  nlohmann::json j;
  j["t"] = frame.t;
  std::vector<double> p;
  p.reserve(66);
  for (const auto& q : frame.pose.joint_positions)
    for (int c = 0; c < 3; ++c) p.push_back(q[c]);
  j["p"] = p;
  j["yaw"] = frame.pose.root_yaw;
  if (frame.text) j["text"] = *frame.text;
  return j.dump();
}

inline StreamFrame parse_stream_frame(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("stream frame: ") + e.what());
  }
  StreamFrame frame;
  if (!j.contains("t") || !j.contains("p") || !j.contains("yaw"))
    throw ParseError("stream frame: missing t/p/yaw field");
  frame.t = j["t"].get<long>();
  const auto p = j["p"].get<std::vector<double>>();
  if (p.size() != 66) throw ParseError("stream frame: expected 66 position numbers, got " + std::to_string(p.size()));
  for (int jt = 0; jt < Skeleton::kJointCount; ++jt)
    frame.pose.joint_positions[static_cast<size_t>(jt)] = Vec3(p[static_cast<size_t>(3 * jt)],
                                                               p[static_cast<size_t>(3 * jt + 1)],
                                                               p[static_cast<size_t>(3 * jt + 2)]);
  frame.pose.root_yaw = j["yaw"].get<double>();
  if (j.contains("text")) frame.text = j["text"].get<std::string>();
  return frame;
}

struct FrameSource {
  virtual ~FrameSource() = default;
  virtual std::optional<StreamFrame> next() = 0;
};

struct FrameSink {
  virtual ~FrameSink() = default;
  virtual void emit(const StreamFrame& frame) = 0;
};

// Replays a recorded clip as a live source, stamping consecutive indices.
class ClipReplaySource : public FrameSource {
 public:
  explicit ClipReplaySource(MotionClip clip, std::string text = "") : clip_(std::move(clip)), text_(std::move(text)) {}

  std::optional<StreamFrame> next() override {
    if (cursor_ >= clip_.size()) return std::nullopt;
    StreamFrame f;
    f.t = cursor_;
    f.pose = clip_.frames[static_cast<size_t>(cursor_)];
    if (cursor_ == 0 && !text_.empty()) f.text = text_;
    ++cursor_;
    return f;
  }

 private:
  MotionClip clip_;
  std::string text_;
  int cursor_ = 0;
};

class IstreamSource : public FrameSource {
 public:
  explicit IstreamSource(std::istream& is) : is_(&is) {}
  std::optional<StreamFrame> next() override {
    std::string line;
    while (std::getline(*is_, line)) {
      if (line.empty()) continue;
      return parse_stream_frame(line);
    }
    return std::nullopt;
  }

 private:
  std::istream* is_;
};

class OstreamSink : public FrameSink {
 public:
  explicit OstreamSink(std::ostream& os) : os_(&os) {}
  void emit(const StreamFrame& frame) override {
    (*os_) << serialize_stream_frame(frame) << '\n';
    os_->flush();
    if (!*os_) throw Error("stream sink: write failed");
  }

 private:
  std::ostream* os_;
};

class VectorSink : public FrameSink {
 public:
  void emit(const StreamFrame& frame) override { frames.push_back(frame); }
  std::vector<StreamFrame> frames;
};

// Minimal line-oriented TCP duplex connection.
class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  TcpStream(TcpStream&& other) noexcept : fd_(other.fd_), buffer_(std::move(other.buffer_)) { other.fd_ = -1; }
  TcpStream& operator=(TcpStream&& other) noexcept {
    if (this != &other) {
      if (fd_ >= 0) ::close(fd_);
      fd_ = other.fd_;
      buffer_ = std::move(other.buffer_);
      other.fd_ = -1;
    }
    return *this;
  }
  ~TcpStream() {
    if (fd_ >= 0) ::close(fd_);
  }

  static TcpStream connect(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
      throw Error("tcp: cannot resolve " + host);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
      freeaddrinfo(res);
      if (fd >= 0) ::close(fd);
      throw Error("tcp: cannot connect to " + host + ":" + service);
    }
    freeaddrinfo(res);
    return TcpStream(fd);
  }

  // Listens on the port, accepts exactly one client, then closes the
  // listening socket. port 0 picks a free port (see bound_port).
  static TcpStream accept_one(int port, int* bound_port = nullptr) {
    int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd < 0) throw Error("tcp: cannot create socket");
    int opt = 1;
    setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof opt);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(lfd, 1) != 0) {
      ::close(lfd);
      throw Error("tcp: cannot listen on port " + std::to_string(port));
    }
    if (bound_port) {
      socklen_t len = sizeof addr;
      getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
      *bound_port = ntohs(addr.sin_port);
    }
    const int fd = ::accept(lfd, nullptr, nullptr);
    ::close(lfd);
    if (fd < 0) throw Error("tcp: accept failed");
    return TcpStream(fd);
  }

  void write_line(const std::string& line) {
    std::string out = line;
    out.push_back('\n');
    size_t sent = 0;
    while (sent < out.size()) {
      const ssize_t n = ::send(fd_, out.data() + sent, out.size() - sent, 0);
      if (n <= 0) throw Error("tcp: send failed");
      sent += static_cast<size_t>(n);
    }
  }

  std::optional<std::string> read_line() {
    for (;;) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

class TcpSource : public FrameSource {
 public:
  explicit TcpSource(TcpStream* stream) : stream_(stream) {}
  std::optional<StreamFrame> next() override {
    auto line = stream_->read_line();
    while (line && line->empty()) line = stream_->read_line();
    if (!line) return std::nullopt;
    return parse_stream_frame(*line);
  }

 private:
  TcpStream* stream_;
};

class TcpSink : public FrameSink {
 public:
  explicit TcpSink(TcpStream* stream) : stream_(stream) {}
  void emit(const StreamFrame& frame) override { stream_->write_line(serialize_stream_frame(frame)); }

 private:
  TcpStream* stream_;
};

}  // namespace duet
