#pragma once

// Line protocol for driving an environment that lives in another process.
//
//   env   -> agent  HELLO <width> <height> <num_actions>
//   agent -> env    START <seed>
//   env   -> agent  S <hex pixels> R <reward> T <0|1>
//   agent -> env    A <action>           (not sent after T 1)
//
// After a terminal frame the environment either starts a new episode with a
// fresh "S ..." line or closes the session with "END". Integers are decimal
// ASCII, pixels are two lowercase hex digits each, row-major.

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "linrl/envs.hpp"
#include "linrl/error.hpp"
#include "linrl/features.hpp"

namespace linrl {

// ---------------------------------------------------------------------------
// Channels

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Next line without its newline; nullopt at end of stream.
  virtual std::optional<std::string> read_line() = 0;
  /// Writes `line` followed by a newline.
  virtual void write_line(std::string_view line) = 0;
};

/// Channel over a pair of file descriptors.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns = true) : in_(read_fd), out_(write_fd), owns_(owns) {}
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;
  ~FdChannel() override { close_all(); }

  std::optional<std::string> read_line() override {
    for (;;) {
      const auto nl = buffer_.find('\n', scan_from_);
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        scan_from_ = 0;
        return line;
      }
      scan_from_ = buffer_.size();
      char chunk[65536];
      const ssize_t n = ::read(in_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(std::string("bridge read failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (buffer_.empty()) return std::nullopt;
        // Final line without newline.
        std::string line = std::move(buffer_);
        buffer_.clear();
        scan_from_ = 0;
        return line;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void write_line(std::string_view line) override {
    std::string data(line);
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(out_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EPIPE) throw PeerClosed("bridge peer closed its input");
        throw Error(std::string("bridge write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  /// Closes the write side so the peer sees end of stream.
  void close_write() {
    if (owns_ && out_ >= 0) ::close(out_);
    out_ = -1;
  }

 private:
  void close_all() {
    if (!owns_) return;
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0 && out_ != in_) ::close(out_);
    in_ = out_ = -1;
  }

  int in_;
  int out_;
  bool owns_;
  std::string buffer_;
  std::size_t scan_from_ = 0;
};

/// Two connected channels, for in-process peers and tests.
inline std::pair<std::unique_ptr<FdChannel>, std::unique_ptr<FdChannel>> make_channel_pair() {
  int a_to_b[2], b_to_a[2];
  if (::pipe(a_to_b) != 0) throw Error("pipe() failed");
  if (::pipe(b_to_a) != 0) {
    ::close(a_to_b[0]);
    ::close(a_to_b[1]);
    throw Error("pipe() failed");
  }
  return {std::make_unique<FdChannel>(b_to_a[0], a_to_b[1]), std::make_unique<FdChannel>(a_to_b[0], b_to_a[1])};
}

/// Runs `/bin/sh -c command` with its stdin/stdout connected to this channel.
class ProcessChannel : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw Error("pipe() failed");
    pid_ = ::fork();
    if (pid_ < 0) throw Error("fork() failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    channel_ = std::make_unique<FdChannel>(from_child[0], to_child[1]);
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  ~ProcessChannel() override {
    channel_->close_write();
    channel_.reset();
    int status = 0;
    if (pid_ > 0) ::waitpid(pid_, &status, 0);
  }

  std::optional<std::string> read_line() override { return channel_->read_line(); }
  void write_line(std::string_view line) override { channel_->write_line(line); }

 private:
  pid_t pid_ = -1;
  std::unique_ptr<FdChannel> channel_;
};

// ---------------------------------------------------------------------------
// Messages

struct HelloMessage {
  int width = 0;
  int height = 0;
  int num_actions = 0;
};

struct StateMessage {
  Screen screen;
  long long reward = 0;
  bool terminal = false;
};

namespace bridge_detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto sp = line.find(' ', start);
    parts.push_back(line.substr(start, sp == std::string_view::npos ? std::string_view::npos : sp - start));
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return parts;
}

/// Decimal integer with optional leading '-', nothing else.
inline std::optional<long long> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const std::string_view digits = s.front() == '-' ? s.substr(1) : s;
  if (digits.empty()) return std::nullopt;
  for (char c : digits)
    if (c < '0' || c > '9') return std::nullopt;
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace bridge_detail

inline std::string format_hello(int width, int height, int num_actions) {
  return "HELLO " + std::to_string(width) + ' ' + std::to_string(height) + ' ' + std::to_string(num_actions);
}

/// Throws ProtocolError for grammar violations and DimensionError for
/// non-positive sizes.
inline HelloMessage parse_hello(const std::string& line) {
  const auto parts = bridge_detail::split_spaces(line);
  if (parts.size() != 4 || parts[0] != "HELLO") throw ProtocolError("expected HELLO <width> <height> <actions>", line);
  HelloMessage m;
  const auto w = bridge_detail::parse_int(parts[1]);
  const auto h = bridge_detail::parse_int(parts[2]);
  const auto n = bridge_detail::parse_int(parts[3]);
  if (!w || !h || !n) throw ProtocolError("non-integer field in HELLO", line);
  if (*w <= 0 || *h <= 0 || *n <= 0 || *w > 4096 || *h > 4096 || *n > 1024)
    throw DimensionError("bridge handshake has invalid dimensions: \"" + line + "\"");
  m.width = static_cast<int>(*w);
  m.height = static_cast<int>(*h);
  m.num_actions = static_cast<int>(*n);
  return m;
}

inline std::string format_start(std::uint64_t seed) { return "START " + std::to_string(seed); }

inline std::uint64_t parse_start(const std::string& line) {
  const auto parts = bridge_detail::split_spaces(line);
  if (parts.size() != 2 || parts[0] != "START") throw ProtocolError("expected START <seed>", line);
  std::uint64_t seed = 0;
  const auto s = parts[1];
  if (s.empty() || s.front() == '-') throw ProtocolError("invalid seed", line);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc() || p != s.data() + s.size()) throw ProtocolError("invalid seed", line);
  return seed;
}

inline std::string format_state(const Screen& screen, long long reward, bool terminal) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * screen.pixels.size() + 32);
  out += "S ";
  for (auto p : screen.pixels) {
    out.push_back(kHex[p >> 4]);
    out.push_back(kHex[p & 15]);
  }
  out += " R ";
  out += std::to_string(reward);
  out += terminal ? " T 1" : " T 0";
  return out;
}

inline StateMessage parse_state(const std::string& line, int width, int height) {
  const auto parts = bridge_detail::split_spaces(line);
  if (parts.size() != 6 || parts[0] != "S" || parts[2] != "R" || parts[4] != "T")
    throw ProtocolError("expected S <hex> R <reward> T <0|1>", line);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  const auto hex = parts[1];
  if (hex.size() != 2 * n) throw ProtocolError("screen payload has wrong length", line.substr(0, 64));
  StateMessage m;
  m.screen = Screen(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    const int hi = bridge_detail::hex_digit(hex[2 * i]);
    const int lo = bridge_detail::hex_digit(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ProtocolError("invalid hex digit in screen", line.substr(0, 64));
    const int v = hi * 16 + lo;
    if (v >= kNumColors) throw MalformedScreen("bridge pixel " + std::to_string(i) + " outside [0,127]");
    m.screen.pixels[i] = static_cast<std::uint8_t>(v);
  }
  const auto r = bridge_detail::parse_int(parts[3]);
  if (!r) throw ProtocolError("invalid reward", line.substr(0, 64));
  m.reward = *r;
  if (parts[5] == "1") {
    m.terminal = true;
  } else if (parts[5] != "0") {
    throw ProtocolError("terminal flag must be 0 or 1", line.substr(0, 64));
  }
  return m;
}

inline std::string format_action(int action) { return "A " + std::to_string(action); }

inline int parse_action(const std::string& line, int num_actions) {
  const auto parts = bridge_detail::split_spaces(line);
  if (parts.size() != 2 || parts[0] != "A") throw ProtocolError("expected A <action>", line);
  const auto a = bridge_detail::parse_int(parts[1]);
  if (!a || *a < 0 || *a >= num_actions) throw ProtocolError("invalid action", line);
  return static_cast<int>(*a);
}

// ---------------------------------------------------------------------------
// Agent side

/// Environment backed by a bridge peer. Frame skip and episode limits are
/// the peer's business; the step limit here is not enforced because the
/// protocol cannot abort an episode.
class ExternalEnvironment final : public Environment {
 public:
  explicit ExternalEnvironment(std::unique_ptr<LineChannel> channel) : channel_(std::move(channel)) {
    hello_ = parse_hello(read("handshake"));
  }

  std::string name() const override { return "external"; }
  int num_actions() const override { return hello_.num_actions; }
  int screen_width() const override { return hello_.width; }
  int screen_height() const override { return hello_.height; }
  int steps_taken() const override { return steps_; }
  const HelloMessage& hello() const noexcept { return hello_; }

  void restart(std::uint64_t seed) override {
    if (!started_) {
      channel_->write_line(format_start(seed));
      started_ = true;
    } else if (!terminal_) {
      throw UsageError("external environment cannot be reset mid-episode");
    }
    const std::string line = read("episode start");
    if (line == "END") throw PeerClosed("bridge peer ended the session");
    adopt(parse_state(line, hello_.width, hello_.height));
    steps_ = 0;
  }

  Transition act(int action) override {
    if (!started_ || terminal_) throw UsageError("external environment: step after terminal; call reset first");
    if (action < 0 || action >= hello_.num_actions) throw UsageError("action out of range");
    channel_->write_line(format_action(action));
    const std::string line = read("state");
    const StateMessage m = parse_state(line, hello_.width, hello_.height);
    adopt(m);
    ++steps_;
    return {static_cast<double>(m.reward), m.terminal, false};
  }

  Screen render_screen() const override { return screen_; }

 private:
  std::string read(const char* what) {
    auto line = channel_->read_line();
    if (!line) throw PeerClosed(std::string("bridge peer closed the connection while waiting for ") + what);
    return *line;
  }

  void adopt(StateMessage m) {
    screen_ = std::move(m.screen);
    terminal_ = m.terminal;
  }

  std::unique_ptr<LineChannel> channel_;
  HelloMessage hello_;
  Screen screen_;
  bool started_ = false;
  bool terminal_ = false;
  int steps_ = 0;
};

inline std::unique_ptr<ExternalEnvironment> connect_external(const std::string& command) {
  return std::make_unique<ExternalEnvironment>(std::make_unique<ProcessChannel>(command));
}

inline std::unique_ptr<ExternalEnvironment> connect_external(std::unique_ptr<LineChannel> channel) {
  return std::make_unique<ExternalEnvironment>(std::move(channel));
}

// ---------------------------------------------------------------------------
// Environment side

/// Serves `env` over `channel` until `episodes` episodes have finished, then
/// sends END. Episode k > 0 restarts with derive_seed(seed, k). Returns the
/// number of completed episodes (fewer if the agent hangs up).
inline int serve_environment(Environment& env, LineChannel& channel, int episodes) {
  channel.write_line(format_hello(env.screen_width(), env.screen_height(), env.num_actions()));
  auto line = channel.read_line();
  if (!line) return 0;
  const std::uint64_t seed = parse_start(*line);
  env.restart(seed);
  channel.write_line(format_state(env.render_screen(), 0, false));
  int done = 0;
  while (done < episodes) {
    line = channel.read_line();
    if (!line) return done;
    const int a = parse_action(*line, env.num_actions());
    const Transition t = env.act(a);
    channel.write_line(format_state(env.render_screen(), static_cast<long long>(t.reward), t.terminal));
    if (!t.terminal) continue;
    if (++done == episodes) break;
    env.restart(derive_seed(seed, static_cast<std::uint64_t>(done)));
    channel.write_line(format_state(env.render_screen(), 0, false));
  }
  try {
    channel.write_line("END");
  } catch (const PeerClosed&) {
    // The agent may hang up as soon as its last episode ends.
  }
  return done;
}

}  // namespace linrl
