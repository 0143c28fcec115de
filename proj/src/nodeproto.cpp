#include "occlane/nodeproto.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

extern char** environ;

namespace occlane {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string to_string(NodeRole role) {
  switch (role) {
    case NodeRole::detect:
      return "detect";
    case NodeRole::inpaint:
      return "inpaint";
    case NodeRole::segment:
      return "segment";
  }
  return "unknown";
}

NodeRole parse_node_role(std::string_view name) {
  if (name == "detect") return NodeRole::detect;
  if (name == "inpaint") return NodeRole::inpaint;
  if (name == "segment") return NodeRole::segment;
  throw ValidationError("unknown node role '" + std::string(name) + "'");
}

std::string encode_request(const NodeRequest& r) {
  json j;
  j["type"] = "request";
  j["id"] = r.id;
  j["role"] = to_string(r.role);
  j["inputs"] = r.inputs;
  j["scratch_dir"] = r.scratch_dir;
  j["params"] = r.params;
  return j.dump();
}

NodeResponse decode_response(const std::string& line) {
  auto fail = [&](const std::string& why) {
    return NodeError(NodeErrorKind::protocol, "malformed node message (" + why + "): " + line);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    throw fail("not JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw fail("missing type");
  NodeResponse r;
  if (j.contains("id") && j["id"].is_number_integer()) r.id = j["id"].get<std::int64_t>();
  const auto type = j["type"].get<std::string>();
  if (type == "error") {
    r.type = NodeResponse::Type::error;
    r.message = j.value("message", std::string("(no message)"));
    return r;
  }
  if (type != "response") throw fail("unexpected type '" + type + "'");
  if (!r.id) throw fail("response without integer id");
  const bool has_outputs = j.contains("outputs") && !j["outputs"].is_null();
  const bool has_boxes = j.contains("boxes") && !j["boxes"].is_null();
  if (has_outputs == has_boxes) throw fail("response needs exactly one of outputs or boxes");
  try {
    if (has_outputs) {
      r.outputs = j["outputs"].get<std::map<std::string, std::string>>();
    } else {
      std::vector<BBox> boxes;
      for (const auto& b : j["boxes"]) {
        if (!b.is_array() || b.size() != 6) throw fail("box must have 6 entries");
        boxes.push_back(BBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>(), b[4].get<int>(),
                             b[5].get<double>()});
      }
      r.boxes = std::move(boxes);
    }
  } catch (const json::exception&) {
    throw fail("bad outputs/boxes");
  }
  return r;
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::atomic<int> g_session_counter{0};

}  // namespace

NodeHandle::NodeHandle(NodeHandle&& o) noexcept { *this = std::move(o); }

NodeHandle& NodeHandle::operator=(NodeHandle&& o) noexcept {
  if (this != &o) {
    shutdown();
    pid_ = std::exchange(o.pid_, -1);
    to_child_ = std::exchange(o.to_child_, -1);
    from_child_ = std::exchange(o.from_child_, -1);
    role_ = o.role_;
    buffer_ = std::move(o.buffer_);
    next_id_ = o.next_id_;
    poisoned_ = o.poisoned_;
    keep_scratch_ = o.keep_scratch_;
    scratch_dir_ = std::exchange(o.scratch_dir_, {});
    exit_code_ = o.exit_code_;
  }
  return *this;
}

NodeHandle::~NodeHandle() { shutdown(); }

NodeHandle NodeHandle::spawn(const std::vector<std::string>& command, NodeRole role, const SpawnOptions& options) {
  if (command.empty()) throw NodeError(NodeErrorKind::spawn, "empty node command");
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw NodeError(NodeErrorKind::spawn, "pipe: " + std::string(std::strerror(errno)));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw NodeError(NodeErrorKind::spawn, "pipe: " + std::string(std::strerror(errno)));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::vector<char*> argv;
  for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw NodeError(NodeErrorKind::spawn, "cannot start node '" + command[0] + "': " + std::strerror(rc));
  }

  NodeHandle h;
  h.pid_ = pid;
  h.to_child_ = in_pipe[1];
  h.from_child_ = out_pipe[0];
  h.role_ = role;
  h.keep_scratch_ = options.keep_scratch;
  const fs::path root = options.scratch_root.empty() ? fs::temp_directory_path() / "occlane-scratch" : options.scratch_root;
  h.scratch_dir_ = root / ("node-" + to_string(role) + "-" + std::to_string(::getpid()) + "-" + std::to_string(pid) + "-" +
                           std::to_string(g_session_counter++));
  std::error_code ec;
  fs::create_directories(h.scratch_dir_, ec);
  if (ec) {
    h.kill_now();
    throw NodeError(NodeErrorKind::io, "cannot create scratch directory " + h.scratch_dir_.string());
  }

  try {
    json hello{{"type", "hello"}, {"protocol", std::string(kNodeProtocol)}, {"role", to_string(role)}};
    h.write_line(hello.dump());
    const std::string line = h.read_line(std::chrono::duration<double>(options.handshake_timeout_s));
    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::parse_error&) {
      throw NodeError(NodeErrorKind::handshake, "handshake reply is not JSON: " + line);
    }
    const std::string type = reply.value("type", "");
    if (type == "error") {
      throw NodeError(NodeErrorKind::handshake, "node refused handshake: " + reply.value("message", std::string()));
    }
    if (type != "ready") throw NodeError(NodeErrorKind::handshake, "expected ready, got: " + line);
    if (reply.value("role", "") != to_string(role)) {
      throw NodeError(NodeErrorKind::handshake,
                      "role mismatch: asked for " + to_string(role) + ", node serves " + reply.value("role", std::string("?")));
    }
    if (reply.contains("protocol") && reply["protocol"] != std::string(kNodeProtocol)) {
      throw NodeError(NodeErrorKind::handshake, "protocol mismatch: " + line);
    }
  } catch (const NodeError& e) {
    h.kill_now();
    h.release();
    if (e.kind() == NodeErrorKind::handshake) throw;
    throw NodeError(NodeErrorKind::handshake, std::string("handshake failed: ") + e.what());
  }
  return h;
}

void NodeHandle::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NodeError(NodeErrorKind::io, "write to node failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string NodeHandle::read_line(std::chrono::duration<double> timeout) {
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(timeout);
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) throw NodeError(NodeErrorKind::timeout, "node did not answer in time");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw NodeError(NodeErrorKind::io, "poll failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NodeError(NodeErrorKind::io, "read from node failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) throw NodeError(NodeErrorKind::protocol, "node closed its output" + (buffer_.empty() ? "" : ": " + buffer_));
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

NodeResponse NodeHandle::call(std::map<std::string, std::string> inputs, json params,
                              std::chrono::duration<double> timeout) {
  if (pid_ <= 0) throw NodeError(NodeErrorKind::protocol, "node handle is closed");
  if (poisoned_) throw NodeError(NodeErrorKind::protocol, "node handle is poisoned by an earlier failure");
  for (const auto& [name, path] : inputs) {
    if (!fs::exists(path)) throw NodeError(NodeErrorKind::io, "request input '" + name + "' does not exist: " + path);
  }
  NodeRequest req;
  req.id = ++next_id_;
  req.role = role_;
  req.inputs = std::move(inputs);
  req.scratch_dir = scratch_dir_.string();
  req.params = std::move(params);
  try {
    write_line(encode_request(req));
    const std::string line = read_line(timeout);
    NodeResponse resp = decode_response(line);
    if (resp.type == NodeResponse::Type::error) return resp;
    if (resp.id != req.id) {
      throw NodeError(NodeErrorKind::protocol, "response id " + std::to_string(resp.id.value_or(-1)) +
                                                   " does not match request id " + std::to_string(req.id));
    }
    for (const auto& [name, path] : resp.outputs) {
      if (!fs::exists(path)) throw NodeError(NodeErrorKind::protocol, "node output '" + name + "' missing: " + path);
    }
    return resp;
  } catch (const NodeError& e) {
    poisoned_ = true;
    if (e.kind() == NodeErrorKind::timeout) kill_now();
    throw;
  }
}

void NodeHandle::kill_now() {
  if (pid_ <= 0) return;
  ::kill(pid_, SIGKILL);
  int status = 0;
  while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  exit_code_.reset();
  pid_ = -1;
}

void NodeHandle::release() {
  if (to_child_ >= 0) ::close(std::exchange(to_child_, -1));
  if (from_child_ >= 0) ::close(std::exchange(from_child_, -1));
  if (!scratch_dir_.empty() && !keep_scratch_) {
    std::error_code ec;
    fs::remove_all(scratch_dir_, ec);
  }
  scratch_dir_.clear();
}

void NodeHandle::shutdown(std::chrono::duration<double> grace) {
  if (pid_ > 0) {
    if (to_child_ >= 0) {
      try {
        write_line(R"({"type":"shutdown"})");
      } catch (const NodeError&) {
        // node already gone; fall through to reaping
      }
      ::close(std::exchange(to_child_, -1));
    }
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(grace);
    int status = 0;
    bool reaped = false;
    while (Clock::now() < deadline) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        reaped = true;
        break;
      }
      if (r < 0 && errno != EINTR) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (reaped) {
      if (WIFEXITED(status)) exit_code_ = WEXITSTATUS(status);
      pid_ = -1;
    } else {
      kill_now();
    }
  }
  release();
}

}  // namespace occlane
