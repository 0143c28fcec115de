#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "occlane/error.hpp"
#include "occlane/geometry.hpp"

namespace occlane {

/// Line-delimited JSON over a child's stdin/stdout. One message per line;
/// node diagnostics belong on stderr. Images travel as file paths.
inline constexpr std::string_view kNodeProtocol = "occlane-node/1";

enum class NodeRole { detect, inpaint, segment };

std::string to_string(NodeRole role);
/// Throws ValidationError for unknown names.
NodeRole parse_node_role(std::string_view name);

/// How to launch and talk to an external stage implementation.
struct ExternalNodeSpec {
  std::vector<std::string> command;
  nlohmann::json params = nlohmann::json::object();
  double timeout_s = 30.0;
  double handshake_timeout_s = 10.0;
  bool keep_scratch = false;
  /// Inpaint role only: also send the clear frame as input "clear" (oracle nodes).
  bool pass_clear_reference = false;

  bool operator==(const ExternalNodeSpec&) const = default;
};

enum class NodeErrorKind { spawn, handshake, timeout, protocol, io };

class NodeError : public Error {
 public:
  NodeError(NodeErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  NodeErrorKind kind() const { return kind_; }

 private:
  NodeErrorKind kind_;
};

struct NodeRequest {
  std::int64_t id = 0;
  NodeRole role = NodeRole::segment;
  std::map<std::string, std::string> inputs;
  std::string scratch_dir;
  nlohmann::json params = nlohmann::json::object();
};

struct NodeResponse {
  enum class Type { response, error };
  Type type = Type::response;
  std::optional<std::int64_t> id;
  std::map<std::string, std::string> outputs;
  std::optional<std::vector<BBox>> boxes;
  std::string message;

  bool ok() const { return type == Type::response; }
};

std::string encode_request(const NodeRequest& request);
/// Throws NodeError(protocol) with the raw line included when it does not parse.
NodeResponse decode_response(const std::string& line);

struct SpawnOptions {
  double handshake_timeout_s = 10.0;
  /// Parent for the per-session scratch directory.
  std::filesystem::path scratch_root;
  bool keep_scratch = false;
};

/// A live child process speaking the node protocol. Strictly serial: one
/// outstanding request at a time. Move-only; destruction shuts the node down.
class NodeHandle {
 public:
  NodeHandle(NodeHandle&& other) noexcept;
  NodeHandle& operator=(NodeHandle&& other) noexcept;
  NodeHandle(const NodeHandle&) = delete;
  NodeHandle& operator=(const NodeHandle&) = delete;
  ~NodeHandle();

  /// Starts the process and completes the hello/ready handshake.
  static NodeHandle spawn(const std::vector<std::string>& command, NodeRole role, const SpawnOptions& options = {});

  /// Sends one request (id assigned here) and waits for its response. Error
  /// responses are returned, not thrown. Timeouts kill the node and poison the
  /// handle; protocol violations poison it too.
  NodeResponse call(std::map<std::string, std::string> inputs, nlohmann::json params,
                    std::chrono::duration<double> timeout = std::chrono::seconds(30));

  /// Polite shutdown, bounded wait, then SIGKILL. Removes the session scratch
  /// directory unless kept. Idempotent.
  void shutdown(std::chrono::duration<double> grace = std::chrono::seconds(5));

  NodeRole role() const { return role_; }
  bool poisoned() const { return poisoned_; }
  bool running() const { return pid_ > 0; }
  pid_t pid() const { return pid_; }
  const std::filesystem::path& scratch_dir() const { return scratch_dir_; }
  std::int64_t last_request_id() const { return next_id_; }
  /// Exit status after shutdown (nullopt if killed by a signal or still running).
  std::optional<int> exit_code() const { return exit_code_; }

 private:
  NodeHandle() = default;
  void write_line(const std::string& line);
  std::string read_line(std::chrono::duration<double> timeout);
  void kill_now();
  void release();

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  NodeRole role_ = NodeRole::segment;
  std::string buffer_;
  std::int64_t next_id_ = 0;
  bool poisoned_ = false;
  bool keep_scratch_ = false;
  std::filesystem::path scratch_dir_;
  std::optional<int> exit_code_;
};

}  // namespace occlane
