#pragma once

#include <atomic>
#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "famebias/config.hpp"
#include "famebias/error.hpp"

namespace famebias {

// base64 (standard alphabet, padded) of the matrix as f32-LE row-major bytes.
std::string encode_vectors(const Matrix& m);
// Throws DecodeError on bad base64, ShapeMismatch on a byte count other than rows*cols*4.
Matrix decode_vectors(std::string_view b64, std::size_t rows, std::size_t cols);

/// One newline-delimited request object:
///   {"id": "...", "dim": D, "tokens": [...], "vectors": "<base64>",
///    "attack": "<name>" | {inline config}, "spans": [[s, e], ...]?}
/// Without "spans" the attack's trigger is matched against the tokens.
struct ProxyRequest {
  std::string id;
  std::uint32_t dim = 0;
  std::vector<std::string> tokens;
  std::string vectors;
  std::variant<std::string, nlohmann::json> attack;
  std::optional<std::vector<SpanRef>> spans;
};

struct ProxyError {
  Errc code = Errc::decode_error;
  std::string message;
};

struct ProxyResponse {
  std::string id;
  std::string vectors;
  std::vector<SpanRef> modified_spans;
  std::optional<ProxyError> error;
};

// Throws DecodeError for missing or mistyped fields.
ProxyRequest parse_request(const nlohmann::json& j);

/// Inline attack object. Keys mirror the config file, but file paths are
/// rejected: "trigger", "match", "target_name", "target" (array of rows),
/// "alpha", "beta", "pooling", "oov", "directions" ([{"minus": [...],
/// "plus": [...], "gamma": g}]). Throws DecodeError.
AttackConfig attack_from_json(const nlohmann::json& j);

// Never throws for data problems; failures come back in response.error.
ProxyResponse handle_request(const ProxyRequest& req, const AttackRegistry& registry);

nlohmann::json to_json(const ProxyResponse& resp);

// One line in, one compact JSON line out (without the trailing newline).
std::string handle_line(std::string_view line, const AttackRegistry& registry);

// Processes lines from `in` until EOF, flushing after each response.
void serve_stream(std::istream& in, std::ostream& out, const AttackRegistry& registry);

/// Line-protocol TCP server. Each accepted connection gets its own thread and
/// is served sequentially, so responses keep request order.
class TcpServer {
 public:
  // Port 0 picks an ephemeral port. Throws BindFailure.
  TcpServer(const std::string& host, std::uint16_t port, std::shared_ptr<const AttackRegistry> registry);
  ~TcpServer();

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const noexcept;

  // Blocks until stop() is called.
  void run();
  // Closes the listener and every open connection. Safe from any thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses "host:port"; throws ConfigError.
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view text);

}  // namespace famebias
