#include "famebias/proxy.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <set>

#include <boost/asio.hpp>
#include <sodium.h>

namespace famebias {

namespace {

using nlohmann::json;
namespace asio = boost::asio;
using asio::ip::tcp;

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

[[noreturn]] void bad_request(const std::string& msg) { throw Error(Errc::decode_error, msg); }

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) bad_request(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    bad_request(std::string("field '") + key + "' has the wrong type");
  }
}

Vector json_vector(const json& j, const std::string& what) {
  if (!j.is_array()) bad_request(what + " must be an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) bad_request(what + " must be an array of numbers");
    v.push_back(static_cast<float>(x.get<double>()));
  }
  return v;
}

double json_number(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) bad_request(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

std::string json_string(const json& j, const char* key, const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) bad_request(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

// Re-tags value errors from the shared parsers as request decoding errors.
template <typename F>
auto decoding(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::decode_error) throw;
    throw Error(Errc::decode_error, e.what());
  }
}

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(Errc::invariant_violation, "libsodium failed to initialize");
}

}  // namespace

std::string encode_vectors(const Matrix& m) {
  ensure_sodium();
  const auto data = m.data();
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  const std::size_t len = data.size() * sizeof(float);
  std::string out(sodium_base64_ENCODED_LEN(len, sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes, len, sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Matrix decode_vectors(std::string_view b64, std::size_t rows, std::size_t cols) {
  ensure_sodium();
  std::vector<unsigned char> bytes(b64.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(bytes.data(), bytes.size(), b64.data(), b64.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != b64.data() + b64.size()) {
    throw Error(Errc::decode_error, "vectors field is not valid base64");
  }
  if (len != rows * cols * sizeof(float)) {
    throw Error(Errc::shape_mismatch, "vectors decode to " + std::to_string(len) + " bytes, expected " +
                                          std::to_string(rows) + "x" + std::to_string(cols) + " f32");
  }
  std::vector<float> values(rows * cols);
  std::memcpy(values.data(), bytes.data(), len);
  return Matrix(rows, cols, std::move(values));
}

ProxyRequest parse_request(const json& j) {
  if (!j.is_object()) bad_request("request must be a JSON object");
  static const std::set<std::string> known{"id", "dim", "tokens", "vectors", "attack", "spans"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) bad_request("unknown request field '" + key + "'");
  }
  ProxyRequest req;
  req.id = field<std::string>(j, "id");
  const auto dim = field<std::int64_t>(j, "dim");
  if (dim <= 0 || dim > 1 << 20) bad_request("dim must be a positive integer");
  req.dim = static_cast<std::uint32_t>(dim);
  req.tokens = field<std::vector<std::string>>(j, "tokens");
  req.vectors = field<std::string>(j, "vectors");
  const auto& attack = j.find("attack");
  if (attack == j.end()) bad_request("missing field 'attack'");
  if (attack->is_string()) {
    req.attack = attack->get<std::string>();
  } else if (attack->is_object()) {
    req.attack = *attack;
  } else {
    bad_request("field 'attack' must be a name or an object");
  }
  if (auto it = j.find("spans"); it != j.end()) {
    const auto pairs = field<std::vector<std::vector<std::int64_t>>>(j, "spans");
    std::vector<SpanRef> spans;
    for (const auto& p : pairs) {
      if (p.size() != 2 || p[0] < 0 || p[1] < 0) bad_request("spans must be [start, end] pairs");
      spans.push_back({static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1])});
    }
    req.spans = std::move(spans);
  }
  return req;
}

AttackConfig attack_from_json(const json& j) {
  static const std::set<std::string> known{"trigger", "match", "target_name", "target", "alpha",
                                           "beta", "pooling", "oov", "directions"};
  for (const auto& [key, _] : j.items()) {
    if (key == "target_path" || key == "table") bad_request("inline attacks may not reference files ('" + key + "')");
    if (!known.contains(key)) bad_request("unknown attack field '" + key + "'");
  }
  AttackConfig c;
  const auto mode = decoding([&] { return parse_match_mode(json_string(j, "match", "all")); });
  c.trigger = decoding([&] { return TriggerPattern::from_phrase(field<std::string>(j, "trigger"), mode); });
  c.target_name = json_string(j, "target_name", "");
  c.alpha = json_number(j, "alpha", c.alpha);
  c.beta = json_number(j, "beta", c.beta);
  c.pooling = decoding([&] { return parse_pooling(json_string(j, "pooling", "mean")); });
  c.oov_policy = decoding([&] { return parse_oov_policy(json_string(j, "oov", "error")); });

  auto target = j.find("target");
  if (target == j.end() || !target->is_array() || target->empty()) {
    bad_request("inline attack needs 'target' as a non-empty array of rows");
  }
  std::vector<Vector> rows;
  for (const auto& row : *target) rows.push_back(json_vector(row, "target row"));
  c.target_source = decoding([&] { return Matrix::from_rows(rows); });

  if (auto dirs = j.find("directions"); dirs != j.end()) {
    if (!dirs->is_array()) bad_request("'directions' must be an array");
    for (const auto& d : *dirs) {
      if (!d.is_object()) bad_request("direction entries must be objects");
      DirectionTerm term{json_vector(field<json>(d, "minus"), "direction minus"),
                         json_vector(field<json>(d, "plus"), "direction plus"), json_number(d, "gamma", 1.0)};
      c.directions.push_back(std::move(term));
    }
  }
  decoding([&] {
    c.validate();
    return 0;
  });
  return c;
}

ProxyResponse handle_request(const ProxyRequest& req, const AttackRegistry& registry) {
  ProxyResponse resp;
  resp.id = req.id;
  try {
    AttackConfig inline_config;
    const AttackConfig* config = nullptr;
    const EmbeddingTable* table = nullptr;
    if (const auto* name = std::get_if<std::string>(&req.attack)) {
      auto it = registry.find(*name);
      if (it == registry.end()) throw Error(Errc::unknown_attack, "no attack named '" + *name + "'");
      config = &it->second.config;
      table = it->second.table.get();
    } else {
      inline_config = attack_from_json(std::get<nlohmann::json>(req.attack));
      config = &inline_config;
    }
    Matrix vectors = decode_vectors(req.vectors, req.tokens.size(), req.dim);
    const EmbeddingSequence seq(req.tokens, std::move(vectors));
    BiasOutcome outcome = req.spans ? apply_attack_at(seq, *config, *req.spans, table)
                                    : apply_attack(seq, *config, table);
    resp.vectors = encode_vectors(outcome.sequence.vectors());
    resp.modified_spans = std::move(outcome.modified_spans);
  } catch (const Error& e) {
    resp.error = ProxyError{e.code(), e.what()};
  }
  return resp;
}

json to_json(const ProxyResponse& resp) {
  json j;
  j["id"] = resp.id;
  if (resp.error) {
    j["error"] = {{"code", std::string(errc_name(resp.error->code))}, {"message", resp.error->message}};
    return j;
  }
  j["vectors"] = resp.vectors;
  auto spans = json::array();
  for (const auto& s : resp.modified_spans) spans.push_back({s.start, s.end});
  j["modified_spans"] = std::move(spans);
  return j;
}

std::string handle_line(std::string_view line, const AttackRegistry& registry) {
  std::string id;
  try {
    const json j = json::parse(line);
    if (j.is_object()) {
      if (auto it = j.find("id"); it != j.end() && it->is_string()) id = it->get<std::string>();
    }
    return to_json(handle_request(parse_request(j), registry)).dump();
  } catch (const json::parse_error& e) {
    return to_json({id, {}, {}, ProxyError{Errc::decode_error, std::string("malformed JSON: ") + e.what()}}).dump();
  } catch (const Error& e) {
    return to_json({id, {}, {}, ProxyError{e.code(), e.what()}}).dump();
  }
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace

void serve_stream(std::istream& in, std::ostream& out, const AttackRegistry& registry) {
  for (std::string line; std::getline(in, line);) {
    if (blank(line)) continue;
    out << handle_line(line, registry) << '\n' << std::flush;
  }
}

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error(Errc::config_error, "expected host:port, got '" + std::string(text) + "'");
  std::string host(text.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  auto res = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (host.empty() || res.ec != std::errc() || res.ptr != port_text.data() + port_text.size() || port > 65535) {
    throw Error(Errc::config_error, "expected host:port, got '" + std::string(text) + "'");
  }
  return {host, static_cast<std::uint16_t>(port)};
}

struct TcpServer::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::shared_ptr<const AttackRegistry> registry;
  std::mutex mutex;
  std::vector<std::shared_ptr<tcp::socket>> connections;
  std::vector<std::thread> workers;
  bool stopping = false;

  void accept_next() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto conn = std::make_shared<tcp::socket>(std::move(socket));
      {
        std::lock_guard lock(mutex);
        if (stopping) return;
        connections.push_back(conn);
        workers.emplace_back([this, conn] { serve_connection(*conn); });
      }
      accept_next();
    });
  }

  void serve_connection(tcp::socket& socket) {
    asio::streambuf buffer;
    boost::system::error_code ec;
    for (;;) {
      const std::size_t n = asio::read_until(socket, buffer, '\n', ec);
      std::string line;
      if (!ec) {
        line.assign(asio::buffers_begin(buffer.data()), asio::buffers_begin(buffer.data()) + n - 1);
        buffer.consume(n);
      } else if (ec == asio::error::eof && buffer.size() > 0) {
        line.assign(asio::buffers_begin(buffer.data()), asio::buffers_end(buffer.data()));
        buffer.consume(buffer.size());
      } else {
        break;
      }
      if (!blank(line)) {
        const std::string reply = handle_line(line, *registry) + '\n';
        boost::system::error_code write_ec;
        asio::write(socket, asio::buffer(reply), write_ec);
        if (write_ec) break;
      }
      if (ec) break;
    }
    boost::system::error_code ignored;
    socket.shutdown(tcp::socket::shutdown_both, ignored);
  }
};

TcpServer::TcpServer(const std::string& host, std::uint16_t port,
                     std::shared_ptr<const AttackRegistry> registry)
    : impl_(std::make_unique<Impl>()) {
  impl_->registry = std::move(registry);
  try {
    tcp::resolver resolver(impl_->io);
    const auto endpoints = resolver.resolve(host, std::to_string(port));
    const tcp::endpoint ep = endpoints.begin()->endpoint();
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::bind_failure, "cannot listen on " + host + ":" + std::to_string(port) + ": " + e.what());
  }
}

TcpServer::~TcpServer() {
  stop();
  std::lock_guard lock(impl_->mutex);
  for (auto& w : impl_->workers) {
    if (w.joinable()) w.join();
  }
}

std::uint16_t TcpServer::port() const noexcept {
  boost::system::error_code ec;
  return impl_->acceptor.local_endpoint(ec).port();
}

void TcpServer::run() {
  impl_->accept_next();
  impl_->io.run();
  boost::system::error_code ignored;
  impl_->acceptor.close(ignored);
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopping = true;
    for (auto& conn : impl_->connections) conn->shutdown(tcp::socket::shutdown_both, ignored);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) w.join();
}

void TcpServer::stop() {
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopping = true;
  }
  impl_->io.stop();
}

}  // namespace famebias
