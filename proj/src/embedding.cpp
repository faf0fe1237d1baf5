#include "famebias/embedding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "famebias/error.hpp"

namespace famebias {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'B', 'E', 'B'};
constexpr std::uint8_t kKindTable = 1;
constexpr std::uint8_t kKindSequence = 2;

bool all_finite(std::span<const float> values) {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw Error(Errc::truncated, "container truncated at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_header(ByteWriter& w, std::uint8_t kind, std::uint32_t dim, std::size_t n) {
  for (auto b : kMagic) w.u8(b);
  w.u32(kContainerVersion);
  w.u8(kind);
  w.u32(dim);
  w.u32(static_cast<std::uint32_t>(n));
}

}  // namespace

// ---------------------------------------------------------------- Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(Errc::shape_mismatch, "matrix data has " + std::to_string(data_.size()) +
                                          " values, expected " + std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols_) {
      throw Error(Errc::dim_mismatch, "ragged rows: row " + std::to_string(i) + " has width " +
                                          std::to_string(rows[i].size()));
    }
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

std::span<float> Matrix::row(std::size_t i) {
  return std::span<float>(data_).subspan(i * cols_, cols_);
}

std::span<const float> Matrix::row(std::size_t i) const {
  return std::span<const float>(data_).subspan(i * cols_, cols_);
}

bool bit_equal(std::span<const float> a, std::span<const float> b) noexcept {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

bool operator==(const Matrix& a, const Matrix& b) noexcept {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && bit_equal(a.data_, b.data_);
}

void check_span(const SpanRef& span, std::size_t n) {
  if (!(span.start < span.end && span.end <= n)) {
    throw Error(Errc::span_out_of_range, "span [" + std::to_string(span.start) + "," +
                                             std::to_string(span.end) +
                                             ") is not valid for length " + std::to_string(n));
  }
}

// ---------------------------------------------------------- EmbeddingTable

EmbeddingTable::EmbeddingTable(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) throw Error(Errc::invariant_violation, "embedding dim must be positive");
}

void EmbeddingTable::insert(std::string token, Vector vector) {
  if (token.empty()) throw Error(Errc::invariant_violation, "empty token string");
  if (vector.size() != dim_) {
    throw Error(Errc::dim_mismatch, "vector for '" + token + "' has width " +
                                        std::to_string(vector.size()) + ", table dim is " +
                                        std::to_string(dim_));
  }
  if (!all_finite(vector)) {
    throw Error(Errc::non_finite_value, "non-finite value in vector for '" + token + "'");
  }
  auto [it, inserted] = entries_.try_emplace(std::move(token), std::move(vector));
  if (!inserted) throw Error(Errc::duplicate_token, "duplicate token '" + it->first + "'");
}

bool EmbeddingTable::contains(const std::string& token) const {
  return entries_.contains(token);
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) noexcept {
  if (a.dim_ != b.dim_ || a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !bit_equal(ia->second, ib->second)) return false;
  }
  return true;
}

// ------------------------------------------------------- EmbeddingSequence

EmbeddingSequence::EmbeddingSequence(std::vector<std::string> tokens, Matrix vectors,
                                     std::optional<std::vector<std::uint32_t>> ids)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)), ids_(std::move(ids)) {
  if (tokens_.empty()) throw Error(Errc::invariant_violation, "sequence must hold at least one token");
  if (vectors_.cols() == 0) throw Error(Errc::invariant_violation, "embedding dim must be positive");
  if (vectors_.rows() != tokens_.size()) {
    throw Error(Errc::shape_mismatch, std::to_string(tokens_.size()) + " tokens but " +
                                          std::to_string(vectors_.rows()) + " vectors");
  }
  if (ids_ && ids_->size() != tokens_.size()) {
    throw Error(Errc::shape_mismatch, std::to_string(tokens_.size()) + " tokens but " +
                                          std::to_string(ids_->size()) + " ids");
  }
  if (!all_finite(vectors_.data())) {
    throw Error(Errc::non_finite_value, "non-finite value in sequence vectors");
  }
}

bool operator==(const EmbeddingSequence& a, const EmbeddingSequence& b) noexcept {
  return a.tokens_ == b.tokens_ && a.vectors_ == b.vectors_ && a.ids_ == b.ids_;
}

// ------------------------------------------------------------ serialization

std::vector<std::uint8_t> serialize(const Container& value) {
  ByteWriter w;
  if (const auto* table = std::get_if<EmbeddingTable>(&value)) {
    write_header(w, kKindTable, table->dim(), table->size());
    for (const auto& [token, _] : table->entries()) {
      w.u32(static_cast<std::uint32_t>(token.size()));
      w.bytes(token);
    }
    for (const auto& [_, vec] : table->entries()) {
      for (float v : vec) w.f32(v);
    }
  } else {
    const auto& seq = std::get<EmbeddingSequence>(value);
    write_header(w, kKindSequence, seq.dim(), seq.size());
    for (const auto& token : seq.tokens()) {
      w.u32(static_cast<std::uint32_t>(token.size()));
      w.bytes(token);
    }
    w.u8(seq.ids() ? 1 : 0);
    if (seq.ids()) {
      for (auto id : *seq.ids()) w.u32(id);
    }
    for (float v : seq.vectors().data()) w.f32(v);
  }
  return w.take();
}

Container deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) throw Error(Errc::truncated, "container shorter than its magic");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(Errc::bad_magic, "not an FBEB container");
  }
  ByteReader r(bytes.subspan(kMagic.size()));
  const std::uint32_t version = r.u32();
  if (version != kContainerVersion) {
    throw Error(Errc::unsupported_version, "unsupported FBEB version " + std::to_string(version));
  }
  const std::uint8_t kind = r.u8();
  if (kind != kKindTable && kind != kKindSequence) {
    throw Error(Errc::invariant_violation, "unknown FBEB kind " + std::to_string(kind));
  }
  const std::uint32_t dim = r.u32();
  const std::uint32_t n = r.u32();
  if (dim == 0) throw Error(Errc::invariant_violation, "embedding dim must be positive");

  std::vector<std::string> tokens;
  tokens.reserve(std::min<std::size_t>(n, r.remaining() / 4));
  for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(r.string(r.u32()));

  std::optional<std::vector<std::uint32_t>> ids;
  if (kind == kKindSequence) {
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw Error(Errc::invariant_violation, "ids flag must be 0 or 1");
    if (flag == 1) {
      ids.emplace();
      ids->reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) ids->push_back(r.u32());
    }
  }

  const std::size_t count = static_cast<std::size_t>(n) * dim;
  if (r.remaining() < count * 4) {
    throw Error(Errc::truncated, "value block holds " + std::to_string(r.remaining() / 4) +
                                     " floats, expected " + std::to_string(count));
  }
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  if (r.remaining() != 0) {
    throw Error(Errc::invariant_violation,
                std::to_string(r.remaining()) + " trailing bytes after value block");
  }
  if (!all_finite(values)) throw Error(Errc::non_finite_value, "non-finite value in container");

  if (kind == kKindTable) {
    EmbeddingTable table(dim);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto first = values.begin() + static_cast<std::ptrdiff_t>(i) * dim;
      table.insert(std::move(tokens[i]), Vector(first, first + dim));
    }
    return table;
  }
  return EmbeddingSequence(std::move(tokens), Matrix(n, dim, std::move(values)), std::move(ids));
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io_failure, "read failed: " + path.string());
  return deserialize(bytes);
}

EmbeddingTable read_table(const std::filesystem::path& path) {
  auto value = read_container(path);
  if (auto* t = std::get_if<EmbeddingTable>(&value)) return std::move(*t);
  throw Error(Errc::invariant_violation, path.string() + " holds a sequence, expected a table");
}

EmbeddingSequence read_sequence(const std::filesystem::path& path) {
  auto value = read_container(path);
  if (auto* s = std::get_if<EmbeddingSequence>(&value)) return std::move(*s);
  throw Error(Errc::invariant_violation, path.string() + " holds a table, expected a sequence");
}

void write_container(const Container& value, const std::filesystem::path& path) {
  const auto bytes = serialize(value);
  std::random_device rd;
  auto tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(Errc::io_failure, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::io_failure, "cannot rename into " + path.string());
  }
}

// ------------------------------------------------------------ text fixture

EmbeddingTable parse_text_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string head;
    if (!(fields >> head) || head.front() == '#') continue;
    if (!table) {
      long long dim = 0;
      if (head != "dim" || !(fields >> dim) || dim <= 0) {
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": expected `dim D`");
      }
      table.emplace(static_cast<std::uint32_t>(dim));
      continue;
    }
    Vector vec;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stof(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::logic_error&) {
        throw Error(Errc::parse_error,
                    "line " + std::to_string(line_no) + ": bad float '" + field + "'");
      }
    }
    table->insert(head, std::move(vec));
  }
  if (!table) throw Error(Errc::parse_error, "missing `dim D` header");
  return std::move(*table);
}

EmbeddingTable read_text_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text_table(buf.str());
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  char head[4] = {};
  in.read(head, 4);
  if (in.gcount() == 4 && std::equal(kMagic.begin(), kMagic.end(), head)) return read_table(path);
  return read_text_table(path);
}

// ---------------------------------------------------------------- access

const Vector& lookup(const EmbeddingTable& table, const std::string& token) {
  auto it = table.entries().find(token);
  if (it == table.entries().end()) throw Error(Errc::unknown_token, "unknown token '" + token + "'");
  return it->second;
}

Matrix extract_span(const EmbeddingSequence& seq, const SpanRef& span) {
  check_span(span, seq.size());
  Matrix out(span.size(), seq.dim());
  for (std::size_t i = span.start; i < span.end; ++i) {
    const auto src = seq.vectors().row(i);
    std::copy(src.begin(), src.end(), out.row(i - span.start).begin());
  }
  return out;
}

}  // namespace famebias
