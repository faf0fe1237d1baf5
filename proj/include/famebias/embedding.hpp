#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace famebias {

using Vector = std::vector<float>;

// Dense row-major matrix of 32-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<float> row(std::size_t i);
  std::span<const float> row(std::size_t i) const;

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  // Equality is on bit patterns, so -0.0f != 0.0f here.
  friend bool operator==(const Matrix& a, const Matrix& b) noexcept;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

bool bit_equal(std::span<const float> a, std::span<const float> b) noexcept;

struct SpanRef {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const SpanRef&, const SpanRef&) = default;
};

// Throws SpanOutOfRange unless 0 <= start < end <= n.
void check_span(const SpanRef& span, std::size_t n);

/// Token → vector map with a fixed width.
///
/// Tokens are unique, non-empty, and iterate in byte order. Every vector holds
/// exactly `dim()` finite floats. Lookup is case-sensitive.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::uint32_t dim);

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, Vector>& entries() const noexcept { return entries_; }

  // Throws DuplicateToken, DimMismatch, NonFiniteValue or InvariantViolation.
  void insert(std::string token, Vector vector);
  bool contains(const std::string& token) const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) noexcept;

 private:
  std::uint32_t dim_;
  std::map<std::string, Vector> entries_;
};

/// Per-token encoder output: n tokens, an n×dim matrix and optional token ids.
class EmbeddingSequence {
 public:
  EmbeddingSequence(std::vector<std::string> tokens, Matrix vectors,
                    std::optional<std::vector<std::uint32_t>> ids = std::nullopt);

  std::uint32_t dim() const noexcept { return static_cast<std::uint32_t>(vectors_.cols()); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  const std::optional<std::vector<std::uint32_t>>& ids() const noexcept { return ids_; }

  friend bool operator==(const EmbeddingSequence& a, const EmbeddingSequence& b) noexcept;

 private:
  std::vector<std::string> tokens_;
  Matrix vectors_;
  std::optional<std::vector<std::uint32_t>> ids_;
};

using Container = std::variant<EmbeddingTable, EmbeddingSequence>;

// FBEB binary container. Layout (all integers little-endian):
//   "FBEB" | u32 version=1 | u8 kind (1 table, 2 sequence) | u32 dim | u32 n
//   | n × (u32 byte length + UTF-8 token)
//   | kind 2 only: u8 ids flag, then n × u32 ids when flag = 1
//   | n×dim f32, row-major
inline constexpr std::uint32_t kContainerVersion = 1;

std::vector<std::uint8_t> serialize(const Container& value);
Container deserialize(std::span<const std::uint8_t> bytes);

Container read_container(const std::filesystem::path& path);
EmbeddingTable read_table(const std::filesystem::path& path);
EmbeddingSequence read_sequence(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place.
void write_container(const Container& value, const std::filesystem::path& path);

// Text fixture: first line `dim D`, then `token f1 ... fD` per line.
// Blank lines and lines starting with '#' are ignored.
EmbeddingTable parse_text_table(const std::string& text);
EmbeddingTable read_text_table(const std::filesystem::path& path);

// Reads a table from either format, picking by magic bytes.
EmbeddingTable load_table(const std::filesystem::path& path);

const Vector& lookup(const EmbeddingTable& table, const std::string& token);
Matrix extract_span(const EmbeddingSequence& seq, const SpanRef& span);

}  // namespace famebias
