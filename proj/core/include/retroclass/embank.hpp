#pragma once

// Embedding banks: immutable row-major f32 matrices of unit-norm vectors with
// dense integer ids, plus a JSON-lines caption sidecar.
//
// On-disk layout (little-endian):
//   "RTRCBANK" | u32 version=1 | u32 dtype=1 | u32 dim | u64 count |
//   u16 tag length | tag bytes | count*dim f32 payload
// Sidecar "<bankfile>.meta.jsonl": {"id": int, "text": str, "source": str|null}

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retroclass {

inline constexpr std::array<char, 8> kBankMagic = {'R', 'T', 'R', 'C',
                                                   'B', 'A', 'N', 'K'};
inline constexpr std::uint32_t kBankVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 1;
// Vectors with a smaller L2 norm have no usable direction.
inline constexpr double kZeroNormThreshold = 1e-8;
// Allowed deviation of a stored row's norm from 1.
inline constexpr double kUnitNormTolerance = 1e-4;

struct CaptionRecord {
  std::int64_t id = 0;
  std::string text;
  std::optional<std::string> source;

  bool operator==(const CaptionRecord&) const = default;
};

struct BankHeader {
  std::uint32_t version = kBankVersion;
  std::uint32_t dtype = kDtypeF32;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::string space_tag;
  // Byte offset of the first payload float.
  std::uint64_t payload_offset = 0;

  bool operator==(const BankHeader&) const = default;
};

// Cheap-to-copy handle onto immutable storage; safe to share across threads.
class EmbeddingBank {
 public:
  EmbeddingBank() = default;

  std::size_t dim() const noexcept;
  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }
  const std::string& space_tag() const noexcept;

  // Row i, unchecked beyond a debug assert.
  std::span<const float> row(std::size_t i) const noexcept;
  std::span<const float> matrix() const noexcept;

  // Captions for `ids`, in input order. Loads the sidecar on first use.
  std::vector<CaptionRecord> join_metadata(
      std::span<const std::int64_t> ids) const;

  // Identity of the underlying storage (copies of one handle compare equal).
  bool same_storage(const EmbeddingBank& other) const noexcept {
    return storage_ == other.storage_;
  }

  // Header and payload equality, bit for bit.
  bool contents_equal(const EmbeddingBank& other) const noexcept;

 private:
  struct Storage;
  friend class BankBuilder;
  friend EmbeddingBank load_bank(const std::filesystem::path& path);

  explicit EmbeddingBank(std::shared_ptr<const Storage> storage)
      : storage_(std::move(storage)) {}

  std::shared_ptr<const Storage> storage_;
};

// Single-writer accumulator; finalize() freezes it into an EmbeddingBank.
class BankBuilder {
 public:
  BankBuilder(std::size_t dim, std::string space_tag);

  // Stores `vector` L2-normalized and returns its id (the previous count).
  std::int64_t append(std::span<const float> vector, std::string text,
                      std::optional<std::string> source = std::nullopt);

  // Preallocates room for `rows` more appends.
  void reserve(std::size_t rows);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return records_.size(); }

  EmbeddingBank finalize() &&;

 private:
  std::size_t dim_;
  std::string space_tag_;
  std::vector<float> data_;
  std::vector<CaptionRecord> records_;
};

// Writes the bank file and, when the bank has captions, its sidecar.
void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path);

// Reads and validates header, payload and row norms. The sidecar is only
// opened by join_metadata().
EmbeddingBank load_bank(const std::filesystem::path& path);

BankHeader read_bank_header(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& bank_file);

// Sequential chunked access to a bank file without loading the payload.
class BankReader {
 public:
  explicit BankReader(const std::filesystem::path& path);

  const BankHeader& header() const noexcept { return header_; }

  // Fills `out` (rows * dim floats) with the next rows; returns rows read.
  std::size_t read_rows(std::span<float> out);
  std::uint64_t next_row() const noexcept { return next_row_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  BankHeader header_;
  std::uint64_t next_row_ = 0;
};

}  // namespace retroclass
