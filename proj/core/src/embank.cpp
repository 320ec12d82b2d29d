#include "retroclass/embank.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

#include "retroclass/error.hpp"
#include "retroclass/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "bank files are little-endian; big-endian hosts need byte swaps");

namespace retroclass {

struct EmbeddingBank::Storage {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::string space_tag;
  std::vector<float> data;

  // Captions: either present from the builder or loaded from `sidecar`.
  std::optional<std::filesystem::path> sidecar;
  mutable std::once_flag metadata_once;
  mutable std::vector<CaptionRecord> records;
  mutable std::exception_ptr metadata_error;

  void load_metadata() const;
};

namespace {

constexpr std::size_t kFixedHeaderBytes = 8 + 4 + 4 + 4 + 8 + 2;

template <class T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

// Reads a fixed-size field, reporting truncation at the field's offset.
template <class T>
T take(std::istream& in, std::uint64_t& offset, const char* field) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorCode::kCorruptBank,
                std::string("truncated header field '") + field + "'", offset);
  }
  offset += sizeof(T);
  return value;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  }
  return in;
}

BankHeader parse_header(std::istream& in) {
  std::uint64_t offset = 0;
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) ||
      magic != kBankMagic) {
    throw Error(ErrorCode::kCorruptBank, "bad magic", 0);
  }
  offset += magic.size();

  BankHeader h;
  const std::uint64_t version_at = offset;
  h.version = take<std::uint32_t>(in, offset, "version");
  if (h.version != kBankVersion) {
    throw Error(ErrorCode::kCorruptBank,
                "unsupported version " + std::to_string(h.version), version_at);
  }
  const std::uint64_t dtype_at = offset;
  h.dtype = take<std::uint32_t>(in, offset, "dtype");
  if (h.dtype != kDtypeF32) {
    throw Error(ErrorCode::kCorruptBank,
                "unsupported dtype " + std::to_string(h.dtype), dtype_at);
  }
  const std::uint64_t dim_at = offset;
  h.dim = take<std::uint32_t>(in, offset, "dim");
  if (h.dim == 0) throw Error(ErrorCode::kCorruptBank, "dim is 0", dim_at);
  h.count = take<std::uint64_t>(in, offset, "count");
  const auto tag_len = take<std::uint16_t>(in, offset, "tag length");
  h.space_tag.resize(tag_len);
  in.read(h.space_tag.data(), tag_len);
  if (in.gcount() != tag_len) {
    throw Error(ErrorCode::kCorruptBank, "truncated space tag", offset);
  }
  offset += tag_len;
  h.payload_offset = offset;
  return h;
}

std::uint64_t file_size_of(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                "cannot stat '" + path.string() + "': " + ec.message());
  }
  return size;
}

void check_payload_size(const BankHeader& h, std::uint64_t file_size) {
  const std::uint64_t expected =
      h.payload_offset + h.count * static_cast<std::uint64_t>(h.dim) * 4u;
  if (file_size < expected) {
    throw Error(ErrorCode::kCorruptBank,
                "truncated payload: expected " + std::to_string(expected) +
                    " bytes, file has " + std::to_string(file_size),
                file_size);
  }
  if (file_size > expected) {
    throw Error(ErrorCode::kCorruptBank, "trailing bytes after payload",
                expected);
  }
}

CaptionRecord record_from_json(const nlohmann::json& j) {
  CaptionRecord r;
  r.id = j.at("id").get<std::int64_t>();
  r.text = j.at("text").get<std::string>();
  if (auto it = j.find("source"); it != j.end() && !it->is_null()) {
    r.source = it->get<std::string>();
  }
  return r;
}

}  // namespace

void EmbeddingBank::Storage::load_metadata() const {
  std::call_once(metadata_once, [this] {
    if (!sidecar) return;
    try {
      std::ifstream in(*sidecar);
      if (!in) {
        throw Error(ErrorCode::kIoError,
                    "missing metadata sidecar '" + sidecar->string() + "'");
      }
      std::vector<CaptionRecord> loaded;
      loaded.reserve(count);
      std::string line;
      std::uint64_t offset = 0;
      while (std::getline(in, line)) {
        const std::uint64_t line_at = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        CaptionRecord rec;
        try {
          rec = record_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kCorruptBank,
                      std::string("bad metadata line: ") + e.what(), line_at);
        }
        if (rec.id != static_cast<std::int64_t>(loaded.size())) {
          throw Error(ErrorCode::kCorruptBank,
                      "metadata ids are not dense; expected " +
                          std::to_string(loaded.size()) + ", got " +
                          std::to_string(rec.id),
                      line_at);
        }
        loaded.push_back(std::move(rec));
      }
      if (loaded.size() != count) {
        throw Error(ErrorCode::kCorruptBank,
                    "metadata has " + std::to_string(loaded.size()) +
                        " records for " + std::to_string(count) + " rows",
                    offset);
      }
      records = std::move(loaded);
    } catch (...) {
      metadata_error = std::current_exception();
    }
  });
  if (metadata_error) std::rethrow_exception(metadata_error);
}

std::size_t EmbeddingBank::dim() const noexcept {
  return storage_ ? storage_->dim : 0;
}

std::size_t EmbeddingBank::count() const noexcept {
  return storage_ ? storage_->count : 0;
}

const std::string& EmbeddingBank::space_tag() const noexcept {
  static const std::string kEmpty;
  return storage_ ? storage_->space_tag : kEmpty;
}

std::span<const float> EmbeddingBank::row(std::size_t i) const noexcept {
  assert(storage_ && i < storage_->count);
  return {storage_->data.data() + i * storage_->dim, storage_->dim};
}

std::span<const float> EmbeddingBank::matrix() const noexcept {
  if (!storage_) return {};
  return storage_->data;
}

std::vector<CaptionRecord> EmbeddingBank::join_metadata(
    std::span<const std::int64_t> ids) const {
  std::vector<CaptionRecord> out;
  if (ids.empty()) return out;
  const std::size_t n = count();
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= n) {
      throw Error(ErrorCode::kIdOutOfRange,
                  "id " + std::to_string(id) + " not in [0, " +
                      std::to_string(n) + ")");
    }
  }
  storage_->load_metadata();
  if (storage_->records.size() != n) {
    throw Error(ErrorCode::kIoError, "bank has no caption metadata");
  }
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(storage_->records[id]);
  return out;
}

bool EmbeddingBank::contents_equal(const EmbeddingBank& other) const noexcept {
  if (dim() != other.dim() || count() != other.count() ||
      space_tag() != other.space_tag()) {
    return false;
  }
  const auto a = matrix();
  const auto b = other.matrix();
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

BankBuilder::BankBuilder(std::size_t dim, std::string space_tag)
    : dim_(dim), space_tag_(std::move(space_tag)) {
  if (dim == 0) throw Error(ErrorCode::kInvalidDimension, "dim must be >= 1");
  if (dim > UINT32_MAX) {
    throw Error(ErrorCode::kInvalidDimension, "dim does not fit in u32");
  }
  if (space_tag_.size() > UINT16_MAX) {
    throw Error(ErrorCode::kInvalidRecord, "space tag longer than 65535 bytes");
  }
}

std::int64_t BankBuilder::append(std::span<const float> vector,
                                 std::string text,
                                 std::optional<std::string> source) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector has " + std::to_string(vector.size()) +
                    " components, bank dim is " + std::to_string(dim_));
  }
  if (text.empty()) {
    throw Error(ErrorCode::kInvalidRecord, "caption text must be non-empty");
  }
  const double norm = l2_norm(vector);
  if (!std::isfinite(norm)) {
    throw Error(ErrorCode::kInvalidRecord, "vector has non-finite components");
  }
  if (norm <= kZeroNormThreshold) {
    throw Error(ErrorCode::kZeroVector, "vector norm below 1e-8");
  }
  for (float x : vector) {
    data_.push_back(static_cast<float>(static_cast<double>(x) / norm));
  }
  const auto id = static_cast<std::int64_t>(records_.size());
  records_.push_back({id, std::move(text), std::move(source)});
  return id;
}

void BankBuilder::reserve(std::size_t rows) {
  data_.reserve(data_.size() + rows * dim_);
  records_.reserve(records_.size() + rows);
}

EmbeddingBank BankBuilder::finalize() && {
  auto storage = std::make_shared<EmbeddingBank::Storage>();
  storage->dim = dim_;
  storage->count = records_.size();
  storage->space_tag = std::move(space_tag_);
  storage->data = std::move(data_);
  storage->records = std::move(records_);
  return EmbeddingBank(std::move(storage));
}

std::filesystem::path metadata_path(const std::filesystem::path& bank_file) {
  return std::filesystem::path(bank_file.string() + ".meta.jsonl");
}

void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  if (bank.space_tag().size() > UINT16_MAX) {
    throw Error(ErrorCode::kInvalidRecord, "space tag too long");
  }
  std::string header;
  header.append(kBankMagic.data(), kBankMagic.size());
  put<std::uint32_t>(header, kBankVersion);
  put<std::uint32_t>(header, kDtypeF32);
  put<std::uint32_t>(header, static_cast<std::uint32_t>(bank.dim()));
  put<std::uint64_t>(header, bank.count());
  put<std::uint16_t>(header, static_cast<std::uint16_t>(bank.space_tag().size()));
  header += bank.space_tag();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto payload = bank.matrix();
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size_bytes()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");

  // Copy captions from wherever this bank got them.
  std::vector<CaptionRecord> records;
  if (bank.count() > 0) {
    std::vector<std::int64_t> ids(bank.count());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
    try {
      records = bank.join_metadata(ids);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kIoError) throw;
      return;  // bank without captions: no sidecar
    }
  }
  std::ofstream meta(metadata_path(path), std::ios::trunc);
  if (!meta) {
    throw Error(ErrorCode::kIoError,
                "cannot write '" + metadata_path(path).string() + "'");
  }
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["source"] = r.source ? nlohmann::json(*r.source) : nlohmann::json(nullptr);
    meta << j.dump() << '\n';
  }
  if (!meta) throw Error(ErrorCode::kIoError, "metadata write failed");
}

BankHeader read_bank_header(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_header(in);
}

EmbeddingBank load_bank(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  BankHeader h = parse_header(in);
  check_payload_size(h, file_size_of(path));

  auto storage = std::make_shared<EmbeddingBank::Storage>();
  storage->dim = h.dim;
  storage->count = static_cast<std::size_t>(h.count);
  storage->space_tag = std::move(h.space_tag);
  storage->data.resize(storage->count * storage->dim);
  in.read(reinterpret_cast<char*>(storage->data.data()),
          static_cast<std::streamsize>(storage->data.size() * sizeof(float)));
  if (!in) {
    throw Error(ErrorCode::kCorruptBank, "short read of payload",
                h.payload_offset);
  }

  for (std::size_t i = 0; i < storage->count; ++i) {
    std::span<const float> r(storage->data.data() + i * storage->dim,
                             storage->dim);
    const double norm = l2_norm(r);
    if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
      throw Error(ErrorCode::kCorruptBank,
                  "row " + std::to_string(i) + " has norm " +
                      std::to_string(norm),
                  h.payload_offset + i * storage->dim * sizeof(float));
    }
  }

  const auto sidecar = metadata_path(path);
  if (std::filesystem::exists(sidecar)) storage->sidecar = sidecar;
  return EmbeddingBank(std::move(storage));
}

BankReader::BankReader(const std::filesystem::path& path)
    : path_(path), in_(open_for_read(path)), header_(parse_header(in_)) {
  check_payload_size(header_, file_size_of(path));
}

std::size_t BankReader::read_rows(std::span<float> out) {
  const std::size_t dim = header_.dim;
  const std::uint64_t remaining = header_.count - next_row_;
  const std::size_t rows =
      static_cast<std::size_t>(std::min<std::uint64_t>(remaining, out.size() / dim));
  if (rows == 0) return 0;
  in_.read(reinterpret_cast<char*>(out.data()),
           static_cast<std::streamsize>(rows * dim * sizeof(float)));
  if (!in_) {
    throw Error(ErrorCode::kCorruptBank, "short read of payload",
                header_.payload_offset + next_row_ * dim * sizeof(float));
  }
  next_row_ += rows;
  return rows;
}

}  // namespace retroclass
