#include "ragforge/jsonl.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge {

JsonlStats for_each_jsonl(std::istream& in, const std::function<void(const json&, std::size_t)>& fn) {
  JsonlStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++stats.lines;
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) {
      ++stats.malformed;
      continue;
    }
    fn(obj, line_no);
  }
  if (in.bad()) throw IoError("stream read failure");
  return stats;
}

std::vector<json> read_jsonl_strict(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

void write_jsonl(std::ostream& out, const std::vector<json>& rows) {
  for (const auto& r : rows) out << r.dump() << '\n';
}

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void BinaryWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::put_i64(std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

void BinaryWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::put_string(std::string_view s) {
  put_u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::put_crc() { put_u32(crc32_of(buf_)); }

std::string_view BinaryReader::get_bytes(std::size_t n) {
  if (n > remaining()) throw FormatError("unexpected end of data");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::get_u8() { return static_cast<std::uint8_t>(get_bytes(1)[0]); }

std::uint32_t BinaryReader::get_u32() {
  auto b = get_bytes(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
  return v;
}

std::int64_t BinaryReader::get_i64() {
  auto b = get_bytes(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
  return static_cast<std::int64_t>(v);
}

float BinaryReader::get_f32() { return std::bit_cast<float>(get_u32()); }

std::string BinaryReader::get_string() {
  std::uint32_t n = get_u32();
  return std::string(get_bytes(n));
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string_view verify_framed(std::string_view file, std::string_view magic) {
  if (file.size() < magic.size() || file.substr(0, magic.size()) != magic) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
  if (file.size() < magic.size() + 4) throw FormatError("file truncated");
  std::string_view body = file.substr(0, file.size() - 4);
  BinaryReader tail(file.substr(file.size() - 4));
  std::uint32_t stored = tail.get_u32();
  if (stored != crc32_of(body)) throw FormatError("CRC mismatch (file corrupt or truncated)");
  return body;
}

}  // namespace ragforge
