#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ragforge {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct JsonlStats {
  std::size_t lines = 0;      // non-blank lines seen
  std::size_t malformed = 0;  // lines that failed to parse as a JSON object
};

// Calls `fn` for every non-blank line that parses as a JSON object. Malformed
// lines are counted, not thrown.
JsonlStats for_each_jsonl(std::istream& in, const std::function<void(const json&, std::size_t line_no)>& fn);

// Reads a JSONL file into objects; malformed lines raise FormatError naming the line.
std::vector<json> read_jsonl_strict(const std::string& path);

void write_jsonl(std::ostream& out, const std::vector<json>& rows);

// Little-endian binary helpers shared by the projection and index formats.
class BinaryWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void put_u32(std::uint32_t v);
  void put_i64(std::int64_t v);
  void put_f32(float v);
  void put_bytes(std::string_view bytes) { buf_.append(bytes); }
  void put_string(std::string_view s);  // u32 length prefix
  // Appends CRC32 of everything written so far.
  void put_crc();
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}
  std::uint8_t get_u8();
  std::uint32_t get_u32();
  std::int64_t get_i64();
  float get_f32();
  std::string_view get_bytes(std::size_t n);
  std::string get_string();
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes);

// Splits `file` into body and trailing CRC, verifying magic and checksum.
// Throws FormatError on short files, wrong magic, or CRC mismatch.
std::string_view verify_framed(std::string_view file, std::string_view magic);

}  // namespace ragforge
