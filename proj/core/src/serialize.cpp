#include "gsurf/serialize.hpp"

#include <bit>
#include <cstring>

namespace gsurf {

namespace {
void check_little_endian() {
  static_assert(std::endian::native == std::endian::little,
                "file formats are little-endian; big-endian hosts unsupported");
}
}  // namespace

BinaryWriter::BinaryWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
  check_little_endian();
  check(out_.good(), "cannot open for writing: " + path);
}

void BinaryWriter::write_raw(const void* p, std::size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  check(out_.good(), "write failed: " + path_);
}

void BinaryWriter::write_magic(const char magic[4]) { write_raw(magic, 4); }

void BinaryWriter::write_f32_array(const std::vector<float>& v) {
  if (!v.empty()) write_raw(v.data(), v.size() * sizeof(float));
}

void BinaryWriter::write_u32_array(const std::vector<uint32_t>& v) {
  if (!v.empty()) write_raw(v.data(), v.size() * sizeof(uint32_t));
}

void BinaryWriter::write_u8_array(const std::vector<uint8_t>& v) {
  if (!v.empty()) write_raw(v.data(), v.size());
}

void BinaryWriter::write_string(const std::string& s) {
  write_u32(static_cast<uint32_t>(s.size()));
  if (!s.empty()) write_raw(s.data(), s.size());
}

void BinaryWriter::close() {
  out_.close();
  check(out_.good(), "close failed: " + path_);
}

BinaryReader::BinaryReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  check_little_endian();
  check(in_.good(), "cannot open for reading: " + path);
}

void BinaryReader::read_raw(void* p, std::size_t n) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  check(in_.gcount() == static_cast<std::streamsize>(n), "truncated file: " + path_);
}

void BinaryReader::expect_magic(const char magic[4]) {
  char got[4];
  read_raw(got, 4);
  check(std::memcmp(got, magic, 4) == 0,
        "bad magic in " + path_ + " (expected " + std::string(magic, 4) + ")");
}

uint8_t BinaryReader::read_u8() {
  uint8_t v;
  read_raw(&v, 1);
  return v;
}

uint32_t BinaryReader::read_u32() {
  uint32_t v;
  read_raw(&v, 4);
  return v;
}

uint64_t BinaryReader::read_u64() {
  uint64_t v;
  read_raw(&v, 8);
  return v;
}

float BinaryReader::read_f32() {
  float v;
  read_raw(&v, 4);
  return v;
}

std::vector<float> BinaryReader::read_f32_array(std::size_t n) {
  std::vector<float> v(n);
  if (n) read_raw(v.data(), n * sizeof(float));
  return v;
}

std::vector<uint32_t> BinaryReader::read_u32_array(std::size_t n) {
  std::vector<uint32_t> v(n);
  if (n) read_raw(v.data(), n * sizeof(uint32_t));
  return v;
}

std::vector<uint8_t> BinaryReader::read_u8_array(std::size_t n) {
  std::vector<uint8_t> v(n);
  if (n) read_raw(v.data(), n);
  return v;
}

std::string BinaryReader::read_string() {
  const uint32_t n = read_u32();
  std::string s(n, '\0');
  if (n) read_raw(s.data(), n);
  return s;
}

bool BinaryReader::at_end() {
  return in_.peek() == std::char_traits<char>::eof();
}

}  // namespace gsurf
