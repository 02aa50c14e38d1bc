#pragma once

#include "gsurf/types.hpp"

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace gsurf {

// Little-endian binary writer/reader for the scene and checkpoint containers.
// The host is assumed little-endian (checked once at runtime).

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  void write_magic(const char magic[4]);
  void write_u8(uint8_t v) { write_raw(&v, 1); }
  void write_u32(uint32_t v) { write_raw(&v, 4); }
  void write_u64(uint64_t v) { write_raw(&v, 8); }
  void write_f32(float v) { write_raw(&v, 4); }
  void write_f32_array(const std::vector<float>& v);
  void write_u32_array(const std::vector<uint32_t>& v);
  void write_u8_array(const std::vector<uint8_t>& v);
  void write_string(const std::string& s);
  void close();

 private:
  void write_raw(const void* p, std::size_t n);
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);
  void expect_magic(const char magic[4]);
  uint8_t read_u8();
  uint32_t read_u32();
  uint64_t read_u64();
  float read_f32();
  std::vector<float> read_f32_array(std::size_t n);
  std::vector<uint32_t> read_u32_array(std::size_t n);
  std::vector<uint8_t> read_u8_array(std::size_t n);
  std::string read_string();
  bool at_end();

 private:
  void read_raw(void* p, std::size_t n);
  std::ifstream in_;
  std::string path_;
};

}  // namespace gsurf
