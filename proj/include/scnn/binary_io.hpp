#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "scnn/error.hpp"

namespace scnn::detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path, const std::string& module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, module, "cannot open '", path, "'");
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes, const std::string& module) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, module, "cannot open '", path, "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::io, module, "failed writing '", path, "'");
}

// Little-endian encoding of arithmetic values into a byte buffer.
class ByteWriter {
 public:
  template <typename V>
  void put(V v) {
    static_assert(std::is_arithmetic_v<V>);
    unsigned char b[sizeof(V)];
    std::memcpy(b, &v, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(V));
    bytes_.insert(bytes_.end(), b, b + sizeof(V));
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

  void write_file(const std::string& path, const std::string& module) const { write_file_bytes(path, bytes_, module); }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> bytes, std::string module, std::string source)
      : bytes_(std::move(bytes)), module_(std::move(module)), source_(std::move(source)) {}

  static ByteReader from_file(const std::string& path, const std::string& module) {
    return ByteReader(read_file_bytes(path, module), module, path);
  }

  template <typename V>
  V get() {
    static_assert(std::is_arithmetic_v<V>);
    need(sizeof(V));
    unsigned char b[sizeof(V)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(V));
    pos_ += sizeof(V);
    V v;
    std::memcpy(&v, b, sizeof(V));
    return v;
  }
  std::string get_raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_string() { return get_raw(get<std::uint32_t>()); }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void corrupt(const std::string& what) const {
    fail(ErrorCategory::format, module_, "'", source_, "': ", what);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) corrupt("truncated file");
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::string module_;
  std::string source_;
};

}  // namespace scnn::detail
