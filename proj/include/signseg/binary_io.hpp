#pragma once

// Little-endian primitives for the binary file formats. Readers track the
// byte offset so format errors can say where the file went wrong.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "signseg/errors.hpp"

namespace signseg::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }

  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  const std::vector<char>& bytes() const noexcept { return buf_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw FormatError(path + ": write failed");
  }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, std::string source)
      : buf_(std::move(bytes)), source_(std::move(source)) {}

  static ByteReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open for reading");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes), path);
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void get_bytes(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }

  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    std::string s(n, '\0');
    get_bytes(s.data(), n, what);
    return s;
  }

  void expect_magic(const char (&magic)[5]) {
    char m[4];
    get_bytes(m, 4, "magic");
    if (std::memcmp(m, magic, 4) != 0) {
      fail(0, std::string("bad magic, expected \"") + magic + "\"");
    }
  }

  void expect_end() const {
    if (pos_ != buf_.size()) {
      fail(pos_, std::to_string(buf_.size() - pos_) + " trailing bytes");
    }
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t size() const noexcept { return buf_.size(); }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  const std::string& source() const noexcept { return source_; }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw FormatError(source_ + ": byte offset " + std::to_string(at) + ": " + msg);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      fail(pos_, std::string("truncated while reading ") + what + ": need " + std::to_string(n) +
                     " bytes, " + std::to_string(remaining()) + " available (file length " +
                     std::to_string(buf_.size()) + ")");
    }
  }

  std::vector<char> buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace signseg::io
