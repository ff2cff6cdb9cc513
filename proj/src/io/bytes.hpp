#pragma once

#include "embalign/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace embalign::io::detail {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

  template <typename T>
  T get(const char* field) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw Error(ErrorKind::Format, std::string(what_) + ": truncated at byte " + std::to_string(pos_) +
                                         " reading " + field + " (need " + std::to_string(sizeof(T)) +
                                         " bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t count) {
    std::string_view s = bytes_.substr(pos_, count);
    pos_ += s.size();
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace embalign::io::detail
