#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>

namespace canids {

// Little-endian writer backing the versioned model and detector files.
class BinaryWriter {
public:
  void bytes(std::string_view data) { buf_.append(data); }
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s); // u32 length + bytes
  // u32 rows, u32 cols, then row-major f64 values.
  void matrix(const Eigen::MatrixXd &m);

  const std::string &data() const { return buf_; }
  void save(const std::string &path) const;

private:
  std::string buf_;
};

class BinaryReader {
public:
  BinaryReader(std::string data, std::string origin);
  static BinaryReader open(const std::string &path);

  std::string_view bytes(std::size_t n);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Eigen::MatrixXd matrix();

  bool at_end() const { return pos_ == data_.size(); }
  const std::string &origin() const { return origin_; }

private:
  void need(std::size_t n);

  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

} // namespace canids
