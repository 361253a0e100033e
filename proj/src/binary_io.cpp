#include "binary_io.hpp"

#include "error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace canids {

namespace {

template <typename T> void put_le(std::string &buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

template <typename T> T get_le(const char *p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

} // namespace

void BinaryWriter::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
void BinaryWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::matrix(const Eigen::MatrixXd &m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      f64(m(r, c));
    }
  }
}

void BinaryWriter::save(const std::string &path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Write, "cannot write " + path);
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  require(static_cast<bool>(out), ErrorCode::Write, "write failed for " + path);
}

BinaryReader::BinaryReader(std::string data, std::string origin)
    : data_(std::move(data)), origin_(std::move(origin)) {}

BinaryReader BinaryReader::open(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return BinaryReader(ss.str(), path);
}

void BinaryReader::need(std::size_t n) {
  require(data_.size() - pos_ >= n, ErrorCode::Format, origin_ + ": truncated file");
}

std::string_view BinaryReader::bytes(std::size_t n) {
  need(n);
  std::string_view out(data_.data() + pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint16_t BinaryReader::u16() {
  need(2);
  auto v = get_le<std::uint16_t>(data_.data() + pos_);
  pos_ += 2;
  return v;
}

std::uint32_t BinaryReader::u32() {
  need(4);
  auto v = get_le<std::uint32_t>(data_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  auto v = get_le<std::uint64_t>(data_.data() + pos_);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  return std::string(bytes(n));
}

Eigen::MatrixXd BinaryReader::matrix() {
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  need(static_cast<std::size_t>(rows) * cols * 8);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      m(r, c) = f64();
    }
  }
  return m;
}

} // namespace canids
