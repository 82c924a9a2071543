#pragma once

// Little binary container used for checkpoints: a magic string followed by
// length-prefixed fields. Integers are little-endian u64, reals are IEEE
// doubles, matrices are (rows, cols, column-major doubles).

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contratopic/error.hpp"

namespace contratopic {

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot write " + path);
  }

  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
  void f64(double v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <class Derived>
  void matrix(const Eigen::MatrixBase<Derived>& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) f64(static_cast<double>(m(i, j)));
  }

  void close() {
    out_.close();
    if (!out_) throw ValidationError("failed writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ValidationError("cannot open " + path);
  }

  std::uint64_t u64() {
    std::uint64_t v = 0;
    read(&v, sizeof(v));
    return v;
  }
  double f64() {
    double v = 0;
    read(&v, sizeof(v));
    return v;
  }
  std::string str() {
    auto n = u64();
    if (n > (std::uint64_t{1} << 32)) throw ValidationError(path_ + ": corrupt string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  template <class T>
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> matrix() {
    auto r = u64(), c = u64();
    if (r * c > (std::uint64_t{1} << 34)) throw ValidationError(path_ + ": corrupt matrix shape");
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(f64());
    return m;
  }
  void expect(const std::string& tag) {
    auto got = str();
    if (got != tag) throw ValidationError(path_ + ": expected section '" + tag + "', found '" + got + "'");
  }

 private:
  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ValidationError(path_ + ": truncated archive");
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace contratopic
