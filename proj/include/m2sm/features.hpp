#pragma once

// Binary feature-matrix format:
//   8 bytes   magic "M2SMFEAT"
//   4 bytes   rows  (uint32, little-endian)
//   4 bytes   cols  (uint32, little-endian)
//   rows*cols float32 values, little-endian, row-major

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "m2sm/errors.hpp"

namespace m2sm {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::array<char, 8> kFeatureMagic = {'M', '2', 'S', 'M', 'F', 'E', 'A', 'T'};

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<char> encode_features(const FeatureMatrix& m) {
  std::vector<char> out(kFeatureMagic.begin(), kFeatureMagic.end());
  out.reserve(16 + 4 * static_cast<std::size_t>(m.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    detail::put_u32(out, std::bit_cast<std::uint32_t>(m.data()[i]));
  }
  return out;
}

inline FeatureMatrix decode_features(const std::vector<char>& bytes, const std::string& origin) {
  if (bytes.size() < 16 || !std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin())) {
    throw FormatError("bad feature-file magic in " + origin);
  }
  const std::uint32_t rows = detail::get_u32(bytes.data() + 8);
  const std::uint32_t cols = detail::get_u32(bytes.data() + 12);
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (bytes.size() - 16 != count * 4) {
    throw FormatError(origin + ": header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " floats but payload holds " + std::to_string((bytes.size() - 16) / 4));
  }
  FeatureMatrix m(rows, cols);
  for (std::uint64_t i = 0; i < count; ++i) {
    m.data()[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + 16 + 4 * i));
  }
  return m;
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m) {
  const auto bytes = encode_features(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestionError("write failed: " + path.string());
}

inline FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open feature file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_features(bytes, path.string());
}

}  // namespace m2sm
