// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/nn/dense.hpp"

namespace eagrs::nn {

// Layout (all little-endian):
//   "EAGM" | u32 version | u32 layer_count
//   layer_count x { u32 in | u32 out | u32 activation tag | u32 bias flag }
//   layer_count x { f64 weights[out*in] row-major | f64 bias[out] if flag }
inline constexpr char kCheckpointMagic[4] = {'E', 'A', 'G', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void magic(const char (&expected)[4]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
      throw Error(Errc::kParseError, "bad magic");
    }
    pos_ += 4;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw Error(Errc::kParseError, "truncated at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "short write " + path.string());
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_layers(std::span<const DenseLayer> layers) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    detail::put_u32(out, static_cast<std::uint32_t>(layer.in_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(layer.out_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(layer.activation()));
    detail::put_u32(out, layer.bias_enabled() ? 1u : 0u);
  }
  for (const auto& layer : layers) {
    for (double w : layer.weights().data()) detail::put_f64(out, w);
    if (layer.bias_enabled())
      for (double b : layer.bias()) detail::put_f64(out, b);
  }
  return out;
}

inline std::vector<DenseLayer> deserialize_layers(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  in.magic(kCheckpointMagic);
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::kParseError, "checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<DenseLayer> layers;
  layers.reserve(count);
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t n_in = in.u32();
    const std::uint32_t n_out = in.u32();
    const Activation act = activation_from_tag(in.u32());
    const std::uint32_t bias = in.u32();
    if (bias > 1) throw Error(Errc::kParseError, "bias flag " + std::to_string(bias));
    layers.emplace_back(n_in, n_out, act, bias == 1);
  }
  for (auto& layer : layers) {
    for (double& w : layer.weights().data()) w = in.f64();
    if (layer.bias_enabled())
      for (double& b : layer.bias()) b = in.f64();
  }
  if (!in.done()) throw Error(Errc::kParseError, "trailing bytes in checkpoint");
  return layers;
}

inline void save_layers(const std::filesystem::path& path, std::span<const DenseLayer> layers) {
  const auto bytes = serialize_layers(layers);
  detail::write_file(path, bytes);
}

inline std::vector<DenseLayer> load_layers(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return deserialize_layers(bytes);
}

}  // namespace eagrs::nn
