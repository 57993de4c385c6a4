#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

namespace stylo {

static_assert(std::endian::native == std::endian::little,
              "stylo binary containers are little-endian");

// Versioned container of named float64 arrays plus a JSON meta record.
// Writing is deterministic (arrays sorted by name, stable JSON key order),
// so save -> load -> save produces byte-identical files.
struct Checkpoint {
  static constexpr std::uint32_t kMagic = 0x4b435453;  // "STCK"
  static constexpr std::uint32_t kVersion = 1;

  std::int64_t step = 0;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Eigen::MatrixXd> arrays;
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return value;
}

inline void read_bytes(std::istream& in, char* dst, std::size_t n, const std::string& path) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  detail::write_pod(out, Checkpoint::kMagic);
  detail::write_pod(out, Checkpoint::kVersion);
  detail::write_pod(out, ckpt.step);

  const std::string meta = ckpt.meta.dump();
  detail::write_pod(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  detail::write_pod(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, array] : ckpt.arrays) {
    detail::write_pod(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(out, static_cast<std::uint32_t>(array.rows()));
    detail::write_pod(out, static_cast<std::uint32_t>(array.cols()));
    // Column-major float64, Eigen's native layout.
    out.write(reinterpret_cast<const char*>(array.data()),
              static_cast<std::streamsize>(sizeof(double) * array.size()));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  const auto magic = detail::read_pod<std::uint32_t>(in, path);
  if (magic != Checkpoint::kMagic) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  if (version != Checkpoint::kVersion) {
    throw std::runtime_error("checkpoint version mismatch in " + path + ": file has " +
                             std::to_string(version) + ", reader expects " +
                             std::to_string(Checkpoint::kVersion));
  }

  Checkpoint ckpt;
  ckpt.step = detail::read_pod<std::int64_t>(in, path);

  const auto meta_len = detail::read_pod<std::uint32_t>(in, path);
  std::string meta(meta_len, '\0');
  detail::read_bytes(in, meta.data(), meta_len, path);
  ckpt.meta = nlohmann::json::parse(meta);

  const auto count = detail::read_pod<std::uint32_t>(in, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = detail::read_pod<std::uint16_t>(in, path);
    std::string name(name_len, '\0');
    detail::read_bytes(in, name.data(), name_len, path);
    const auto rows = detail::read_pod<std::uint32_t>(in, path);
    const auto cols = detail::read_pod<std::uint32_t>(in, path);
    Eigen::MatrixXd array(rows, cols);
    detail::read_bytes(in, reinterpret_cast<char*>(array.data()),
                       sizeof(double) * array.size(), path);
    ckpt.arrays.emplace(std::move(name), std::move(array));
  }
  return ckpt;
}

}  // namespace stylo
