#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/simulate.hpp"

namespace ejdke {

// Binary layout, all little-endian:
//   "EJDT" | u16 version | u16 d | u64 n_steps | f64 dt | u64 seed | f64 burn_in |
//   u32 label length | label bytes (UTF-8) | n_steps * d f64 states, row-major
inline constexpr char kTrajectoryMagic[4] = {'E', 'J', 'D', 'T'};
inline constexpr std::uint16_t kTrajectoryVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "trajectory I/O assumes a little-endian host");

namespace detail {

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}

  template <class T>
  T get(const char* field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n, const char* field) {
    need(n, field);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (data_.size() - pos_ < n)
      throw FormatError(path_ + ": truncated trajectory file, " + field + " needs " +
                        std::to_string(n) + " bytes at offset " + std::to_string(pos_) + " but only " +
                        std::to_string(data_.size() - pos_) + " remain (missing " +
                        std::to_string(n - (data_.size() - pos_)) + " bytes)");
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_trajectory(const Trajectory& traj) {
  if (traj.dim == 0 || traj.dim > 0xffff) throw InvalidArgument("trajectory dim must be in [1, 65535]");
  if (traj.states.size() != traj.n_steps * traj.dim)
    throw DimensionMismatch("trajectory states size differs from n_steps * dim");
  std::string buf(kTrajectoryMagic, 4);
  detail::put<std::uint16_t>(buf, kTrajectoryVersion);
  detail::put<std::uint16_t>(buf, static_cast<std::uint16_t>(traj.dim));
  detail::put<std::uint64_t>(buf, traj.n_steps);
  detail::put<double>(buf, traj.dt);
  detail::put<std::uint64_t>(buf, traj.seed);
  detail::put<double>(buf, traj.burn_in);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(traj.model_label.size()));
  buf += traj.model_label;
  buf.append(reinterpret_cast<const char*>(traj.states.data()), traj.states.size() * sizeof(double));
  return buf;
}

inline Trajectory decode_trajectory(const std::string& data, const std::string& path = "<memory>") {
  detail::ByteReader r(data, path);
  if (r.bytes(4, "magic") != std::string(kTrajectoryMagic, 4))
    throw FormatError(path + ": bad magic, not an EJDT trajectory file");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kTrajectoryVersion)
    throw FormatError(path + ": unsupported trajectory version " + std::to_string(version));
  Trajectory t;
  t.dim = r.get<std::uint16_t>("d");
  if (t.dim == 0) throw FormatError(path + ": header declares d = 0");
  t.n_steps = r.get<std::uint64_t>("n_steps");
  t.dt = r.get<double>("dt");
  if (!(t.dt > 0.0) || !std::isfinite(t.dt)) throw FormatError(path + ": header dt is not positive");
  t.seed = r.get<std::uint64_t>("seed");
  t.burn_in = r.get<double>("burn_in");
  const auto len = r.get<std::uint32_t>("label length");
  t.model_label = r.bytes(len, "label");
  const std::size_t want = t.n_steps * t.dim;
  if (t.n_steps != 0 && want / t.n_steps != t.dim) throw FormatError(path + ": header sizes overflow");
  const std::string body = r.bytes(want * sizeof(double), "state data");
  if (r.remaining() != 0)
    throw FormatError(path + ": " + std::to_string(r.remaining()) + " trailing bytes after state data");
  t.states.resize(want);
  std::memcpy(t.states.data(), body.data(), body.size());
  return t;
}

inline void write_trajectory(const Trajectory& traj, const std::string& path) {
  const std::string buf = encode_trajectory(traj);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trajectory '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_trajectory(ss.str(), path);
}

/// Text export for inspection: header "t,x1,...,xd", one row per sample.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t";
  for (std::size_t i = 0; i < traj.dim; ++i) out << ",x" << (i + 1);
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < traj.n_steps; ++k) {
    out << traj.time(k);
    for (double v : traj.row(k)) out << ',' << v;
    out << '\n';
  }
}

}  // namespace ejdke
