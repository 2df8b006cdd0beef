#include "dance/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dance::nn {

namespace {

constexpr char kMagic[8] = {'D', 'N', 'C', 'E', 'M', 'D', 'L', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return std::uint32_t(buf[0]) | std::uint32_t(buf[1]) << 8 | std::uint32_t(buf[2]) << 16 |
         std::uint32_t(buf[3]) << 24;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

void TensorStore::put(const std::string& name, const Mat& tensor) { tensors_[name] = tensor; }

const Mat& TensorStore::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
  return it->second;
}

void TensorStore::put_string(const std::string& name, const std::string& text) {
  strings_[name] = text;
}

const std::string& TensorStore::get_string(const std::string& name) const {
  const auto it = strings_.find(name);
  if (it == strings_.end()) throw std::runtime_error("checkpoint: missing entry " + name);
  return it->second;
}

void TensorStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(tensors_.size()));
  write_u32(out, static_cast<std::uint32_t>(strings_.size()));
  for (const auto& [name, t] : tensors_) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(t.rows()));
    write_u32(out, static_cast<std::uint32_t>(t.cols()));
    // row-major on disk, independent of Eigen's storage order
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double v = t(r, c);
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(buf), 8);
      }
  }
  for (const auto& [name, s] : strings_) {
    write_string(out, name);
    write_string(out, s);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed " + path);
}

TensorStore TensorStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  TensorStore store;
  const std::uint32_t n_tensors = read_u32(in);
  const std::uint32_t n_strings = read_u32(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_string(in);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Mat t(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        unsigned char buf[8];
        in.read(reinterpret_cast<char*>(buf), 8);
        if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(buf[b]) << (8 * b);
        double v;
        std::memcpy(&v, &bits, 8);
        t(r, c) = v;
      }
    store.tensors_[name] = std::move(t);
  }
  for (std::uint32_t i = 0; i < n_strings; ++i) {
    const std::string name = read_string(in);
    store.strings_[name] = read_string(in);
  }
  return store;
}

}  // namespace dance::nn
