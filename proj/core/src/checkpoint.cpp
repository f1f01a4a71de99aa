#include "pcsc/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pcsc::nn {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ParseError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_tensors(const std::map<std::string, Matrix>& tensors,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(out, 2);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        write_pod<float>(out, static_cast<float>(m(r, c)));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

std::map<std::string, Matrix> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported format version");
  auto count = read_pod<std::uint32_t>(in);

  std::map<std::string, Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ParseError("checkpoint: truncated tensor name");
    auto rank = read_pod<std::uint32_t>(in);
    if (rank != 2) throw ParseError("checkpoint: unsupported tensor rank");
    auto rows = read_pod<std::uint64_t>(in);
    auto cols = read_pod<std::uint64_t>(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = static_cast<double>(read_pod<float>(in));
    tensors.emplace(std::move(name), std::move(m));
  }
  return tensors;
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::map<std::string, Matrix> tensors;
  for (const auto& [name, var] : store.all()) tensors.emplace(name, var.value());
  save_tensors(tensors, path);
}

void load_checkpoint(ParamStore& store, const std::string& path) {
  auto tensors = load_tensors(path);
  if (tensors.size() != store.all().size())
    throw ParseError("checkpoint: tensor count mismatch for " + path);
  for (auto& [name, var] : store.all()) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw ParseError("checkpoint: missing tensor " + name);
    if (it->second.rows() != var.rows() || it->second.cols() != var.cols())
      throw ParseError("checkpoint: shape mismatch for " + name);
    var.mutable_value() = it->second;
  }
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("hash: cannot open " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace pcsc::nn
