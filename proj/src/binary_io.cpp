#include "asr/binary_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace asr::io {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw IoError("cannot read " + path);
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
  if (!bytes.empty() && !in.read(reinterpret_cast<char*>(bytes.data()), size)) throw IoError("cannot read " + path);
  return bytes;
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot write " + path + ": " + ec.message());
}

std::size_t verify_sealed(const std::vector<unsigned char>& bytes, const std::string& what) {
  if (bytes.size() < sizeof(std::uint64_t)) throw IoError(what + ": truncated file");
  const std::size_t n = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + n, sizeof(stored));
  if (stored != fnv1a(bytes.data(), n)) throw IoError(what + ": checksum mismatch (truncated or corrupt)");
  return n;
}

}  // namespace asr::io
