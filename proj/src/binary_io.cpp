#include "skelattack/binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "skelattack/error.hpp"

namespace skelattack::io {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, std::string_view what) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw Error("truncated file while reading " + std::string(what));
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace

void write_tag(std::ostream& out, std::string_view tag) {
  out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
}
void write_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void write_i32(std::ostream& out, std::int32_t v) { put_le(out, v); }
void write_f32(std::ostream& out, float v) { put_le(out, v); }
void write_f64(std::ostream& out, double v) { put_le(out, v); }

void expect_tag(std::istream& in, std::string_view tag) {
  std::string got(tag.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size()))) {
    throw Error("truncated file while reading magic");
  }
  if (got != tag) throw Error("bad magic: expected '" + std::string(tag) + "'");
}

std::uint32_t read_u32(std::istream& in, std::string_view what) {
  return get_le<std::uint32_t>(in, what);
}
std::int32_t read_i32(std::istream& in, std::string_view what) {
  return get_le<std::int32_t>(in, what);
}
float read_f32(std::istream& in, std::string_view what) { return get_le<float>(in, what); }
double read_f64(std::istream& in, std::string_view what) {
  return get_le<double>(in, what);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace skelattack::io
