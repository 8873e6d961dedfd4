#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace skelattack::io {

// Little-endian primitives for the on-disk formats. Readers throw Error on
// short reads, naming `what` in the message.
void write_tag(std::ostream& out, std::string_view tag);
void write_u32(std::ostream& out, std::uint32_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);

void expect_tag(std::istream& in, std::string_view tag);
std::uint32_t read_u32(std::istream& in, std::string_view what);
std::int32_t read_i32(std::istream& in, std::string_view what);
float read_f32(std::istream& in, std::string_view what);
double read_f64(std::istream& in, std::string_view what);

// Writes `contents` to a sibling temporary file and renames it over `path`,
// so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace skelattack::io
