#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skelattack/motion.hpp"

namespace skelattack {

// DatasetFile layout (all little-endian):
//   "SKEL" | u32 version | u32 sequence_count
//   per sequence: u32 T | u32 J | u32 C | i32 label (-1 = absent)
//                 T*J*C f32, frame-major
// Topology is not stored; readers assume standard25 for J == 25 and a chain
// otherwise.
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_dataset(const std::vector<SkeletalSequence>& sequences);
std::vector<SkeletalSequence> decode_dataset(const std::string& bytes);

void write_dataset(const std::filesystem::path& path,
                   const std::vector<SkeletalSequence>& sequences);
std::vector<SkeletalSequence> read_dataset(const std::filesystem::path& path);

}  // namespace skelattack
