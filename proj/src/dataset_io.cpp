#include "skelattack/dataset_io.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "skelattack/binary_io.hpp"
#include "skelattack/error.hpp"

namespace skelattack {

namespace {
constexpr char kMagic[] = "SKEL";
// Upper bound on a single sequence's scalar count; rejects corrupt headers
// before allocating.
constexpr std::uint64_t kMaxScalars = std::uint64_t{1} << 31;
}  // namespace

std::string encode_dataset(const std::vector<SkeletalSequence>& sequences) {
  std::ostringstream out(std::ios::binary);
  io::write_tag(out, kMagic);
  io::write_u32(out, kDatasetVersion);
  io::write_u32(out, static_cast<std::uint32_t>(sequences.size()));
  for (const SkeletalSequence& seq : sequences) {
    const Tensor3& x = seq.frames();
    io::write_u32(out, static_cast<std::uint32_t>(x.frames()));
    io::write_u32(out, static_cast<std::uint32_t>(x.joints()));
    io::write_u32(out, static_cast<std::uint32_t>(x.channels()));
    io::write_i32(out, seq.label().value_or(-1));
    for (double v : x.flat()) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) throw Error("cannot write non-finite coordinate");
      io::write_f32(out, f);
    }
  }
  return out.str();
}

std::vector<SkeletalSequence> decode_dataset(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  io::expect_tag(in, kMagic);
  const std::uint32_t version = io::read_u32(in, "version");
  if (version != kDatasetVersion) {
    throw Error("unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t count = io::read_u32(in, "sequence count");
  std::vector<SkeletalSequence> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t frames = io::read_u32(in, "frame count");
    const std::uint32_t joints = io::read_u32(in, "joint count");
    const std::uint32_t channels = io::read_u32(in, "channel count");
    const std::int32_t label = io::read_i32(in, "label");
    const std::uint64_t scalars = std::uint64_t{frames} * joints * channels;
    if (scalars > kMaxScalars) throw Error("sequence header declares too many values");
    if (scalars * 4 > bytes.size()) {
      throw Error("truncated file while reading sequence " + std::to_string(i));
    }
    Tensor3 x(frames, joints, channels);
    for (double& v : x.flat()) {
      const float f = io::read_f32(in, "coordinates");
      if (!std::isfinite(f)) {
        throw Error("non-finite coordinate in sequence " + std::to_string(i));
      }
      v = f;
    }
    std::optional<int> maybe_label;
    if (label >= 0) {
      maybe_label = label;
    } else if (label != -1) {
      throw Error("invalid label " + std::to_string(label));
    }
    out.emplace_back(std::move(x), SkeletonTopology::for_joint_count(joints), maybe_label);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error("trailing bytes after last sequence");
  }
  return out;
}

void write_dataset(const std::filesystem::path& path,
                   const std::vector<SkeletalSequence>& sequences) {
  io::write_file_atomic(path, encode_dataset(sequences));
}

std::vector<SkeletalSequence> read_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path));
}

}  // namespace skelattack
