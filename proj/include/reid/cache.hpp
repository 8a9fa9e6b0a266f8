#pragma once

#include <map>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

// Descriptor cache: little-endian binary, bit-exact across platforms.
//
//   magic "REID" | version u32 | kind u8 | dim u32 | count u64
//   per record: identity i64 | camera i32 | junk u8 | dim x f32
//
// All samples in one file share kind and dim. Truncation, trailing bytes,
// bad magic or a kind/dim mismatch raise FormatError.
inline constexpr uint32_t kCacheVersion = 1;

void save_descriptors(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> load_descriptors(const std::string& path);

// Joint file: one line per image, `key x0 y0 c0 ... x13 y13 c13`,
// whitespace separated. Blank lines and `#` comments are skipped.
std::map<std::string, JointSet> load_joints(const std::string& path);

}  // namespace reid
