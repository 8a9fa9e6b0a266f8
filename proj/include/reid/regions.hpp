#pragma once

#include <map>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

// Joint index groups backing the three body regions. Hips belong to both
// the upper and lower groups, so the boxes overlap at the waist.
namespace joint_schema {
inline constexpr int kHeadTop = 0;
inline constexpr int kNeck = 1;
inline constexpr int kShoulderL = 2;
inline constexpr int kShoulderR = 3;
inline constexpr int kElbowL = 4;
inline constexpr int kElbowR = 5;
inline constexpr int kWristL = 6;
inline constexpr int kWristR = 7;
inline constexpr int kHipL = 8;
inline constexpr int kHipR = 9;
inline constexpr int kKneeL = 10;
inline constexpr int kKneeR = 11;
inline constexpr int kAnkleL = 12;
inline constexpr int kAnkleR = 13;
}  // namespace joint_schema

struct RegionOptions {
    float margin = 0.1f;   // expansion as fraction of max(boxW, boxH), per side
    bool fallback = true;  // replace degenerate boxes with fixed strips
};

// Head = bbox{head-top, neck, shoulders}; upper = bbox{neck, shoulders,
// elbows, wrists, hips}; lower = bbox{hips, knees, ankles}. Each box is
// expanded by the margin and clipped to the image. A box that degenerates
// to zero area is replaced by its fixed fallback strip (head: top 25 % of
// the image, upper: 18.75-68.75 %, lower: 62.5-100 %, full width), or
// DegenerateRegions is thrown when fallback is disabled.
RegionBoxes group_joints_to_regions(const JointSet& joints, int image_width, int image_height,
                                    const RegionOptions& options = {});

// Exact sub-grid copy; the box is snapped outward to whole pixels.
// Out-of-bounds or empty boxes throw InvalidBox.
PersonImage crop_region(const PersonImage& image, const Box& box);

// CSV emission, one `key,region,x0,y0,x1,y1` line per box, regions in
// head/upper/lower order, keys in map order.
void write_regions_csv(const std::map<std::string, RegionBoxes>& regions, const std::string& path);

}  // namespace reid
