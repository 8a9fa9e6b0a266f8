#include "reid/regions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>

namespace reid {

namespace {

using namespace joint_schema;

Box bounding_box(const JointSet& joints, std::initializer_list<int> indices) {
    Box box{1e30f, 1e30f, -1e30f, -1e30f};
    for (int i : indices) {
        const Joint& j = joints.joints[static_cast<size_t>(i)];
        box.x0 = std::min(box.x0, j.x);
        box.y0 = std::min(box.y0, j.y);
        box.x1 = std::max(box.x1, j.x);
        box.y1 = std::max(box.y1, j.y);
    }
    return box;
}

Box expand_and_clip(Box box, float margin, int w, int h) {
    const float pad = margin * std::max(box.width(), box.height());
    box.x0 = std::max(0.0f, box.x0 - pad);
    box.y0 = std::max(0.0f, box.y0 - pad);
    box.x1 = std::min(static_cast<float>(w), box.x1 + pad);
    box.y1 = std::min(static_cast<float>(h), box.y1 + pad);
    return box;
}

}  // namespace

RegionBoxes group_joints_to_regions(const JointSet& joints, int image_width, int image_height,
                                    const RegionOptions& options) {
    if (image_width <= 0 || image_height <= 0) {
        throw InvalidBox("image dimensions must be positive");
    }
    RegionBoxes boxes;
    boxes.head = bounding_box(joints, {kHeadTop, kNeck, kShoulderL, kShoulderR});
    boxes.upper = bounding_box(joints, {kNeck, kShoulderL, kShoulderR, kElbowL, kElbowR, kWristL,
                                        kWristR, kHipL, kHipR});
    boxes.lower = bounding_box(joints, {kHipL, kHipR, kKneeL, kKneeR, kAnkleL, kAnkleR});

    const float w = static_cast<float>(image_width);
    const float h = static_cast<float>(image_height);
    // Fallback strips sized for typical pedestrian proportions.
    const Box head_strip{0.0f, 0.0f, w, 0.25f * h};
    const Box upper_strip{0.0f, 0.1875f * h, w, 0.6875f * h};
    const Box lower_strip{0.0f, 0.625f * h, w, h};

    const Box* strips[3] = {&head_strip, &upper_strip, &lower_strip};
    Box* targets[3] = {&boxes.head, &boxes.upper, &boxes.lower};
    for (int i = 0; i < 3; ++i) {
        Box clipped = expand_and_clip(*targets[i], options.margin, image_width, image_height);
        if (!clipped.valid()) {
            if (!options.fallback) {
                throw DegenerateRegions("region box degenerated to zero area");
            }
            clipped = *strips[i];
        }
        *targets[i] = clipped;
    }
    return boxes;
}

PersonImage crop_region(const PersonImage& image, const Box& box) {
    if (!box.valid()) {
        throw InvalidBox("crop box has zero or negative area");
    }
    const int x0 = static_cast<int>(std::floor(box.x0));
    const int y0 = static_cast<int>(std::floor(box.y0));
    const int x1 = static_cast<int>(std::ceil(box.x1));
    const int y1 = static_cast<int>(std::ceil(box.y1));
    if (x0 < 0 || y0 < 0 || x1 > image.width || y1 > image.height) {
        throw InvalidBox("crop box outside image bounds");
    }
    const int cw = x1 - x0;
    const int ch = y1 - y0;
    std::vector<float> px(static_cast<size_t>(cw) * ch * 3);
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            for (int c = 0; c < 3; ++c) {
                px[(static_cast<size_t>(y) * cw + x) * 3 + c] = image.at(x0 + x, y0 + y, c);
            }
        }
    }
    return PersonImage(cw, ch, std::move(px));
}

void write_regions_csv(const std::map<std::string, RegionBoxes>& regions, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write regions csv: " + path);
    }
    out << "key,region,x0,y0,x1,y1\n";
    for (const auto& [key, boxes] : regions) {
        const std::pair<const char*, const Box*> rows[3] = {
            {"head", &boxes.head}, {"upper", &boxes.upper}, {"lower", &boxes.lower}};
        for (const auto& [name, box] : rows) {
            out << key << ',' << name << ',' << box->x0 << ',' << box->y0 << ',' << box->x1 << ','
                << box->y1 << "\n";
        }
    }
}

}  // namespace reid
