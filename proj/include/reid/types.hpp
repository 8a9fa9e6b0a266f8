#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "reid/errors.hpp"

namespace reid {

// Canonical person-crop size consumed by the descriptor stage.
inline constexpr int kNormWidth = 48;
inline constexpr int kNormHeight = 128;

// Row-major interleaved RGB grid. Channels are floats in [0, 255] so that
// resampling and intensity scaling stay exact; construction validates range
// (which also rejects NaN).
struct PersonImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;  // size == width * height * 3

    PersonImage() = default;
    PersonImage(int w, int h, std::vector<float> px);

    static PersonImage filled(int w, int h, float r, float g, float b);

    float at(int x, int y, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float& at(int x, int y, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    bool is_normalized() const { return width == kNormWidth && height == kNormHeight; }
};

// Bilinear resample to the canonical 128x48 grid (align-corners convention,
// so the four corner pixels are copied through exactly). Idempotent on
// already-normalized images.
PersonImage normalize_size(const PersonImage& image);

enum class DescriptorKind : uint8_t { LOMO = 0, DEEP = 1, FUSED = 2 };

const char* to_string(DescriptorKind kind);

inline constexpr uint32_t kLomoDim = 26960;
inline constexpr uint32_t kDeepDim = 1024;
inline constexpr uint32_t kFusedDim = kLomoDim + kDeepDim;

// Dense feature vector. LOMO and DEEP kinds have fixed dimensionality;
// FUSED covers everything else (fused vectors and synthetic features).
// All entries must be finite.
struct Descriptor {
    DescriptorKind kind = DescriptorKind::FUSED;
    uint32_t dim = 0;
    std::vector<float> values;

    Descriptor() = default;
    Descriptor(DescriptorKind k, std::vector<float> v);
};

// The unit of training and evaluation. Junk samples are kept in galleries
// but never counted as correct matches.
struct Sample {
    Descriptor descriptor;
    int64_t identity = 0;
    int32_t camera = 0;
    bool junk = false;
};

struct Joint {
    float x = 0.0f;
    float y = 0.0f;
    float confidence = 0.0f;
};

inline constexpr int kNumJoints = 14;

// 14 body joints in image pixel coordinates. Index convention:
// 0 head-top, 1 neck, 2/3 shoulders, 4/5 elbows, 6/7 wrists,
// 8/9 hips, 10/11 knees, 12/13 ankles.
struct JointSet {
    std::array<Joint, kNumJoints> joints{};

    JointSet() = default;
    explicit JointSet(const std::array<Joint, kNumJoints>& j);
};

// Axis-aligned rectangle in pixel units, exclusive upper bounds: the box
// covers columns [x0, x1) and rows [y0, y1).
struct Box {
    float x0 = 0.0f;
    float y0 = 0.0f;
    float x1 = 0.0f;
    float y1 = 0.0f;

    float width() const { return x1 - x0; }
    float height() const { return y1 - y0; }
    bool valid() const { return x0 < x1 && y0 < y1; }
};

struct RegionBoxes {
    Box head;
    Box upper;
    Box lower;
};

}  // namespace reid
