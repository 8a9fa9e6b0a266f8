#include "reid/types.hpp"

#include <cmath>

namespace reid {

namespace {

void check_channel_range(const std::vector<float>& px) {
    for (float v : px) {
        // NaN fails both comparisons.
        if (!(v >= 0.0f && v <= 255.0f)) {
            throw InvalidImage("pixel channel outside [0, 255]");
        }
    }
}

}  // namespace

PersonImage::PersonImage(int w, int h, std::vector<float> px)
    : width(w), height(h), pixels(std::move(px)) {
    if (width <= 0 || height <= 0) {
        throw InvalidImage("non-positive image dimensions");
    }
    if (pixels.size() != static_cast<size_t>(width) * height * 3) {
        throw InvalidImage("pixel count does not match width*height");
    }
    check_channel_range(pixels);
}

PersonImage PersonImage::filled(int w, int h, float r, float g, float b) {
    std::vector<float> px(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < px.size(); i += 3) {
        px[i] = r;
        px[i + 1] = g;
        px[i + 2] = b;
    }
    return PersonImage(w, h, std::move(px));
}

PersonImage normalize_size(const PersonImage& image) {
    if (image.width < 2 || image.height < 2) {
        throw InvalidImage("normalize_size needs at least a 2x2 input");
    }
    if (image.is_normalized()) {
        return image;
    }
    const int ow = kNormWidth;
    const int oh = kNormHeight;
    std::vector<float> out(static_cast<size_t>(ow) * oh * 3);
    const double sx = static_cast<double>(image.width - 1) / (ow - 1);
    const double sy = static_cast<double>(image.height - 1) / (oh - 1);
    for (int y = 0; y < oh; ++y) {
        const double fy = y * sy;
        int y0 = static_cast<int>(fy);
        if (y0 > image.height - 2) y0 = image.height - 2;
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            const double fx = x * sx;
            int x0 = static_cast<int>(fx);
            if (x0 > image.width - 2) x0 = image.width - 2;
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = image.at(x0, y0, c) * (1.0 - wx) + image.at(x0 + 1, y0, c) * wx;
                const double bot =
                    image.at(x0, y0 + 1, c) * (1.0 - wx) + image.at(x0 + 1, y0 + 1, c) * wx;
                out[(static_cast<size_t>(y) * ow + x) * 3 + c] =
                    static_cast<float>(top * (1.0 - wy) + bot * wy);
            }
        }
    }
    return PersonImage(ow, oh, std::move(out));
}

const char* to_string(DescriptorKind kind) {
    switch (kind) {
        case DescriptorKind::LOMO: return "LOMO";
        case DescriptorKind::DEEP: return "DEEP";
        case DescriptorKind::FUSED: return "FUSED";
    }
    return "?";
}

Descriptor::Descriptor(DescriptorKind k, std::vector<float> v)
    : kind(k), dim(static_cast<uint32_t>(v.size())), values(std::move(v)) {
    if (dim == 0) {
        throw FormatError("descriptor must not be empty");
    }
    if (kind == DescriptorKind::LOMO && dim != kLomoDim) {
        throw FormatError("LOMO descriptor must have " + std::to_string(kLomoDim) +
                          " dimensions, got " + std::to_string(dim));
    }
    if (kind == DescriptorKind::DEEP && dim != kDeepDim) {
        throw FormatError("DEEP descriptor must have " + std::to_string(kDeepDim) +
                          " dimensions, got " + std::to_string(dim));
    }
    for (float x : values) {
        if (!std::isfinite(x)) {
            throw FormatError("descriptor entries must be finite");
        }
    }
}

JointSet::JointSet(const std::array<Joint, kNumJoints>& j) : joints(j) {
    for (const Joint& joint : joints) {
        if (!std::isfinite(joint.x) || !std::isfinite(joint.y)) {
            throw FormatError("joint coordinates must be finite");
        }
        if (!(joint.confidence >= 0.0f && joint.confidence <= 1.0f)) {
            throw FormatError("joint confidence outside [0, 1]");
        }
    }
}

}  // namespace reid
