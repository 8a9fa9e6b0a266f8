#pragma once

#include <array>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

// Parameters of the LOMO descriptor. The defaults are the unique
// conventional configuration that yields 40 * (512 + 81 + 81) = 26960
// dimensions on a 128x48 image.
struct LomoConfig {
    int window = 10;            // sliding subwindow side, pixels
    int stride = 5;             // subwindow step, pixels
    int hsv_bins_h = 8;
    int hsv_bins_s = 8;
    int hsv_bins_v = 8;
    float siltp_tau = 0.3f;
    int siltp_radius_a = 3;
    int siltp_radius_b = 5;
    int siltp_neighbors = 4;  // fixed cross; 3^4 = 81 codes
    int pyramid_levels = 3;
    int downsample_factor = 2;

    int hsv_hist_size() const { return hsv_bins_h * hsv_bins_s * hsv_bins_v; }

    void validate() const;  // throws FormatError on inconsistent values

    // Plain `key=value` config file, one entry per line.
    static LomoConfig load(const std::string& path);
    void save(const std::string& path) const;
};

// Per-level window geometry for a given config and image size.
struct LomoLayout {
    struct Level {
        int width = 0;
        int height = 0;
        int bands = 0;             // window rows, floor((H - win) / stride) + 1
        int windows_per_band = 0;  // fully-inside windows per row
    };
    std::vector<Level> levels;
    int bands_total = 0;
    int band_feature_dim = 0;  // hsv bins + 2 * 81
    int descriptor_dim = 0;
};

LomoLayout lomo_layout(const LomoConfig& config, int width, int height);

struct HsvPixel {
    float h;  // [0, 360)
    float s;  // [0, 1]
    float v;  // [0, 1]
};

// Standard hexcone conversion, channels in [0, 255].
HsvPixel rgb_to_hsv(float r, float g, float b);

// Pyramid level: HSV per pixel plus the max-channel intensity (0..255 scale)
// that SILTP runs on.
struct PyramidLevel {
    int width = 0;
    int height = 0;
    std::vector<HsvPixel> hsv;
    std::vector<float> intensity;
};

// Three levels at 128x48, 64x24, 32x12; each one is the previous RGB grid
// downsampled by 2x2 average pooling and then converted.
std::vector<PyramidLevel> build_pyramid(const PersonImage& image, const LomoConfig& config);

// Joint HSV histogram over a window: 8 uniform bins per channel,
// bin = h_bin * 64 + s_bin * 8 + v_bin. Bin values sum to the pixel count.
std::vector<float> hsv_joint_histogram(const HsvPixel* hsv, int stride, int w, int h,
                                       const LomoConfig& config);

// SILTP ternary code of a center against its 4 neighbors in fixed order
// (up, right, down, left): digit 1 if n > (1+tau)*c, 2 if n < (1-tau)*c,
// else 0; code = sum digit_k * 3^k. Range [0, 80].
int siltp_code(float center, const std::array<float, 4>& neighbors, float tau);

// 81-bin histogram of SILTP codes over an intensity window. The window is
// replicate-padded by `radius` so every pixel is coded; bins sum to w*h.
std::vector<float> siltp_histogram(const float* intensity, int stride, int w, int h,
                                   int radius, float tau);

// The LOMO descriptor: per pyramid level, slide window x stride subwindows;
// windows sharing a vertical position form a band; per band take the
// element-wise max of the HSV and of each SILTP scale histogram; concatenate
// bands as [hsv | siltp_r3 | siltp_r5], apply log(1+x), then L2-normalize
// the HSV family and the SILTP family of the full vector independently.
Descriptor extract_lomo(const PersonImage& image, const LomoConfig& config = {});

}  // namespace reid
