#include "reid/lomo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace reid {

void LomoConfig::validate() const {
    if (stride < 1 || window < stride) {
        throw FormatError("lomo: require window >= stride >= 1");
    }
    if (hsv_bins_h < 1 || hsv_bins_s < 1 || hsv_bins_v < 1 || hsv_hist_size() != 512) {
        throw FormatError("lomo: HSV bin product must be 512");
    }
    if (siltp_tau <= 0.0f || !std::isfinite(siltp_tau)) {
        throw FormatError("lomo: siltp_tau must be positive");
    }
    if (siltp_neighbors != 4) {
        throw FormatError("lomo: SILTP coder uses the 4-neighbor cross (3^4 = 81 codes)");
    }
    if (siltp_radius_a < 1 || siltp_radius_b < 1) {
        throw FormatError("lomo: SILTP radii must be >= 1");
    }
    if (pyramid_levels < 1 || downsample_factor < 2) {
        throw FormatError("lomo: need >= 1 pyramid level and downsample factor >= 2");
    }
}

LomoLayout lomo_layout(const LomoConfig& config, int width, int height) {
    config.validate();
    LomoLayout layout;
    layout.band_feature_dim = config.hsv_hist_size() + 2 * 81;
    int w = width;
    int h = height;
    for (int level = 0; level < config.pyramid_levels; ++level) {
        if (level > 0) {
            if (w % config.downsample_factor != 0 || h % config.downsample_factor != 0) {
                throw FormatError("lomo: image size not divisible across pyramid levels");
            }
            w /= config.downsample_factor;
            h /= config.downsample_factor;
        }
        if (w < config.window || h < config.window) {
            throw FormatError("lomo: pyramid level smaller than the sliding window");
        }
        LomoLayout::Level lv;
        lv.width = w;
        lv.height = h;
        lv.bands = (h - config.window) / config.stride + 1;
        lv.windows_per_band = (w - config.window) / config.stride + 1;
        layout.bands_total += lv.bands;
        layout.levels.push_back(lv);
    }
    layout.descriptor_dim = layout.bands_total * layout.band_feature_dim;
    return layout;
}

HsvPixel rgb_to_hsv(float r, float g, float b) {
    const float maxc = std::max(r, std::max(g, b));
    const float minc = std::min(r, std::min(g, b));
    const float delta = maxc - minc;
    HsvPixel out;
    out.v = maxc / 255.0f;
    out.s = maxc > 0.0f ? delta / maxc : 0.0f;
    float h = 0.0f;
    if (delta > 0.0f) {
        if (maxc == r) {
            h = 60.0f * ((g - b) / delta);
        } else if (maxc == g) {
            h = 60.0f * ((b - r) / delta + 2.0f);
        } else {
            h = 60.0f * ((r - g) / delta + 4.0f);
        }
        if (h < 0.0f) h += 360.0f;
        if (h >= 360.0f) h = 0.0f;
    }
    out.h = h;
    return out;
}

std::vector<PyramidLevel> build_pyramid(const PersonImage& image, const LomoConfig& config) {
    const LomoLayout layout = lomo_layout(config, image.width, image.height);
    std::vector<PyramidLevel> levels;
    levels.reserve(layout.levels.size());
    std::vector<float> rgb = image.pixels;  // current level, interleaved
    int w = image.width;
    int h = image.height;
    const int f = config.downsample_factor;
    for (size_t li = 0; li < layout.levels.size(); ++li) {
        if (li > 0) {
            const int nw = w / f;
            const int nh = h / f;
            std::vector<float> pooled(static_cast<size_t>(nw) * nh * 3);
            const double inv = 1.0 / (f * f);
            for (int y = 0; y < nh; ++y) {
                for (int x = 0; x < nw; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        double acc = 0.0;
                        for (int dy = 0; dy < f; ++dy) {
                            for (int dx = 0; dx < f; ++dx) {
                                acc += rgb[((static_cast<size_t>(y) * f + dy) * w + x * f + dx) * 3 + c];
                            }
                        }
                        pooled[(static_cast<size_t>(y) * nw + x) * 3 + c] =
                            static_cast<float>(acc * inv);
                    }
                }
            }
            rgb = std::move(pooled);
            w = nw;
            h = nh;
        }
        PyramidLevel level;
        level.width = w;
        level.height = h;
        level.hsv.resize(static_cast<size_t>(w) * h);
        level.intensity.resize(static_cast<size_t>(w) * h);
        for (size_t i = 0; i < level.hsv.size(); ++i) {
            level.hsv[i] = rgb_to_hsv(rgb[i * 3], rgb[i * 3 + 1], rgb[i * 3 + 2]);
            // Max channel on the [0, 255] scale. Dividing by 255 here would
            // add a rounding step that breaks exact SILTP scale invariance.
            level.intensity[i] = std::max(rgb[i * 3], std::max(rgb[i * 3 + 1], rgb[i * 3 + 2]));
        }
        levels.push_back(std::move(level));
    }
    return levels;
}

std::vector<float> hsv_joint_histogram(const HsvPixel* hsv, int stride, int w, int h,
                                       const LomoConfig& config) {
    std::vector<float> hist(config.hsv_hist_size(), 0.0f);
    const float h_scale = config.hsv_bins_h / 360.0f;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const HsvPixel& p = hsv[static_cast<size_t>(y) * stride + x];
            const int hb = std::min(static_cast<int>(p.h * h_scale), config.hsv_bins_h - 1);
            const int sb = std::min(static_cast<int>(p.s * config.hsv_bins_s), config.hsv_bins_s - 1);
            const int vb = std::min(static_cast<int>(p.v * config.hsv_bins_v), config.hsv_bins_v - 1);
            hist[(static_cast<size_t>(hb) * config.hsv_bins_s + sb) * config.hsv_bins_v + vb] += 1.0f;
        }
    }
    return hist;
}

int siltp_code(float center, const std::array<float, 4>& neighbors, float tau) {
    // Thresholds in double so the band edges do not pick up float rounding.
    const double up = (1.0 + static_cast<double>(tau)) * static_cast<double>(center);
    const double down = (1.0 - static_cast<double>(tau)) * static_cast<double>(center);
    int code = 0;
    int pow3 = 1;
    for (int k = 0; k < 4; ++k) {
        int digit = 0;
        if (static_cast<double>(neighbors[k]) > up) {
            digit = 1;
        } else if (static_cast<double>(neighbors[k]) < down) {
            digit = 2;
        }
        code += digit * pow3;
        pow3 *= 3;
    }
    return code;
}

std::vector<float> siltp_histogram(const float* intensity, int stride, int w, int h,
                                   int radius, float tau) {
    auto sample = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return intensity[static_cast<size_t>(y) * stride + x];
    };
    std::vector<float> hist(81, 0.0f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::array<float, 4> nb = {
                sample(x, y - radius),  // up
                sample(x + radius, y),  // right
                sample(x, y + radius),  // down
                sample(x - radius, y),  // left
            };
            hist[siltp_code(sample(x, y), nb, tau)] += 1.0f;
        }
    }
    return hist;
}

namespace {

void max_into(std::vector<float>& acc, const std::vector<float>& h) {
    for (size_t i = 0; i < acc.size(); ++i) {
        acc[i] = std::max(acc[i], h[i]);
    }
}

}  // namespace

Descriptor extract_lomo(const PersonImage& image, const LomoConfig& config) {
    if (!image.is_normalized()) {
        throw InvalidImage("extract_lomo expects a normalized 128x48 image");
    }
    const LomoLayout layout = lomo_layout(config, image.width, image.height);
    const std::vector<PyramidLevel> pyramid = build_pyramid(image, config);
    const int hsv_size = config.hsv_hist_size();
    const int band_dim = layout.band_feature_dim;

    std::vector<float> desc(static_cast<size_t>(layout.descriptor_dim));
    size_t offset = 0;
    for (size_t li = 0; li < pyramid.size(); ++li) {
        const PyramidLevel& level = pyramid[li];
        const LomoLayout::Level& geo = layout.levels[li];
        for (int band = 0; band < geo.bands; ++band) {
            const int y = band * config.stride;
            std::vector<float> hsv_max(hsv_size, 0.0f);
            std::vector<float> siltp_a_max(81, 0.0f);
            std::vector<float> siltp_b_max(81, 0.0f);
            for (int wi = 0; wi < geo.windows_per_band; ++wi) {
                const int x = wi * config.stride;
                const size_t base = static_cast<size_t>(y) * geo.width + x;
                max_into(hsv_max, hsv_joint_histogram(&level.hsv[base], geo.width, config.window,
                                                      config.window, config));
                max_into(siltp_a_max,
                         siltp_histogram(&level.intensity[base], geo.width, config.window,
                                         config.window, config.siltp_radius_a, config.siltp_tau));
                max_into(siltp_b_max,
                         siltp_histogram(&level.intensity[base], geo.width, config.window,
                                         config.window, config.siltp_radius_b, config.siltp_tau));
            }
            std::copy(hsv_max.begin(), hsv_max.end(), desc.begin() + offset);
            std::copy(siltp_a_max.begin(), siltp_a_max.end(), desc.begin() + offset + hsv_size);
            std::copy(siltp_b_max.begin(), siltp_b_max.end(),
                      desc.begin() + offset + hsv_size + 81);
            offset += band_dim;
        }
    }

    for (float& v : desc) {
        v = std::log1p(v);
    }

    // L2-normalize the HSV family and the SILTP family independently.
    double hsv_norm_sq = 0.0;
    double siltp_norm_sq = 0.0;
    for (int band = 0; band < layout.bands_total; ++band) {
        const size_t base = static_cast<size_t>(band) * band_dim;
        for (int i = 0; i < hsv_size; ++i) {
            hsv_norm_sq += static_cast<double>(desc[base + i]) * desc[base + i];
        }
        for (int i = hsv_size; i < band_dim; ++i) {
            siltp_norm_sq += static_cast<double>(desc[base + i]) * desc[base + i];
        }
    }
    const float hsv_scale = hsv_norm_sq > 0.0 ? static_cast<float>(1.0 / std::sqrt(hsv_norm_sq)) : 0.0f;
    const float siltp_scale =
        siltp_norm_sq > 0.0 ? static_cast<float>(1.0 / std::sqrt(siltp_norm_sq)) : 0.0f;
    for (int band = 0; band < layout.bands_total; ++band) {
        const size_t base = static_cast<size_t>(band) * band_dim;
        for (int i = 0; i < hsv_size; ++i) {
            desc[base + i] *= hsv_scale;
        }
        for (int i = hsv_size; i < band_dim; ++i) {
            desc[base + i] *= siltp_scale;
        }
    }
    return Descriptor(DescriptorKind::LOMO, std::move(desc));
}

namespace {

int parse_int(const std::string& value, const std::string& key) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw FormatError("lomo config: bad integer for " + key + ": " + value);
    }
}

float parse_float(const std::string& value, const std::string& key) {
    try {
        size_t pos = 0;
        const float v = std::stof(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw FormatError("lomo config: bad number for " + key + ": " + value);
    }
}

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

LomoConfig LomoConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open lomo config: " + path);
    }
    LomoConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("lomo config: expected key=value, got: " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "window") cfg.window = parse_int(value, key);
        else if (key == "stride") cfg.stride = parse_int(value, key);
        else if (key == "hsv_bins_h") cfg.hsv_bins_h = parse_int(value, key);
        else if (key == "hsv_bins_s") cfg.hsv_bins_s = parse_int(value, key);
        else if (key == "hsv_bins_v") cfg.hsv_bins_v = parse_int(value, key);
        else if (key == "siltp_tau") cfg.siltp_tau = parse_float(value, key);
        else if (key == "siltp_radius_a") cfg.siltp_radius_a = parse_int(value, key);
        else if (key == "siltp_radius_b") cfg.siltp_radius_b = parse_int(value, key);
        else if (key == "siltp_neighbors") cfg.siltp_neighbors = parse_int(value, key);
        else if (key == "pyramid_levels") cfg.pyramid_levels = parse_int(value, key);
        else if (key == "downsample_factor") cfg.downsample_factor = parse_int(value, key);
        else throw FormatError("lomo config: unknown key: " + key);
    }
    cfg.validate();
    return cfg;
}

void LomoConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write lomo config: " + path);
    }
    out << "window=" << window << "\n"
        << "stride=" << stride << "\n"
        << "hsv_bins_h=" << hsv_bins_h << "\n"
        << "hsv_bins_s=" << hsv_bins_s << "\n"
        << "hsv_bins_v=" << hsv_bins_v << "\n"
        << "siltp_tau=" << siltp_tau << "\n"
        << "siltp_radius_a=" << siltp_radius_a << "\n"
        << "siltp_radius_b=" << siltp_radius_b << "\n"
        << "siltp_neighbors=" << siltp_neighbors << "\n"
        << "pyramid_levels=" << pyramid_levels << "\n"
        << "downsample_factor=" << downsample_factor << "\n";
}

}  // namespace reid
