#include "reid/imagecodec.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace reid {

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidImage("cannot open image: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Skips PPM whitespace and `#` comment lines, then parses one decimal token.
int ppm_token(const std::string& data, size_t& pos) {
    while (pos < data.size()) {
        const char c = data[pos];
        if (c == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    int value = 0;
    bool any = false;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
        value = value * 10 + (data[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) {
        throw InvalidImage("malformed PPM header");
    }
    return value;
}

PersonImage read_ppm(const std::string& data, const std::string& path) {
    size_t pos = 2;
    const int w = ppm_token(data, pos);
    const int h = ppm_token(data, pos);
    const int maxval = ppm_token(data, pos);
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw InvalidImage("unsupported PPM (need maxval 255): " + path);
    }
    ++pos;  // single whitespace after maxval
    const size_t need = static_cast<size_t>(w) * h * 3;
    if (pos + need > data.size()) {
        throw InvalidImage("truncated PPM payload: " + path);
    }
    std::vector<float> px(need);
    for (size_t i = 0; i < need; ++i) {
        px[i] = static_cast<float>(static_cast<unsigned char>(data[pos + i]));
    }
    return PersonImage(w, h, std::move(px));
}

uint32_t le32(const std::string& d, size_t pos) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(d[pos + i])) << (8 * i);
    return v;
}

uint16_t le16(const std::string& d, size_t pos) {
    return static_cast<uint16_t>(static_cast<unsigned char>(d[pos]) |
                                 (static_cast<unsigned char>(d[pos + 1]) << 8));
}

PersonImage read_bmp(const std::string& data, const std::string& path) {
    if (data.size() < 54) {
        throw InvalidImage("truncated BMP header: " + path);
    }
    const uint32_t pixel_offset = le32(data, 10);
    const int32_t w = static_cast<int32_t>(le32(data, 18));
    const int32_t h_raw = static_cast<int32_t>(le32(data, 22));
    const uint16_t bpp = le16(data, 28);
    const uint32_t compression = le32(data, 30);
    if (w <= 0 || h_raw == 0 || (bpp != 24 && bpp != 32) || compression != 0) {
        throw InvalidImage("unsupported BMP (need uncompressed 24/32 bpp): " + path);
    }
    const bool bottom_up = h_raw > 0;
    const int h = bottom_up ? h_raw : -h_raw;
    const size_t bytes_pp = bpp / 8;
    const size_t row_stride = ((static_cast<size_t>(w) * bytes_pp + 3) / 4) * 4;
    if (pixel_offset + row_stride * static_cast<size_t>(h) > data.size()) {
        throw InvalidImage("truncated BMP payload: " + path);
    }
    std::vector<float> px(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        const size_t src_row = pixel_offset + row_stride * static_cast<size_t>(bottom_up ? h - 1 - y : y);
        for (int x = 0; x < w; ++x) {
            const size_t s = src_row + static_cast<size_t>(x) * bytes_pp;
            const size_t d = (static_cast<size_t>(y) * w + x) * 3;
            px[d] = static_cast<float>(static_cast<unsigned char>(data[s + 2]));      // R
            px[d + 1] = static_cast<float>(static_cast<unsigned char>(data[s + 1]));  // G
            px[d + 2] = static_cast<float>(static_cast<unsigned char>(data[s]));      // B
        }
    }
    return PersonImage(w, h, std::move(px));
}

}  // namespace

PersonImage read_image(const std::string& path) {
    const std::string data = slurp(path);
    if (data.size() >= 2 && data[0] == 'P' && data[1] == '6') {
        return read_ppm(data, path);
    }
    if (data.size() >= 2 && data[0] == 'B' && data[1] == 'M') {
        return read_bmp(data, path);
    }
    throw InvalidImage("unrecognized image format (PPM P6 or BMP expected): " + path);
}

void write_ppm(const PersonImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidImage("cannot write PPM: " + path);
    }
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = image.at(x, y, c);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(std::fmin(255.0f, std::fmax(0.0f, v))));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) {
        throw InvalidImage("failed writing PPM payload: " + path);
    }
}

}  // namespace reid
