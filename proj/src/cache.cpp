#include "reid/cache.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace reid {

namespace {

constexpr char kMagic[4] = {'R', 'E', 'I', 'D'};

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_integral_v<T>);
    for (size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
    }
}

void put_f32(std::string& out, float value) {
    uint32_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    put_le(out, bits);
}

class Reader {
public:
    Reader(const char* data, size_t size) : data_(data), size_(size) {}

    template <typename T>
    T get_le() {
        need(sizeof(T));
        uint64_t v = 0;
        for (size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    float get_f32() {
        const uint32_t bits = get_le<uint32_t>();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    void get_bytes(char* dst, size_t n) {
        need(n);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }

    size_t remaining() const { return size_ - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > size_) {
            throw FormatError("descriptor cache truncated");
        }
    }

    const char* data_;
    size_t size_;
    size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void save_descriptors(const std::vector<Sample>& samples, const std::string& path) {
    DescriptorKind kind = DescriptorKind::LOMO;
    uint32_t dim = 0;
    if (!samples.empty()) {
        kind = samples.front().descriptor.kind;
        dim = samples.front().descriptor.dim;
        for (const Sample& s : samples) {
            if (s.descriptor.kind != kind || s.descriptor.dim != dim) {
                throw FormatError("samples in one cache must share kind and dim");
            }
        }
    }
    std::string out;
    out.reserve(21 + samples.size() * (13 + static_cast<size_t>(dim) * 4));
    out.append(kMagic, 4);
    put_le<uint32_t>(out, kCacheVersion);
    put_le<uint8_t>(out, static_cast<uint8_t>(kind));
    put_le<uint32_t>(out, dim);
    put_le<uint64_t>(out, samples.size());
    for (const Sample& s : samples) {
        put_le<int64_t>(out, s.identity);
        put_le<int32_t>(out, s.camera);
        put_le<uint8_t>(out, s.junk ? 1 : 0);
        for (float v : s.descriptor.values) {
            put_f32(out, v);
        }
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file || !file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw FormatError("cannot write descriptor cache: " + path);
    }
}

std::vector<Sample> load_descriptors(const std::string& path) {
    const std::string blob = read_file(path);
    Reader r(blob.data(), blob.size());
    char magic[4];
    r.get_bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad magic in descriptor cache: " + path);
    }
    const uint32_t version = r.get_le<uint32_t>();
    if (version != kCacheVersion) {
        throw FormatError("unsupported cache version " + std::to_string(version));
    }
    const uint8_t kind_byte = r.get_le<uint8_t>();
    if (kind_byte > 2) {
        throw FormatError("unknown descriptor kind byte " + std::to_string(kind_byte));
    }
    const auto kind = static_cast<DescriptorKind>(kind_byte);
    const uint32_t dim = r.get_le<uint32_t>();
    const uint64_t count = r.get_le<uint64_t>();
    const size_t record_bytes = 13 + static_cast<size_t>(dim) * 4;
    if (r.remaining() != count * record_bytes) {
        throw FormatError("descriptor cache size mismatch (truncated or trailing bytes)");
    }
    std::vector<Sample> samples;
    samples.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        Sample s;
        s.identity = r.get_le<int64_t>();
        s.camera = r.get_le<int32_t>();
        s.junk = r.get_le<uint8_t>() != 0;
        std::vector<float> values(dim);
        for (uint32_t j = 0; j < dim; ++j) {
            values[j] = r.get_f32();
        }
        s.descriptor = Descriptor(kind, std::move(values));
        samples.push_back(std::move(s));
    }
    return samples;
}

std::map<std::string, JointSet> load_joints(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open joints file: " + path);
    }
    std::map<std::string, JointSet> result;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::array<Joint, kNumJoints> joints;
        for (int j = 0; j < kNumJoints; ++j) {
            if (!(ss >> joints[j].x >> joints[j].y >> joints[j].confidence)) {
                throw FormatError("joints line " + std::to_string(lineno) +
                                  ": expected 14 x y conf triples");
            }
        }
        float extra;
        if (ss >> extra) {
            throw FormatError("joints line " + std::to_string(lineno) + ": trailing tokens");
        }
        if (!result.emplace(key, JointSet(joints)).second) {
            throw FormatError("duplicate joints key: " + key);
        }
    }
    return result;
}

}  // namespace reid
