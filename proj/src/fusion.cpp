#include "reid/fusion.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "reid/cache.hpp"

namespace reid {

const char* to_string(BodyPart part) {
    switch (part) {
        case BodyPart::Global: return "global";
        case BodyPart::Head: return "head";
        case BodyPart::Upper: return "upper";
        case BodyPart::Lower: return "lower";
    }
    return "?";
}

DeepEmbedding::DeepEmbedding(std::vector<float> concatenated) {
    if (concatenated.size() != static_cast<size_t>(kPartDim) * kNumParts) {
        throw FormatError("deep embedding must have " + std::to_string(kPartDim * kNumParts) +
                          " values, got " + std::to_string(concatenated.size()));
    }
    for (float v : concatenated) {
        if (!std::isfinite(v)) {
            throw FormatError("deep embedding entries must be finite");
        }
    }
    for (int p = 0; p < kNumParts; ++p) {
        parts[p].assign(concatenated.begin() + static_cast<long>(p) * kPartDim,
                        concatenated.begin() + static_cast<long>(p + 1) * kPartDim);
    }
}

std::vector<float> DeepEmbedding::concatenated() const {
    std::vector<float> out;
    out.reserve(kPartDim * kNumParts);
    for (const auto& part : parts) {
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

namespace {

std::map<std::string, DeepEmbedding> load_embeddings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open embeddings file: " + path);
    }
    std::map<std::string, DeepEmbedding> result;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        if (!std::getline(ss, key, ',')) continue;
        if (lineno == 1 && key == "key") continue;  // optional header row
        std::vector<float> values;
        values.reserve(kPartDim * kNumParts);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                size_t pos = 0;
                values.push_back(std::stof(field, &pos));
                if (pos != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw FormatError("embeddings line " + std::to_string(lineno) +
                                  ": bad float field '" + field + "'");
            }
        }
        if (values.size() != static_cast<size_t>(kPartDim) * kNumParts) {
            throw FormatError("embeddings line " + std::to_string(lineno) + ": expected " +
                              std::to_string(kPartDim * kNumParts) + " values, got " +
                              std::to_string(values.size()));
        }
        if (!result.emplace(key, DeepEmbedding(std::move(values))).second) {
            throw FormatError("duplicate embedding key: " + key);
        }
    }
    return result;
}

std::map<std::string, DeepEmbedding> load_embeddings_cache(const std::string& path) {
    const std::vector<Sample> samples = load_descriptors(path);
    std::map<std::string, DeepEmbedding> result;
    for (size_t i = 0; i < samples.size(); ++i) {
        const Descriptor& d = samples[i].descriptor;
        if (d.kind != DescriptorKind::DEEP || d.dim != kDeepDim) {
            throw FormatError("embedding cache must hold DEEP descriptors of dim " +
                              std::to_string(kDeepDim));
        }
        result.emplace(std::to_string(i), DeepEmbedding(d.values));
    }
    return result;
}

}  // namespace

std::map<std::string, DeepEmbedding> load_embeddings(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
        throw FormatError("cannot open embeddings file: " + path);
    }
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    if (std::string(magic, 4) == "REID") {
        return load_embeddings_cache(path);
    }
    return load_embeddings_csv(path);
}

std::vector<float> l2_normalize(const std::vector<float>& v) {
    double norm_sq = 0.0;
    for (float x : v) {
        norm_sq += static_cast<double>(x) * x;
    }
    if (norm_sq == 0.0) {
        return v;
    }
    const float scale = static_cast<float>(1.0 / std::sqrt(norm_sq));
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] * scale;
    }
    return out;
}

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "deep") return FusionMode::DEEP_ONLY;
    if (s == "lomo") return FusionMode::LOMO_ONLY;
    if (s == "concat") return FusionMode::CONCAT;
    throw FormatError("unknown fusion mode: " + s);
}

const char* to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::DEEP_ONLY: return "deep";
        case FusionMode::LOMO_ONLY: return "lomo";
        case FusionMode::CONCAT: return "concat";
    }
    return "?";
}

Descriptor fuse(const DeepEmbedding& deep, const Descriptor& lomo, FusionMode mode, float alpha) {
    if (lomo.kind != DescriptorKind::LOMO) {
        throw FusionError("fuse expects a LOMO descriptor, got " +
                          std::string(to_string(lomo.kind)));
    }
    if (!(alpha >= 0.0f && alpha <= 1.0f)) {
        throw FusionError("alpha must lie in [0, 1]");
    }
    switch (mode) {
        case FusionMode::LOMO_ONLY:
            return lomo;
        case FusionMode::DEEP_ONLY: {
            std::vector<float> out;
            out.reserve(kDeepDim);
            for (const auto& part : deep.parts) {
                const std::vector<float> n = l2_normalize(part);
                out.insert(out.end(), n.begin(), n.end());
            }
            return Descriptor(DescriptorKind::DEEP, std::move(out));
        }
        case FusionMode::CONCAT: {
            std::vector<float> out;
            out.reserve(kFusedDim);
            for (const auto& part : deep.parts) {
                const std::vector<float> n = l2_normalize(part);
                for (float v : n) {
                    out.push_back(alpha * v);
                }
            }
            const float beta = 1.0f - alpha;
            for (float v : lomo.values) {
                out.push_back(beta * v);
            }
            return Descriptor(DescriptorKind::FUSED, std::move(out));
        }
    }
    throw FusionError("unreachable fusion mode");
}

std::vector<float> part_subset(const DeepEmbedding& deep, const std::vector<BodyPart>& parts) {
    if (parts.empty()) {
        throw SelectionError("part subset must not be empty");
    }
    // Fixed output order regardless of selector order.
    bool selected[kNumParts] = {false, false, false, false};
    for (BodyPart p : parts) {
        selected[static_cast<int>(p)] = true;
    }
    std::vector<float> out;
    for (int p = 0; p < kNumParts; ++p) {
        if (!selected[p]) continue;
        const std::vector<float> n = l2_normalize(deep.parts[p]);
        out.insert(out.end(), n.begin(), n.end());
    }
    return out;
}

}  // namespace reid
