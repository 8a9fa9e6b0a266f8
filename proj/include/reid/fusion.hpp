#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

inline constexpr int kPartDim = 256;
inline constexpr int kNumParts = 4;

enum class BodyPart : int { Global = 0, Head = 1, Upper = 2, Lower = 3 };

const char* to_string(BodyPart part);

// Externally computed deep features: one 256-dim vector per part, ordered
// global, head, upper, lower.
struct DeepEmbedding {
    std::array<std::vector<float>, kNumParts> parts;

    DeepEmbedding() = default;
    explicit DeepEmbedding(std::vector<float> concatenated);  // 1024 floats

    std::vector<float> concatenated() const;
};

// Embedding file ingestion. Two layouts are accepted and sniffed by magic:
//  - descriptor cache with kind=DEEP, dim=1024 (record = global||head||
//    upper||lower); keys are the decimal record ordinal, aligned with the
//    manifest partition the cache was written for;
//  - CSV `key,v0,...,v1023`, keys explicit and unique.
std::map<std::string, DeepEmbedding> load_embeddings(const std::string& path);

// v / ||v||_2; the zero vector maps to itself.
std::vector<float> l2_normalize(const std::vector<float>& v);

enum class FusionMode { DEEP_ONLY, LOMO_ONLY, CONCAT };

FusionMode fusion_mode_from_string(const std::string& s);
const char* to_string(FusionMode mode);

// DEEP_ONLY: the four parts, each L2-normalized, concatenated (1024 dims).
// LOMO_ONLY: the LOMO vector unchanged. CONCAT: [alpha * deep || (1-alpha)
// * lomo], 27984 dims, kind FUSED.
Descriptor fuse(const DeepEmbedding& deep, const Descriptor& lomo, FusionMode mode,
                float alpha = 0.5f);

// Concatenation of the selected parts, each L2-normalized, in fixed
// global/head/upper/lower order. Empty selection throws SelectionError.
std::vector<float> part_subset(const DeepEmbedding& deep, const std::vector<BodyPart>& parts);

}  // namespace reid
