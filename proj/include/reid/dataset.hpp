#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

enum class DatasetKind {
    MARKET,   // bounding_box_train/ + bounding_box_test/ + query/, pass-through
    VIPER,    // identities halved into train/test by seeded shuffle
    CUHK03,   // fixed test identity count, rest train
    GENERIC,  // images/ + labels.csv with explicit partitions
};

DatasetKind dataset_kind_from_string(const std::string& s);
const char* to_string(DatasetKind kind);

struct SampleMeta {
    int64_t identity = 0;
    int32_t camera = 0;
    bool junk = false;
};

// Key lists plus per-key metadata. Keys are paths relative to the dataset
// root, so they double as image locators.
struct SplitSpec {
    std::string dataset;
    DatasetKind kind = DatasetKind::GENERIC;
    uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> probe;
    std::vector<std::string> gallery;
    std::map<std::string, SampleMeta> meta;

    const SampleMeta& meta_for(const std::string& key) const;
    const std::vector<std::string>& partition(const std::string& name) const;

    // JSON manifest round-trip; memberships and the seed are preserved.
    static SplitSpec load(const std::string& path);
    void save(const std::string& path) const;
};

// Market/Duke filename convention `<id>_c<cam>...`: id -1 means junk,
// id 0 is a distractor (kept as a gallery negative). NameError otherwise.
SampleMeta parse_market_name(const std::string& filename);

struct SplitOptions {
    int cuhk03_test_ids = 100;
    double val_fraction = 0.0;  // image-level holdout carved from train
};

// Scan a dataset directory into a deterministic split. Market layouts are
// passed through verbatim; VIPeR halves the identities; CUHK03 holds out a
// fixed identity count. GENERIC expects images/ + labels.csv
// (`key,identity,camera[,junk][,partition]`) and uses explicit partitions
// when the column is present, VIPeR-style halving otherwise.
SplitSpec build_split(const std::string& root, DatasetKind kind, uint64_t seed,
                      const SplitOptions& options = {});

// Train/test identity disjointness plus the protocol-specific probe/gallery
// relation (Market: probe ids == non-junk non-distractor gallery ids;
// single-shot: equal id sets with disjoint images). Throws ProtocolError.
void validate_split(const SplitSpec& spec);

}  // namespace reid
