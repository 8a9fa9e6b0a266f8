#include "reid/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reid/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace reid {

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "market") return DatasetKind::MARKET;
    if (s == "viper") return DatasetKind::VIPER;
    if (s == "cuhk03") return DatasetKind::CUHK03;
    if (s == "generic") return DatasetKind::GENERIC;
    throw FormatError("unknown dataset kind: " + s);
}

const char* to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::MARKET: return "market";
        case DatasetKind::VIPER: return "viper";
        case DatasetKind::CUHK03: return "cuhk03";
        case DatasetKind::GENERIC: return "generic";
    }
    return "?";
}

const SampleMeta& SplitSpec::meta_for(const std::string& key) const {
    const auto it = meta.find(key);
    if (it == meta.end()) {
        throw KeyError("no metadata for key: " + key);
    }
    return it->second;
}

const std::vector<std::string>& SplitSpec::partition(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "probe") return probe;
    if (name == "gallery") return gallery;
    throw KeyError("unknown partition: " + name);
}

SampleMeta parse_market_name(const std::string& filename) {
    static const std::regex pattern(R"(^(-?\d+)_c(\d+).*)");
    std::smatch m;
    if (!std::regex_match(filename, m, pattern)) {
        throw NameError("filename does not follow <id>_c<cam> convention: " + filename);
    }
    SampleMeta meta;
    const long long id = std::stoll(m[1].str());
    meta.camera = static_cast<int32_t>(std::stol(m[2].str()));
    if (id == -1) {
        meta.identity = -1;
        meta.junk = true;
    } else {
        meta.identity = id;  // id 0 is a distractor, kept as a negative
        meta.junk = false;
    }
    return meta;
}

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".ppm" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

std::vector<std::string> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw LayoutError("missing directory: " + dir.string());
    }
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

struct Record {
    std::string key;
    SampleMeta meta;
    std::string partition;  // empty when the layout does not assign one
};

std::vector<Record> scan_market(const fs::path& root) {
    const struct {
        const char* dir;
        const char* partition;
    } dirs[] = {{"bounding_box_train", "train"}, {"bounding_box_test", "gallery"}, {"query", "probe"}};
    std::vector<Record> records;
    for (const auto& [dir, partition] : dirs) {
        for (const std::string& name : list_images(root / dir)) {
            Record rec;
            rec.key = std::string(dir) + "/" + name;
            rec.meta = parse_market_name(name);
            rec.partition = partition;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<Record> scan_viper_cams(const fs::path& root) {
    static const std::regex id_pattern(R"(^(\d+).*)");
    std::vector<Record> records;
    for (int cam = 0; cam < 2; ++cam) {
        const std::string dir = cam == 0 ? "cam_a" : "cam_b";
        for (const std::string& name : list_images(root / dir)) {
            std::smatch m;
            if (!std::regex_match(name, m, id_pattern)) {
                throw NameError("VIPeR filename without leading identity digits: " + name);
            }
            Record rec;
            rec.key = dir + "/" + name;
            rec.meta.identity = std::stoll(m[1].str());
            rec.meta.camera = cam;
            rec.meta.junk = false;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<Record> scan_labels_csv(const fs::path& root) {
    const fs::path csv = root / "labels.csv";
    std::ifstream in(csv);
    if (!in) {
        throw LayoutError("missing labels.csv under " + root.string());
    }
    std::vector<Record> records;
    std::string line;
    bool header = true;
    int key_col = 0, id_col = 1, cam_col = 2, junk_col = -1, part_col = -1;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (header) {
            header = false;
            if (fields.empty() || fields[0] != "key") {
                throw FormatError("labels.csv must start with a header row naming 'key'");
            }
            key_col = id_col = cam_col = junk_col = part_col = -1;
            for (size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "key") key_col = static_cast<int>(i);
                else if (fields[i] == "identity") id_col = static_cast<int>(i);
                else if (fields[i] == "camera") cam_col = static_cast<int>(i);
                else if (fields[i] == "junk") junk_col = static_cast<int>(i);
                else if (fields[i] == "partition") part_col = static_cast<int>(i);
            }
            if (key_col < 0 || id_col < 0 || cam_col < 0) {
                throw FormatError("labels.csv header needs key, identity and camera columns");
            }
            continue;
        }
        auto get = [&](int col) -> const std::string& {
            if (col < 0 || static_cast<size_t>(col) >= fields.size()) {
                throw FormatError("labels.csv line " + std::to_string(lineno) + ": missing column");
            }
            return fields[static_cast<size_t>(col)];
        };
        Record rec;
        rec.key = get(key_col);
        try {
            rec.meta.identity = std::stoll(get(id_col));
            rec.meta.camera = static_cast<int32_t>(std::stol(get(cam_col)));
        } catch (const std::exception&) {
            throw FormatError("labels.csv line " + std::to_string(lineno) + ": bad id/camera");
        }
        if (junk_col >= 0 && static_cast<size_t>(junk_col) < fields.size()) {
            rec.meta.junk = get(junk_col) == "1" || get(junk_col) == "true";
        }
        if (part_col >= 0 && static_cast<size_t>(part_col) < fields.size()) {
            rec.partition = get(part_col);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void carve_validation(SplitSpec& spec, double fraction, Rng& rng) {
    if (fraction <= 0.0 || spec.train.empty()) return;
    std::vector<std::string> keys = spec.train;
    rng.shuffle(keys);
    const size_t n_val = static_cast<size_t>(fraction * static_cast<double>(keys.size()));
    const std::set<std::string> val_set(keys.begin(), keys.begin() + static_cast<long>(n_val));
    std::vector<std::string> train_keys;
    for (const std::string& k : spec.train) {
        if (val_set.count(k)) {
            spec.val.push_back(k);
        } else {
            train_keys.push_back(k);
        }
    }
    spec.train = std::move(train_keys);
}

// Identity-level holdout: shuffled identities, `test_count` of them become the
// probe/gallery pool, the rest train. Within test identities the lowest
// camera id supplies probes and the remaining cameras the gallery.
void split_by_identity(SplitSpec& spec, const std::vector<Record>& records, size_t test_count,
                       Rng& rng) {
    std::set<int64_t> id_set;
    for (const Record& r : records) {
        if (!r.meta.junk) id_set.insert(r.meta.identity);
    }
    std::vector<int64_t> ids(id_set.begin(), id_set.end());
    if (test_count >= ids.size()) {
        throw LayoutError("not enough identities to hold out " + std::to_string(test_count));
    }
    rng.shuffle(ids);
    const std::set<int64_t> test_ids(ids.end() - static_cast<long>(test_count), ids.end());

    int32_t probe_camera = 0;
    bool have_camera = false;
    for (const Record& r : records) {
        if (test_ids.count(r.meta.identity) &&
            (!have_camera || r.meta.camera < probe_camera)) {
            probe_camera = r.meta.camera;
            have_camera = true;
        }
    }
    for (const Record& r : records) {
        if (r.meta.junk) {
            spec.gallery.push_back(r.key);
        } else if (!test_ids.count(r.meta.identity)) {
            spec.train.push_back(r.key);
        } else if (r.meta.camera == probe_camera) {
            spec.probe.push_back(r.key);
        } else {
            spec.gallery.push_back(r.key);
        }
    }
}

}  // namespace

SplitSpec build_split(const std::string& root, DatasetKind kind, uint64_t seed,
                      const SplitOptions& options) {
    const fs::path root_path(root);
    if (!fs::is_directory(root_path)) {
        throw LayoutError("dataset root is not a directory: " + root);
    }
    SplitSpec spec;
    spec.dataset = root_path.filename().string();
    spec.kind = kind;
    spec.seed = seed;
    Rng rng(seed);

    std::vector<Record> records;
    switch (kind) {
        case DatasetKind::MARKET:
            records = scan_market(root_path);
            break;
        case DatasetKind::VIPER:
            records = fs::is_directory(root_path / "cam_a") ? scan_viper_cams(root_path)
                                                            : scan_labels_csv(root_path);
            break;
        case DatasetKind::CUHK03:
        case DatasetKind::GENERIC:
            records = scan_labels_csv(root_path);
            break;
    }
    if (records.empty()) {
        throw LayoutError("no images found under " + root);
    }
    std::sort(records.begin(), records.end(),
              [](const Record& a, const Record& b) { return a.key < b.key; });
    for (const Record& r : records) {
        if (!spec.meta.emplace(r.key, r.meta).second) {
            throw FormatError("duplicate key in dataset: " + r.key);
        }
    }

    const bool has_partitions =
        std::any_of(records.begin(), records.end(), [](const Record& r) { return !r.partition.empty(); });
    if (kind == DatasetKind::MARKET || (kind == DatasetKind::GENERIC && has_partitions)) {
        for (const Record& r : records) {
            if (r.partition.empty()) {
                throw FormatError("record without partition in pass-through layout: " + r.key);
            }
            if (r.partition == "train") spec.train.push_back(r.key);
            else if (r.partition == "val") spec.val.push_back(r.key);
            else if (r.partition == "probe") spec.probe.push_back(r.key);
            else if (r.partition == "gallery") spec.gallery.push_back(r.key);
            else throw FormatError("unknown partition '" + r.partition + "' for " + r.key);
        }
    } else {
        size_t test_count = 0;
        if (kind == DatasetKind::CUHK03) {
            test_count = static_cast<size_t>(options.cuhk03_test_ids);
        } else {
            std::set<int64_t> ids;
            for (const Record& r : records) {
                if (!r.meta.junk) ids.insert(r.meta.identity);
            }
            test_count = ids.size() / 2;
        }
        split_by_identity(spec, records, test_count, rng);
    }
    carve_validation(spec, options.val_fraction, rng);
    return spec;
}

void validate_split(const SplitSpec& spec) {
    auto ids_of = [&](const std::vector<std::string>& keys, bool skip_junk_distractor) {
        std::set<int64_t> ids;
        for (const std::string& k : keys) {
            const SampleMeta& m = spec.meta_for(k);
            if (skip_junk_distractor && (m.junk || m.identity == 0)) continue;
            ids.insert(m.identity);
        }
        return ids;
    };
    const std::set<int64_t> train_ids = ids_of(spec.train, true);
    const std::set<int64_t> probe_ids = ids_of(spec.probe, true);
    const std::set<int64_t> gallery_ids = ids_of(spec.gallery, true);
    for (int64_t id : probe_ids) {
        if (train_ids.count(id)) {
            throw ProtocolError("identity " + std::to_string(id) + " appears in train and probe");
        }
    }
    for (int64_t id : gallery_ids) {
        if (train_ids.count(id)) {
            throw ProtocolError("identity " + std::to_string(id) + " appears in train and gallery");
        }
    }
    if (probe_ids != gallery_ids) {
        throw ProtocolError("probe and gallery identity sets differ");
    }
    if (spec.kind == DatasetKind::VIPER || spec.kind == DatasetKind::CUHK03) {
        std::set<std::string> probe_keys(spec.probe.begin(), spec.probe.end());
        for (const std::string& k : spec.gallery) {
            if (probe_keys.count(k)) {
                throw ProtocolError("single-shot split shares image between probe and gallery: " + k);
            }
        }
    }
}

SplitSpec SplitSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open split manifest: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("split manifest is not valid JSON: " + std::string(e.what()));
    }
    SplitSpec spec;
    try {
        spec.dataset = j.at("dataset").get<std::string>();
        spec.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
        spec.seed = j.at("seed").get<uint64_t>();
        const json& parts = j.at("partitions");
        spec.train = parts.at("train").get<std::vector<std::string>>();
        spec.val = parts.at("val").get<std::vector<std::string>>();
        spec.probe = parts.at("probe").get<std::vector<std::string>>();
        spec.gallery = parts.at("gallery").get<std::vector<std::string>>();
        for (const auto& [key, m] : j.at("meta").items()) {
            SampleMeta meta;
            meta.identity = m.at("identity").get<int64_t>();
            meta.camera = m.at("camera").get<int32_t>();
            meta.junk = m.at("junk").get<bool>();
            spec.meta[key] = meta;
        }
    } catch (const json::exception& e) {
        throw FormatError("split manifest misses fields: " + std::string(e.what()));
    }
    return spec;
}

void SplitSpec::save(const std::string& path) const {
    json j;
    j["dataset"] = dataset;
    j["kind"] = to_string(kind);
    j["seed"] = seed;
    j["partitions"] = {{"train", train}, {"val", val}, {"probe", probe}, {"gallery", gallery}};
    json meta_json = json::object();
    for (const auto& [key, m] : meta) {
        meta_json[key] = {{"identity", m.identity}, {"camera", m.camera}, {"junk", m.junk}};
    }
    j["meta"] = std::move(meta_json);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write split manifest: " + path);
    }
    out << j.dump(2) << "\n";
}

}  // namespace reid
