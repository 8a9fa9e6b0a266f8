#include "reid/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "reid/cache.hpp"
#include "reid/dataset.hpp"
#include "reid/imagecodec.hpp"
#include "reid/regions.hpp"
#include "reid/xqda.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace reid {

namespace {

void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
    }
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) t.join();
}

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string partition_cache_path(const std::string& cache_dir, const std::string& partition) {
    return cache_dir + "/" + partition + ".lomo.bin";
}

std::string partition_keys_path(const std::string& cache_dir, const std::string& partition) {
    return cache_dir + "/" + partition + ".keys.txt";
}

void write_keys(const std::vector<std::string>& keys, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write keys file: " + path);
    }
    for (const std::string& k : keys) out << k << "\n";
}

std::vector<std::string> read_keys(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open keys file: " + path);
    }
    std::vector<std::string> keys;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) keys.push_back(line);
    }
    return keys;
}

struct Partition {
    std::vector<Sample> samples;
    std::vector<std::string> keys;
};

Partition load_partition(const RunConfig& config, const std::string& partition) {
    const std::string cache_dir = config.resolved_cache_dir();
    Partition part;
    part.samples = load_descriptors(partition_cache_path(cache_dir, partition));
    part.keys = read_keys(partition_keys_path(cache_dir, partition));
    if (part.keys.size() != part.samples.size()) {
        throw FormatError("cache and keys file disagree for partition " + partition);
    }
    if (config.fusion != FusionMode::LOMO_ONLY) {
        if (config.embeddings_path.empty()) {
            throw FusionError("fusion mode '" + std::string(to_string(config.fusion)) +
                              "' needs --embeddings");
        }
        std::string path = config.embeddings_path;
        const size_t marker = path.find("%p");
        if (marker != std::string::npos) {
            path = path.substr(0, marker) + partition + path.substr(marker + 2);
        }
        const std::map<std::string, DeepEmbedding> embeddings = load_embeddings(path);
        for (size_t i = 0; i < part.samples.size(); ++i) {
            auto it = embeddings.find(part.keys[i]);
            if (it == embeddings.end()) {
                it = embeddings.find(std::to_string(i));  // ordinal keys of binary caches
            }
            if (it == embeddings.end()) {
                throw KeyError("no embedding for image key: " + part.keys[i]);
            }
            part.samples[i].descriptor =
                fuse(it->second, part.samples[i].descriptor, config.fusion, config.alpha);
        }
    }
    return part;
}

void write_json_report(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write report: " + path);
    }
    out << j.dump(2) << "\n";
}

// Every command leaves the exact config it ran with next to its report, so
// `--config <output>/run_config.json` replays the run byte-identically.
void emit_run_config(const RunConfig& config) {
    if (config.output_dir.empty()) {
        throw FormatError("output directory must not be empty");
    }
    fs::create_directories(config.output_dir);
    std::ofstream out(config.output_dir + "/run_config.json", std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write run config into " + config.output_dir);
    }
    out << config.to_json() << "\n";
}

json cmc_report(const CmcCurve& curve, const std::vector<int>& ranks) {
    json out = json::object();
    for (int r : ranks) {
        out["rank" + std::to_string(r)] = curve.at(r);
    }
    return out;
}

}  // namespace

namespace {

void validate_ranks(const std::vector<int>& ranks) {
    int prev = 0;
    for (int r : ranks) {
        if (r <= prev) {
            throw FormatError("ranks_reported must be positive and ascending");
        }
        prev = r;
    }
}

}  // namespace

std::string RunConfig::to_json() const {
    json j;
    j["dataset_root"] = dataset_root;
    j["split_manifest"] = split_manifest;
    j["output_dir"] = output_dir;
    j["cache_dir"] = cache_dir;
    j["embeddings_path"] = embeddings_path;
    j["joints_path"] = joints_path;
    j["model_path"] = model_path;
    j["lomo"] = {{"window", lomo.window},
                 {"stride", lomo.stride},
                 {"hsv_bins_h", lomo.hsv_bins_h},
                 {"hsv_bins_s", lomo.hsv_bins_s},
                 {"hsv_bins_v", lomo.hsv_bins_v},
                 {"siltp_tau", lomo.siltp_tau},
                 {"siltp_radius_a", lomo.siltp_radius_a},
                 {"siltp_radius_b", lomo.siltp_radius_b},
                 {"siltp_neighbors", lomo.siltp_neighbors},
                 {"pyramid_levels", lomo.pyramid_levels},
                 {"downsample_factor", lomo.downsample_factor}};
    j["fusion"] = to_string(fusion);
    j["alpha"] = alpha;
    j["metric"] = to_string(metric);
    j["protocol"] = to_string(protocol);
    j["trials"] = trials;
    j["ranks_reported"] = ranks_reported;
    j["seed"] = seed;
    j["topk"] = topk;
    j["workers"] = workers;
    j["force"] = force;
    j["montage"] = montage;
    j["xqda_reg"] = xqda_reg;
    j["xqda_max_dim"] = xqda_max_dim;
    j["xqda_eig_threshold"] = xqda_eig_threshold;
    return j.dump(2);
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open config file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("config file is not valid JSON: " + std::string(e.what()));
    }
    RunConfig cfg;
    try {
        if (j.contains("dataset_root")) cfg.dataset_root = j["dataset_root"].get<std::string>();
        if (j.contains("split_manifest")) cfg.split_manifest = j["split_manifest"].get<std::string>();
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
        if (j.contains("embeddings_path")) cfg.embeddings_path = j["embeddings_path"].get<std::string>();
        if (j.contains("joints_path")) cfg.joints_path = j["joints_path"].get<std::string>();
        if (j.contains("model_path")) cfg.model_path = j["model_path"].get<std::string>();
        if (j.contains("lomo")) {
            const json& l = j["lomo"];
            if (l.contains("window")) cfg.lomo.window = l["window"].get<int>();
            if (l.contains("stride")) cfg.lomo.stride = l["stride"].get<int>();
            if (l.contains("hsv_bins_h")) cfg.lomo.hsv_bins_h = l["hsv_bins_h"].get<int>();
            if (l.contains("hsv_bins_s")) cfg.lomo.hsv_bins_s = l["hsv_bins_s"].get<int>();
            if (l.contains("hsv_bins_v")) cfg.lomo.hsv_bins_v = l["hsv_bins_v"].get<int>();
            if (l.contains("siltp_tau")) cfg.lomo.siltp_tau = l["siltp_tau"].get<float>();
            if (l.contains("siltp_radius_a")) cfg.lomo.siltp_radius_a = l["siltp_radius_a"].get<int>();
            if (l.contains("siltp_radius_b")) cfg.lomo.siltp_radius_b = l["siltp_radius_b"].get<int>();
            if (l.contains("siltp_neighbors")) cfg.lomo.siltp_neighbors = l["siltp_neighbors"].get<int>();
            if (l.contains("pyramid_levels")) cfg.lomo.pyramid_levels = l["pyramid_levels"].get<int>();
            if (l.contains("downsample_factor")) cfg.lomo.downsample_factor = l["downsample_factor"].get<int>();
        }
        if (j.contains("fusion")) cfg.fusion = fusion_mode_from_string(j["fusion"].get<std::string>());
        if (j.contains("alpha")) cfg.alpha = j["alpha"].get<float>();
        if (j.contains("metric")) cfg.metric = metric_from_string(j["metric"].get<std::string>());
        if (j.contains("protocol")) cfg.protocol = protocol_from_string(j["protocol"].get<std::string>());
        if (j.contains("trials")) cfg.trials = j["trials"].get<int>();
        if (j.contains("ranks_reported")) cfg.ranks_reported = j["ranks_reported"].get<std::vector<int>>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
        if (j.contains("topk")) cfg.topk = j["topk"].get<int>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
        if (j.contains("force")) cfg.force = j["force"].get<bool>();
        if (j.contains("montage")) cfg.montage = j["montage"].get<bool>();
        if (j.contains("xqda_reg")) cfg.xqda_reg = j["xqda_reg"].get<double>();
        if (j.contains("xqda_max_dim")) cfg.xqda_max_dim = j["xqda_max_dim"].get<int>();
        if (j.contains("xqda_eig_threshold")) cfg.xqda_eig_threshold = j["xqda_eig_threshold"].get<double>();
    } catch (const json::exception& e) {
        throw FormatError("config field has wrong type: " + std::string(e.what()));
    }
    return cfg;
}

std::string RunConfig::config_hash() const {
    std::ostringstream ss;
    ss << std::hex << fnv1a64(to_json());
    return ss.str();
}

std::string RunConfig::resolved_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    if (const char* env = std::getenv("REID_CACHE_DIR"); env != nullptr && env[0] != '\0') {
        return env;
    }
    return output_dir + "/cache";
}

std::string RunConfig::resolved_model_path() const {
    return model_path.empty() ? output_dir + "/xqda_model.bin" : model_path;
}

void cmd_split(const RunConfig& config, const std::string& dataset_kind,
               const SplitOptions& options) {
    if (config.dataset_root.empty()) {
        throw LayoutError("split needs --dataset-root");
    }
    if (config.split_manifest.empty()) {
        throw LayoutError("split needs --split (manifest output path)");
    }
    const SplitSpec spec =
        build_split(config.dataset_root, dataset_kind_from_string(dataset_kind), config.seed, options);
    try {
        validate_split(spec);
    } catch (const ProtocolError& e) {
        std::cerr << "warning: " << e.what() << "\n";
    }
    const fs::path parent = fs::path(config.split_manifest).parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
    spec.save(config.split_manifest);
}

void cmd_extract(const RunConfig& config) {
    emit_run_config(config);
    const SplitSpec split = SplitSpec::load(config.split_manifest);
    const std::string cache_dir = config.resolved_cache_dir();
    fs::create_directories(cache_dir);
    fs::create_directories(config.output_dir);
    std::map<std::string, JointSet> joints;
    if (!config.joints_path.empty()) {
        joints = load_joints(config.joints_path);
    }

    json report;
    report["config_hash"] = config.config_hash();
    report["partitions"] = json::object();
    size_t attempted = 0;
    size_t failed = 0;
    std::map<std::string, RegionBoxes> regions;

    for (const std::string partition : {"train", "val", "probe", "gallery"}) {
        const std::vector<std::string>& keys = split.partition(partition);
        json part_report;
        part_report["images"] = keys.size();
        if (keys.empty()) {
            part_report["status"] = "empty";
            report["partitions"][partition] = std::move(part_report);
            continue;
        }
        const std::string cache_path = partition_cache_path(cache_dir, partition);
        if (fs::exists(cache_path) && !config.force) {
            part_report["status"] = "skipped";
            part_report["cache"] = partition + ".lomo.bin";
            report["partitions"][partition] = std::move(part_report);
            continue;
        }

        std::vector<std::optional<Sample>> results(keys.size());
        std::vector<std::string> errors(keys.size());
        std::vector<std::optional<RegionBoxes>> boxes(keys.size());
        parallel_for(keys.size(), config.workers, [&](size_t i) {
            try {
                const PersonImage raw = read_image(config.dataset_root + "/" + keys[i]);
                const auto jt = joints.find(keys[i]);
                if (jt != joints.end()) {
                    boxes[i] = group_joints_to_regions(jt->second, raw.width, raw.height);
                }
                const PersonImage norm = normalize_size(raw);
                Sample s;
                s.descriptor = extract_lomo(norm, config.lomo);
                const SampleMeta& meta = split.meta_for(keys[i]);
                s.identity = meta.identity;
                s.camera = meta.camera;
                s.junk = meta.junk;
                results[i] = std::move(s);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });

        std::vector<Sample> samples;
        std::vector<std::string> kept_keys;
        json failures = json::array();
        for (size_t i = 0; i < keys.size(); ++i) {
            ++attempted;
            if (results[i].has_value()) {
                samples.push_back(std::move(*results[i]));
                kept_keys.push_back(keys[i]);
                if (boxes[i].has_value()) {
                    regions[keys[i]] = *boxes[i];
                }
            } else {
                ++failed;
                std::cerr << "error: extract failed for " << keys[i] << ": " << errors[i] << "\n";
                failures.push_back({{"key", keys[i]}, {"error", errors[i]}});
            }
        }
        save_descriptors(samples, cache_path);
        write_keys(kept_keys, partition_keys_path(cache_dir, partition));
        part_report["status"] = "extracted";
        part_report["cache"] = partition + ".lomo.bin";
        part_report["records"] = samples.size();
        part_report["failures"] = std::move(failures);
        report["partitions"][partition] = std::move(part_report);
    }

    if (!regions.empty()) {
        write_regions_csv(regions, config.output_dir + "/regions.csv");
        report["regions_csv"] = "regions.csv";
    }
    report["attempted"] = attempted;
    report["failed"] = failed;
    write_json_report(report, config.output_dir + "/extract_report.json");
    if (attempted > 0 && static_cast<double>(failed) > 0.10 * static_cast<double>(attempted)) {
        throw ExtractionFailed(std::to_string(failed) + " of " + std::to_string(attempted) +
                               " images failed extraction");
    }
}

namespace {

std::pair<int64_t, int64_t> count_cross_camera_pairs(const std::vector<Sample>& samples) {
    std::map<int64_t, int64_t> by_id;
    std::map<int32_t, int64_t> by_cam;
    std::map<std::pair<int64_t, int32_t>, int64_t> by_id_cam;
    const int64_t n = static_cast<int64_t>(samples.size());
    for (const Sample& s : samples) {
        ++by_id[s.identity];
        ++by_cam[s.camera];
        ++by_id_cam[{s.identity, s.camera}];
    }
    int64_t all = n * (n - 1) / 2;
    for (const auto& [cam, c] : by_cam) all -= c * (c - 1) / 2;
    int64_t intra = 0;
    for (const auto& [id, c] : by_id) intra += c * (c - 1) / 2;
    for (const auto& [key, c] : by_id_cam) intra -= c * (c - 1) / 2;
    return {intra, all - intra};
}

}  // namespace

void cmd_train(const RunConfig& config) {
    emit_run_config(config);
    const Partition train = load_partition(config, "train");
    if (train.samples.empty()) {
        throw InsufficientPairs("training cache is empty");
    }
    fs::create_directories(config.output_dir);
    XqdaTrainOptions options;
    options.reg = config.xqda_reg;
    options.max_dim = config.xqda_max_dim;
    options.eig_threshold = config.xqda_eig_threshold;
    const XqdaModel model = train_xqda(train.samples, options);
    model.save(config.resolved_model_path());

    const auto [n_intra, n_extra] = count_cross_camera_pairs(train.samples);
    json report;
    report["config_hash"] = config.config_hash();
    report["samples"] = train.samples.size();
    report["descriptor_dim"] = model.dim;
    report["selected_dim"] = model.r;
    report["intra_pairs"] = n_intra;
    report["extra_pairs"] = n_extra;
    json spectrum = json::array();
    for (int i = 0; i < model.r; ++i) spectrum.push_back(model.eigvals(i));
    report["eigenvalues"] = std::move(spectrum);
    write_json_report(report, config.output_dir + "/train_report.json");
}

void cmd_eval(const RunConfig& config) {
    validate_ranks(config.ranks_reported);
    emit_run_config(config);
    const Partition probes = load_partition(config, "probe");
    const Partition gallery = load_partition(config, "gallery");
    fs::create_directories(config.output_dir);

    XqdaModel model;
    if (config.metric == Metric::XQDA) {
        model = XqdaModel::load(config.resolved_model_path());
    }
    const Eigen::MatrixXd dist =
        distance_matrix(probes.samples, gallery.samples, config.metric,
                        config.metric == Metric::XQDA ? &model : nullptr);

    json report;
    report["config_hash"] = config.config_hash();
    report["protocol"] = to_string(config.protocol);
    report["metric"] = to_string(config.metric);
    report["fusion"] = to_string(config.fusion);
    report["seed"] = config.seed;
    report["probes"] = probes.samples.size();
    report["gallery"] = gallery.samples.size();

    if (config.protocol == ProtocolKind::SINGLE_QUERY_MAP) {
        const MapResult result = map_single_query(dist, probes.samples, gallery.samples);
        report["mAP"] = result.mean_ap;
        report["excluded_probes"] = result.excluded_probes;
        report["cmc"] = cmc_report(result.cmc, config.ranks_reported);
    } else {
        EvalProtocol protocol;
        protocol.kind = config.protocol;
        protocol.trials = config.trials;
        protocol.ranks_reported = config.ranks_reported;
        const CmcCurve curve =
            cmc_single_shot(dist, probes.samples, gallery.samples, protocol, config.seed);
        report["trials"] = config.trials;
        report["cmc"] = cmc_report(curve, config.ranks_reported);
    }
    if (config.topk > 0) {
        const std::vector<RankedList> lists =
            emit_ranked_lists(dist, probes.samples, gallery.samples, config.topk);
        write_ranked_lists_csv(lists, config.output_dir + "/ranked_lists.csv", &probes.keys,
                               &gallery.keys);
        report["ranked_lists"] = "ranked_lists.csv";
    }
    write_json_report(report, config.output_dir + "/eval_report.json");
}

void cmd_query(const RunConfig& config, const std::string& probe_key, int k) {
    emit_run_config(config);
    const Partition probes = load_partition(config, "probe");
    const Partition gallery = load_partition(config, "gallery");
    size_t probe_index = probes.keys.size();
    for (size_t i = 0; i < probes.keys.size(); ++i) {
        if (probes.keys[i] == probe_key) {
            probe_index = i;
            break;
        }
    }
    if (probe_index == probes.keys.size()) {
        throw KeyError("probe key not found in probe cache: " + probe_key);
    }
    fs::create_directories(config.output_dir);

    XqdaModel model;
    if (config.metric == Metric::XQDA) {
        model = XqdaModel::load(config.resolved_model_path());
    }
    const std::vector<Sample> one_probe{probes.samples[probe_index]};
    const std::vector<std::string> one_key{probes.keys[probe_index]};
    const Eigen::MatrixXd dist =
        distance_matrix(one_probe, gallery.samples, config.metric,
                        config.metric == Metric::XQDA ? &model : nullptr);
    const std::vector<RankedList> lists = emit_ranked_lists(dist, one_probe, gallery.samples, k);
    write_ranked_lists_csv(lists, config.output_dir + "/query_ranked.csv", &one_key, &gallery.keys);

    if (config.montage && !config.dataset_root.empty()) {
        // Probe followed by its top-k matches, 2 px separators.
        try {
            std::vector<PersonImage> tiles;
            tiles.push_back(normalize_size(read_image(config.dataset_root + "/" + probe_key)));
            for (const RankedEntry& e : lists.front().entries) {
                tiles.push_back(normalize_size(read_image(
                    config.dataset_root + "/" + gallery.keys[static_cast<size_t>(e.gallery_index)])));
            }
            const int sep = 2;
            const int mw = static_cast<int>(tiles.size()) * (kNormWidth + sep) - sep;
            PersonImage montage = PersonImage::filled(mw, kNormHeight, 255.0f, 255.0f, 255.0f);
            int x_off = 0;
            for (const PersonImage& tile : tiles) {
                for (int y = 0; y < kNormHeight; ++y) {
                    for (int x = 0; x < kNormWidth; ++x) {
                        for (int c = 0; c < 3; ++c) {
                            montage.at(x_off + x, y, c) = tile.at(x, y, c);
                        }
                    }
                }
                x_off += kNormWidth + sep;
            }
            write_ppm(montage, config.output_dir + "/query_montage.ppm");
        } catch (const InvalidImage& e) {
            std::cerr << "warning: montage skipped: " << e.what() << "\n";
        }
    }
}

void cmd_ablate(const RunConfig& config) {
    if (config.embeddings_path.empty()) {
        throw FusionError("ablate needs --embeddings");
    }
    emit_run_config(config);
    const SplitSpec split = SplitSpec::load(config.split_manifest);

    const struct {
        const char* name;
        std::vector<BodyPart> parts;
    } rows[] = {
        {"Global", {BodyPart::Global}},
        {"Head", {BodyPart::Head}},
        {"Body", {BodyPart::Upper}},
        {"Leg", {BodyPart::Lower}},
        {"Concat(Global + 3 body regions)",
         {BodyPart::Global, BodyPart::Head, BodyPart::Upper, BodyPart::Lower}},
    };

    auto build_samples = [&](const std::string& partition,
                             const std::map<std::string, DeepEmbedding>& embeddings,
                             const std::vector<BodyPart>& parts) {
        const std::vector<std::string>& keys = split.partition(partition);
        std::vector<Sample> samples;
        samples.reserve(keys.size());
        for (size_t i = 0; i < keys.size(); ++i) {
            auto it = embeddings.find(keys[i]);
            if (it == embeddings.end()) {
                it = embeddings.find(std::to_string(i));
            }
            if (it == embeddings.end()) {
                throw KeyError("no embedding for image key: " + keys[i]);
            }
            const SampleMeta& meta = split.meta_for(keys[i]);
            Sample s;
            s.descriptor = Descriptor(DescriptorKind::FUSED, part_subset(it->second, parts));
            s.identity = meta.identity;
            s.camera = meta.camera;
            s.junk = meta.junk;
            samples.push_back(std::move(s));
        }
        return samples;
    };

    std::string probe_path = config.embeddings_path;
    std::string gallery_path = config.embeddings_path;
    const size_t marker = config.embeddings_path.find("%p");
    if (marker != std::string::npos) {
        probe_path = config.embeddings_path.substr(0, marker) + "probe" +
                     config.embeddings_path.substr(marker + 2);
        gallery_path = config.embeddings_path.substr(0, marker) + "gallery" +
                       config.embeddings_path.substr(marker + 2);
    }
    const std::map<std::string, DeepEmbedding> probe_emb = load_embeddings(probe_path);
    const std::map<std::string, DeepEmbedding> gallery_emb =
        gallery_path == probe_path ? probe_emb : load_embeddings(gallery_path);

    json report;
    report["config_hash"] = config.config_hash();
    report["protocol"] = to_string(config.protocol);
    report["metric"] = "cosine";
    report["seed"] = config.seed;
    json out_rows = json::array();
    for (const auto& row : rows) {
        const std::vector<Sample> probes = build_samples("probe", probe_emb, row.parts);
        const std::vector<Sample> gallery = build_samples("gallery", gallery_emb, row.parts);
        const Eigen::MatrixXd dist = distance_matrix(probes, gallery, Metric::COSINE);
        json r;
        r["name"] = row.name;
        json part_names = json::array();
        for (BodyPart p : row.parts) part_names.push_back(to_string(p));
        r["parts"] = std::move(part_names);
        if (config.protocol == ProtocolKind::SINGLE_QUERY_MAP) {
            const MapResult result = map_single_query(dist, probes, gallery);
            r["mAP"] = result.mean_ap;
            r["rank1"] = result.cmc.at(1);
        } else {
            EvalProtocol protocol;
            protocol.kind = config.protocol;
            protocol.trials = config.trials;
            const CmcCurve curve = cmc_single_shot(dist, probes, gallery, protocol, config.seed);
            r["rank1"] = curve.at(1);
        }
        out_rows.push_back(std::move(r));
    }
    report["rows"] = std::move(out_rows);
    write_json_report(report, config.output_dir + "/ablation_report.json");
}

int exit_code_for(const Error& error) {
    static const std::map<std::string, int> codes = {
        {"FormatError", 3},      {"InvalidImage", 4},      {"LayoutError", 5},
        {"NameError", 6},        {"KeyError", 7},          {"ProtocolError", 8},
        {"InsufficientPairs", 9}, {"NumericalError", 10},  {"DimError", 11},
        {"FusionError", 12},     {"SelectionError", 13},   {"InvalidBox", 14},
        {"DegenerateRegions", 15}, {"ExtractionFailed", 16},
    };
    const auto it = codes.find(error.kind());
    return it != codes.end() ? it->second : 1;
}

namespace {

struct CommonFlags {
    std::string config_path;
    std::string dataset_root;
    std::string split_manifest;
    std::string output_dir;
    std::string cache_dir;
    std::string embeddings_path;
    std::string joints_path;
    std::string model_path;
    std::string metric;
    std::string fusion;
    std::string protocol;
    double alpha = 0.5;
    int trials = 100;
    uint64_t seed = 0;
    int topk = 0;
    int workers = 0;
    double xqda_reg = 1e-3;
    int xqda_max_dim = 0;
};

void add_common_options(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "JSON run config; flags override it");
    sub->add_option("--dataset-root", flags.dataset_root, "dataset root directory");
    sub->add_option("--split", flags.split_manifest, "split manifest path");
    sub->add_option("--output", flags.output_dir, "output directory");
    sub->add_option("--cache-dir", flags.cache_dir, "descriptor cache directory");
    sub->add_option("--embeddings", flags.embeddings_path, "deep embeddings file (CSV or cache)");
    sub->add_option("--joints", flags.joints_path, "pose joints file");
    sub->add_option("--model", flags.model_path, "XQDA model path");
    sub->add_option("--metric", flags.metric, "cosine | xqda");
    sub->add_option("--fusion", flags.fusion, "deep | lomo | concat");
    sub->add_option("--alpha", flags.alpha, "deep-vs-lomo concat weight in [0,1]");
    sub->add_option("--protocol", flags.protocol, "single_query | single_shot");
    sub->add_option("--trials", flags.trials, "single-shot trials");
    sub->add_option("--seed", flags.seed, "seed for all randomness");
    sub->add_option("--topk", flags.topk, "emit top-k ranked lists");
    sub->add_option("--workers", flags.workers, "extraction worker threads (0 = all cores)");
    sub->add_option("--reg", flags.xqda_reg, "XQDA ridge regularization");
    sub->add_option("--max-dim", flags.xqda_max_dim, "XQDA dimensionality cap");
}

RunConfig build_config(const CLI::App* sub, const CommonFlags& flags, bool force, bool montage) {
    RunConfig cfg;
    if (sub->count("--config") > 0) {
        cfg = RunConfig::from_json_file(flags.config_path);
    }
    if (sub->count("--dataset-root") > 0) cfg.dataset_root = flags.dataset_root;
    if (sub->count("--split") > 0) cfg.split_manifest = flags.split_manifest;
    if (sub->count("--output") > 0) cfg.output_dir = flags.output_dir;
    if (sub->count("--cache-dir") > 0) cfg.cache_dir = flags.cache_dir;
    if (sub->count("--embeddings") > 0) cfg.embeddings_path = flags.embeddings_path;
    if (sub->count("--joints") > 0) cfg.joints_path = flags.joints_path;
    if (sub->count("--model") > 0) cfg.model_path = flags.model_path;
    if (sub->count("--metric") > 0) cfg.metric = metric_from_string(flags.metric);
    if (sub->count("--fusion") > 0) cfg.fusion = fusion_mode_from_string(flags.fusion);
    if (sub->count("--alpha") > 0) cfg.alpha = static_cast<float>(flags.alpha);
    if (sub->count("--protocol") > 0) cfg.protocol = protocol_from_string(flags.protocol);
    if (sub->count("--trials") > 0) cfg.trials = flags.trials;
    if (sub->count("--seed") > 0) cfg.seed = flags.seed;
    if (sub->count("--topk") > 0) cfg.topk = flags.topk;
    if (sub->count("--workers") > 0) cfg.workers = flags.workers;
    if (sub->count("--reg") > 0) cfg.xqda_reg = flags.xqda_reg;
    if (sub->count("--max-dim") > 0) cfg.xqda_max_dim = flags.xqda_max_dim;
    if (force) cfg.force = true;
    if (montage) cfg.montage = true;
    return cfg;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"person re-identification toolkit: LOMO + pose regions + deep "
                 "feature fusion + XQDA + CMC/mAP evaluation"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool force = false;
    bool montage = false;
    std::string split_kind = "generic";
    SplitOptions split_options;
    std::string probe_key;

    CLI::App* split = app.add_subcommand("split", "build a split manifest from a dataset layout");
    add_common_options(split, flags);
    split->add_option("--kind", split_kind, "market | viper | cuhk03 | generic");
    split->add_option("--test-ids", split_options.cuhk03_test_ids, "CUHK03-style held-out identities");
    split->add_option("--val-fraction", split_options.val_fraction, "image-level validation holdout");

    CLI::App* extract = app.add_subcommand("extract", "extract LOMO descriptors into caches");
    add_common_options(extract, flags);
    extract->add_flag("--force", force, "recompute existing caches");

    CLI::App* train = app.add_subcommand("train", "train the XQDA metric on the train partition");
    add_common_options(train, flags);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate probe-vs-gallery retrieval");
    add_common_options(eval_cmd, flags);

    CLI::App* query = app.add_subcommand("query", "rank the gallery for one probe image");
    add_common_options(query, flags);
    query->add_option("--probe", probe_key, "probe image key")->required();
    query->add_flag("--montage", montage, "write a probe|matches strip when images resolve");

    CLI::App* ablate = app.add_subcommand("ablate", "per-part retrieval ablation over embeddings");
    add_common_options(ablate, flags);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << "error: Usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (split->parsed()) {
            cmd_split(build_config(split, flags, force, montage), split_kind, split_options);
        } else if (extract->parsed()) {
            cmd_extract(build_config(extract, flags, force, montage));
        } else if (train->parsed()) {
            cmd_train(build_config(train, flags, force, montage));
        } else if (eval_cmd->parsed()) {
            cmd_eval(build_config(eval_cmd, flags, force, montage));
        } else if (query->parsed()) {
            const RunConfig cfg = build_config(query, flags, force, montage);
            cmd_query(cfg, probe_key, cfg.topk > 0 ? cfg.topk : 10);
        } else if (ablate->parsed()) {
            cmd_ablate(build_config(ablate, flags, force, montage));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace reid
