// Shared synthetic fixtures for unit and acceptance tests.
#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "reid/fusion.hpp"
#include "reid/imagecodec.hpp"
#include "reid/rng.hpp"
#include "reid/types.hpp"

namespace reid::fixtures {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("reid_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

inline PersonImage random_image(Rng& rng, int w = kNormWidth, int h = kNormHeight) {
    std::vector<float> px(static_cast<size_t>(w) * h * 3);
    for (float& v : px) {
        v = static_cast<float>(rng.uniform(0.0, 255.0));
    }
    return PersonImage(w, h, std::move(px));
}

// Two-camera retrieval benchmark with the identity signal confined to a
// low-dimensional subspace, constant per-camera offsets and anisotropic
// nuisance noise. Cosine matching suffers from the offsets and the noisy
// dimensions; a learned cross-view metric isolates the signal block.
struct SyntheticBenchmark {
    std::vector<Sample> train;
    std::vector<Sample> probe;    // camera 0
    std::vector<Sample> gallery;  // camera 1
};

struct BenchmarkParams {
    int dim = 256;
    int signal_dims = 10;
    int train_ids = 40;
    int test_ids = 20;
    int train_images_per_camera = 4;
    int test_images_per_camera = 2;
    double signal_sigma = 3.0;
    double signal_noise = 0.5;
    double camera_offset_sigma = 4.0;
    double nuisance_noise_min = 1.0;
    double nuisance_noise_max = 3.0;
};

inline SyntheticBenchmark make_benchmark(uint64_t seed, const BenchmarkParams& p = {}) {
    Rng rng(seed);
    std::vector<std::vector<double>> camera_offset(2, std::vector<double>(p.dim));
    for (auto& offset : camera_offset) {
        for (double& v : offset) v = rng.normal(0.0, p.camera_offset_sigma);
    }
    std::vector<double> noise_sigma(p.dim);
    for (int j = 0; j < p.dim; ++j) {
        noise_sigma[static_cast<size_t>(j)] =
            j < p.signal_dims ? p.signal_noise
                              : rng.uniform(p.nuisance_noise_min, p.nuisance_noise_max);
    }
    auto draw_identity = [&] {
        std::vector<double> s(static_cast<size_t>(p.signal_dims));
        for (double& v : s) v = rng.normal(0.0, p.signal_sigma);
        return s;
    };
    auto draw_sample = [&](const std::vector<double>& sig, int64_t id, int cam) {
        std::vector<float> values(static_cast<size_t>(p.dim));
        for (int j = 0; j < p.dim; ++j) {
            double v = camera_offset[static_cast<size_t>(cam)][static_cast<size_t>(j)] +
                       rng.normal(0.0, noise_sigma[static_cast<size_t>(j)]);
            if (j < p.signal_dims) v += sig[static_cast<size_t>(j)];
            values[static_cast<size_t>(j)] = static_cast<float>(v);
        }
        Sample s;
        s.descriptor = Descriptor(DescriptorKind::FUSED, std::move(values));
        s.identity = id;
        s.camera = cam;
        return s;
    };

    SyntheticBenchmark bench;
    for (int id = 0; id < p.train_ids; ++id) {
        const std::vector<double> sig = draw_identity();
        for (int cam = 0; cam < 2; ++cam) {
            for (int i = 0; i < p.train_images_per_camera; ++i) {
                bench.train.push_back(draw_sample(sig, id, cam));
            }
        }
    }
    for (int t = 0; t < p.test_ids; ++t) {
        const int64_t id = 1000 + t;
        const std::vector<double> sig = draw_identity();
        for (int i = 0; i < p.test_images_per_camera; ++i) {
            bench.probe.push_back(draw_sample(sig, id, 0));
            bench.gallery.push_back(draw_sample(sig, id, 1));
        }
    }
    return bench;
}

// Part embeddings where the global part carries most of the identity signal
// and the three body parts carry weaker complementary slices. Returns
// key -> embedding plus the metadata needed for a manifest.
struct AblationFixture {
    std::vector<std::string> probe_keys;
    std::vector<std::string> gallery_keys;
    std::vector<int64_t> identities;  // parallel to probe/gallery per index
    std::vector<std::vector<float>> probe_embeddings;    // 1024 floats each
    std::vector<std::vector<float>> gallery_embeddings;
};

inline AblationFixture make_ablation_fixture(uint64_t seed, int n_ids = 50,
                                             int images_per_side = 2) {
    Rng rng(seed);
    const int sig_dim = 48;
    AblationFixture fx;
    std::vector<std::vector<double>> signatures(static_cast<size_t>(n_ids));
    for (auto& sig : signatures) {
        sig.resize(sig_dim);
        for (double& v : sig) v = rng.normal(0.0, 1.0);
    }
    // Per-part noise levels: global sees the full signature but noisily
    // enough to leave mistakes for the parts to fix; each part sees one
    // third of the signature.
    const double global_noise = 1.45;
    const double part_noise = 1.2;
    auto emit = [&](int id, Rng& r) {
        std::vector<float> emb(static_cast<size_t>(kPartDim) * kNumParts, 0.0f);
        const std::vector<double>& sig = signatures[static_cast<size_t>(id)];
        for (int j = 0; j < sig_dim; ++j) {
            emb[static_cast<size_t>(j)] =
                static_cast<float>(sig[static_cast<size_t>(j)] + r.normal(0.0, global_noise));
        }
        for (int part = 1; part < kNumParts; ++part) {
            const int slice = sig_dim / 3;
            for (int j = 0; j < slice; ++j) {
                const int src = (part - 1) * slice + j;
                emb[static_cast<size_t>(part * kPartDim + j)] = static_cast<float>(
                    sig[static_cast<size_t>(src)] + r.normal(0.0, part_noise));
            }
        }
        return emb;
    };
    for (int id = 0; id < n_ids; ++id) {
        for (int i = 0; i < images_per_side; ++i) {
            fx.probe_keys.push_back("p" + std::to_string(id) + "_" + std::to_string(i));
            fx.gallery_keys.push_back("g" + std::to_string(id) + "_" + std::to_string(i));
            fx.identities.push_back(id);
            fx.probe_embeddings.push_back(emit(id, rng));
            fx.gallery_embeddings.push_back(emit(id, rng));
        }
    }
    return fx;
}

inline void write_embeddings_csv(const std::string& path,
                                 const std::vector<std::string>& keys,
                                 const std::vector<std::vector<float>>& embeddings) {
    std::ofstream out(path, std::ios::trunc);
    for (size_t i = 0; i < keys.size(); ++i) {
        out << keys[i];
        char buf[48];
        for (float v : embeddings[i]) {
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
}

// Color-coded person crops: one vivid base color per identity, a camera
// tint, and deterministic per-image jitter. Enough signal for LOMO+XQDA to
// separate identities at fixture scale.
inline PersonImage synth_person_image(int id, int cam, int img, int w = 40, int h = 100) {
    static const float palette[8][3] = {{200, 40, 40},  {40, 200, 40},  {40, 40, 200},
                                        {200, 200, 40}, {200, 40, 200}, {40, 200, 200},
                                        {230, 120, 30}, {120, 30, 230}};
    const float* base = palette[id % 8];
    Rng rng(static_cast<uint64_t>(id) * 9973 + static_cast<uint64_t>(cam) * 131 +
            static_cast<uint64_t>(img));
    std::vector<float> px(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = base[c];
                if (cam == 1) v += (c == 0 ? 15.0f : -10.0f);
                v += static_cast<float>(rng.uniform(-8.0, 8.0));
                // Mild vertical structure so SILTP sees texture.
                v += 10.0f * static_cast<float>((y / 8) % 2);
                px[(static_cast<size_t>(y) * w + x) * 3 + c] =
                    std::min(255.0f, std::max(0.0f, v));
            }
        }
    }
    return PersonImage(w, h, std::move(px));
}

// Writes images/ + labels.csv for the generic dataset layout.
inline void write_image_dataset(const std::filesystem::path& root, int n_ids, int cams,
                                int imgs_per) {
    std::filesystem::create_directories(root / "images");
    std::ofstream csv((root / "labels.csv").string());
    csv << "key,identity,camera\n";
    for (int id = 0; id < n_ids; ++id) {
        for (int cam = 0; cam < cams; ++cam) {
            for (int k = 0; k < imgs_per; ++k) {
                const std::string key = "images/id" + std::to_string(id) + "_c" +
                                        std::to_string(cam) + "_" + std::to_string(k) + ".ppm";
                write_ppm(synth_person_image(id, cam, k), (root / key).string());
                csv << key << ',' << id << ',' << cam << "\n";
            }
        }
    }
}

}  // namespace reid::fixtures
