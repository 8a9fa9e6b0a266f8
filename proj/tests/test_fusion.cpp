#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fixtures.hpp"
#include "reid/cache.hpp"
#include "reid/fusion.hpp"
#include "reid/rng.hpp"

using namespace reid;

namespace {

std::vector<float> random_embedding(Rng& rng) {
    std::vector<float> v(static_cast<size_t>(kPartDim) * kNumParts);
    for (float& x : v) x = static_cast<float>(rng.normal());
    return v;
}

Descriptor dummy_lomo(float fill = 0.125f) {
    return Descriptor(DescriptorKind::LOMO, std::vector<float>(kLomoDim, fill));
}

}  // namespace

TEST_CASE("l2_normalize") {
    const std::vector<float> v = l2_normalize({3.0f, 4.0f});
    CHECK(v[0] == doctest::Approx(0.6f));
    CHECK(v[1] == doctest::Approx(0.8f));

    const std::vector<float> zero = l2_normalize({0.0f, 0.0f, 0.0f});
    CHECK(zero == std::vector<float>{0.0f, 0.0f, 0.0f});

    Rng rng(53);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<float> x(16);
        for (float& e : x) e = static_cast<float>(rng.normal(0.0, 5.0));
        const std::vector<float> n = l2_normalize(x);
        double norm = 0.0;
        for (float e : n) norm += static_cast<double>(e) * e;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("load_embeddings from CSV") {
    fixtures::TempDir tmp("emb");
    const std::string path = tmp.str() + "/emb.csv";

    SUBCASE("empty file gives an empty map") {
        std::ofstream(path) << "";
        CHECK(load_embeddings(path).empty());
    }

    SUBCASE("one 1024-float record parses") {
        Rng rng(59);
        const std::vector<float> values = random_embedding(rng);
        fixtures::write_embeddings_csv(path, {"img_0"}, {values});
        const auto map = load_embeddings(path);
        REQUIRE(map.size() == 1);
        const DeepEmbedding& emb = map.at("img_0");
        CHECK(emb.parts[0].size() == 256);
        CHECK(emb.parts[3].size() == 256);
        CHECK(emb.parts[0][0] == doctest::Approx(values[0]));
        CHECK(emb.parts[3][255] == doctest::Approx(values[1023]));
    }

    SUBCASE("short record is a FormatError") {
        std::ofstream out(path);
        out << "img_0";
        for (int i = 0; i < 1000; ++i) out << ",0.5";
        out << "\n";
        out.close();
        CHECK_THROWS_AS(load_embeddings(path), FormatError);
    }

    SUBCASE("duplicate key is a FormatError") {
        Rng rng(61);
        const std::vector<float> values = random_embedding(rng);
        fixtures::write_embeddings_csv(path, {"img_0", "img_0"}, {values, values});
        CHECK_THROWS_AS(load_embeddings(path), FormatError);
    }
}

TEST_CASE("load_embeddings from a DEEP descriptor cache uses ordinal keys") {
    fixtures::TempDir tmp("embbin");
    const std::string path = tmp.str() + "/emb.bin";
    Rng rng(67);
    std::vector<Sample> samples;
    for (int i = 0; i < 3; ++i) {
        Sample s;
        s.descriptor = Descriptor(DescriptorKind::DEEP, random_embedding(rng));
        s.identity = i;
        s.camera = 0;
        samples.push_back(std::move(s));
    }
    save_descriptors(samples, path);
    const auto map = load_embeddings(path);
    REQUIRE(map.size() == 3);
    CHECK(map.count("0") == 1);
    CHECK(map.count("2") == 1);
    CHECK(map.at("1").parts[0][0] == samples[1].descriptor.values[0]);

    SUBCASE("LOMO cache is rejected as embeddings") {
        const std::string lomo_path = tmp.str() + "/lomo.bin";
        save_descriptors({Sample{dummy_lomo(), 0, 0, false}}, lomo_path);
        CHECK_THROWS_AS(load_embeddings(lomo_path), FormatError);
    }
}

TEST_CASE("fuse modes") {
    Rng rng(71);
    const DeepEmbedding deep{random_embedding(rng)};
    const Descriptor lomo = dummy_lomo();

    SUBCASE("CONCAT dims and alpha weighting") {
        const Descriptor fused = fuse(deep, lomo, FusionMode::CONCAT, 0.5f);
        CHECK(fused.kind == DescriptorKind::FUSED);
        CHECK(fused.dim == 27984);

        const Descriptor all_deep = fuse(deep, lomo, FusionMode::CONCAT, 1.0f);
        for (size_t i = kDeepDim; i < all_deep.values.size(); ++i) {
            CHECK(all_deep.values[i] == 0.0f);
        }
    }

    SUBCASE("LOMO_ONLY passes the descriptor through") {
        const Descriptor out = fuse(deep, lomo, FusionMode::LOMO_ONLY);
        CHECK(out.kind == DescriptorKind::LOMO);
        CHECK(out.values == lomo.values);
    }

    SUBCASE("CONCAT is the bilinear form [alpha*deep || (1-alpha)*lomo]") {
        const float alpha = 0.3f;
        const Descriptor fused = fuse(deep, lomo, FusionMode::CONCAT, alpha);
        const Descriptor norm_deep = fuse(deep, lomo, FusionMode::DEEP_ONLY);
        for (size_t i = 0; i < kDeepDim; ++i) {
            CHECK(fused.values[i] == alpha * norm_deep.values[i]);
        }
        for (size_t i = 0; i < kLomoDim; ++i) {
            CHECK(fused.values[kDeepDim + i] == (1.0f - alpha) * lomo.values[i]);
        }
    }

    SUBCASE("DEEP_ONLY of axis-aligned unit parts has exactly 4 ones") {
        std::vector<float> sparse(static_cast<size_t>(kPartDim) * kNumParts, 0.0f);
        for (int p = 0; p < kNumParts; ++p) {
            sparse[static_cast<size_t>(p) * kPartDim] = 2.0f;  // e1-aligned, non-unit scale
        }
        const Descriptor out = fuse(DeepEmbedding{sparse}, lomo, FusionMode::DEEP_ONLY);
        CHECK(out.kind == DescriptorKind::DEEP);
        CHECK(out.dim == kDeepDim);
        int ones = 0, zeros = 0;
        for (float v : out.values) {
            if (v == 1.0f) ++ones;
            else if (v == 0.0f) ++zeros;
        }
        CHECK(ones == 4);
        CHECK(zeros == static_cast<int>(kDeepDim) - 4);
    }

    SUBCASE("non-LOMO second argument is a FusionError") {
        const Descriptor deep_desc(DescriptorKind::DEEP, random_embedding(rng));
        CHECK_THROWS_AS(fuse(deep, deep_desc, FusionMode::CONCAT), FusionError);
    }
}

TEST_CASE("part_subset") {
    Rng rng(73);
    const DeepEmbedding deep{random_embedding(rng)};

    CHECK(part_subset(deep, {BodyPart::Global}).size() == 256);
    CHECK_THROWS_AS(part_subset(deep, {}), SelectionError);

    SUBCASE("all four parts equal DEEP_ONLY fusion") {
        const std::vector<float> all = part_subset(
            deep, {BodyPart::Global, BodyPart::Head, BodyPart::Upper, BodyPart::Lower});
        const Descriptor fused = fuse(deep, dummy_lomo(), FusionMode::DEEP_ONLY);
        CHECK(all == fused.values);
    }

    SUBCASE("head+lower subset keeps fixed order") {
        const std::vector<float> sub = part_subset(deep, {BodyPart::Lower, BodyPart::Head});
        REQUIRE(sub.size() == 512);
        const std::vector<float> head = l2_normalize(deep.parts[1]);
        for (int i = 0; i < 256; ++i) {
            CHECK(sub[static_cast<size_t>(i)] == head[static_cast<size_t>(i)]);
        }
    }
}

TEST_CASE("cosine ranking of DEEP_ONLY vectors ignores per-part rescaling") {
    Rng rng(79);
    const auto cosine_order = [](const std::vector<std::vector<float>>& gallery,
                                 const std::vector<float>& probe) {
        std::vector<double> sims;
        for (const auto& g : gallery) {
            double dot = 0, ng = 0, np = 0;
            for (size_t i = 0; i < g.size(); ++i) {
                dot += static_cast<double>(g[i]) * probe[i];
                ng += static_cast<double>(g[i]) * g[i];
                np += static_cast<double>(probe[i]) * probe[i];
            }
            sims.push_back(dot / std::sqrt(ng * np));
        }
        std::vector<int> order(sims.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return sims[static_cast<size_t>(a)] > sims[static_cast<size_t>(b)]; });
        return order;
    };

    for (int rep = 0; rep < 10; ++rep) {
        std::vector<std::vector<float>> raw;
        for (int i = 0; i < 6; ++i) raw.push_back(random_embedding(rng));
        const std::vector<float> probe_raw = random_embedding(rng);

        const float scales[kNumParts] = {static_cast<float>(rng.uniform(0.1, 10.0)),
                                         static_cast<float>(rng.uniform(0.1, 10.0)),
                                         static_cast<float>(rng.uniform(0.1, 10.0)),
                                         static_cast<float>(rng.uniform(0.1, 10.0))};
        auto rescale = [&](std::vector<float> v) {
            for (int p = 0; p < kNumParts; ++p) {
                for (int i = 0; i < kPartDim; ++i) {
                    v[static_cast<size_t>(p * kPartDim + i)] *= scales[p];
                }
            }
            return v;
        };

        const Descriptor lomo = dummy_lomo();
        std::vector<std::vector<float>> plain, scaled;
        for (const auto& r : raw) {
            plain.push_back(fuse(DeepEmbedding{r}, lomo, FusionMode::DEEP_ONLY).values);
            scaled.push_back(fuse(DeepEmbedding{rescale(r)}, lomo, FusionMode::DEEP_ONLY).values);
        }
        const std::vector<float> probe_plain =
            fuse(DeepEmbedding{probe_raw}, lomo, FusionMode::DEEP_ONLY).values;
        const std::vector<float> probe_scaled =
            fuse(DeepEmbedding{rescale(probe_raw)}, lomo, FusionMode::DEEP_ONLY).values;

        CHECK(cosine_order(plain, probe_plain) == cosine_order(scaled, probe_scaled));
    }
}
