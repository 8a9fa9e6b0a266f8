#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "reid/eval.hpp"
#include "reid/rng.hpp"
#include "reid/xqda.hpp"

using namespace reid;

namespace {

Sample meta_sample(int64_t id, int32_t cam, bool junk = false) {
    Sample s;
    s.identity = id;
    s.camera = cam;
    s.junk = junk;
    return s;
}

Sample vec_sample(std::vector<float> values, int64_t id, int32_t cam, bool junk = false) {
    Sample s = meta_sample(id, cam, junk);
    s.descriptor = Descriptor(DescriptorKind::FUSED, std::move(values));
    return s;
}

// Oracle distances: 0 for matching identities, 1 otherwise.
Eigen::MatrixXd oracle_distances(const std::vector<Sample>& probes,
                                 const std::vector<Sample>& gallery, bool reversed = false) {
    Eigen::MatrixXd dist(probes.size(), gallery.size());
    for (size_t i = 0; i < probes.size(); ++i) {
        for (size_t j = 0; j < gallery.size(); ++j) {
            const bool match = probes[i].identity == gallery[j].identity;
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (match != reversed) ? 0.0 : 1.0;
        }
    }
    return dist;
}

}  // namespace

TEST_CASE("cosine distance matrix") {
    SUBCASE("identical vector scores ~0, orthogonal unit vectors exactly 1") {
        const std::vector<Sample> probes = {vec_sample({1, 0, 0}, 1, 0),
                                            vec_sample({0, 2, 0}, 2, 0)};
        const std::vector<Sample> gallery = {vec_sample({1, 0, 0}, 1, 1),
                                             vec_sample({0, 0, 3}, 3, 1)};
        const Eigen::MatrixXd dist = distance_matrix(probes, gallery, Metric::COSINE);
        CHECK(std::abs(dist(0, 0)) < 1e-12);
        CHECK(dist(0, 1) == 1.0);
        CHECK(dist(1, 0) == 1.0);
    }

    SUBCASE("zero vectors score distance 1 by convention") {
        const std::vector<Sample> probes = {vec_sample({0, 0}, 1, 0)};
        const std::vector<Sample> gallery = {vec_sample({1, 1}, 1, 1)};
        CHECK(distance_matrix(probes, gallery, Metric::COSINE)(0, 0) == 1.0);
    }

    SUBCASE("3x4 random set matches the scalar loop oracle") {
        Rng rng(151);
        std::vector<Sample> probes, gallery;
        for (int i = 0; i < 3; ++i) {
            std::vector<float> v(5);
            for (float& x : v) x = static_cast<float>(rng.normal());
            probes.push_back(vec_sample(std::move(v), i, 0));
        }
        for (int j = 0; j < 4; ++j) {
            std::vector<float> v(5);
            for (float& x : v) x = static_cast<float>(rng.normal());
            gallery.push_back(vec_sample(std::move(v), j, 1));
        }
        const Eigen::MatrixXd dist = distance_matrix(probes, gallery, Metric::COSINE);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 4; ++j) {
                double dot = 0, np = 0, ng = 0;
                for (int k = 0; k < 5; ++k) {
                    const double a =
                        probes[static_cast<size_t>(i)].descriptor.values[static_cast<size_t>(k)];
                    const double b =
                        gallery[static_cast<size_t>(j)].descriptor.values[static_cast<size_t>(k)];
                    dot += a * b;
                    np += a * a;
                    ng += b * b;
                }
                const double expected = 1.0 - dot / (std::sqrt(np) * std::sqrt(ng));
                CHECK(std::abs(dist(i, j) - expected) < 1e-12);
            }
        }
    }

    SUBCASE("dimension mismatch is rejected") {
        const std::vector<Sample> probes = {vec_sample({1, 0, 0}, 1, 0)};
        const std::vector<Sample> gallery = {vec_sample({1, 0}, 1, 1)};
        CHECK_THROWS_AS(distance_matrix(probes, gallery, Metric::COSINE), DimError);
    }
}

TEST_CASE("XQDA distance matrix agrees with per-pair distances") {
    const fixtures::SyntheticBenchmark bench = fixtures::make_benchmark(5);
    const XqdaModel model = train_xqda(bench.train);
    const Eigen::MatrixXd dist = distance_matrix(bench.probe, bench.gallery, Metric::XQDA, &model);
    for (size_t i = 0; i < bench.probe.size(); i += 7) {
        for (size_t j = 0; j < bench.gallery.size(); j += 5) {
            const double expected =
                xqda_distance(model, bench.probe[i].descriptor, bench.gallery[j].descriptor);
            CHECK(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                  doctest::Approx(expected).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(distance_matrix(bench.probe, bench.gallery, Metric::XQDA, nullptr), DimError);
}

TEST_CASE("single-shot CMC") {
    EvalProtocol protocol;
    protocol.kind = ProtocolKind::SINGLE_SHOT_CMC;
    protocol.trials = 1;

    SUBCASE("oracle distances give CMC(1) == 1") {
        std::vector<Sample> probes, gallery;
        for (int id = 0; id < 5; ++id) {
            probes.push_back(meta_sample(id, 0));
            gallery.push_back(meta_sample(id, 1));
            gallery.push_back(meta_sample(id, 1));
        }
        const CmcCurve curve =
            cmc_single_shot(oracle_distances(probes, gallery), probes, gallery, protocol, 42);
        CHECK(curve.at(1) == 1.0);
        CHECK(curve.values.back() == 1.0);
    }

    SUBCASE("adversarial distances rank the match last") {
        std::vector<Sample> probes, gallery;
        for (int id = 0; id < 6; ++id) {
            probes.push_back(meta_sample(id, 0));
            gallery.push_back(meta_sample(id, 1));
        }
        const CmcCurve curve = cmc_single_shot(oracle_distances(probes, gallery, true), probes,
                                               gallery, protocol, 42);
        for (int k = 1; k < 6; ++k) {
            CHECK(curve.at(k) == 0.0);
        }
        CHECK(curve.at(6) == 1.0);
    }

    SUBCASE("hand-built 4x4 ranks (1,2,1,3) give CMC (0.5, 0.75, 1.0, 1.0)") {
        std::vector<Sample> probes, gallery;
        for (int id = 0; id < 4; ++id) {
            probes.push_back(meta_sample(id, 0));
            gallery.push_back(meta_sample(id, 1));
        }
        Eigen::MatrixXd dist(4, 4);
        dist << 0.1, 0.5, 0.6, 0.7,  //
            0.2, 0.3, 0.9, 0.8,      //
            0.9, 0.8, 0.1, 0.5,      //
            0.1, 0.9, 0.2, 0.4;
        const CmcCurve curve = cmc_single_shot(dist, probes, gallery, protocol, 1);
        CHECK(curve.values == std::vector<double>{0.5, 0.75, 1.0, 1.0});
    }

    SUBCASE("deterministic under a fixed seed, junk never sampled") {
        Rng rng(157);
        std::vector<Sample> probes, gallery;
        for (int id = 0; id < 4; ++id) {
            probes.push_back(meta_sample(id, 0));
            gallery.push_back(meta_sample(id, 1));
            gallery.push_back(meta_sample(id, 1, /*junk=*/true));
        }
        Eigen::MatrixXd dist(4, 8);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 8; ++j) dist(i, j) = rng.uniform();
        }
        // Junk twins are the closest entries; sampling must never pick them.
        for (int id = 0; id < 4; ++id) dist(id, 2 * id + 1) = -1.0;
        protocol.trials = 20;
        const CmcCurve a = cmc_single_shot(dist, probes, gallery, protocol, 7);
        const CmcCurve b = cmc_single_shot(dist, probes, gallery, protocol, 7);
        CHECK(a.values == b.values);
        REQUIRE(a.values.size() == 4);  // one slot per gallery identity
    }

    SUBCASE("missing cross-camera gallery raises ProtocolError naming the identity") {
        std::vector<Sample> probes = {meta_sample(1, 0), meta_sample(2, 0)};
        std::vector<Sample> gallery = {meta_sample(1, 1), meta_sample(2, 0)};  // id 2 same camera
        Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(2, 2);
        try {
            cmc_single_shot(dist, probes, gallery, protocol, 1);
            FAIL("expected ProtocolError");
        } catch (const ProtocolError& e) {
            CHECK(std::string(e.what()).find("2") != std::string::npos);
        }
    }
}

TEST_CASE("more single-shot trials reduce CMC(1) variance across seeds") {
    // 6 identities, two gallery images each: one close, one far. The trial
    // average over more re-samplings concentrates.
    std::vector<Sample> probes, gallery;
    for (int id = 0; id < 6; ++id) {
        probes.push_back(meta_sample(id, 0));
        gallery.push_back(meta_sample(id, 1));
        gallery.push_back(meta_sample(id, 1));
    }
    Rng rng(163);
    Eigen::MatrixXd dist(6, 12);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 12; ++j) {
            const int gallery_id = j / 2;
            if (gallery_id == i) {
                dist(i, j) = (j % 2 == 0) ? 0.1 : 0.9;
            } else {
                dist(i, j) = rng.uniform(0.2, 0.8);
            }
        }
    }
    const auto variance_of_cmc1 = [&](int trials) {
        EvalProtocol protocol;
        protocol.kind = ProtocolKind::SINGLE_SHOT_CMC;
        protocol.trials = trials;
        std::vector<double> values;
        for (uint64_t seed = 0; seed < 20; ++seed) {
            values.push_back(cmc_single_shot(dist, probes, gallery, protocol, seed).at(1));
        }
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        return var / static_cast<double>(values.size());
    };
    CHECK(variance_of_cmc1(50) < variance_of_cmc1(1));
}

TEST_CASE("map_single_query") {
    SUBCASE("correct matches at filtered positions 1 and 3 give AP 5/6") {
        const std::vector<Sample> probes = {meta_sample(1, 0)};
        const std::vector<Sample> gallery = {meta_sample(1, 1), meta_sample(2, 1),
                                             meta_sample(1, 1), meta_sample(3, 1)};
        Eigen::MatrixXd dist(1, 4);
        dist << 0.1, 0.2, 0.3, 0.4;  // ranking: g0 (hit), g1, g2 (hit), g3
        const MapResult result = map_single_query(dist, probes, gallery);
        CHECK(result.mean_ap == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
        CHECK(result.evaluated_probes == 1);
        CHECK(result.cmc.at(1) == 1.0);
    }

    SUBCASE("oracle distances give mAP 1") {
        std::vector<Sample> probes, gallery;
        for (int id = 0; id < 5; ++id) {
            probes.push_back(meta_sample(id, 0));
            gallery.push_back(meta_sample(id, 1));
            gallery.push_back(meta_sample((id + 1) % 5, 1));
        }
        const MapResult result =
            map_single_query(oracle_distances(probes, gallery), probes, gallery);
        CHECK(result.mean_ap == doctest::Approx(1.0));
        CHECK(result.cmc.at(1) == 1.0);
    }

    SUBCASE("junk-flagged correct match at position 1 is removed") {
        const std::vector<Sample> probes = {meta_sample(1, 0)};
        const std::vector<Sample> gallery = {meta_sample(1, 1, /*junk=*/true), meta_sample(1, 1),
                                             meta_sample(2, 1)};
        Eigen::MatrixXd dist(1, 3);
        dist << 0.0, 0.5, 0.2;  // junk twin closest
        const MapResult result = map_single_query(dist, probes, gallery);
        // Filtered ranking: g2 (0.2, wrong), g1 (0.5, correct) -> AP = 1/2.
        CHECK(result.mean_ap == doctest::Approx(0.5));
        CHECK(result.cmc.at(1) == 0.0);
        CHECK(result.cmc.at(2) == 1.0);
    }

    SUBCASE("same-identity same-camera entries are filtered") {
        const std::vector<Sample> probes = {meta_sample(1, 0)};
        const std::vector<Sample> gallery = {meta_sample(1, 0), meta_sample(1, 1)};
        Eigen::MatrixXd dist(1, 2);
        dist << 0.0, 0.9;
        const MapResult result = map_single_query(dist, probes, gallery);
        CHECK(result.mean_ap == doctest::Approx(1.0));  // only the cross-camera twin counts
    }

    SUBCASE("probes without any valid match are excluded and counted") {
        const std::vector<Sample> probes = {meta_sample(1, 0), meta_sample(9, 0)};
        const std::vector<Sample> gallery = {meta_sample(1, 1), meta_sample(2, 1)};
        const MapResult result =
            map_single_query(oracle_distances(probes, gallery), probes, gallery);
        CHECK(result.evaluated_probes == 1);
        CHECK(result.excluded_probes == 1);
        CHECK(result.mean_ap == doctest::Approx(1.0));
    }
}

TEST_CASE("map_single_query equals the brute-force AP oracle") {
    Rng rng(167);
    for (int rep = 0; rep < 30; ++rep) {
        const int n_probe = 3;
        const int n_gallery = 5 + static_cast<int>(rng.uniform_index(26));
        std::vector<Sample> probes, gallery;
        for (int i = 0; i < n_probe; ++i) {
            probes.push_back(meta_sample(static_cast<int64_t>(rng.uniform_index(4)),
                                         static_cast<int32_t>(rng.uniform_index(2))));
        }
        for (int j = 0; j < n_gallery; ++j) {
            gallery.push_back(meta_sample(static_cast<int64_t>(rng.uniform_index(4)),
                                          static_cast<int32_t>(rng.uniform_index(2)),
                                          rng.uniform() < 0.15));
        }
        Eigen::MatrixXd dist(n_probe, n_gallery);
        for (int i = 0; i < n_probe; ++i) {
            for (int j = 0; j < n_gallery; ++j) dist(i, j) = rng.uniform();
        }

        double expected_sum = 0.0;
        int expected_evaluated = 0;
        for (int i = 0; i < n_probe; ++i) {
            std::vector<double> row(static_cast<size_t>(n_gallery));
            std::vector<bool> valid(static_cast<size_t>(n_gallery));
            std::vector<bool> correct(static_cast<size_t>(n_gallery));
            for (int j = 0; j < n_gallery; ++j) {
                row[static_cast<size_t>(j)] = dist(i, j);
                const Sample& g = gallery[static_cast<size_t>(j)];
                valid[static_cast<size_t>(j)] =
                    !g.junk && !(g.identity == probes[static_cast<size_t>(i)].identity &&
                                 g.camera == probes[static_cast<size_t>(i)].camera);
                correct[static_cast<size_t>(j)] =
                    valid[static_cast<size_t>(j)] &&
                    g.identity == probes[static_cast<size_t>(i)].identity;
            }
            int hits = 0;
            const double ap = oracle::ap_brute_force(row, valid, correct, &hits);
            if (hits > 0) {
                expected_sum += ap;
                ++expected_evaluated;
            }
        }
        const MapResult result = map_single_query(dist, probes, gallery);
        CHECK(result.evaluated_probes == expected_evaluated);
        if (expected_evaluated > 0) {
            CHECK(std::abs(result.mean_ap - expected_sum / expected_evaluated) < 1e-12);
        }
    }
}

TEST_CASE("metrics are invariant under strictly increasing distance transforms") {
    Rng rng(173);
    std::vector<Sample> probes, gallery;
    for (int id = 0; id < 6; ++id) {
        probes.push_back(meta_sample(id, 0));
        gallery.push_back(meta_sample(id, 1));
        gallery.push_back(meta_sample((id * 2) % 6, 1));
    }
    Eigen::MatrixXd dist(probes.size(), gallery.size());
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
        for (Eigen::Index j = 0; j < dist.cols(); ++j) {
            dist(i, j) = rng.normal();  // includes negatives, like XQDA scores
        }
    }
    const Eigen::MatrixXd affine = 2.0 * dist.array() + 1.0;
    const Eigen::MatrixXd cubed = dist.array().cube();

    const MapResult base = map_single_query(dist, probes, gallery);
    for (const Eigen::MatrixXd& variant : {affine, cubed}) {
        const MapResult r = map_single_query(variant, probes, gallery);
        CHECK(r.mean_ap == base.mean_ap);
        CHECK(r.cmc.values == base.cmc.values);
    }

    EvalProtocol protocol;
    protocol.kind = ProtocolKind::SINGLE_SHOT_CMC;
    protocol.trials = 5;
    const CmcCurve base_cmc = cmc_single_shot(dist, probes, gallery, protocol, 11);
    for (const Eigen::MatrixXd& variant : {affine, cubed}) {
        CHECK(cmc_single_shot(variant, probes, gallery, protocol, 11).values == base_cmc.values);
    }
    // Monotone curve in [0, 1].
    double prev = 0.0;
    for (double v : base_cmc.values) {
        CHECK(v >= prev);
        CHECK(v <= 1.0);
        prev = v;
    }
    CHECK(base_cmc.values.back() == 1.0);
}

TEST_CASE("emit_ranked_lists") {
    const std::vector<Sample> probes = {meta_sample(1, 0), meta_sample(2, 0)};
    const std::vector<Sample> gallery = {meta_sample(2, 1), meta_sample(1, 1), meta_sample(3, 1)};

    SUBCASE("fixed 2x3 matrix with a tie resolves by lower gallery index") {
        Eigen::MatrixXd dist(2, 3);
        dist << 0.5, 0.2, 0.2,  //
            0.3, 0.3, 0.9;
        const std::vector<RankedList> lists = emit_ranked_lists(dist, probes, gallery, 10);
        REQUIRE(lists.size() == 2);
        REQUIRE(lists[0].entries.size() == 3);  // k larger than gallery: full ranking
        CHECK(lists[0].entries[0].gallery_index == 1);
        CHECK(lists[0].entries[1].gallery_index == 2);
        CHECK(lists[0].entries[2].gallery_index == 0);
        CHECK(lists[1].entries[0].gallery_index == 0);  // tie 0.3 at indices 0,1
        CHECK(lists[1].entries[1].gallery_index == 1);
        // Correct flags and monotone distances.
        CHECK(lists[0].entries[0].correct);  // gallery 1 has identity 1
        for (const RankedList& list : lists) {
            for (size_t p = 1; p < list.entries.size(); ++p) {
                CHECK(list.entries[p].distance >= list.entries[p - 1].distance);
            }
        }
    }

    SUBCASE("oracle distances put a correct match first") {
        const std::vector<RankedList> lists =
            emit_ranked_lists(oracle_distances(probes, gallery), probes, gallery, 1);
        for (const RankedList& list : lists) {
            REQUIRE(list.entries.size() == 1);
            CHECK(list.entries[0].correct);
        }
    }

    SUBCASE("junk entries never appear") {
        std::vector<Sample> junky = gallery;
        junky.push_back(meta_sample(1, 1, /*junk=*/true));
        Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(2, 4, 0.5);
        dist(0, 3) = 0.0;  // junk twin closest
        const std::vector<RankedList> lists = emit_ranked_lists(dist, probes, junky, 4);
        for (const RankedList& list : lists) {
            for (const RankedEntry& e : list.entries) {
                CHECK(e.gallery_index != 3);
            }
        }
    }

    SUBCASE("CSV emission carries keys and flags") {
        fixtures::TempDir tmp("ranked");
        const std::string path = tmp.str() + "/lists.csv";
        Eigen::MatrixXd dist(2, 3);
        dist << 0.5, 0.25, 0.75, 0.3, 0.6, 0.9;
        const std::vector<RankedList> lists = emit_ranked_lists(dist, probes, gallery, 2);
        const std::vector<std::string> probe_keys = {"p/one.ppm", "p/two.ppm"};
        const std::vector<std::string> gallery_keys = {"g/a.ppm", "g/b.ppm", "g/c.ppm"};
        write_ranked_lists_csv(lists, path, &probe_keys, &gallery_keys);

        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "probe,rank,gallery,distance,correct");
        std::getline(in, line);
        CHECK(line.substr(0, 20) == "p/one.ppm,1,g/b.ppm,");
        CHECK(line.back() == '1');  // identity 1 == probe identity
    }
}
