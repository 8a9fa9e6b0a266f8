#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reid/types.hpp"
#include "reid/xqda.hpp"

namespace reid {

enum class ProtocolKind {
    SINGLE_QUERY_MAP,  // Market/Duke style: junk-filtered mAP + rank-k
    SINGLE_SHOT_CMC,   // VIPeR/CUHK03 style: one gallery image per identity,
                       // re-sampled over trials
};

ProtocolKind protocol_from_string(const std::string& s);
const char* to_string(ProtocolKind kind);

struct EvalProtocol {
    ProtocolKind kind = ProtocolKind::SINGLE_QUERY_MAP;
    int trials = 100;                          // single-shot re-samplings
    std::vector<int> ranks_reported = {1, 5, 10};
};

enum class Metric { COSINE, XQDA };

Metric metric_from_string(const std::string& s);
const char* to_string(Metric metric);

// |P| x |G| distances. COSINE: 1 - x.z / (||x|| ||z||), distance 1 when
// either vector is zero. XQDA: per xqda_distance on the given model.
Eigen::MatrixXd distance_matrix(const std::vector<Sample>& probes,
                                const std::vector<Sample>& gallery, Metric metric,
                                const XqdaModel* model = nullptr);

struct CmcCurve {
    std::vector<double> values;  // values[k-1] = CMC(k), k = 1..size

    double at(int rank) const;   // clamped lookup, CMC(0) == 0
};

// Single-shot CMC. Per trial and per probe, one gallery image is sampled
// uniformly for every gallery identity; for the probe's own identity the
// sample is drawn from cameras different from the probe's. Junk gallery
// entries are never sampled. The correct match's rank (stable ties by
// gallery index) is accumulated into the curve, which is averaged over
// trials. A probe identity with no cross-camera gallery image raises
// ProtocolError listing the offending identities.
CmcCurve cmc_single_shot(const Eigen::MatrixXd& dist, const std::vector<Sample>& probes,
                         const std::vector<Sample>& gallery, const EvalProtocol& protocol,
                         uint64_t seed);

struct MapResult {
    double mean_ap = 0.0;
    CmcCurve cmc;           // rank-k accuracies over the filtered rankings
    int evaluated_probes = 0;
    int excluded_probes = 0;  // probes with zero valid matches
};

// Market-style single query evaluation. Per probe, gallery entries that are
// junk-flagged or share both identity and camera with the probe are removed;
// AP averages precision at each correct position of the filtered ranking.
MapResult map_single_query(const Eigen::MatrixXd& dist, const std::vector<Sample>& probes,
                           const std::vector<Sample>& gallery);

struct RankedEntry {
    int gallery_index = 0;
    double distance = 0.0;
    bool correct = false;
};

struct RankedList {
    int probe_index = 0;
    std::vector<RankedEntry> entries;  // distances non-decreasing, junk absent
};

// Top-k after junk filtering, stable ties by gallery index.
std::vector<RankedList> emit_ranked_lists(const Eigen::MatrixXd& dist,
                                          const std::vector<Sample>& probes,
                                          const std::vector<Sample>& gallery, int k);

// CSV emission `probe,rank,gallery,distance,correct`; keys name the rows
// when provided, otherwise indices are written.
void write_ranked_lists_csv(const std::vector<RankedList>& lists, const std::string& path,
                            const std::vector<std::string>* probe_keys = nullptr,
                            const std::vector<std::string>* gallery_keys = nullptr);

}  // namespace reid
