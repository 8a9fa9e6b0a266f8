#include "reid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "reid/rng.hpp"

namespace reid {

ProtocolKind protocol_from_string(const std::string& s) {
    if (s == "single_query" || s == "map") return ProtocolKind::SINGLE_QUERY_MAP;
    if (s == "single_shot" || s == "cmc") return ProtocolKind::SINGLE_SHOT_CMC;
    throw FormatError("unknown protocol: " + s);
}

const char* to_string(ProtocolKind kind) {
    switch (kind) {
        case ProtocolKind::SINGLE_QUERY_MAP: return "single_query";
        case ProtocolKind::SINGLE_SHOT_CMC: return "single_shot";
    }
    return "?";
}

Metric metric_from_string(const std::string& s) {
    if (s == "cosine") return Metric::COSINE;
    if (s == "xqda") return Metric::XQDA;
    throw FormatError("unknown metric: " + s);
}

const char* to_string(Metric metric) {
    switch (metric) {
        case Metric::COSINE: return "cosine";
        case Metric::XQDA: return "xqda";
    }
    return "?";
}

namespace {

Eigen::MatrixXd sample_matrix(const std::vector<Sample>& samples, Eigen::Index dim) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), dim);
    for (size_t i = 0; i < samples.size(); ++i) {
        const Descriptor& d = samples[i].descriptor;
        if (static_cast<Eigen::Index>(d.dim) != dim) {
            throw DimError("descriptor dimensions are inconsistent");
        }
        for (Eigen::Index j = 0; j < dim; ++j) {
            X(static_cast<Eigen::Index>(i), j) = d.values[static_cast<size_t>(j)];
        }
    }
    return X;
}

}  // namespace

Eigen::MatrixXd distance_matrix(const std::vector<Sample>& probes,
                                const std::vector<Sample>& gallery, Metric metric,
                                const XqdaModel* model) {
    if (probes.empty() || gallery.empty()) {
        throw DimError("distance_matrix needs non-empty probe and gallery sets");
    }
    const Eigen::Index dim = static_cast<Eigen::Index>(probes.front().descriptor.dim);
    if (static_cast<Eigen::Index>(gallery.front().descriptor.dim) != dim) {
        throw DimError("probe and gallery descriptor dimensions differ");
    }
    const Eigen::MatrixXd P = sample_matrix(probes, dim);
    const Eigen::MatrixXd G = sample_matrix(gallery, dim);

    if (metric == Metric::COSINE) {
        const Eigen::VectorXd pn = P.rowwise().norm();
        const Eigen::VectorXd gn = G.rowwise().norm();
        Eigen::MatrixXd dist = P * G.transpose();
        for (Eigen::Index i = 0; i < dist.rows(); ++i) {
            for (Eigen::Index j = 0; j < dist.cols(); ++j) {
                // Zero vectors carry no direction: fixed distance 1.
                dist(i, j) = (pn(i) > 0.0 && gn(j) > 0.0)
                                 ? 1.0 - dist(i, j) / (pn(i) * gn(j))
                                 : 1.0;
            }
        }
        return dist;
    }

    if (model == nullptr) {
        throw DimError("XQDA metric requires a trained model");
    }
    if (static_cast<int>(dim) != model->dim) {
        throw DimError("descriptor dimension does not match the model");
    }
    const Eigen::MatrixXd Up = P * model->W;  // |P| x r
    const Eigen::MatrixXd Ug = G * model->W;  // |G| x r
    const Eigen::VectorXd qp = (Up * model->M).cwiseProduct(Up).rowwise().sum();
    const Eigen::VectorXd qg = (Ug * model->M).cwiseProduct(Ug).rowwise().sum();
    Eigen::MatrixXd dist = -2.0 * (Up * model->M * Ug.transpose());
    dist.colwise() += qp;
    dist.rowwise() += qg.transpose();
    return dist;
}

double CmcCurve::at(int rank) const {
    if (rank <= 0 || values.empty()) return 0.0;
    const size_t idx = std::min(static_cast<size_t>(rank), values.size());
    return values[idx - 1];
}

CmcCurve cmc_single_shot(const Eigen::MatrixXd& dist, const std::vector<Sample>& probes,
                         const std::vector<Sample>& gallery, const EvalProtocol& protocol,
                         uint64_t seed) {
    if (dist.rows() != static_cast<Eigen::Index>(probes.size()) ||
        dist.cols() != static_cast<Eigen::Index>(gallery.size())) {
        throw DimError("distance matrix shape does not match probe/gallery counts");
    }
    if (protocol.trials < 1) {
        throw ProtocolError("single-shot protocol needs trials >= 1");
    }

    // Junk gallery entries are never sampled.
    std::map<int64_t, std::vector<int>> by_id;
    for (size_t j = 0; j < gallery.size(); ++j) {
        if (!gallery[j].junk) {
            by_id[gallery[j].identity].push_back(static_cast<int>(j));
        }
    }
    std::vector<int64_t> offenders;
    for (const Sample& p : probes) {
        const auto it = by_id.find(p.identity);
        bool ok = false;
        if (it != by_id.end()) {
            for (int j : it->second) {
                if (gallery[static_cast<size_t>(j)].camera != p.camera) {
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) {
            if (offenders.empty() || offenders.back() != p.identity) {
                offenders.push_back(p.identity);
            }
        }
    }
    if (!offenders.empty()) {
        std::ostringstream msg;
        msg << "probe identities without cross-camera gallery images:";
        for (int64_t id : offenders) msg << ' ' << id;
        throw ProtocolError(msg.str());
    }

    const int g = static_cast<int>(by_id.size());
    std::vector<double> hits(static_cast<size_t>(g), 0.0);
    Rng rng(seed);
    std::vector<int> picks(static_cast<size_t>(g));
    for (int trial = 0; trial < protocol.trials; ++trial) {
        for (size_t pi = 0; pi < probes.size(); ++pi) {
            const Sample& probe = probes[pi];
            int correct_slot = -1;
            int slot = 0;
            for (const auto& [id, indices] : by_id) {
                if (id == probe.identity) {
                    // The single correct match must come from another camera.
                    std::vector<int> cross;
                    for (int j : indices) {
                        if (gallery[static_cast<size_t>(j)].camera != probe.camera) {
                            cross.push_back(j);
                        }
                    }
                    picks[static_cast<size_t>(slot)] =
                        cross[static_cast<size_t>(rng.uniform_index(cross.size()))];
                    correct_slot = slot;
                } else {
                    picks[static_cast<size_t>(slot)] =
                        indices[static_cast<size_t>(rng.uniform_index(indices.size()))];
                }
                ++slot;
            }
            const int correct_idx = picks[static_cast<size_t>(correct_slot)];
            const double dc = dist(static_cast<Eigen::Index>(pi), correct_idx);
            int rank = 1;
            for (int s = 0; s < g; ++s) {
                if (s == correct_slot) continue;
                const int j = picks[static_cast<size_t>(s)];
                const double dj = dist(static_cast<Eigen::Index>(pi), j);
                if (dj < dc || (dj == dc && j < correct_idx)) {
                    ++rank;
                }
            }
            hits[static_cast<size_t>(rank - 1)] += 1.0;
        }
    }

    CmcCurve curve;
    curve.values.resize(static_cast<size_t>(g));
    double acc = 0.0;
    const double denom = static_cast<double>(protocol.trials) * static_cast<double>(probes.size());
    for (int k = 0; k < g; ++k) {
        acc += hits[static_cast<size_t>(k)];
        curve.values[static_cast<size_t>(k)] = acc / denom;
    }
    return curve;
}

namespace {

// Filtered ranking shared by mAP and ranked-list emission: junk entries and
// same-identity-same-camera entries are removed, ties break on gallery index.
std::vector<int> filtered_ranking(const Eigen::MatrixXd& dist, size_t probe_index,
                                  const Sample& probe, const std::vector<Sample>& gallery) {
    std::vector<int> order;
    order.reserve(gallery.size());
    for (size_t j = 0; j < gallery.size(); ++j) {
        const Sample& gs = gallery[j];
        if (gs.junk) continue;
        if (gs.identity == probe.identity && gs.camera == probe.camera) continue;
        order.push_back(static_cast<int>(j));
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = dist(static_cast<Eigen::Index>(probe_index), a);
        const double db = dist(static_cast<Eigen::Index>(probe_index), b);
        if (da != db) return da < db;
        return a < b;
    });
    return order;
}

}  // namespace

MapResult map_single_query(const Eigen::MatrixXd& dist, const std::vector<Sample>& probes,
                           const std::vector<Sample>& gallery) {
    if (dist.rows() != static_cast<Eigen::Index>(probes.size()) ||
        dist.cols() != static_cast<Eigen::Index>(gallery.size())) {
        throw DimError("distance matrix shape does not match probe/gallery counts");
    }
    MapResult result;
    std::vector<double> first_hit_counts(gallery.size(), 0.0);
    double ap_sum = 0.0;
    for (size_t pi = 0; pi < probes.size(); ++pi) {
        const std::vector<int> order = filtered_ranking(dist, pi, probes[pi], gallery);
        int hits = 0;
        double ap = 0.0;
        int first_hit = -1;
        for (size_t pos = 0; pos < order.size(); ++pos) {
            if (gallery[static_cast<size_t>(order[pos])].identity == probes[pi].identity) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
                if (first_hit < 0) first_hit = static_cast<int>(pos);
            }
        }
        if (hits == 0) {
            ++result.excluded_probes;
            continue;
        }
        ++result.evaluated_probes;
        ap_sum += ap / hits;
        first_hit_counts[static_cast<size_t>(first_hit)] += 1.0;
    }
    if (result.evaluated_probes > 0) {
        result.mean_ap = ap_sum / result.evaluated_probes;
        result.cmc.values.resize(gallery.size());
        double acc = 0.0;
        for (size_t k = 0; k < gallery.size(); ++k) {
            acc += first_hit_counts[k];
            result.cmc.values[k] = acc / result.evaluated_probes;
        }
    }
    return result;
}

std::vector<RankedList> emit_ranked_lists(const Eigen::MatrixXd& dist,
                                          const std::vector<Sample>& probes,
                                          const std::vector<Sample>& gallery, int k) {
    if (k < 1) {
        throw ProtocolError("ranked list emission needs k >= 1");
    }
    if (dist.rows() != static_cast<Eigen::Index>(probes.size()) ||
        dist.cols() != static_cast<Eigen::Index>(gallery.size())) {
        throw DimError("distance matrix shape does not match probe/gallery counts");
    }
    std::vector<RankedList> lists;
    lists.reserve(probes.size());
    for (size_t pi = 0; pi < probes.size(); ++pi) {
        const std::vector<int> order = filtered_ranking(dist, pi, probes[pi], gallery);
        RankedList list;
        list.probe_index = static_cast<int>(pi);
        const size_t take = std::min(order.size(), static_cast<size_t>(k));
        list.entries.reserve(take);
        for (size_t pos = 0; pos < take; ++pos) {
            RankedEntry e;
            e.gallery_index = order[pos];
            e.distance = dist(static_cast<Eigen::Index>(pi), order[pos]);
            e.correct = gallery[static_cast<size_t>(order[pos])].identity == probes[pi].identity;
            list.entries.push_back(e);
        }
        lists.push_back(std::move(list));
    }
    return lists;
}

void write_ranked_lists_csv(const std::vector<RankedList>& lists, const std::string& path,
                            const std::vector<std::string>* probe_keys,
                            const std::vector<std::string>* gallery_keys) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write ranked lists: " + path);
    }
    out << "probe,rank,gallery,distance,correct\n";
    char buf[64];
    for (const RankedList& list : lists) {
        for (size_t pos = 0; pos < list.entries.size(); ++pos) {
            const RankedEntry& e = list.entries[pos];
            if (probe_keys) {
                out << (*probe_keys)[static_cast<size_t>(list.probe_index)];
            } else {
                out << list.probe_index;
            }
            out << ',' << (pos + 1) << ',';
            if (gallery_keys) {
                out << (*gallery_keys)[static_cast<size_t>(e.gallery_index)];
            } else {
                out << e.gallery_index;
            }
            std::snprintf(buf, sizeof(buf), "%.17g", e.distance);
            out << ',' << buf << ',' << (e.correct ? 1 : 0) << "\n";
        }
    }
}

}  // namespace reid
