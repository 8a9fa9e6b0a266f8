#include "reid/xqda.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace reid {

namespace {

struct GroupSums {
    Eigen::VectorXd sum;
    int64_t count = 0;
};

Eigen::MatrixXd to_matrix(const std::vector<Sample>& samples) {
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index d = n > 0 ? samples.front().descriptor.dim : 0;
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Descriptor& desc = samples[i].descriptor;
        if (static_cast<Eigen::Index>(desc.dim) != d) {
            throw DimError("samples carry mixed descriptor dimensions");
        }
        for (Eigen::Index j = 0; j < d; ++j) {
            X(i, j) = desc.values[static_cast<size_t>(j)];
        }
    }
    return X;
}

}  // namespace

ScatterPair compute_scatter(const std::vector<Sample>& samples) {
    std::vector<int64_t> ids(samples.size());
    std::vector<int32_t> cams(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        ids[i] = samples[i].identity;
        cams[i] = samples[i].camera;
    }
    return compute_scatter(to_matrix(samples), ids, cams);
}

ScatterPair compute_scatter(const Eigen::MatrixXd& X, const std::vector<int64_t>& identities,
                            const std::vector<int32_t>& cameras) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (static_cast<size_t>(n) != identities.size() || static_cast<size_t>(n) != cameras.size()) {
        throw DimError("identity/camera label counts do not match sample count");
    }
    if (n < 2) {
        throw InsufficientPairs("need at least two samples");
    }

    std::map<int64_t, GroupSums> by_id;
    std::map<int32_t, GroupSums> by_cam;
    std::map<std::pair<int64_t, int32_t>, GroupSums> by_id_cam;
    Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        auto add = [&](GroupSums& g) {
            if (g.count == 0) g.sum = Eigen::VectorXd::Zero(d);
            g.sum += x;
            ++g.count;
        };
        add(by_id[identities[i]]);
        add(by_cam[cameras[i]]);
        add(by_id_cam[{identities[i], cameras[i]}]);
        total += x;
    }

    // Pair counts: cross-camera pairs overall and within each identity.
    int64_t pairs_all = n * (n - 1) / 2;
    for (const auto& [cam, g] : by_cam) {
        pairs_all -= g.count * (g.count - 1) / 2;
    }
    int64_t pairs_intra = 0;
    for (const auto& [id, g] : by_id) {
        pairs_intra += g.count * (g.count - 1) / 2;
    }
    for (const auto& [key, g] : by_id_cam) {
        pairs_intra -= g.count * (g.count - 1) / 2;
    }
    const int64_t pairs_extra = pairs_all - pairs_intra;
    if (pairs_intra <= 0) {
        throw InsufficientPairs("no cross-camera pairs share an identity");
    }

    // sum over pairs (i<j) in a group of (xi-xj)(xi-xj)' == N*sum xi xi' - S S'.
    // Cross-camera restriction subtracts the same expression per camera
    // sub-group. Rank-one updates accumulate the weighted squares in one pass.
    Eigen::MatrixXd intra = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd cross_all = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        const int64_t n_id = by_id[identities[i]].count;
        const int64_t n_id_cam = by_id_cam[{identities[i], cameras[i]}].count;
        const int64_t n_cam = by_cam[cameras[i]].count;
        intra.selfadjointView<Eigen::Lower>().rankUpdate(x, static_cast<double>(n_id - n_id_cam));
        cross_all.selfadjointView<Eigen::Lower>().rankUpdate(x, static_cast<double>(n - n_cam));
    }
    for (const auto& [id, g] : by_id) {
        intra.selfadjointView<Eigen::Lower>().rankUpdate(g.sum, -1.0);
    }
    for (const auto& [key, g] : by_id_cam) {
        intra.selfadjointView<Eigen::Lower>().rankUpdate(g.sum, 1.0);
    }
    cross_all.selfadjointView<Eigen::Lower>().rankUpdate(total, -1.0);
    for (const auto& [cam, g] : by_cam) {
        cross_all.selfadjointView<Eigen::Lower>().rankUpdate(g.sum, 1.0);
    }

    ScatterPair out;
    out.n_I = pairs_intra;
    out.n_E = pairs_extra;
    out.sigma_I = Eigen::MatrixXd(intra.selfadjointView<Eigen::Lower>()) / pairs_intra;
    Eigen::MatrixXd extra =
        Eigen::MatrixXd(cross_all.selfadjointView<Eigen::Lower>()) - intra.selfadjointView<Eigen::Lower>().toDenseMatrix();
    out.sigma_E = pairs_extra > 0 ? Eigen::MatrixXd(extra / pairs_extra)
                                  : Eigen::MatrixXd::Zero(d, d);
    return out;
}

GenEigResult solve_geneig(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
        throw DimError("solve_geneig needs square matrices of equal size");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("B is not positive definite");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, B);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("generalized eigensolver failed to converge");
    }
    const Eigen::Index d = A.rows();
    GenEigResult out;
    out.eigvals.resize(d);
    out.eigvecs.resize(d, d);
    // Eigen returns ascending order; emit descending.
    for (Eigen::Index i = 0; i < d; ++i) {
        out.eigvals(i) = solver.eigenvalues()(d - 1 - i);
        out.eigvecs.col(i) = solver.eigenvectors().col(d - 1 - i);
    }
    return out;
}

int select_dimension(const Eigen::VectorXd& eigvals_desc, double threshold, int max_dim) {
    int r = 0;
    for (Eigen::Index i = 0; i < eigvals_desc.size(); ++i) {
        if (eigvals_desc(i) > threshold) ++r;
    }
    r = std::max(r, 1);
    r = std::min<int>(r, max_dim);
    return std::max(r, 1);
}

XqdaModel train_xqda_from_scatter(const ScatterPair& scatter, const XqdaTrainOptions& options) {
    const Eigen::Index d = scatter.sigma_I.rows();
    if (scatter.sigma_E.rows() != d || scatter.sigma_E.cols() != d ||
        scatter.sigma_I.cols() != d) {
        throw DimError("scatter matrices must be square and share dimensions");
    }
    if (scatter.n_E <= 0) {
        throw InsufficientPairs("no cross-camera extra-class pairs; need >= 2 identities");
    }
    const Eigen::MatrixXd B =
        scatter.sigma_I + options.reg * Eigen::MatrixXd::Identity(d, d);
    const GenEigResult ge = solve_geneig(scatter.sigma_E, B);
    const int cap = options.max_dim > 0 ? options.max_dim : std::min<int>(static_cast<int>(d), 512);
    const int r = select_dimension(ge.eigvals, options.eig_threshold, cap);

    XqdaModel model;
    model.dim = static_cast<int>(d);
    model.r = r;
    model.W = ge.eigvecs.leftCols(r);
    model.eigvals = ge.eigvals.head(r);

    // Residual certificate for every kept pair.
    const double normA = scatter.sigma_E.norm();
    const double normB = B.norm();
    for (int j = 0; j < r; ++j) {
        const double lambda = model.eigvals(j);
        const double resid =
            (scatter.sigma_E * model.W.col(j) - lambda * (B * model.W.col(j))).norm();
        const double bound = 1e-8 * (normA + std::abs(lambda) * normB);
        if (resid > bound) {
            std::ostringstream msg;
            msg << "generalized eigenpair residual " << resid << " exceeds bound " << bound;
            throw NumericalError(msg.str());
        }
    }

    const Eigen::MatrixXd reg_r = options.reg * Eigen::MatrixXd::Identity(r, r);
    const Eigen::MatrixXd proj_I = model.W.transpose() * scatter.sigma_I * model.W + reg_r;
    const Eigen::MatrixXd proj_E = model.W.transpose() * scatter.sigma_E * model.W + reg_r;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r, r);
    const Eigen::MatrixXd inv_I = proj_I.ldlt().solve(eye);
    const Eigen::MatrixXd inv_E = proj_E.ldlt().solve(eye);
    model.M = 0.5 * ((inv_I - inv_E) + (inv_I - inv_E).transpose());
    return model;
}

XqdaModel train_xqda(const Eigen::MatrixXd& X, const std::vector<int64_t>& identities,
                     const std::vector<int32_t>& cameras, const XqdaTrainOptions& options) {
    if (!X.allFinite()) {
        throw NumericalError("training descriptors contain non-finite values");
    }
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n < d) {
        // All difference vectors lie in the span of the data, so the solve can
        // run in that span: project by a thin QR basis, train there, and map
        // the projection matrix back. Exact for every nonzero eigenpair.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(X.transpose());
        const Eigen::MatrixXd Q =
            qr.householderQ() * Eigen::MatrixXd::Identity(d, n);
        const Eigen::MatrixXd Xp = X * Q;
        XqdaModel model = train_xqda_from_scatter(compute_scatter(Xp, identities, cameras), options);
        model.W = Q * model.W;
        model.dim = static_cast<int>(d);
        return model;
    }
    return train_xqda_from_scatter(compute_scatter(X, identities, cameras), options);
}

XqdaModel train_xqda(const std::vector<Sample>& samples, const XqdaTrainOptions& options) {
    std::vector<int64_t> ids(samples.size());
    std::vector<int32_t> cams(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        ids[i] = samples[i].identity;
        cams[i] = samples[i].camera;
    }
    return train_xqda(to_matrix(samples), ids, cams, options);
}

double xqda_distance(const XqdaModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    if (x.size() != model.dim || z.size() != model.dim) {
        throw DimError("descriptor dimension does not match the model");
    }
    const Eigen::VectorXd u = model.W.transpose() * (x - z);
    return u.dot(model.M * u);
}

double xqda_distance(const XqdaModel& model, const Descriptor& x, const Descriptor& z) {
    if (static_cast<int>(x.dim) != model.dim || static_cast<int>(z.dim) != model.dim) {
        throw DimError("descriptor dimension does not match the model");
    }
    Eigen::VectorXd xv(model.dim), zv(model.dim);
    for (int i = 0; i < model.dim; ++i) {
        xv(i) = x.values[static_cast<size_t>(i)];
        zv(i) = z.values[static_cast<size_t>(i)];
    }
    return xqda_distance(model, xv, zv);
}

namespace {

constexpr char kModelMagic[4] = {'X', 'Q', 'D', 'A'};
constexpr uint32_t kModelVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

uint32_t get_u32(const std::string& in, size_t& pos) {
    if (pos + 4 > in.size()) throw FormatError("model file truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

uint64_t get_u64(const std::string& in, size_t& pos) {
    if (pos + 8 > in.size()) throw FormatError("model file truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

double get_f64(const std::string& in, size_t& pos) {
    const uint64_t bits = get_u64(in, pos);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void XqdaModel::save(const std::string& path) const {
    std::string out;
    out.append(kModelMagic, 4);
    put_u32(out, kModelVersion);
    put_u64(out, static_cast<uint64_t>(dim));
    put_u64(out, static_cast<uint64_t>(r));
    for (int i = 0; i < r; ++i) put_f64(out, eigvals(i));
    for (int c = 0; c < r; ++c) {
        for (int i = 0; i < dim; ++i) put_f64(out, W(i, c));
    }
    for (int c = 0; c < r; ++c) {
        for (int i = 0; i < r; ++i) put_f64(out, M(i, c));
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file || !file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw FormatError("cannot write model file: " + path);
    }
}

XqdaModel XqdaModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open model file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string blob = ss.str();
    if (blob.size() < 4 || std::memcmp(blob.data(), kModelMagic, 4) != 0) {
        throw FormatError("bad magic in model file: " + path);
    }
    size_t pos = 4;
    const uint32_t version = get_u32(blob, pos);
    if (version != kModelVersion) {
        throw FormatError("unsupported model version " + std::to_string(version));
    }
    XqdaModel model;
    model.dim = static_cast<int>(get_u64(blob, pos));
    model.r = static_cast<int>(get_u64(blob, pos));
    if (model.dim <= 0 || model.r <= 0) {
        throw FormatError("model file carries non-positive dimensions");
    }
    model.eigvals.resize(model.r);
    for (int i = 0; i < model.r; ++i) model.eigvals(i) = get_f64(blob, pos);
    model.W.resize(model.dim, model.r);
    for (int c = 0; c < model.r; ++c) {
        for (int i = 0; i < model.dim; ++i) model.W(i, c) = get_f64(blob, pos);
    }
    model.M.resize(model.r, model.r);
    for (int c = 0; c < model.r; ++c) {
        for (int i = 0; i < model.r; ++i) model.M(i, c) = get_f64(blob, pos);
    }
    if (pos != blob.size()) {
        throw FormatError("model file has trailing bytes");
    }
    return model;
}

}  // namespace reid
