#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

// Covariances of pairwise descriptor differences across camera views.
// sigma_I: same identity, different cameras; sigma_E: different identities,
// different cameras. Both are normalized by their pair counts.
struct ScatterPair {
    Eigen::MatrixXd sigma_I;
    Eigen::MatrixXd sigma_E;
    int64_t n_I = 0;
    int64_t n_E = 0;
};

// O(n d^2) accumulation via per-class per-camera sums, algebraically equal
// to enumerating all cross-camera pairs. Identities with images in only one
// camera contribute no intra pairs; if none remain, InsufficientPairs.
ScatterPair compute_scatter(const std::vector<Sample>& samples);
ScatterPair compute_scatter(const Eigen::MatrixXd& X, const std::vector<int64_t>& identities,
                            const std::vector<int32_t>& cameras);

struct GenEigResult {
    Eigen::VectorXd eigvals;  // descending
    Eigen::MatrixXd eigvecs;  // columns, B-orthonormal (w' B w == 1)
};

// Symmetric-definite generalized eigenproblem A w = lambda B w, solved by
// Cholesky reduction. B must be positive definite (NumericalError if not).
GenEigResult solve_geneig(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Keep eigenvalues strictly above `threshold`, at least 1, at most max_dim.
int select_dimension(const Eigen::VectorXd& eigvals_desc, double threshold, int max_dim);

// Learned subspace and metric core. Distances are
//   d(x, z) = (x-z)' W M W' (x-z)
// with M = inv(S_I + reg I) - inv(S_E + reg I), S_X = W' sigma_X W. M is
// symmetric but in general indefinite; distances may be negative and are
// meaningful for ranking only.
struct XqdaModel {
    Eigen::MatrixXd W;        // d x r
    Eigen::MatrixXd M;        // r x r, symmetric
    Eigen::VectorXd eigvals;  // r kept generalized eigenvalues, descending
    int r = 0;
    int dim = 0;

    static XqdaModel load(const std::string& path);
    void save(const std::string& path) const;
};

struct XqdaTrainOptions {
    double reg = 1e-3;           // ridge added to sigma_I for the solve and to
                                 // both projected covariances before inversion
    int max_dim = 0;             // 0 -> min(d, 512)
    double eig_threshold = 1.0;  // keep lambda > threshold (minimum 1 kept)
};

// Solve sigma_E w = lambda (sigma_I + reg I) w and assemble the model.
// When n < d the problem is first projected onto the span of the data by a
// thin QR of the sample matrix, which is exact for all nonzero eigenpairs.
// The generalized-eigen residual bound is asserted for every kept pair.
XqdaModel train_xqda(const std::vector<Sample>& samples, const XqdaTrainOptions& options = {});
XqdaModel train_xqda(const Eigen::MatrixXd& X, const std::vector<int64_t>& identities,
                     const std::vector<int32_t>& cameras, const XqdaTrainOptions& options = {});
XqdaModel train_xqda_from_scatter(const ScatterPair& scatter, const XqdaTrainOptions& options = {});

double xqda_distance(const XqdaModel& model, const Descriptor& x, const Descriptor& z);
double xqda_distance(const XqdaModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& z);

}  // namespace reid
