#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace extinct {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Eigen-structure of a real diagonalizable matrix with positive spectrum.
///
/// A = S_inv * A0 * S with A0 = diag(eigenvalues). The spectral projection
/// onto the eigenspace of distinct_eigenvalues[j] is projections[j]; the
/// projections sum to the identity and commute with A. For symmetric input
/// S is orthogonal, so S_inv = S^T.
struct SpectralData {
    Matrix A;
    int n = 0;
    std::vector<double> eigenvalues;           // ascending, with multiplicity
    std::vector<double> distinct_eigenvalues;  // strictly ascending
    std::vector<int> multiplicity;             // parallel to distinct_eigenvalues
    Matrix S;
    Matrix S_inv;
    Matrix A0;
    std::vector<Matrix> projections;
    bool is_symmetric = false;
    double cond_S = 1.0;
    double norm_S = 1.0;
    double norm_S_inv = 1.0;
    double cluster_tol = 1e-8;

    [[nodiscard]] int distinct_count() const noexcept {
        return static_cast<int>(distinct_eigenvalues.size());
    }
    [[nodiscard]] double smallest() const { return distinct_eigenvalues.front(); }
    [[nodiscard]] double largest() const { return distinct_eigenvalues.back(); }

    /// Index into distinct_eigenvalues of the eigenvalue matching `lambda`
    /// under the clustering tolerance, or -1.
    [[nodiscard]] int find_eigenvalue(double lambda) const noexcept;

    /// 0/1 diagonal selector of the eigenvalue with index j, i.e. the
    /// spectral projection of A0.
    [[nodiscard]] Matrix diagonal_selector(int j) const;
};

inline constexpr double kDefaultClusterTol = 1e-8;

/// Checks that A is real-diagonalizable with positive eigenvalues and builds
/// its spectral machinery. Throws Error{NonrealSpectrum, NonpositiveEigenvalue,
/// NotDiagonalizable, NonfiniteValue}.
SpectralData validate_and_decompose(const Matrix& A, double tol = kDefaultClusterTol);

/// Distance from `lambda` to the rest of the spectrum; +inf when d == 1.
double spectral_gap(const SpectralData& sd, double lambda);

Vector push_forward(const SpectralData& sd, const Vector& y);
Vector pull_back(const SpectralData& sd, const Vector& z);

/// Largest per-entry violation of the projection identities
/// (sum = I, R_i R_j = delta_ij R_j, A R = R A = lambda R).
double projection_identity_residual(const SpectralData& sd);

/// ||S_inv A0 S - A||_max.
double reconstruction_residual(const SpectralData& sd);

/// Operator 2-norm.
double operator_norm(const Matrix& M);

}  // namespace extinct
