#include "extinct/spectral.hpp"

#include "extinct/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace extinct {
namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

bool same_cluster(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

bool is_symmetric_matrix(const Matrix& A) {
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    for (int i = 0; i < A.rows(); ++i) {
        for (int j = i + 1; j < A.cols(); ++j) {
            if (std::abs(A(i, j) - A(j, i)) > 1e-12 * scale) return false;
        }
    }
    return true;
}

std::string describe(double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    return os.str();
}

// Groups ascending values into clusters; returns [begin, end) index ranges.
std::vector<std::pair<int, int>> cluster(const std::vector<double>& sorted, double tol) {
    std::vector<std::pair<int, int>> out;
    int begin = 0;
    for (int i = 1; i <= static_cast<int>(sorted.size()); ++i) {
        if (i == static_cast<int>(sorted.size()) || !same_cluster(sorted[i - 1], sorted[i], tol)) {
            out.emplace_back(begin, i);
            begin = i;
        }
    }
    return out;
}

void finish(SpectralData& sd, const std::vector<std::pair<int, int>>& clusters, const LMatrix* X = nullptr,
            const LMatrix* Xinv = nullptr) {
    const int n = sd.n;
    sd.distinct_eigenvalues.clear();
    sd.multiplicity.clear();
    std::vector<int> owner(n);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto [b, e] = clusters[c];
        double mean = 0.0;
        for (int k = b; k < e; ++k) mean += sd.eigenvalues[k];
        mean /= (e - b);
        for (int k = b; k < e; ++k) {
            sd.eigenvalues[k] = mean;
            owner[k] = static_cast<int>(c);
        }
        sd.distinct_eigenvalues.push_back(mean);
        sd.multiplicity.push_back(e - b);
    }
    sd.A0 = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) sd.A0(k, k) = sd.eigenvalues[k];
    sd.projections.clear();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        if (X && Xinv) {
            const auto [b, e] = clusters[c];
            const LMatrix R = X->middleCols(b, e - b) * Xinv->middleRows(b, e - b);
            sd.projections.push_back(R.cast<double>());
        } else {
            sd.projections.push_back(sd.S_inv * sd.diagonal_selector(static_cast<int>(c)) * sd.S);
        }
    }
    sd.norm_S = operator_norm(sd.S);
    sd.norm_S_inv = operator_norm(sd.S_inv);
    sd.cond_S = sd.norm_S * sd.norm_S_inv;
}

}  // namespace

int SpectralData::find_eigenvalue(double lambda) const noexcept {
    for (int j = 0; j < distinct_count(); ++j) {
        if (same_cluster(distinct_eigenvalues[j], lambda, cluster_tol)) return j;
    }
    return -1;
}

Matrix SpectralData::diagonal_selector(int j) const {
    Matrix E = Matrix::Zero(n, n);
    const double lambda = distinct_eigenvalues.at(j);
    for (int k = 0; k < n; ++k) {
        if (eigenvalues[k] == lambda) E(k, k) = 1.0;
    }
    return E;
}

double operator_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

SpectralData validate_and_decompose(const Matrix& A, double tol) {
    const int n = static_cast<int>(A.rows());
    if (n < 1 || A.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch, "matrix must be square with n >= 1");
    }
    if (!A.allFinite()) throw Error(ErrorKind::NonfiniteValue, "matrix has non-finite entries");

    SpectralData sd;
    sd.A = A;
    sd.n = n;
    sd.cluster_tol = tol;
    sd.is_symmetric = is_symmetric_matrix(A);

    if (sd.is_symmetric) {
        const Matrix sym = 0.5 * (A + A.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
        if (es.info() != Eigen::Success) {
            throw Error(ErrorKind::NotDiagonalizable, "symmetric eigensolver failed");
        }
        const Vector& values = es.eigenvalues();
        for (int k = 0; k < n; ++k) {
            if (values(k) <= 0.0) {
                throw Error(ErrorKind::NonpositiveEigenvalue, "eigenvalue " + describe(values(k)));
            }
        }
        sd.eigenvalues.assign(values.data(), values.data() + n);
        sd.S_inv = es.eigenvectors();
        sd.S = sd.S_inv.transpose();
        finish(sd, cluster(sd.eigenvalues, tol));
        return sd;
    }

    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::NotDiagonalizable, "eigensolver failed");
    }
    std::vector<double> values;
    for (int k = 0; k < n; ++k) {
        const std::complex<double> ev = es.eigenvalues()(k);
        if (std::abs(ev.imag()) > tol * std::max(1.0, std::abs(ev))) {
            throw Error(ErrorKind::NonrealSpectrum,
                        "eigenvalue " + describe(ev.real()) + (ev.imag() < 0 ? " - " : " + ") +
                            describe(std::abs(ev.imag())) + "i");
        }
        values.push_back(ev.real());
    }
    std::sort(values.begin(), values.end());
    for (double v : values) {
        if (v <= 0.0) throw Error(ErrorKind::NonpositiveEigenvalue, "eigenvalue " + describe(v));
    }

    const auto clusters = cluster(values, tol);
    const double norm_A = operator_norm(A);
    const double rank_threshold = tol * std::max(norm_A, 1e-300);

    Matrix vectors(n, n);
    for (const auto& [b, e] : clusters) {
        double mean = 0.0;
        for (int k = b; k < e; ++k) mean += values[k];
        mean /= (e - b);
        const int m = e - b;
        Eigen::JacobiSVD<Matrix> svd(A - mean * Matrix::Identity(n, n), Eigen::ComputeFullV);
        const Vector& sv = svd.singularValues();
        int nullity = 0;
        for (int k = 0; k < n; ++k) {
            if (sv(k) <= rank_threshold) ++nullity;
        }
        if (nullity < m) {
            throw Error(ErrorKind::NotDiagonalizable,
                        "eigenvalue " + describe(mean) + " has algebraic multiplicity " +
                            std::to_string(m) + " but geometric multiplicity " +
                            std::to_string(nullity));
        }
        vectors.middleCols(b, m) = svd.matrixV().rightCols(m);
    }

    Eigen::FullPivLU<Matrix> lu(vectors);
    if (!lu.isInvertible()) {
        throw Error(ErrorKind::NotDiagonalizable, "eigenvector matrix is singular");
    }
    // Inverse iteration in extended precision sharpens each cluster's basis before inverting.
    const LMatrix Al = A.cast<long double>();
    LMatrix X = vectors.cast<long double>();
    const long double shift_floor = 1e-15L * static_cast<long double>(std::max(norm_A, 1e-300));
    for (const auto& [b, e] : clusters) {
        long double mean = 0.0L;
        for (int k = b; k < e; ++k) mean += values[k];
        mean /= (e - b);
        const int m = e - b;
        const LMatrix shifted = Al - (mean + shift_floor) * LMatrix::Identity(n, n);
        const Eigen::PartialPivLU<LMatrix> plu(shifted);
        for (int iter = 0; iter < 2; ++iter) {
            const LMatrix next = plu.solve(LMatrix(X.middleCols(b, m)));
            if (!next.allFinite()) break;
            X.middleCols(b, m) = LMatrix(Eigen::HouseholderQR<LMatrix>(next).householderQ()) * LMatrix::Identity(n, m);
        }
    }
    const Eigen::FullPivLU<LMatrix> xlu(X);
    if (!xlu.isInvertible()) throw Error(ErrorKind::NotDiagonalizable, "eigenvector matrix is singular");
    const LMatrix Xinv = xlu.inverse();
    sd.S_inv = X.cast<double>();
    sd.S = Xinv.cast<double>();

    // Rayleigh-type refinement: diagonal of S A S_inv, averaged per cluster in finish().
    const LMatrix D = Xinv * Al * X;
    sd.eigenvalues.resize(n);
    for (int k = 0; k < n; ++k) sd.eigenvalues[k] = static_cast<double>(D(k, k));
    finish(sd, clusters, &X, &Xinv);

    if (reconstruction_residual(sd) > 1e-10 * (1.0 + norm_A)) {
        throw Error(ErrorKind::NotDiagonalizable,
                    "eigenvector basis too ill-conditioned (cond(S) = " + describe(sd.cond_S) + ")");
    }
    return sd;
}

double spectral_gap(const SpectralData& sd, double lambda) {
    const int j = sd.find_eigenvalue(lambda);
    if (j < 0) throw Error(ErrorKind::UnknownEigenvalue, describe(lambda) + " is not in the spectrum");
    double mu = kInfinity;
    for (int k = 0; k < sd.distinct_count(); ++k) {
        if (k != j) mu = std::min(mu, std::abs(sd.distinct_eigenvalues[k] - sd.distinct_eigenvalues[j]));
    }
    return mu;
}

Vector push_forward(const SpectralData& sd, const Vector& y) {
    if (y.size() != sd.n) throw Error(ErrorKind::DimensionMismatch, "push_forward: vector size");
    return sd.S * y;
}

Vector pull_back(const SpectralData& sd, const Vector& z) {
    if (z.size() != sd.n) throw Error(ErrorKind::DimensionMismatch, "pull_back: vector size");
    return sd.S_inv * z;
}

double projection_identity_residual(const SpectralData& sd) {
    const int n = sd.n;
    const Matrix I = Matrix::Identity(n, n);
    Matrix sum = Matrix::Zero(n, n);
    double worst = 0.0;
    for (int i = 0; i < sd.distinct_count(); ++i) {
        const Matrix& Ri = sd.projections[i];
        sum += Ri;
        const double lambda = sd.distinct_eigenvalues[i];
        worst = std::max(worst, (sd.A * Ri - lambda * Ri).cwiseAbs().maxCoeff());
        worst = std::max(worst, (Ri * sd.A - lambda * Ri).cwiseAbs().maxCoeff());
        for (int j = 0; j < sd.distinct_count(); ++j) {
            const Matrix expected = (i == j) ? Ri : Matrix::Zero(n, n);
            worst = std::max(worst, (Ri * sd.projections[j] - expected).cwiseAbs().maxCoeff());
        }
    }
    return std::max(worst, (sum - I).cwiseAbs().maxCoeff());
}

double reconstruction_residual(const SpectralData& sd) {
    return (sd.S_inv * sd.A0 * sd.S - sd.A).cwiseAbs().maxCoeff();
}

}  // namespace extinct
