#include "doctest.h"
#include "support/battery.hpp"

#include "extinct/error.hpp"
#include "extinct/spectral.hpp"

#include <random>

using namespace extinct;
using battery::mat;
using battery::vec;

namespace {

ErrorKind kind_of(const Matrix& A) {
    try {
        validate_and_decompose(A);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("diagonal matrix decomposes trivially") {
    const auto sd = validate_and_decompose(mat(2, {1, 0, 0, 2}));
    CHECK(sd.eigenvalues == std::vector<double>{1.0, 2.0});
    CHECK(sd.distinct_count() == 2);
    CHECK(sd.is_symmetric);
    CHECK((sd.S.cwiseAbs() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("symmetric 2x2 projections match the hand-solved ones") {
    const auto sd = validate_and_decompose(mat(2, {2, 1, 1, 2}));
    REQUIRE(sd.distinct_count() == 2);
    CHECK(sd.distinct_eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sd.distinct_eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK((sd.projections[0] - 0.5 * mat(2, {1, -1, -1, 1})).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((sd.projections[1] - 0.5 * mat(2, {1, 1, 1, 1})).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((sd.S * sd.S.transpose() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("invalid spectra are rejected with their kind") {
    CHECK(kind_of(mat(2, {1, 1, 0, 1})) == ErrorKind::NotDiagonalizable);
    CHECK(kind_of(mat(2, {0, -1, 1, 0})) == ErrorKind::NonrealSpectrum);
    CHECK(kind_of(mat(2, {-1, 0, 0, 2})) == ErrorKind::NonpositiveEigenvalue);
    CHECK(kind_of(mat(2, {1, 2, 2, 1})) == ErrorKind::NonpositiveEigenvalue);
    CHECK(kind_of(mat(2, {1, std::nan(""), 0, 1})) == ErrorKind::NonfiniteValue);
    CHECK(kind_of(Matrix(2, 3)) == ErrorKind::DimensionMismatch);
}

TEST_CASE("nonsymmetric matrix with a repeated eigenvalue") {
    // S^{-1} diag(1, 1, 4) S with a non-orthogonal S.
    const Matrix S = mat(3, {1, 2, 0, 0, 1, 1, 1, 0, 1});
    const Matrix A = S.inverse() * vec({1, 1, 4}).asDiagonal() * S;
    const auto sd = validate_and_decompose(A);
    CHECK_FALSE(sd.is_symmetric);
    REQUIRE(sd.distinct_count() == 2);
    CHECK(sd.multiplicity == std::vector<int>{2, 1});
    CHECK(projection_identity_residual(sd) < 1e-12);
    CHECK(reconstruction_residual(sd) < 1e-12);
    CHECK(sd.projections[0].trace() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("spectral gap") {
    const auto sd13 = validate_and_decompose(mat(2, {1, 0, 0, 3}));
    CHECK(spectral_gap(sd13, 1.0) == 2.0);
    const auto sd1 = validate_and_decompose(mat(1, {1}));
    CHECK(spectral_gap(sd1, 1.0) == kInfinity);
    const auto sd125 = validate_and_decompose(mat(3, {1, 0, 0, 0, 2, 0, 0, 0, 5}));
    CHECK(spectral_gap(sd125, 2.0) == 1.0);
    CHECK_THROWS_AS(spectral_gap(sd125, 3.0), Error);
}

TEST_CASE("push forward and pull back") {
    const auto sdI = validate_and_decompose(mat(2, {1, 0, 0, 1}));
    const Vector y = vec({1, 2});
    CHECK((push_forward(sdI, y).cwiseAbs() - y).norm() < 1e-15);

    SpectralData perm;
    perm.n = 2;
    perm.S = mat(2, {0, 1, 1, 0});
    perm.S_inv = perm.S;
    CHECK(push_forward(perm, y) == vec({2, 1}));
    CHECK(pull_back(perm, vec({2, 1})) == y);

    const auto sd = validate_and_decompose(mat(3, {1, 0.5, 0.2, 0, 2, 0.3, 0, 0, 3.5}));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int k = 0; k < 50; ++k) {
        const Vector x = vec({g(rng), g(rng), g(rng)});
        const Vector z = push_forward(sd, x);
        CHECK((pull_back(sd, z) - x).norm() <= 1e-13 * x.norm());
        CHECK(z.norm() >= x.norm() / sd.norm_S_inv * (1 - 1e-12));
        CHECK(z.norm() <= sd.norm_S * x.norm() * (1 + 1e-12));
    }
    CHECK_THROWS_AS(push_forward(sd, vec({1, 2})), Error);
}

TEST_CASE("projection identities on random diagonalizable matrices") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> eigen_dist(0.5, 4.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 5;
        Matrix S(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) S(i, j) = g(rng) + (i == j ? 3.0 : 0.0);
        Vector d(n);
        for (int i = 0; i < n; ++i) d(i) = 0.5 + i + 0.3 * eigen_dist(rng);
        const Matrix A = S.inverse() * d.asDiagonal() * S;
        const auto sd = validate_and_decompose(A);
        CHECK(sd.distinct_count() == n);
        CHECK(projection_identity_residual(sd) < 1e-10);
        for (int j = 0; j < n; ++j) {
            CHECK(spectral_gap(sd, sd.distinct_eigenvalues[j]) > 0.0);
            CHECK(sd.find_eigenvalue(sd.distinct_eigenvalues[j]) == j);
        }
    }
}
