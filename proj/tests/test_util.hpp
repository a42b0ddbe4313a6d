#pragma once

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include <gtest/gtest.h>

#include "adrflat/error.hpp"
#include "adrflat/model.hpp"

// Asserts that `stmt` throws adrflat::Error carrying `code_`.
#define EXPECT_ADRFLAT_ERROR(stmt, code_)                                                                  \
    do {                                                                                                   \
        try {                                                                                              \
            stmt;                                                                                          \
            ADD_FAILURE() << "expected " << adrflat::to_string(code_) << " from " #stmt;                   \
        } catch (const adrflat::Error& e_) {                                                               \
            EXPECT_EQ(e_.code(), code_) << e_.what();                                                      \
        }                                                                                                  \
    } while (0)

namespace testutil {

inline std::mt19937_64& rng() {
    static std::mt19937_64 gen(20240611);
    return gen;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

// Eigenvalues in extended precision. Ill-conditioned closed loops and defective
// eigenvalues of high multiplicity lose ~eps^(1/m) in a double eigen-solve.
using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

inline std::vector<std::complex<double>> eigenvalues_ld(const MatrixL& m) {
    Eigen::EigenSolver<MatrixL> es(m, false);
    std::vector<std::complex<double>> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        out.emplace_back(static_cast<double>(es.eigenvalues()(i).real()),
                         static_cast<double>(es.eigenvalues()(i).imag()));
    return out;
}

inline std::vector<std::complex<double>> eigenvalues_ld(const Eigen::MatrixXd& m) {
    // Power-of-two balancing is exact, so it can be done in double first.
    return eigenvalues_ld(MatrixL(adrflat::balanced(m).cast<long double>()));
}

// eig(A - B K) with the product also formed in extended precision.
inline std::vector<std::complex<double>> closed_loop_eigenvalues_ld(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                                                                    const Eigen::RowVectorXd& K) {
    return eigenvalues_ld(MatrixL(A.cast<long double>() - B.cast<long double>() * K.cast<long double>()));
}

} // namespace testutil
