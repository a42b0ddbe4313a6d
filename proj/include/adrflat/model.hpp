#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace adrflat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;

// Nominal single-input LTI plant  x' = A x + B u - tau.
class StateSpaceModel {
public:
    StateSpaceModel(Matrix A, Vector B) : A_(std::move(A)), B_(std::move(B)) {
        if (A_.rows() < 1 || A_.rows() != A_.cols())
            throw Error(ErrorCode::DimensionMismatch, "A must be square with p >= 1");
        if (B_.size() != A_.rows())
            throw Error(ErrorCode::DimensionMismatch, "B must have length p");
        if (!A_.allFinite() || !B_.allFinite())
            throw Error(ErrorCode::InvalidArgument, "model entries must be finite");
    }

    [[nodiscard]] const Matrix& A() const noexcept { return A_; }
    [[nodiscard]] const Vector& B() const noexcept { return B_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return A_.rows(); }

private:
    Matrix A_;
    Vector B_;
};

// Krylov matrix [B, AB, ..., A^{p-1}B].
[[nodiscard]] inline Matrix controllability_matrix(const StateSpaceModel& model) {
    const auto p = model.dim();
    Matrix gamma(p, p);
    Vector col = model.B();
    for (Eigen::Index i = 0; i < p; ++i) {
        gamma.col(i) = col;
        col = model.A() * col;
    }
    return gamma;
}

// Singular-value ratio test; threshold 1e-9 of the largest singular value.
[[nodiscard]] inline bool is_full_rank(const Matrix& m, double rel_tol = 1e-9) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return false;
    return s(s.size() - 1) > rel_tol * s(0);
}

// Diagonal similarity D^-1 M D with row/column norms equalized in powers of
// two (Parlett-Reinsch); eigenvalues are unchanged, rounding is reduced.
[[nodiscard]] inline Matrix balanced(Matrix m) {
    const Eigen::Index n = m.rows();
    bool converged = false;
    while (!converged) {
        converged = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = m.col(i).cwiseAbs().sum() - std::abs(m(i, i));
            const double r = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
            if (c == 0.0 || r == 0.0)
                continue;
            double f = 1.0;
            double cc = c;
            while (cc < r / 2.0) {
                cc *= 2.0;
                f *= 2.0;
            }
            while (cc >= r * 2.0) {
                cc /= 2.0;
                f /= 2.0;
            }
            if ((cc + r / f) < 0.95 * (c + r)) {
                converged = false;
                m.row(i) /= f;
                m.col(i) *= f;
            }
        }
    }
    return m;
}

[[nodiscard]] inline std::vector<Complex> eigenvalues(const Matrix& m) {
    Eigen::EigenSolver<Matrix> es(balanced(m), false);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidArgument, "eigenvalue solver did not converge");
    std::vector<Complex> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    return out;
}

[[nodiscard]] inline bool is_hurwitz(const Matrix& m, double margin = 1e-9) {
    for (const auto& ev : eigenvalues(m))
        if (ev.real() >= -margin)
            return false;
    return true;
}

// Largest deviation |got_i - want_pi(i)| / max(1, |want|) under a greedy
// nearest-neighbour matching of the two multisets.
[[nodiscard]] inline double max_relative_eigen_mismatch(std::vector<Complex> got, const std::vector<Complex>& want) {
    if (got.size() != want.size())
        return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& w : want) {
        auto best = std::min_element(got.begin(), got.end(),
                                     [&](const Complex& a, const Complex& b) { return std::abs(a - w) < std::abs(b - w); });
        worst = std::max(worst, std::abs(*best - w) / std::max(1.0, std::abs(w)));
        got.erase(best);
    }
    return worst;
}

// Monic polynomial with the given roots, ascending real coefficients
// (the leading 1 included). Roots must be closed under conjugation.
[[nodiscard]] inline std::vector<double> monic_from_roots(std::span<const Complex> roots) {
    std::vector<Complex> c{Complex{1.0, 0.0}};
    for (const auto& r : roots) {
        std::vector<Complex> next(c.size() + 1, Complex{});
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> out(c.size());
    double scale = 1.0;
    for (const auto& x : c)
        scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (std::abs(c[i].imag()) > 1e-9 * scale)
            throw Error(ErrorCode::InvalidArgument, "pole set is not closed under complex conjugation");
        out[i] = c[i].real();
    }
    return out;
}

// Similarity transform to the controllable companion (Brunovsky) form:
//   T A T^-1 = [0 I; a_c^T],  T B = e_p.
struct BrunovskyTransform {
    Matrix T;
    Matrix T_inv;
    RowVector a_c;
};

[[nodiscard]] inline BrunovskyTransform to_brunovsky(const StateSpaceModel& model) {
    const auto p = model.dim();
    const Matrix gamma = controllability_matrix(model);
    if (!is_full_rank(gamma))
        throw Error(ErrorCode::NotControllable, "controllability matrix is rank deficient");

    // q^T = last row of gamma^-1, so q^T A^i B = 0 for i < p-1 and 1 for i = p-1.
    const RowVector q = gamma.transpose().fullPivLu().solve(Vector::Unit(p, p - 1)).transpose();
    BrunovskyTransform out;
    out.T.resize(p, p);
    RowVector row = q;
    for (Eigen::Index i = 0; i < p; ++i) {
        out.T.row(i) = row;
        row = row * model.A();
    }
    const double tb = (out.T * model.B())(p - 1);
    out.T /= tb;
    out.T_inv = out.T.fullPivLu().inverse();
    out.a_c = (out.T * model.A() * out.T_inv).row(p - 1);
    return out;
}

// State feedback K with eig(A - B K) = desired, via Ackermann's formula in
// Brunovsky coordinates.
[[nodiscard]] inline RowVector place_poles(const StateSpaceModel& model, std::span<const Complex> desired) {
    const auto p = model.dim();
    if (static_cast<Eigen::Index>(desired.size()) != p)
        throw Error(ErrorCode::DimensionMismatch,
                    "need " + std::to_string(p) + " poles, got " + std::to_string(desired.size()));
    const auto tr = to_brunovsky(model);
    const auto beta = monic_from_roots(desired);
    RowVector k_tilde(p);
    for (Eigen::Index i = 0; i < p; ++i)
        k_tilde(i) = tr.a_c(i) + beta[static_cast<std::size_t>(i)];
    return k_tilde * tr.T;
}

[[nodiscard]] inline RowVector place_poles(const StateSpaceModel& model, std::initializer_list<double> real_poles) {
    std::vector<Complex> poles(real_poles.begin(), real_poles.end());
    return place_poles(model, poles);
}

struct LyapunovCertificate {
    Matrix P;
    Matrix Q;
    double lambda_min_Q = 0.0;
    double lambda_max_abs_P = 0.0;
    double residual = 0.0; // max-abs of A^T P + P A + Q
};

// Solves A^T P + P A = -Q through the Kronecker-vectorised linear system.
[[nodiscard]] inline LyapunovCertificate lyapunov_solve(const Matrix& A_cl, const Matrix& Q) {
    const auto p = A_cl.rows();
    if (A_cl.cols() != p || Q.rows() != p || Q.cols() != p)
        throw Error(ErrorCode::DimensionMismatch, "Lyapunov operands must be square and equal-sized");
    if (!is_hurwitz(A_cl))
        throw Error(ErrorCode::NotHurwitz, "closed-loop matrix has an eigenvalue with real part >= -1e-9");

    const Matrix I = Matrix::Identity(p, p);
    Matrix kron(p * p, p * p);
    // vec(A^T P) = (I (x) A^T) vec(P),  vec(P A) = (A^T (x) I) vec(P)
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            kron.block(i * p, j * p, p, p) = I(i, j) * A_cl.transpose() + A_cl(j, i) * I;
    const Vector rhs = -Eigen::Map<const Vector>(Q.data(), p * p);
    const Vector vecP = kron.partialPivLu().solve(rhs);

    LyapunovCertificate cert;
    cert.P = Eigen::Map<const Matrix>(vecP.data(), p, p);
    cert.P = 0.5 * (cert.P + cert.P.transpose());
    cert.Q = Q;
    cert.residual = (A_cl.transpose() * cert.P + cert.P * A_cl + Q).cwiseAbs().maxCoeff();

    Eigen::SelfAdjointEigenSolver<Matrix> eq(0.5 * (Q + Q.transpose()));
    Eigen::SelfAdjointEigenSolver<Matrix> ep(cert.P);
    cert.lambda_min_Q = eq.eigenvalues().minCoeff();
    cert.lambda_max_abs_P = ep.eigenvalues().cwiseAbs().maxCoeff();
    if (cert.lambda_min_Q <= 0.0)
        throw Error(ErrorCode::InvalidArgument, "Q must be positive definite");
    return cert;
}

} // namespace adrflat
