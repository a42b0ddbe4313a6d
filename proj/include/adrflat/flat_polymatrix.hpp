#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "model.hpp"
#include "observer.hpp"
#include "polynomial.hpp"

namespace adrflat {

// Where a configuration coordinate of the polynomial model lives in the
// first-order state vector, and how the state-space disturbance on its
// acceleration row maps to the force-level disturbance (d_i = gain * tau_vel).
struct CoordinateEmbedding {
    Eigen::Index position = 0;
    Eigen::Index velocity = 1;
    double disturbance_gain = 1.0;
};

// A(s) x(s) + tau(s) = B(s) u  for second-order mechanical models.
struct PolyModel {
    PolyMatrix An_s;
    PolyMatrix Bn_s;
    std::vector<CoordinateEmbedding> embedding;
    Eigen::Index state_dim = 0;

    PolyModel(PolyMatrix A, PolyMatrix B, std::vector<CoordinateEmbedding> emb, Eigen::Index p)
        : An_s(std::move(A)), Bn_s(std::move(B)), embedding(std::move(emb)), state_dim(p) {
        if (An_s.rows() != An_s.cols())
            throw Error(ErrorCode::DimensionMismatch, "A(s) must be square");
        if (Bn_s.rows() != An_s.rows() || Bn_s.cols() != 1)
            throw Error(ErrorCode::DimensionMismatch, "B(s) must be p* x 1");
        if (embedding.size() != An_s.rows())
            throw Error(ErrorCode::DimensionMismatch, "one state embedding per polynomial coordinate");
        if (determinant().is_zero())
            throw Error(ErrorCode::SingularChannel, "A(s) is rank deficient as a polynomial matrix");
    }

    [[nodiscard]] std::size_t p_star() const noexcept { return An_s.rows(); }

    [[nodiscard]] Polynomial determinant() const { return det(An_s); }

    // Matched channels are those reached directly by the input.
    [[nodiscard]] std::vector<bool> matched_mask() const {
        std::vector<bool> m(p_star());
        for (std::size_t i = 0; i < p_star(); ++i)
            m[i] = !Bn_s(i, 0).is_zero();
        return m;
    }

private:
    static Polynomial det(const PolyMatrix& m) {
        const auto n = m.rows();
        if (n == 1)
            return m(0, 0);
        Polynomial acc;
        for (std::size_t c = 0; c < n; ++c) {
            PolyMatrix minor(n - 1, n - 1);
            for (std::size_t r = 1; r < n; ++r)
                for (std::size_t cc = 0, k = 0; cc < n; ++cc)
                    if (cc != c)
                        minor(r - 1, k++) = m(r, cc);
            const Polynomial term = m(0, c) * det(minor);
            acc += (c % 2 == 0) ? term : -term;
        }
        return acc;
    }
};

struct Annihilator {
    PolyMatrix c_s{1, 2};
    bool sign_flipped = false;
};

// c(s) = (-B_2(s), B_1(s)), sign-normalized so the first nonzero entry has a
// positive leading coefficient.
[[nodiscard]] inline Annihilator left_annihilator_2x1(const PolyMatrix& Bn_s) {
    if (Bn_s.rows() != 2 || Bn_s.cols() != 1)
        throw Error(ErrorCode::UnsupportedDimension,
                    "left annihilator implemented for 2x1 input matrices only, got " + std::to_string(Bn_s.rows()) +
                        "x" + std::to_string(Bn_s.cols()));
    if (Bn_s.is_zero())
        throw Error(ErrorCode::SingularChannel, "B(s) is identically zero");
    Annihilator out;
    out.c_s(0, 0) = -Bn_s(1, 0);
    out.c_s(0, 1) = Bn_s(0, 0);
    const Polynomial& first = out.c_s(0, 0).is_zero() ? out.c_s(0, 1) : out.c_s(0, 0);
    if (first.leading() < 0.0) {
        out.c_s(0, 0) = -out.c_s(0, 0);
        out.c_s(0, 1) = -out.c_s(0, 1);
        out.sign_flipped = true;
    }
    return out;
}

// Pins the free component of the flat parameterization: p_index(s) = value.
struct Normalization {
    std::size_t index = 1;
    Polynomial value;
};

struct FlatParameterization {
    PolyMatrix c_s{1, 2};
    PolyMatrix p1_s{2, 1};
    PolyMatrix P2_s{2, 2};
    Polynomial q1_s;
    PolyMatrix q2_s{1, 2};
    PolyMatrix q3_s{1, 2};
    std::vector<bool> matched;
};

namespace detail {
inline Polynomial exact_quotient(const Polynomial& num, const Polynomial& den, const char* what) {
    if (den.is_zero())
        throw Error(ErrorCode::SingularChannel, std::string(what) + ": pivot polynomial is identically zero");
    auto [q, r] = divide(num, den);
    const double scale = std::max(num.max_abs_coeff(), 1e-300);
    if (r.max_abs_coeff() > 1e-12 * scale)
        throw Error(ErrorCode::SingularChannel, std::string(what) + ": parameterization is not polynomial");
    return q;
}

inline PolyMatrix scaled(const PolyMatrix& m, double c) {
    PolyMatrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t k = 0; k < m.cols(); ++k)
            out(r, k) = m(r, k) * c;
    return out;
}
} // namespace detail

struct ParameterizationSolution {
    PolyMatrix p1_s{2, 1};
    PolyMatrix P2_s{2, 2};
};

// Solves c^T A p1 = 0 with p1[norm.index] = norm.value, then the particular
// mismatched-channel map P2 with c^T A P2 tau_mm = -c^T tau_mm.
[[nodiscard]] inline ParameterizationSolution solve_parameterization(const PolyModel& model, const PolyMatrix& c_s,
                                                                     const Normalization& norm) {
    if (model.p_star() != 2 || c_s.rows() != 1 || c_s.cols() != 2)
        throw Error(ErrorCode::UnsupportedDimension, "flat parameterization implemented for p* = 2 only");
    if (norm.index > 1 || norm.value.is_zero())
        throw Error(ErrorCode::InvalidArgument, "normalization must select a component and be nonzero");
    const PolyMatrix r = c_s * model.An_s; // 1 x 2
    const std::size_t i = norm.index;
    const std::size_t j = 1 - i;

    ParameterizationSolution out;
    out.p1_s(i, 0) = norm.value;
    out.p1_s(j, 0) = detail::exact_quotient(-(r(0, i) * norm.value), r(0, j), "flat channel");

    const auto matched = model.matched_mask();
    for (std::size_t m = 0; m < 2; ++m) {
        if (matched[m] || c_s(0, m).is_zero())
            continue;
        out.P2_s(j, m) = detail::exact_quotient(-c_s(0, m), r(0, j), "mismatched channel");
    }
    return out;
}

struct QPolynomials {
    Polynomial q1_s;
    PolyMatrix q2_s{1, 2};
    PolyMatrix q3_s{1, 2};
};

// q1 = (B^T B)^-1 B^T A p1;  q2^T = (B^T B)^-1 B^T on matched channels;
// q3^T = (B^T B)^-1 B^T (A P2 + I) on mismatched channels.
[[nodiscard]] inline QPolynomials compute_q_polynomials(const PolyModel& model, const PolyMatrix& p1_s,
                                                        const PolyMatrix& P2_s) {
    const PolyMatrix Bt = model.Bn_s.transpose();
    const Polynomial btb = (Bt * model.Bn_s)(0, 0);
    if (btb.is_zero())
        throw Error(ErrorCode::SingularChannel, "B^T B is identically zero");
    if (!btb.is_constant())
        throw Error(ErrorCode::SingularChannel, "B^T B is not invertible as a polynomial");
    const double inv = 1.0 / btb[0];

    QPolynomials out;
    out.q1_s = (Bt * model.An_s * p1_s)(0, 0) * inv;
    const PolyMatrix mm_map = Bt * (model.An_s * P2_s + PolyMatrix::identity(model.p_star()));
    const auto matched = model.matched_mask();
    for (std::size_t m = 0; m < model.p_star(); ++m) {
        if (matched[m])
            out.q2_s(0, m) = Bt(0, m) * inv;
        else
            out.q3_s(0, m) = mm_map(0, m) * inv;
    }
    return out;
}

// Annihilator, flat channel pinned by `norm`, then the q polynomials.
[[nodiscard]] inline FlatParameterization build_parameterization(const PolyModel& model, const Normalization& norm) {
    const auto ann = left_annihilator_2x1(model.Bn_s);
    const auto sol = solve_parameterization(model, ann.c_s, norm);
    const auto q = compute_q_polynomials(model, sol.p1_s, sol.P2_s);
    return FlatParameterization{ann.c_s, sol.p1_s, sol.P2_s, q.q1_s, q.q2_s, q.q3_s, model.matched_mask()};
}

// Force-level disturbance stacks D(i, order) = gain_i * tau_hat^(order)[vel_i].
[[nodiscard]] inline Matrix poly_disturbances(const PolyModel& model, const DisturbanceEstimates& est) {
    Matrix D(static_cast<Eigen::Index>(model.p_star()), static_cast<Eigen::Index>(est.tau_hat.size()));
    for (std::size_t i = 0; i < model.p_star(); ++i) {
        const auto& e = model.embedding[i];
        for (std::size_t o = 0; o < est.tau_hat.size(); ++o) {
            if (est.tau_hat[o].size() != model.state_dim)
                throw Error(ErrorCode::DimensionMismatch, "estimate length does not match the state dimension");
            D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o)) = e.disturbance_gain * est.tau_hat[o](e.velocity);
        }
    }
    return D;
}

namespace detail {
// pol(s) applied to a signal, shifted by `shift` derivatives.
inline double apply(const Polynomial& pol, std::span<const double> stack, std::size_t shift) {
    if (pol.is_zero())
        return 0.0;
    if (stack.size() < shift)
        throw Error(ErrorCode::InsufficientDerivatives, "derivative stack too short for the requested shift");
    return poly_eval_derivative_chain(pol, stack.subspan(shift));
}

inline std::vector<double> row_of(const Matrix& D, Eigen::Index r) {
    std::vector<double> v(static_cast<std::size_t>(D.cols()));
    for (Eigen::Index c = 0; c < D.cols(); ++c)
        v[static_cast<std::size_t>(c)] = D(r, c);
    return v;
}
} // namespace detail

// x_ref = p1(s) y + P2(s) tau_mm on positions, with velocities from the s-shift.
[[nodiscard]] inline Vector polymatrix_references(const PolyModel& model, const FlatParameterization& param,
                                                  std::span<const double> y, const Matrix& D) {
    Vector x_ref = Vector::Zero(model.state_dim);
    for (std::size_t i = 0; i < model.p_star(); ++i) {
        const auto& e = model.embedding[i];
        for (std::size_t shift = 0; shift < 2; ++shift) {
            double v = detail::apply(param.p1_s(i, 0), y, shift);
            for (std::size_t m = 0; m < model.p_star(); ++m) {
                if (param.matched[m] || param.P2_s(i, m).is_zero())
                    continue;
                const auto row = detail::row_of(D, static_cast<Eigen::Index>(m));
                v += detail::apply(param.P2_s(i, m), row, shift);
            }
            x_ref(shift == 0 ? e.position : e.velocity) = v;
        }
    }
    return x_ref;
}

struct PolymatrixFeedforward {
    double flat = 0.0;       // q1(s) y
    double matched = 0.0;    // q2^T tau_m
    double mismatched = 0.0; // q3^T tau_mm

    [[nodiscard]] double total() const noexcept { return flat + matched + mismatched; }
};

[[nodiscard]] inline PolymatrixFeedforward polymatrix_feedforward(const PolyModel& model,
                                                                  const FlatParameterization& param,
                                                                  std::span<const double> y, const Matrix& D) {
    PolymatrixFeedforward ff;
    ff.flat = poly_eval_derivative_chain(param.q1_s, y);
    for (std::size_t m = 0; m < model.p_star(); ++m) {
        const auto row = detail::row_of(D, static_cast<Eigen::Index>(m));
        ff.matched += detail::apply(param.q2_s(0, m), row, 0);
        ff.mismatched += detail::apply(param.q3_s(0, m), row, 0);
    }
    return ff;
}

struct PolymatrixControl {
    double u = 0.0;
    Vector x_ref;
    PolymatrixFeedforward ff;
};

// u = q1(s) y + K (x_ref - x) + q2^T(s) tau_m + q3^T(s) tau_mm.
[[nodiscard]] inline PolymatrixControl polymatrix_control(const PolyModel& model, const FlatParameterization& param,
                                                          std::span<const double> y, const Matrix& D,
                                                          const RowVector& K, const Vector& x) {
    if (K.size() != model.state_dim || x.size() != model.state_dim)
        throw Error(ErrorCode::DimensionMismatch, "gain and state must match the model state dimension");
    PolymatrixControl out;
    out.x_ref = polymatrix_references(model, param, y, D);
    out.ff = polymatrix_feedforward(model, param, y, D);
    out.u = out.ff.total() + K.dot(out.x_ref - x);
    return out;
}

// Scale gamma with (coordinate `out` position) = gamma * y_DFO; requires the
// tracked coordinate to be free of derivative and disturbance terms.
[[nodiscard]] inline double polymatrix_output_gain(const FlatParameterization& param, std::size_t out) {
    const Polynomial& p = param.p1_s(out, 0);
    if (!p.is_constant() || p.is_zero())
        throw Error(ErrorCode::InvalidArgument, "tracked coordinate is not a constant multiple of y_DFO");
    for (std::size_t m = 0; m < param.P2_s.cols(); ++m)
        if (!param.P2_s(out, m).is_zero())
            throw Error(ErrorCode::InvalidArgument, "tracked coordinate depends on mismatched disturbances");
    return p[0];
}

// Labeled coefficient listing, one polynomial per line: "name: c0 c1 c2 ...".
[[nodiscard]] inline std::string to_text(const FlatParameterization& param) {
    std::ostringstream os;
    auto line = [&](const std::string& name, const Polynomial& p) { os << name << ": " << p.to_string() << '\n'; };
    for (std::size_t i = 0; i < 2; ++i)
        line("c_" + std::to_string(i), param.c_s(0, i));
    for (std::size_t i = 0; i < 2; ++i)
        line("p1_" + std::to_string(i), param.p1_s(i, 0));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            line("P2_" + std::to_string(i) + "_" + std::to_string(j), param.P2_s(i, j));
    line("q1", param.q1_s);
    for (std::size_t i = 0; i < 2; ++i)
        line("q2_" + std::to_string(i), param.q2_s(0, i));
    for (std::size_t i = 0; i < 2; ++i)
        line("q3_" + std::to_string(i), param.q3_s(0, i));
    return os.str();
}

} // namespace adrflat
