#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "flat_polymatrix.hpp"
#include "model.hpp"
#include "polynomial.hpp"

namespace adrflat {

// State ordering used throughout: (q1, dq1, q2, dq2).
inline constexpr Eigen::Index kQ1 = 0;
inline constexpr Eigen::Index kDQ1 = 1;
inline constexpr Eigen::Index kQ2 = 2;
inline constexpr Eigen::Index kDQ2 = 3;

// True two-mass-spring-damper parameters (SI units).
struct PlantParams {
    double m1 = 0.1;   // kg
    double m2 = 0.25;  // kg
    double b1 = 2.5;   // N s/m
    double b2 = 2.5;   // N s/m
    double b12 = 1.25; // N s/m, inter-mass damper
    double k = 100.0;  // N/m

    void validate() const {
        if (!(m1 > 0.0 && m2 > 0.0))
            throw Error(ErrorCode::InvalidArgument, "plant masses must be positive");
        if (b1 < 0.0 || b2 < 0.0 || b12 < 0.0 || k < 0.0)
            throw Error(ErrorCode::InvalidArgument, "plant damping and stiffness must be non-negative");
    }
};

struct NominalParams {
    double m1n = 0.065;
    double m2n = 0.0875;
    double b1n = 0.0;
    double b2n = 0.0;
    double kn = 265.0;

    void validate() const {
        if (!(m1n > 0.0 && m2n > 0.0 && kn > 0.0))
            throw Error(ErrorCode::InvalidArgument, "nominal masses and stiffness must be positive");
        if (b1n < 0.0 || b2n < 0.0)
            throw Error(ErrorCode::InvalidArgument, "nominal damping must be non-negative");
    }

    // m1n = 0.65 m1, m2n = 0.35 m2, b1n = b2n = 0, kn = 2.65 k.
    static NominalParams scaled_from(const PlantParams& p) { return {0.65 * p.m1, 0.35 * p.m2, 0.0, 0.0, 2.65 * p.k}; }

    // Exact model knowledge (the inter-mass damper is still unmodeled).
    static NominalParams exact(const PlantParams& p) { return {p.m1, p.m2, p.b1, p.b2, p.k}; }
};

[[nodiscard]] inline StateSpaceModel build_nominal_model(const NominalParams& n) {
    n.validate();
    Matrix A = Matrix::Zero(4, 4);
    A(kQ1, kDQ1) = 1.0;
    A(kDQ1, kQ1) = -n.kn / n.m1n;
    A(kDQ1, kDQ1) = -n.b1n / n.m1n;
    A(kDQ1, kQ2) = n.kn / n.m1n;
    A(kQ2, kDQ2) = 1.0;
    A(kDQ2, kQ1) = n.kn / n.m2n;
    A(kDQ2, kQ2) = -n.kn / n.m2n;
    A(kDQ2, kDQ2) = -n.b2n / n.m2n;
    Vector B = Vector::Zero(4);
    B(kDQ1) = 1.0 / n.m1n;
    return {std::move(A), std::move(B)};
}

// Kinematic rows (q' = dq) carry no disturbance.
[[nodiscard]] inline std::vector<bool> two_mass_disturbance_channels() { return {false, true, false, true}; }

[[nodiscard]] inline PolyModel build_poly_model(const NominalParams& n) {
    n.validate();
    PolyMatrix A(2, 2);
    A(0, 0) = Polynomial{n.kn, n.b1n, n.m1n};
    A(0, 1) = Polynomial{-n.kn};
    A(1, 0) = Polynomial{-n.kn};
    A(1, 1) = Polynomial{n.kn, n.b2n, n.m2n};
    PolyMatrix B(2, 1);
    B(0, 0) = Polynomial{1.0};
    std::vector<CoordinateEmbedding> emb{{kQ1, kDQ1, n.m1n}, {kQ2, kDQ2, n.m2n}};
    return PolyModel(std::move(A), std::move(B), std::move(emb), 4);
}

// External load on mass 2: amplitude * sin(omega_a t) * cos(omega_b t)
// inside [t_on, t_off], zero elsewhere.
struct ExternalForce {
    double amplitude = 25.0;
    double omega_a = 2.0 * std::numbers::pi;
    double omega_b = 6.0 * std::numbers::pi;
    double t_on = 2.5;
    double t_off = 10.0;
    double sign = 1.0; // sign with which the load enters d2

    [[nodiscard]] bool active(double t) const noexcept { return t >= t_on && t <= t_off; }
    [[nodiscard]] double operator()(double t) const noexcept {
        return active(t) ? amplitude * std::sin(omega_a * t) * std::cos(omega_b * t) : 0.0;
    }
};

struct DisturbanceSpec {
    ExternalForce f_ext;
    double f_ud1 = 0.0; // constant unmodeled force on mass 1 (N)
    double f_ud2 = 0.0; // constant unmodeled force on mass 2 (N)
    std::vector<double> measurement_noise_std; // per state; empty = noise-free

    void validate() const {
        if (f_ext.t_on > f_ext.t_off)
            throw Error(ErrorCode::InvalidArgument, "f_ext window has t_on > t_off");
        for (double s : measurement_noise_std)
            if (s < 0.0)
                throw Error(ErrorCode::InvalidArgument, "noise std must be non-negative");
        if (!measurement_noise_std.empty() && measurement_noise_std.size() != 4)
            throw Error(ErrorCode::DimensionMismatch, "measurement noise needs one std per state");
    }

    [[nodiscard]] bool noisy() const noexcept {
        for (double s : measurement_noise_std)
            if (s > 0.0)
                return true;
        return false;
    }

    static DisturbanceSpec none() {
        DisturbanceSpec d;
        d.f_ext.amplitude = 0.0;
        return d;
    }
};

// m1 q1'' = u - b1 q1' - k (q1 - q2) - b12 (q1' - q2') - f_ud1
// m2 q2'' = k (q1 - q2) + b12 (q1' - q2') - b2 q2' - f_ext - f_ud2
template <typename DerivedX, typename DerivedOut>
inline void true_derivative_into(const PlantParams& pl, const DisturbanceSpec& dist, double t,
                                 const Eigen::MatrixBase<DerivedX>& x, double u, Eigen::MatrixBase<DerivedOut>& dx) {
    const double spring = pl.k * (x(kQ1) - x(kQ2));
    const double coupling = pl.b12 * (x(kDQ1) - x(kDQ2));
    dx(kQ1) = x(kDQ1);
    dx(kDQ1) = (u - pl.b1 * x(kDQ1) - spring - coupling - dist.f_ud1) / pl.m1;
    dx(kQ2) = x(kDQ2);
    dx(kDQ2) = (spring + coupling - pl.b2 * x(kDQ2) - dist.f_ext.sign * dist.f_ext(t) - dist.f_ud2) / pl.m2;
}

[[nodiscard]] inline Vector true_derivative(const PlantParams& pl, const DisturbanceSpec& dist, double t,
                                            const Vector& x, double u) {
    if (x.size() != 4)
        throw Error(ErrorCode::DimensionMismatch, "two-mass state has 4 components");
    Vector dx(4);
    true_derivative_into(pl, dist, t, x, u, dx);
    return dx;
}

// Lumped disturbance seen by the nominal model: tau = A_n x + B_n u - x'.
[[nodiscard]] inline Vector lumped_disturbance(const StateSpaceModel& nominal, const PlantParams& pl,
                                               const DisturbanceSpec& dist, double t, const Vector& x, double u) {
    return nominal.A() * x + nominal.B() * u - true_derivative(pl, dist, t, x, u);
}

enum class ReferenceKind { Sine, Step };

// Desired trajectory for q2 with analytic derivatives. Steps are realised as
// a quintic smoothstep so derivatives through order 4 exist.
struct ReferenceSpec {
    ReferenceKind kind = ReferenceKind::Sine;
    double amplitude = 0.1;              // m
    double omega = std::numbers::pi;     // rad/s (sine)
    double phase = 0.0;                  // rad (sine)
    double offset = 0.0;                 // m
    double t_start = 0.0;                // s (step)
    double rise_time = 0.5;              // s (step)

    // (q, q', ..., q^(order)).
    [[nodiscard]] std::vector<double> derivatives(double t, std::size_t order) const {
        std::vector<double> out(order + 1, 0.0);
        if (kind == ReferenceKind::Sine) {
            const double arg = omega * t + phase;
            double w = 1.0;
            for (std::size_t i = 0; i <= order; ++i) {
                const double trig = (i % 4 == 0) ? std::sin(arg) : (i % 4 == 1) ? std::cos(arg)
                                                               : (i % 4 == 2) ? -std::sin(arg)
                                                                              : -std::cos(arg);
                out[i] = amplitude * w * trig;
                w *= omega;
            }
            out[0] += offset;
            return out;
        }
        if (!(rise_time > 0.0))
            throw Error(ErrorCode::InvalidArgument, "step rise time must be positive");
        const double tau = (t - t_start) / rise_time;
        if (tau <= 0.0) {
            out[0] = offset;
            return out;
        }
        if (tau >= 1.0) {
            out[0] = offset + amplitude;
            return out;
        }
        Polynomial s{0.0, 0.0, 0.0, 10.0, -15.0, 6.0};
        double scale = 1.0;
        for (std::size_t i = 0; i <= order; ++i) {
            out[i] = amplitude * s(tau) / scale;
            s = s.derivative();
            scale *= rise_time;
        }
        out[0] += offset;
        return out;
    }
};

} // namespace adrflat
