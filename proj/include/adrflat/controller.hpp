#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flat_brunovsky.hpp"
#include "flat_polymatrix.hpp"
#include "model.hpp"
#include "observer.hpp"
#include "plant.hpp"

namespace adrflat {

enum class ControllerVariant { Conventional, BrunovskyRobust, PolymatrixRobust };

[[nodiscard]] inline const char* to_string(ControllerVariant v) {
    switch (v) {
        case ControllerVariant::Conventional: return "conventional";
        case ControllerVariant::BrunovskyRobust: return "brunovsky";
        case ControllerVariant::PolymatrixRobust: return "polymatrix";
    }
    return "?";
}

[[nodiscard]] inline ControllerVariant parse_variant(const std::string& s) {
    if (s == "conventional")
        return ControllerVariant::Conventional;
    if (s == "brunovsky" || s == "brunovsky_robust")
        return ControllerVariant::BrunovskyRobust;
    if (s == "polymatrix" || s == "polymatrix_robust")
        return ControllerVariant::PolymatrixRobust;
    throw Error(ErrorCode::ConfigError, "unknown controller variant '" + s + "'");
}

struct ControllerSpec {
    ControllerVariant variant = ControllerVariant::PolymatrixRobust;
    std::vector<Complex> poles{-50.0, -50.0, -60.0, -60.0};
    std::size_t dob_order = 2;
    double dob_bandwidth = 1000.0; // rad/s; all observer roots at -dob_bandwidth
    ObserverForm observer_form = ObserverForm::Derived;
    DerivativePolicy derivative_policy = DerivativePolicy::StructuralZeros;
};

// Everything the reference generators need to know about the nominal plant.
struct FlatMachinery {
    StateSpaceModel model;
    std::optional<PolyModel> poly;
    std::vector<bool> disturbance_channels;
    Eigen::Index output_state = kQ2;     // tracked state component
    std::size_t output_coordinate = 1;   // same output as a polynomial-model coordinate
    Normalization normalization{1, Polynomial{265.0}};

    static FlatMachinery two_mass(const NominalParams& n) {
        return FlatMachinery{build_nominal_model(n), build_poly_model(n), two_mass_disturbance_channels(), kQ2, 1,
                             Normalization{1, Polynomial{n.kn}}};
    }
};

struct ControlOutput {
    double u = 0.0;
    Vector x_ref;
    Vector xi_error;          // reconstructed-state tracking error (physical coordinates)
    std::vector<double> y;    // flat output stack y, y', ..., y^(p)
};

// Deterministic control law u(x, estimates, reference) for one variant.
class Controller {
public:
    Controller(ControllerSpec spec, const FlatMachinery& fm)
        : spec_(std::move(spec)), K_(place_poles(fm.model, spec_.poles)), p_(fm.model.dim()) {
        if (spec_.variant == ControllerVariant::PolymatrixRobust) {
            if (!fm.poly)
                throw Error(ErrorCode::InvalidArgument, "polymatrix variant needs a polynomial model");
            poly_.emplace(*fm.poly);
            param_.emplace(build_parameterization(*poly_, fm.normalization));
            gain_ = polymatrix_output_gain(*param_, fm.output_coordinate);
            if (poly_->embedding[fm.output_coordinate].position != fm.output_state)
                throw Error(ErrorCode::InvalidArgument, "polynomial output coordinate does not match the state output");
        } else {
            // The conventional law feeds zero estimates, so no derivative order is ever demanded.
            const auto policy = spec_.variant == ControllerVariant::Conventional ? DerivativePolicy::Truncate
                                                                                : spec_.derivative_policy;
            brunovsky_.emplace(to_brunovsky(fm.model), fm.disturbance_channels, spec_.dob_order, policy);
            gain_ = brunovsky_output_gain(brunovsky_->transform(), RowVector::Unit(p_, fm.output_state));
        }
    }

    [[nodiscard]] const ControllerSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const RowVector& K() const noexcept { return K_; }
    [[nodiscard]] double output_gain() const noexcept { return gain_; }
    [[nodiscard]] const std::optional<BrunovskyFlatness>& brunovsky() const noexcept { return brunovsky_; }
    [[nodiscard]] const std::optional<FlatParameterization>& parameterization() const noexcept { return param_; }
    [[nodiscard]] const std::optional<PolyModel>& poly_model() const noexcept { return poly_; }

    // `output` holds the desired tracked output and its derivatives through order p.
    [[nodiscard]] ControlOutput evaluate(std::span<const double> output, const DisturbanceEstimates& est,
                                         const Vector& x) const {
        if (output.size() < static_cast<std::size_t>(p_) + 1)
            throw Error(ErrorCode::InsufficientDerivatives, "reference stack must reach order p");
        ControlOutput out;
        out.y.resize(output.size());
        for (std::size_t i = 0; i < output.size(); ++i)
            out.y[i] = output[i] / gain_;

        if (spec_.variant == ControllerVariant::PolymatrixRobust) {
            const Matrix D = poly_disturbances(*poly_, est);
            const auto c = polymatrix_control(*poly_, *param_, out.y, D, K_, x);
            out.u = c.u;
            out.x_ref = c.x_ref;
        } else {
            const auto stack = spec_.variant == ControllerVariant::Conventional
                                   ? TransformedDisturbanceStack{Matrix::Zero(p_, static_cast<Eigen::Index>(est.tau_hat.size()))}
                                   : brunovsky_->transform(est);
            const auto c = brunovsky_control(*brunovsky_, out.y, stack, K_, x);
            out.u = c.u;
            out.x_ref = c.x_ref;
        }
        // Both robust references satisfy xi_ref = x_ref - (disturbance shift) with the same
        // shift applied to x, so the reconstructed tracking error is x - x_ref.
        out.xi_error = x - out.x_ref;
        return out;
    }

private:
    ControllerSpec spec_;
    RowVector K_;
    Eigen::Index p_;
    double gain_ = 1.0;
    std::optional<BrunovskyFlatness> brunovsky_;
    std::optional<PolyModel> poly_;
    std::optional<FlatParameterization> param_;
};

[[nodiscard]] inline Controller make_controller(const ControllerSpec& spec, const FlatMachinery& fm) {
    return Controller(spec, fm);
}

// Reconstructed state xi = x - P2(s) tau_mm (positions, velocities by s-shift):
// a state of the nominal model driven by matched disturbances only.
[[nodiscard]] inline Vector reconstruct_xi(const Vector& x, const Matrix& D, const PolyModel& model,
                                           const FlatParameterization& param) {
    if (x.size() != model.state_dim || D.rows() != static_cast<Eigen::Index>(model.p_star()))
        throw Error(ErrorCode::DimensionMismatch, "state or disturbance stack has the wrong size");
    Vector xi = x;
    for (std::size_t i = 0; i < model.p_star(); ++i) {
        const auto& e = model.embedding[i];
        for (std::size_t m = 0; m < model.p_star(); ++m) {
            if (param.matched[m] || param.P2_s(i, m).is_zero())
                continue;
            const auto row = detail::row_of(D, static_cast<Eigen::Index>(m));
            xi(e.position) -= detail::apply(param.P2_s(i, m), row, 0);
            xi(e.velocity) -= detail::apply(param.P2_s(i, m), row, 1);
        }
    }
    return xi;
}

// Canonical-coordinate chain: xi~_1 = x~_1, xi~_m = x~_m - sum_{j<m} d~_j^(m-1-j).
[[nodiscard]] inline Vector reconstruct_xi_canonical(const BrunovskyFlatness& flat, const Vector& x,
                                                     const TransformedDisturbanceStack& stack) {
    if (x.size() != flat.dim())
        throw Error(ErrorCode::DimensionMismatch, "state has the wrong size");
    Vector xi = flat.transform().T * x;
    for (Eigen::Index m = 1; m < flat.dim(); ++m)
        xi(m) -= flat.chain(stack, m);
    return xi;
}

struct UltimateBound {
    double ell = 0.0;
    double phi = 0.0;
    double radius_sq = 0.0;
    LyapunovCertificate certificate;
};

// Ultimate-boundedness ball |xi|^2 <= phi / ell with
// phi = (max |eig(P)|)^2 delta^2 and ell = lambda_min(Q) - 1 - 1e-6.
[[nodiscard]] inline UltimateBound certify_ultimate_bound(const Matrix& A_n, const Vector& B_n, const RowVector& K,
                                                          const Matrix& Q, double delta_match_err) {
    const Matrix A_cl = A_n - B_n * K;
    auto cert = lyapunov_solve(A_cl, Q);
    if (cert.lambda_min_Q <= 1.0 + 1e-6)
        throw Error(ErrorCode::QTooSmall, "lambda_min(Q) must exceed 1");
    UltimateBound ub;
    ub.ell = cert.lambda_min_Q - 1.0 - 1e-6;
    ub.phi = cert.lambda_max_abs_P * cert.lambda_max_abs_P * delta_match_err * delta_match_err;
    ub.radius_sq = ub.phi / ub.ell;
    ub.certificate = std::move(cert);
    return ub;
}

} // namespace adrflat
