#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "model.hpp"

namespace adrflat {

// Which first-term coupling the auxiliary-state update uses.
//  Derived: z_j' = -l_j z_0 + ...  (consistent with the error dynamics matrix Psi)
//  Printed: z_j' = -l_j z_j + ...  (kept for comparison only)
enum class ObserverForm { Derived, Printed };

// Gains L_0..L_k of the k-th order disturbance observer, i.e. the expansion
// of (lambda + lambda_dob)^{k+1}: L_j = C(k+1, j) * lambda_dob^{k+1-j}.
[[nodiscard]] inline std::vector<double> tune_gains_repeated(std::size_t k, double lambda_dob) {
    if (!(lambda_dob > 0.0))
        throw Error(ErrorCode::InvalidArgument, "observer bandwidth must be positive");
    std::vector<double> gains(k + 1);
    double binom = 1.0; // C(k+1, 0)
    for (std::size_t j = 0; j <= k; ++j) {
        gains[j] = binom * std::pow(lambda_dob, static_cast<double>(k + 1 - j));
        binom = binom * static_cast<double>(k + 1 - j) / static_cast<double>(j + 1);
    }
    return gains;
}

// Roots of lambda^{k+1} + L_k lambda^k + ... + L_0 via the companion matrix.
[[nodiscard]] inline std::vector<Complex> observer_characteristic_roots(const std::vector<double>& gains) {
    const auto n = static_cast<Eigen::Index>(gains.size());
    Matrix comp = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i)
        comp(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < n; ++j)
        comp(n - 1, j) = -gains[static_cast<std::size_t>(j)];
    return eigenvalues(comp);
}

class ObserverConfig {
public:
    ObserverConfig(StateSpaceModel model, std::vector<double> gains, ObserverForm form = ObserverForm::Derived)
        : model_(std::move(model)), gains_(std::move(gains)), form_(form) {
        if (gains_.empty())
            throw Error(ErrorCode::InvalidArgument, "observer needs at least one gain");
        for (double g : gains_)
            if (!std::isfinite(g))
                throw Error(ErrorCode::InvalidArgument, "observer gains must be finite");
        for (const auto& r : observer_characteristic_roots(gains_))
            if (!(r.real() < 0.0))
                throw Error(ErrorCode::InvalidArgument, "observer characteristic polynomial is not Hurwitz");
    }

    static ObserverConfig repeated(StateSpaceModel model, std::size_t k, double lambda_dob,
                                   ObserverForm form = ObserverForm::Derived) {
        return ObserverConfig(std::move(model), tune_gains_repeated(k, lambda_dob), form);
    }

    [[nodiscard]] std::size_t order() const noexcept { return gains_.size() - 1; }
    // L_0..L_k as coefficients of lambda^{k+1} + L_k lambda^k + ... + L_0.
    [[nodiscard]] const std::vector<double>& gains() const noexcept { return gains_; }
    // Gain of the j-th auxiliary variable (injection and extraction): L_{k-j}.
    [[nodiscard]] double row_gain(std::size_t j) const noexcept { return gains_[order() - j]; }
    [[nodiscard]] const StateSpaceModel& model() const noexcept { return model_; }
    [[nodiscard]] ObserverForm form() const noexcept { return form_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return model_.dim(); }
    [[nodiscard]] Eigen::Index state_size() const noexcept {
        return static_cast<Eigen::Index>(gains_.size()) * model_.dim();
    }

private:
    StateSpaceModel model_;
    std::vector<double> gains_;
    ObserverForm form_;
};

// Auxiliary estimates z_0..z_k stacked into one vector of length (k+1)p.
struct ObserverState {
    Vector z;

    [[nodiscard]] auto block(std::size_t j, Eigen::Index p) { return z.segment(static_cast<Eigen::Index>(j) * p, p); }
    [[nodiscard]] auto block(std::size_t j, Eigen::Index p) const {
        return z.segment(static_cast<Eigen::Index>(j) * p, p);
    }

    // z_j = l_j x0, i.e. every disturbance estimate starts at zero.
    static ObserverState at_rest(const ObserverConfig& cfg, const Vector& x0) {
        ObserverState s{Vector::Zero(cfg.state_size())};
        for (std::size_t j = 0; j <= cfg.order(); ++j)
            s.block(j, cfg.dim()) = cfg.row_gain(j) * x0;
        return s;
    }
};

// tau_hat[j] estimates the j-th time derivative of the lumped disturbance.
struct DisturbanceEstimates {
    std::vector<Vector> tau_hat;

    [[nodiscard]] std::size_t order() const noexcept { return tau_hat.empty() ? 0 : tau_hat.size() - 1; }

    static DisturbanceEstimates zeros(std::size_t k, Eigen::Index p) {
        return DisturbanceEstimates{std::vector<Vector>(k + 1, Vector::Zero(p))};
    }
};

// Error-dynamics matrix: -l_j I_p in block column 0 (l_j = L_{k-j}), I_p on
// the block superdiagonal. Its characteristic polynomial is
// (lambda^{k+1} + L_k lambda^k + ... + L_0)^p.
[[nodiscard]] inline Matrix assemble_psi(const ObserverConfig& cfg) {
    const auto p = cfg.dim();
    const auto n = cfg.state_size();
    Matrix psi = Matrix::Zero(n, n);
    const Matrix I = Matrix::Identity(p, p);
    for (std::size_t j = 0; j <= cfg.order(); ++j) {
        const auto r = static_cast<Eigen::Index>(j) * p;
        psi.block(r, 0, p, p) = -cfg.row_gain(j) * I;
        if (j < cfg.order())
            psi.block(r, r + p, p, p) = I;
    }
    return psi;
}

namespace detail {
inline void check_dims(const ObserverConfig& cfg, Eigen::Index z_size, Eigen::Index x_size) {
    if (z_size != cfg.state_size() || x_size != cfg.dim())
        throw Error(ErrorCode::DimensionMismatch, "observer state/measurement dimensions do not match the config");
}
} // namespace detail

// Writes the auxiliary-state derivative into `dz` (same layout as ObserverState::z).
inline void observer_derivatives_into(const ObserverConfig& cfg, Eigen::Ref<const Vector> z,
                                      Eigen::Ref<const Vector> x, double u, Eigen::Ref<Vector> dz) {
    detail::check_dims(cfg, z.size(), x.size());
    if (dz.size() != z.size())
        throw Error(ErrorCode::DimensionMismatch, "derivative buffer has the wrong size");
    const auto p = cfg.dim();
    const auto k = cfg.order();
    const Vector drive = cfg.model().A() * x + cfg.model().B() * u + cfg.row_gain(0) * x;
    for (std::size_t j = 0; j <= k; ++j) {
        const auto r = static_cast<Eigen::Index>(j) * p;
        const auto coupled = cfg.form() == ObserverForm::Derived ? 0 : r;
        const double l = cfg.row_gain(j);
        auto out = dz.segment(r, p);
        out.noalias() = -l * z.segment(coupled, p) + l * drive;
        if (j < k)
            out += z.segment(r + p, p) - cfg.row_gain(j + 1) * x;
    }
}

[[nodiscard]] inline ObserverState observer_derivatives(const ObserverConfig& cfg, const ObserverState& state,
                                                        const Vector& x, double u) {
    ObserverState d{Vector(cfg.state_size())};
    observer_derivatives_into(cfg, state.z, x, u, d.z);
    return d;
}

// tau_hat^(j) = z_j - l_j x.
[[nodiscard]] inline DisturbanceEstimates extract_estimates(const ObserverConfig& cfg, const ObserverState& state,
                                                            const Vector& x) {
    detail::check_dims(cfg, state.z.size(), x.size());
    DisturbanceEstimates est;
    est.tau_hat.reserve(cfg.order() + 1);
    for (std::size_t j = 0; j <= cfg.order(); ++j)
        est.tau_hat.emplace_back(state.block(j, cfg.dim()) - cfg.row_gain(j) * x);
    return est;
}

struct BoundParams {
    std::vector<double> delta; // bounds on |tau^(j)|, j = 0..k+1
    double lambda_min = 1.0;
};

// exp(-lambda_min t) |e0| + delta^{k+1} / lambda_min.
[[nodiscard]] inline double error_bound(const BoundParams& b, double e0_norm, double t) {
    if (t < 0.0)
        throw Error(ErrorCode::InvalidArgument, "error bound evaluated at negative time");
    if (!(b.lambda_min > 0.0) || b.delta.empty())
        throw Error(ErrorCode::InvalidArgument, "bound parameters need lambda_min > 0 and delta^{k+1}");
    return std::exp(-b.lambda_min * t) * e0_norm + b.delta.back() / b.lambda_min;
}

} // namespace adrflat
