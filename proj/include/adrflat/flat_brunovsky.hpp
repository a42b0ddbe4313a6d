#pragma once

#include <span>
#include <string>
#include <vector>

#include "model.hpp"
#include "observer.hpp"

namespace adrflat {

// d(j, i) holds the i-th time derivative of the j-th canonical-coordinate
// disturbance (T * tau)_j; shape p x (k+1).
struct TransformedDisturbanceStack {
    Matrix d;

    [[nodiscard]] Eigen::Index dim() const noexcept { return d.rows(); }
    [[nodiscard]] std::size_t order() const noexcept { return d.cols() == 0 ? 0 : static_cast<std::size_t>(d.cols() - 1); }
};

[[nodiscard]] inline TransformedDisturbanceStack transform_disturbances(const Matrix& T, const DisturbanceEstimates& est) {
    if (est.tau_hat.empty())
        throw Error(ErrorCode::DimensionMismatch, "empty disturbance estimate stack");
    const auto p = T.rows();
    TransformedDisturbanceStack out{Matrix(p, static_cast<Eigen::Index>(est.tau_hat.size()))};
    for (std::size_t i = 0; i < est.tau_hat.size(); ++i) {
        if (est.tau_hat[i].size() != T.cols())
            throw Error(ErrorCode::DimensionMismatch, "estimate vector length does not match T");
        out.d.col(static_cast<Eigen::Index>(i)).noalias() = T * est.tau_hat[i];
    }
    return out;
}

// How to treat a canonical disturbance derivative whose order exceeds what
// the observer supplies.
enum class DerivativePolicy {
    StructuralZeros, // only structurally nonzero components are demanded; otherwise fail
    Truncate,        // silently drop unavailable orders
};

// Setup-time analysis for the canonical-form reference generator: which rows
// of T * tau can be nonzero given the disturbance channels, and whether the
// observer order covers every derivative the control law consumes.
class BrunovskyFlatness {
public:
    BrunovskyFlatness(BrunovskyTransform transform, std::vector<bool> disturbance_channels, std::size_t observer_order,
                      DerivativePolicy policy = DerivativePolicy::StructuralZeros)
        : tr_(std::move(transform)), channels_(std::move(disturbance_channels)), k_(observer_order), policy_(policy) {
        const auto p = tr_.T.rows();
        if (channels_.empty())
            channels_.assign(static_cast<std::size_t>(p), true);
        if (static_cast<Eigen::Index>(channels_.size()) != p)
            throw Error(ErrorCode::DimensionMismatch, "disturbance channel mask must have length p");

        row_active_.assign(static_cast<std::size_t>(p), false);
        for (Eigen::Index j = 0; j < p; ++j) {
            const double scale = tr_.T.row(j).cwiseAbs().maxCoeff();
            for (Eigen::Index c = 0; c < p; ++c)
                if (channels_[static_cast<std::size_t>(c)] && std::abs(tr_.T(j, c)) > 1e-9 * scale)
                    row_active_[static_cast<std::size_t>(j)] = true;
        }
        // The control law needs d_j^(p-j) for j = 1..p (1-based).
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto needed = static_cast<std::size_t>(p - 1 - j);
            if (row_active_[static_cast<std::size_t>(j)] && needed > k_ && policy_ == DerivativePolicy::StructuralZeros)
                throw Error(ErrorCode::InsufficientDerivatives,
                            "canonical disturbance d~" + std::to_string(j + 1) + " needs derivative order " +
                                std::to_string(needed) + " but the observer order is " + std::to_string(k_));
        }
    }

    [[nodiscard]] const BrunovskyTransform& transform() const noexcept { return tr_; }
    [[nodiscard]] const std::vector<bool>& row_active() const noexcept { return row_active_; }
    [[nodiscard]] const std::vector<bool>& channels() const noexcept { return channels_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return tr_.T.rows(); }
    [[nodiscard]] DerivativePolicy policy() const noexcept { return policy_; }

    // Canonical disturbances from raw estimates with structurally-zero
    // channels masked out first.
    [[nodiscard]] TransformedDisturbanceStack transform(const DisturbanceEstimates& est) const {
        DisturbanceEstimates masked = est;
        for (auto& v : masked.tau_hat)
            for (Eigen::Index c = 0; c < v.size(); ++c)
                if (!channels_[static_cast<std::size_t>(c)])
                    v(c) = 0.0;
        return transform_disturbances(tr_.T, masked);
    }

    // d~_{row}^{(order)}, honoring the structural pattern and policy.
    [[nodiscard]] double term(const TransformedDisturbanceStack& s, Eigen::Index row, std::size_t order) const {
        if (!row_active_[static_cast<std::size_t>(row)])
            return 0.0;
        if (order < static_cast<std::size_t>(s.d.cols()))
            return s.d(row, static_cast<Eigen::Index>(order));
        if (policy_ == DerivativePolicy::Truncate)
            return 0.0;
        throw Error(ErrorCode::InsufficientDerivatives,
                    "d~" + std::to_string(row + 1) + "^(" + std::to_string(order) + ") is not available (stack order " +
                        std::to_string(s.order()) + ")");
    }

    // Canonical chain sum_{j<m} d~_j^{(m-1-j)} feeding coordinate m (0-based).
    [[nodiscard]] double chain(const TransformedDisturbanceStack& s, Eigen::Index m) const {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < m; ++j)
            acc += term(s, j, static_cast<std::size_t>(m - 1 - j));
        return acc;
    }

    // x~_ref with x~_1 = y and x~_m = y^(m-1) + chain(m).
    [[nodiscard]] Vector canonical_reference(std::span<const double> y, const TransformedDisturbanceStack& s) const {
        const auto p = dim();
        check_stacks(y, s, static_cast<std::size_t>(p));
        Vector xt(p);
        for (Eigen::Index m = 0; m < p; ++m)
            xt(m) = y[static_cast<std::size_t>(m)] + chain(s, m);
        return xt;
    }

    [[nodiscard]] Vector state_reference(std::span<const double> y, const TransformedDisturbanceStack& s) const {
        return tr_.T_inv * canonical_reference(y, s);
    }

    // Feedforward part: y^(p) + sum_j d~_j^(p-j) - a_c^T x~_ref.
    [[nodiscard]] double feedforward(std::span<const double> y, const TransformedDisturbanceStack& s,
                                     const Vector& xt_ref) const {
        const auto p = dim();
        check_stacks(y, s, static_cast<std::size_t>(p) + 1);
        return y[static_cast<std::size_t>(p)] + chain(s, p) - tr_.a_c.dot(xt_ref);
    }

private:
    void check_stacks(std::span<const double> y, const TransformedDisturbanceStack& s, std::size_t need) const {
        if (y.size() < need)
            throw Error(ErrorCode::InsufficientDerivatives,
                        "flat output stack has " + std::to_string(y.size()) + " entries, need " + std::to_string(need));
        if (s.d.rows() != dim())
            throw Error(ErrorCode::DimensionMismatch, "disturbance stack rows must equal p");
    }

    BrunovskyTransform tr_;
    std::vector<bool> channels_;
    std::vector<bool> row_active_;
    std::size_t k_;
    DerivativePolicy policy_;
};

[[nodiscard]] inline Vector brunovsky_state_reference(const BrunovskyFlatness& flat, std::span<const double> y,
                                                      const TransformedDisturbanceStack& stack) {
    return flat.state_reference(y, stack);
}

struct BrunovskyControl {
    double u = 0.0;
    Vector x_ref;
};

// u = y^(p) + K (x_ref - x) + sum_j d~_j^(p-j) - a_c^T T x_ref.
[[nodiscard]] inline BrunovskyControl brunovsky_control(const BrunovskyFlatness& flat, std::span<const double> y,
                                                        const TransformedDisturbanceStack& stack, const RowVector& K,
                                                        const Vector& x) {
    if (K.size() != flat.dim() || x.size() != flat.dim())
        throw Error(ErrorCode::DimensionMismatch, "gain and state must have length p");
    const Vector xt_ref = flat.canonical_reference(y, stack);
    BrunovskyControl out;
    out.x_ref = flat.transform().T_inv * xt_ref;
    out.u = flat.feedforward(y, stack, xt_ref) + K.dot(out.x_ref - x);
    return out;
}

// Scale gamma with C x = gamma * x~_1 when the tracked output C only sees the
// first canonical coordinate; y_DFO = output / gamma.
[[nodiscard]] inline double brunovsky_output_gain(const BrunovskyTransform& tr, const RowVector& C) {
    const RowVector ct = C * tr.T_inv;
    const double scale = ct.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 1; i < ct.size(); ++i)
        if (std::abs(ct(i)) > 1e-9 * scale)
            throw Error(ErrorCode::InvalidArgument,
                        "tracked output is not proportional to the first canonical coordinate");
    return ct(0);
}

} // namespace adrflat
