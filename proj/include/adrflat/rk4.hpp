#pragma once

#include <Eigen/Dense>

namespace adrflat {

// Classical fixed-step fourth-order Runge-Kutta with reusable stage buffers.
// `f(t, y, dy)` must write the derivative of `y` into `dy`.
class Rk4 {
public:
    explicit Rk4(Eigen::Index n) : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

    template <typename F>
    void step(F&& f, double t, Eigen::VectorXd& y, double h) {
        f(t, y, k1_);
        tmp_ = y + 0.5 * h * k1_;
        f(t + 0.5 * h, tmp_, k2_);
        tmp_ = y + 0.5 * h * k2_;
        f(t + 0.5 * h, tmp_, k3_);
        tmp_ = y + h * k3_;
        f(t + h, tmp_, k4_);
        y += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

// Integrates from t0 over `steps` steps of size h; returns the final state.
template <typename F>
[[nodiscard]] Eigen::VectorXd integrate_rk4(F&& f, double t0, Eigen::VectorXd y, double h, long steps) {
    Rk4 rk(y.size());
    for (long n = 0; n < steps; ++n)
        rk.step(f, t0 + static_cast<double>(n) * h, y, h);
    return y;
}

} // namespace adrflat
