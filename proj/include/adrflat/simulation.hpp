#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "controller.hpp"
#include "observer.hpp"
#include "plant.hpp"
#include "rk4.hpp"

namespace adrflat {

struct Scenario {
    PlantParams plant;
    NominalParams nominal = NominalParams::scaled_from(PlantParams{});
    DisturbanceSpec disturbance;
    ControllerSpec controller;
    ReferenceSpec reference;
    double dt = 1e-5;            // s
    double duration = 10.0;      // s
    double log_interval = 1e-3;  // s, rounded to a whole number of steps
    std::uint64_t seed = 1;
    std::vector<double> initial_state{0.0, 0.0, 0.0, 0.0};
};

// Time series of one run on a uniform grid (every `stride` integration steps).
struct SimLog {
    std::vector<double> t;
    std::vector<double> u;
    std::vector<double> q2_ref;
    std::vector<double> xi_norm;
    Matrix x;                      // 4 x n
    Matrix x_ref;                  // 4 x n
    Matrix tau_true;               // 4 x n, lumped disturbance of the nominal model
    std::vector<Matrix> tau_hat;   // (k+1) entries, 4 x n each
    Matrix y;                      // (p+1) x n flat output stack
    Matrix xi;                     // 4 x n reconstructed tracking error
    double dt = 0.0;               // spacing of logged samples
    std::size_t order = 0;         // observer order k
    double force_gain_1 = 1.0;     // d1 = gain * tau(dq1 row)
    double force_gain_2 = 1.0;     // d2 = gain * tau(dq2 row)

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }

    void reserve(std::size_t n, std::size_t k, Eigen::Index p) {
        t.reserve(n);
        u.reserve(n);
        q2_ref.reserve(n);
        xi_norm.reserve(n);
        const auto cols = static_cast<Eigen::Index>(n);
        x.resize(4, cols);
        x_ref.resize(4, cols);
        tau_true.resize(4, cols);
        tau_hat.assign(k + 1, Matrix(4, cols));
        y.resize(p + 1, cols);
        xi.resize(4, cols);
    }

    void shrink_to_size() {
        const auto n = static_cast<Eigen::Index>(t.size());
        x.conservativeResize(Eigen::NoChange, n);
        x_ref.conservativeResize(Eigen::NoChange, n);
        tau_true.conservativeResize(Eigen::NoChange, n);
        for (auto& m : tau_hat)
            m.conservativeResize(Eigen::NoChange, n);
        y.conservativeResize(Eigen::NoChange, n);
        xi.conservativeResize(Eigen::NoChange, n);
    }

    // Force-level disturbance d_c (c = 1 or 2), true or estimated derivative order j.
    [[nodiscard]] double d_true(int c, Eigen::Index i) const {
        return c == 1 ? force_gain_1 * tau_true(kDQ1, i) : force_gain_2 * tau_true(kDQ2, i);
    }
    [[nodiscard]] double d_hat(int c, std::size_t j, Eigen::Index i) const {
        return c == 1 ? force_gain_1 * tau_hat[j](kDQ1, i) : force_gain_2 * tau_hat[j](kDQ2, i);
    }
};

class UnstableRun : public Error {
public:
    UnstableRun(const std::string& what, SimLog partial)
        : Error(ErrorCode::UnstableRun, what), partial_(std::move(partial)) {}
    [[nodiscard]] const SimLog& partial_log() const noexcept { return partial_; }

private:
    SimLog partial_;
};

namespace detail {
inline long step_count(double span, double dt) { return std::lround(span / dt); }
} // namespace detail

[[nodiscard]] inline SimLog run_scenario(const Scenario& sc) {
    if (!(sc.dt > 0.0) || !(sc.duration > 0.0))
        throw Error(ErrorCode::InvalidArgument, "dt and duration must be positive");
    if (sc.dt > 0.1 * (2.0 / sc.controller.dob_bandwidth))
        throw Error(ErrorCode::StepTooLarge, "dt must not exceed 0.2 / dob_bandwidth = " +
                                                 std::to_string(0.2 / sc.controller.dob_bandwidth) + " s");
    if (sc.initial_state.size() != 4)
        throw Error(ErrorCode::DimensionMismatch, "initial state needs 4 components");
    sc.plant.validate();
    sc.disturbance.validate();

    const auto fm = FlatMachinery::two_mass(sc.nominal);
    const Controller ctrl(sc.controller, fm);
    const auto obs = ObserverConfig::repeated(fm.model, sc.controller.dob_order, sc.controller.dob_bandwidth,
                                              sc.controller.observer_form);
    const Eigen::Index p = 4;
    const auto k = obs.order();
    const Eigen::Index nz = obs.state_size();

    const long steps = detail::step_count(sc.duration, sc.dt);
    const long stride = std::max(1L, detail::step_count(sc.log_interval, sc.dt));

    SimLog log;
    log.dt = static_cast<double>(stride) * sc.dt;
    log.order = k;
    log.force_gain_1 = sc.nominal.m1n;
    log.force_gain_2 = sc.nominal.m2n;
    log.reserve(static_cast<std::size_t>(steps / stride + 1), k, p);

    Vector X(p + nz);
    X.head(p) = Eigen::Map<const Vector>(sc.initial_state.data(), p);
    X.tail(nz) = ObserverState::at_rest(obs, X.head(p)).z;

    std::mt19937_64 rng(sc.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool noisy = sc.disturbance.noisy();
    Vector noise = Vector::Zero(p);

    Rk4 rk(X.size());
    Vector x_meas(p);
    Vector dx(p);
    double u = 0.0;
    auto rhs = [&](double t, const Vector& s, Vector& ds) {
        auto xs = s.head(p);
        true_derivative_into(sc.plant, sc.disturbance, t, xs, u, dx);
        ds.head(p) = dx;
        x_meas = xs + noise;
        observer_derivatives_into(obs, s.tail(nz), x_meas, u, ds.tail(nz));
    };

    ObserverState zs{Vector(nz)};
    for (long n = 0; n <= steps; ++n) {
        const double t = static_cast<double>(n) * sc.dt;
        if (noisy)
            for (Eigen::Index i = 0; i < p; ++i)
                noise(i) = sc.disturbance.measurement_noise_std[static_cast<std::size_t>(i)] * normal(rng);
        x_meas = X.head(p) + noise;
        zs.z = X.tail(nz);
        const auto est = extract_estimates(obs, zs, x_meas);
        const auto ref = sc.reference.derivatives(t, static_cast<std::size_t>(p));
        const auto out = ctrl.evaluate(ref, est, x_meas);
        u = out.u;

        if (!X.head(p).allFinite() || X.head(p).cwiseAbs().maxCoeff() > 1e6 || !std::isfinite(u)) {
            log.shrink_to_size();
            throw UnstableRun("state exceeded 1e6 at t = " + std::to_string(t) + " s", std::move(log));
        }

        if (n % stride == 0) {
            const auto i = static_cast<Eigen::Index>(log.t.size());
            const Vector x = X.head(p);
            log.t.push_back(t);
            log.u.push_back(u);
            log.q2_ref.push_back(ref[0]);
            log.xi_norm.push_back(out.xi_error.norm());
            log.x.col(i) = x;
            log.x_ref.col(i) = out.x_ref;
            log.tau_true.col(i) = lumped_disturbance(fm.model, sc.plant, sc.disturbance, t, x, u);
            for (std::size_t j = 0; j <= k; ++j)
                log.tau_hat[j].col(i) = est.tau_hat[j];
            for (Eigen::Index j = 0; j <= p; ++j)
                log.y(j, i) = out.y[static_cast<std::size_t>(j)];
            log.xi.col(i) = out.xi_error;
        }
        if (n == steps)
            break;
        rk.step(rhs, t, X, sc.dt);
    }
    log.shrink_to_size();
    return log;
}

// i-th order time derivative of a uniformly sampled series by central
// differences (one-sided stencils of the same accuracy near the ends).
[[nodiscard]] inline std::vector<double> differentiate(const std::vector<double>& s, double h, std::size_t order) {
    std::vector<double> cur = s;
    for (std::size_t o = 0; o < order; ++o) {
        const std::size_t n = cur.size();
        std::vector<double> d(n, 0.0);
        if (n >= 3) {
            for (std::size_t i = 1; i + 1 < n; ++i)
                d[i] = (cur[i + 1] - cur[i - 1]) / (2.0 * h);
            d[0] = (-3.0 * cur[0] + 4.0 * cur[1] - cur[2]) / (2.0 * h);
            d[n - 1] = (3.0 * cur[n - 1] - 4.0 * cur[n - 2] + cur[n - 3]) / (2.0 * h);
        }
        cur = std::move(d);
    }
    return cur;
}

struct Metrics {
    double rmse_tracking = 0.0;
    double max_abs_err = 0.0;
    double settle_time = 0.0;              // NaN when the error never settles
    std::vector<double> est_rmse_d1;       // per derivative order, force units
    std::vector<double> est_rmse_d2;
    std::size_t samples = 0;
};

// Logged true force disturbance d_c and its derivatives (finite differences).
[[nodiscard]] inline std::vector<double> true_force_series(const SimLog& log, int c, std::size_t order) {
    std::vector<double> s(log.size());
    for (std::size_t i = 0; i < log.size(); ++i)
        s[i] = log.d_true(c, static_cast<Eigen::Index>(i));
    return differentiate(s, log.dt, order);
}

[[nodiscard]] inline Metrics compute_metrics(const SimLog& log, double t0, double t1) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < log.size(); ++i)
        if (log.t[i] >= t0 && log.t[i] <= t1)
            idx.push_back(i);
    if (idx.empty())
        throw Error(ErrorCode::EmptyWindow, "no logged samples in [" + std::to_string(t0) + ", " + std::to_string(t1) + "]");

    Metrics m;
    m.samples = idx.size();
    double se = 0.0, ref_scale = 0.0;
    for (auto i : idx) {
        const double e = log.x(kQ2, static_cast<Eigen::Index>(i)) - log.q2_ref[i];
        se += e * e;
        m.max_abs_err = std::max(m.max_abs_err, std::abs(e));
        ref_scale = std::max(ref_scale, std::abs(log.q2_ref[i]));
    }
    m.rmse_tracking = std::sqrt(se / static_cast<double>(idx.size()));

    const double band = 0.02 * ref_scale;
    m.settle_time = std::nan("");
    for (std::size_t a = idx.size(); a-- > 0;) {
        const auto i = static_cast<Eigen::Index>(idx[a]);
        if (std::abs(log.x(kQ2, i) - log.q2_ref[idx[a]]) > band) {
            if (a + 1 < idx.size())
                m.settle_time = log.t[idx[a + 1]];
            break;
        }
        if (a == 0)
            m.settle_time = log.t[idx[0]];
    }

    for (int c = 1; c <= 2; ++c) {
        auto& out = c == 1 ? m.est_rmse_d1 : m.est_rmse_d2;
        for (std::size_t j = 0; j <= log.order; ++j) {
            const auto truth = true_force_series(log, c, j);
            double s2 = 0.0;
            for (auto i : idx) {
                const double e = log.d_hat(c, j, static_cast<Eigen::Index>(i)) - truth[i];
                s2 += e * e;
            }
            out.push_back(std::sqrt(s2 / static_cast<double>(idx.size())));
        }
    }
    return m;
}

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{"t",      "q1",        "dq1",       "q2",        "dq2",
                                               "u",      "q2_ref",    "d1_true",   "d2_true",   "d1_hat",
                                               "d2_hat", "d1_hat_d1", "d2_hat_d1", "d1_hat_d2", "d2_hat_d2",
                                               "xi_norm"};
    return cols;
}

[[nodiscard]] inline std::string csv_header() {
    std::string h;
    for (const auto& c : csv_columns()) {
        if (!h.empty())
            h += ", ";
        h += c;
    }
    return h;
}

// Disturbance columns are force-level (N); derivative estimates beyond the
// observer order are written as 0.
inline void write_csv(std::ostream& os, const SimLog& log) {
    os << csv_header() << '\n';
    char buf[64];
    auto put = [&](double v, bool last = false) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        os << buf << (last ? "\n" : ", ");
    };
    for (std::size_t n = 0; n < log.size(); ++n) {
        const auto i = static_cast<Eigen::Index>(n);
        put(log.t[n]);
        for (Eigen::Index s = 0; s < 4; ++s)
            put(log.x(s, i));
        put(log.u[n]);
        put(log.q2_ref[n]);
        put(log.d_true(1, i));
        put(log.d_true(2, i));
        for (std::size_t j = 0; j <= 2; ++j) {
            put(j <= log.order ? log.d_hat(1, j, i) : 0.0);
            put(j <= log.order ? log.d_hat(2, j, i) : 0.0);
        }
        put(log.xi_norm[n], true);
    }
}

inline void write_metrics(std::ostream& os, const Metrics& m) {
    char buf[64];
    auto kv = [&](const std::string& key, double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        os << key << '=' << buf << '\n';
    };
    kv("rmse_tracking", m.rmse_tracking);
    kv("max_abs_err", m.max_abs_err);
    kv("settle_time", m.settle_time);
    for (std::size_t j = 0; j < m.est_rmse_d1.size(); ++j) {
        kv("est_rmse_d1_" + std::to_string(j), m.est_rmse_d1[j]);
        kv("est_rmse_d2_" + std::to_string(j), m.est_rmse_d2[j]);
    }
    os << "samples=" << m.samples << '\n';
}

} // namespace adrflat
