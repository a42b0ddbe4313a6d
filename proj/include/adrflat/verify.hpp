#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "controller.hpp"
#include "flat_brunovsky.hpp"
#include "flat_polymatrix.hpp"
#include "model.hpp"
#include "observer.hpp"
#include "plant.hpp"
#include "rk4.hpp"
#include "simulation.hpp"

namespace adrflat::verify {

struct CheckResult {
    int id = 0;
    std::string name;
    std::string group;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget = 0.0;
};

[[nodiscard]] inline CheckResult make_result(int id, std::string name, std::string group, double budget) {
    CheckResult r;
    r.id = id;
    r.name = std::move(name);
    r.group = std::move(group);
    r.budget = budget;
    return r;
}

struct Options {
    std::string filter;          // substring of the check name, or a group name
    bool corrupt_gain = false;   // fault injection: perturb the observer gains
    double log_interval = 1e-4;  // s, logging grid of the long runs
};

// Pinned tolerances.
inline constexpr double kPsiRelTol = 1e-3;
inline constexpr double kExactnessTol = 1e-6;
inline constexpr double kCoeffRelTol = 1e-9;
inline constexpr double kPoleRelTol = 1e-6;
inline constexpr double kFlatResidualTol = 1e-5;
inline constexpr double kEquivalenceTol = 1e-3;      // m
inline constexpr double kRobustRmseFrac = 0.02;       // of reference amplitude
inline constexpr double kOrderingFactor = 10.0;
inline constexpr double kForceRmseFrac = 0.02;        // of f_ext amplitude
inline constexpr double kEstimationNrmseTol = 0.05;
inline constexpr double kCertificateRelTol = 1e-3;
inline constexpr double kRichardsonLo = 12.0;
inline constexpr double kRichardsonHi = 20.0;
inline constexpr double kSteadyStart = 4.0;           // s, steady-state window start

[[nodiscard]] inline std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

// The run of the two-mass example used by the long checks.
[[nodiscard]] inline Scenario example_scenario(ControllerVariant v, double log_interval) {
    Scenario sc;
    sc.controller.variant = v;
    sc.log_interval = log_interval;
    return sc;
}

struct RunOutcome {
    std::optional<SimLog> log;
    std::string failure;
};

class Context {
public:
    explicit Context(Options opt) : opt_(std::move(opt)) {}

    [[nodiscard]] const Options& options() const noexcept { return opt_; }

    [[nodiscard]] std::vector<double> gains(std::size_t k, double lambda) const {
        auto g = tune_gains_repeated(k, lambda);
        if (opt_.corrupt_gain)
            g[0] *= 1.5;
        return g;
    }

    const RunOutcome& run(const std::string& key, const std::function<Scenario()>& make) {
        auto it = runs_.find(key);
        if (it != runs_.end())
            return it->second;
        RunOutcome out;
        try {
            out.log = run_scenario(make());
        } catch (const UnstableRun& e) {
            out.failure = e.what();
        } catch (const Error& e) {
            out.failure = e.what();
        }
        return runs_.emplace(key, std::move(out)).first->second;
    }

    const RunOutcome& example(ControllerVariant v) {
        return run(std::string("example_") + to_string(v), [&] { return example_scenario(v, opt_.log_interval); });
    }

private:
    Options opt_;
    std::map<std::string, RunOutcome> runs_;
};

namespace detail {

inline double steady_rmse(const RunOutcome& r) {
    if (!r.log)
        return std::numeric_limits<double>::infinity();
    return compute_metrics(*r.log, kSteadyStart, r.log->t.back()).rmse_tracking;
}

// Samples of `log` inside [t0, t1] excluding (e, e + guard) after each event time.
inline std::vector<std::size_t> window(const SimLog& log, double t0, double t1, const std::vector<double>& events,
                                      double guard) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const double t = log.t[i];
        if (t < t0 || t > t1)
            continue;
        bool skip = false;
        for (double e : events)
            if (t >= e && t < e + guard)
                skip = true;
        if (!skip)
            idx.push_back(i);
    }
    return idx;
}

} // namespace detail

// 1. Gain tuning and Psi spectrum.
inline CheckResult check_gain_tuning(Context& ctx) {
    auto r = make_result(1, "dob_gain_tuning", "dob", 1.0);
    const auto L = ctx.gains(2, 1000.0);
    const bool exact = L.size() == 3 && L[0] == 1e9 && L[1] == 3e6 && L[2] == 3000.0;
    const auto model = build_nominal_model(NominalParams{});
    double mismatch = std::numeric_limits<double>::infinity();
    std::string err;
    try {
        const ObserverConfig cfg(model, L);
        const auto eig = eigenvalues(assemble_psi(cfg));
        mismatch = max_relative_eigen_mismatch(eig, std::vector<Complex>(eig.size(), Complex(-1000.0, 0.0)));
    } catch (const Error& e) {
        err = e.what();
    }
    r.pass = exact && mismatch <= kPsiRelTol;
    r.detail = format("L = (%.9g, %.9g, %.9g)%s; psi_spectrum max rel dev from -1000 = %.3g (tol %.0e)%s", L[0], L[1],
                      L[2], exact ? "" : " [gain tuple violated]", mismatch, kPsiRelTol,
                      mismatch <= kPsiRelTol ? "" : " [invariant violated: psi_spectrum]");
    if (!err.empty())
        r.detail += "; " + err;
    return r;
}

struct ExactnessRun {
    double worst_after = 0.0;   // sup over t >= 10/lambda of the scaled error
    double settle_lambda_t = 0.0; // lambda * (last time the scaled error was >= tol)
};

// k-th order observer on the nominal plant driven by a degree-k polynomial
// disturbance, cold start (all estimates zero).
inline ExactnessRun polynomial_exactness_run(const std::vector<double>& gains, double lambda) {
    const auto model = build_nominal_model(NominalParams{});
    const ObserverConfig cfg(model, gains);
    const std::size_t k = cfg.order();
    const Eigen::Index p = 4;
    const double base[3] = {1.0, 40.0, 900.0};
    std::vector<Polynomial> tau(static_cast<std::size_t>(p));
    for (Eigen::Index c = 0; c < p; ++c) {
        std::vector<double> a(k + 1);
        for (std::size_t i = 0; i <= k; ++i)
            a[i] = (1.0 + 0.5 * static_cast<double>(c)) * base[i] * ((c + static_cast<Eigen::Index>(i)) % 2 ? -1.0 : 1.0);
        tau[static_cast<std::size_t>(c)] = Polynomial(a);
    }
    std::vector<std::vector<Polynomial>> dtau(k + 1, std::vector<Polynomial>(static_cast<std::size_t>(p)));
    for (Eigen::Index c = 0; c < p; ++c) {
        Polynomial d = tau[static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j <= k; ++j) {
            dtau[j][static_cast<std::size_t>(c)] = d;
            d = d.derivative();
        }
    }
    const double t_check = 10.0 / lambda;
    const double t_end = 60.0 / lambda;
    const double h = 1e-3 / lambda;
    const long steps = std::lround(t_end / h);

    std::vector<double> scale(k + 1, 0.0);
    for (long n = 0; n <= std::lround(t_check / h); ++n)
        for (std::size_t j = 0; j <= k; ++j)
            for (const auto& pol : dtau[j])
                scale[j] = std::max(scale[j], std::abs(pol(static_cast<double>(n) * h)));

    const Eigen::Index nz = cfg.state_size();
    Vector X = Vector::Zero(p + nz);
    auto rhs = [&](double t, const Vector& s, Vector& ds) {
        Vector tv(p);
        for (Eigen::Index c = 0; c < p; ++c)
            tv(c) = tau[static_cast<std::size_t>(c)](t);
        ds.head(p) = model.A() * s.head(p) - tv;
        observer_derivatives_into(cfg, s.tail(nz), s.head(p), 0.0, ds.tail(nz));
    };
    ExactnessRun out;
    Rk4 rk(X.size());
    ObserverState zs{Vector(nz)};
    for (long n = 0; n <= steps; ++n) {
        const double t = static_cast<double>(n) * h;
        zs.z = X.tail(nz);
        const auto est = extract_estimates(cfg, zs, X.head(p));
        double worst = 0.0;
        for (std::size_t j = 0; j <= k; ++j)
            for (Eigen::Index c = 0; c < p; ++c)
                worst = std::max(worst, std::abs(est.tau_hat[j](c) - dtau[j][static_cast<std::size_t>(c)](t)) /
                                            std::max(scale[j], 1e-300));
        if (t >= t_check)
            out.worst_after = std::max(out.worst_after, worst);
        if (worst >= kExactnessTol)
            out.settle_lambda_t = lambda * t;
        if (n < steps)
            rk.step(rhs, t, X, h);
    }
    return out;
}

// 2. Polynomial-disturbance exactness within 10/lambda.
inline CheckResult check_polynomial_exactness(Context& ctx) {
    auto r = make_result(2, "dob_polynomial_exactness", "dob", 10.0);
    const double lambda = 1000.0;
    r.pass = true;
    for (std::size_t k = 0; k <= 2; ++k) {
        try {
            const auto run = polynomial_exactness_run(ctx.gains(k, lambda), lambda);
            const bool ok = run.worst_after < kExactnessTol;
            r.pass = r.pass && ok;
            r.detail += format("%sk=%zu: max scaled err after 10/lambda = %.3g, below %.0e from lambda*t = %.1f",
                               k ? "; " : "", k, run.worst_after, kExactnessTol, run.settle_lambda_t);
        } catch (const Error& e) {
            r.pass = false;
            r.detail += format("%sk=%zu: %s", k ? "; " : "", k, e.what());
        }
    }
    return r;
}

// 3. q polynomials of the two-mass example on randomized nominal parameters.
inline CheckResult check_q_polynomials(Context&) {
    auto r = make_result(3, "flat_q_polynomials", "flat", 1.0);
    std::mt19937_64 rng(20240613);
    std::uniform_real_distribution<double> mass(0.01, 1.0), damp(0.0, 5.0), stiff(10.0, 1000.0);
    double worst = 0.0;
    bool structure = true;
    for (int trial = 0; trial < 50; ++trial) {
        NominalParams n{mass(rng), mass(rng), damp(rng), damp(rng), stiff(rng)};
        if (trial == 0)
            n = NominalParams{};
        const auto model = build_poly_model(n);
        const auto par = build_parameterization(model, Normalization{1, Polynomial{n.kn}});
        const std::vector<double> want{0.0, n.kn * (n.b1n + n.b2n), n.b1n * n.b2n + n.kn * (n.m1n + n.m2n),
                                       n.m1n * n.b2n + n.m2n * n.b1n, n.m1n * n.m2n};
        double scale = 0.0;
        for (double w : want)
            scale = std::max(scale, std::abs(w));
        for (std::size_t i = 0; i < want.size(); ++i)
            worst = std::max(worst, std::abs(par.q1_s[i] - want[i]) / scale);
        if (par.q1_s.degree().value_or(0) != 4)
            structure = false;
        const Polynomial q3_want{1.0, n.b1n / n.kn, n.m1n / n.kn};
        const auto diff_q3 = par.q3_s(0, 1) - q3_want;
        if (!(par.q2_s(0, 0) == Polynomial{1.0}) || !par.q2_s(0, 1).is_zero() || !par.q3_s(0, 0).is_zero() ||
            diff_q3.max_abs_coeff() > kCoeffRelTol * q3_want.max_abs_coeff())
            structure = false;
    }
    r.pass = worst < kCoeffRelTol && structure;
    r.detail = format("50 parameter draws: max rel q1 coefficient error = %.3g (tol %.0e); q2 = (1, 0), "
                      "q3 = (0, m1n/kn s^2 + b1n/kn s + 1): %s",
                      worst, kCoeffRelTol, structure ? "match" : "MISMATCH");
    return r;
}

// 4. Pole placement, with the printed gain vectors compared under two input scalings.
inline CheckResult check_pole_placement(Context&) {
    auto r = make_result(4, "pole_placement", "model", 1.0);
    const auto model = build_nominal_model(NominalParams{});
    const StateSpaceModel unit_b(model.A(), Vector::Unit(4, kDQ1));
    struct Case {
        std::vector<double> poles;
        std::vector<double> printed;
    };
    const std::vector<Case> cases{{{-25, -25, -30, -30}, {-167.7321, 7.15, 179.8047, -5.3794}},
                                  {{-50, -50, -60, -60}, {714.6429, 14.3, -521.4825, -0.1349}}};
    double worst = 0.0;
    std::string info;
    for (const auto& c : cases) {
        std::vector<Complex> want(c.poles.begin(), c.poles.end());
        const auto K = place_poles(model, want);
        const Matrix Acl = model.A() - model.B() * K;
        worst = std::max(worst, max_relative_eigen_mismatch(eigenvalues(Acl), want));
        const RowVector printed = Eigen::Map<const RowVector>(c.printed.data(), 4);
        const auto Ku = place_poles(unit_b, want);
        const double d_phys = (K - printed).norm() / printed.norm();
        const double d_unit = (Ku - printed).norm() / printed.norm();
        info += format("; poles %g/%g: printed K rel dist %.2g (B = 1/m1n) vs %.2g (B = 1), best: %s", c.poles[0],
                       c.poles[2], d_phys, d_unit, d_phys <= d_unit ? "B = 1/m1n" : "B = 1");
    }
    r.pass = worst < kPoleRelTol;
    r.detail = format("max rel eigenvalue error = %.3g (tol %.0e)", worst, kPoleRelTol) + info;
    return r;
}

// Open-loop nominal response to the pure flat feedforward, started on x_ref(0).
inline double flat_open_loop_residual(ControllerVariant v) {
    const NominalParams n;
    const auto fm = FlatMachinery::two_mass(n);
    ControllerSpec spec;
    spec.variant = v;
    const Controller ctrl(spec, fm);
    const RowVector K0 = RowVector::Zero(4);
    const auto zero = DisturbanceEstimates::zeros(spec.dob_order, 4);
    const Matrix D0 = Matrix::Zero(2, static_cast<Eigen::Index>(spec.dob_order + 1));
    ReferenceSpec ref;
    ref.amplitude = 0.1;
    ref.omega = 2.0;
    ref.phase = 0.3;

    auto eval = [&](double t, double& u, Vector& x_ref) {
        const auto q = ref.derivatives(t, 4);
        std::vector<double> y(q.size());
        for (std::size_t i = 0; i < q.size(); ++i)
            y[i] = q[i] / ctrl.output_gain();
        if (v == ControllerVariant::PolymatrixRobust) {
            const auto c = polymatrix_control(*ctrl.poly_model(), *ctrl.parameterization(), y, D0, K0, Vector::Zero(4));
            u = c.u;
            x_ref = c.x_ref;
        } else {
            const auto& flat = *ctrl.brunovsky();
            const auto c = brunovsky_control(flat, y, flat.transform(zero), K0, Vector::Zero(4));
            u = c.u;
            x_ref = c.x_ref;
        }
    };
    const double h = 1e-4;
    const long steps = std::lround(5.0 / h);
    double u = 0.0;
    Vector x_ref(4);
    eval(0.0, u, x_ref);
    Vector x = x_ref;
    auto rhs = [&](double t, const Vector& s, Vector& ds) {
        double uu = 0.0;
        Vector xr(4);
        eval(t, uu, xr);
        ds = fm.model.A() * s + fm.model.B() * uu;
    };
    Rk4 rk(4);
    double worst = 0.0;
    for (long k = 0; k < steps; ++k) {
        rk.step(rhs, static_cast<double>(k) * h, x, h);
        eval(static_cast<double>(k + 1) * h, u, x_ref);
        worst = std::max(worst, (x - x_ref).cwiseAbs().maxCoeff());
    }
    return worst;
}

// 5. Flat consistency of both reference generators.
inline CheckResult check_flat_consistency(Context&) {
    auto r = make_result(5, "flat_consistency", "flat", 10.0);
    const double b = flat_open_loop_residual(ControllerVariant::BrunovskyRobust);
    const double p = flat_open_loop_residual(ControllerVariant::PolymatrixRobust);
    r.pass = b < kFlatResidualTol && p < kFlatResidualTol;
    r.detail = format("max |x - x_ref| over 5 s: canonical-form path %.3g, polynomial-matrix path %.3g (tol %.0e)", b, p,
                      kFlatResidualTol);
    return r;
}

// 6. Closed-loop equivalence of the two robust controllers.
inline CheckResult check_controller_equivalence(Context& ctx) {
    auto r = make_result(6, "controller_equivalence", "controller", 60.0);
    const auto& b = ctx.example(ControllerVariant::BrunovskyRobust);
    const auto& p = ctx.example(ControllerVariant::PolymatrixRobust);
    if (!b.log || !p.log) {
        r.detail = "run failed: " + b.failure + " " + p.failure;
        return r;
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < b.log->x.cols(); ++i)
        worst = std::max(worst, std::abs(b.log->x(kQ2, i) - p.log->x(kQ2, i)));
    r.pass = worst < kEquivalenceTol;
    r.detail = format("max |q2_brunovsky - q2_polymatrix| = %.3g m (tol %.0e m)", worst, kEquivalenceTol);
    return r;
}

// 7. Steady-state tracking of robust vs conventional control.
inline CheckResult check_robustness_ordering(Context& ctx) {
    auto r = make_result(7, "robustness_ordering", "controller", 60.0);
    const double amp = example_scenario(ControllerVariant::Conventional, ctx.options().log_interval).reference.amplitude;
    const double rb = detail::steady_rmse(ctx.example(ControllerVariant::BrunovskyRobust));
    const double rp = detail::steady_rmse(ctx.example(ControllerVariant::PolymatrixRobust));
    const double rc = detail::steady_rmse(ctx.example(ControllerVariant::Conventional));
    const double robust = std::max(rb, rp);
    r.pass = robust < kRobustRmseFrac * amp && rc >= kOrderingFactor * robust;
    r.detail = format("RMSE on [%g, end] s: brunovsky %.3g, polymatrix %.3g (limit %.3g); conventional %.3g = %.1fx robust "
                      "(need >= %.0fx)",
                      kSteadyStart, rb, rp, kRobustRmseFrac * amp, rc, rc / robust, kOrderingFactor);
    return r;
}

// 8. The mismatched-channel estimate as a force sensor under exact nominal parameters.
inline CheckResult check_force_sensing(Context& ctx) {
    auto r = make_result(8, "dob_force_sensing", "dob", 60.0);
    // A precisely known plant: nominal = true, and the inter-mass damper,
    // which the nominal structure cannot represent, removed.
    const auto& run = ctx.run("exact_model", [&] {
        auto sc = example_scenario(ControllerVariant::PolymatrixRobust, ctx.options().log_interval);
        sc.plant.b12 = 0.0;
        sc.nominal = NominalParams::exact(sc.plant);
        return sc;
    });
    if (!run.log) {
        r.detail = "run failed: " + run.failure;
        return r;
    }
    const auto& log = *run.log;
    const ExternalForce f = Scenario{}.disturbance.f_ext;
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        if (!f.active(log.t[i]))
            continue;
        const double e = log.d_hat(2, 0, static_cast<Eigen::Index>(i)) - f.sign * f(log.t[i]);
        se += e * e;
        ++n;
    }
    const double rmse = n ? std::sqrt(se / static_cast<double>(n)) : std::numeric_limits<double>::infinity();
    r.pass = rmse < kForceRmseFrac * f.amplitude;
    r.detail = format("RMSE(d2_hat - f_ext) on [%g, %g] s = %.3g N (limit %.3g N)", f.t_on, f.t_off, rmse,
                      kForceRmseFrac * f.amplitude);
    return r;
}

// 9. Estimation fidelity of d1, d2 and two derivatives under full uncertainty.
inline CheckResult check_estimation_fidelity(Context& ctx) {
    auto r = make_result(9, "dob_estimation_fidelity", "dob", 60.0);
    const auto& run = ctx.example(ControllerVariant::PolymatrixRobust);
    if (!run.log) {
        r.detail = "run failed: " + run.failure;
        return r;
    }
    const auto& log = *run.log;
    const auto sc = example_scenario(ControllerVariant::PolymatrixRobust, ctx.options().log_interval);
    const double guard = 3.0 / sc.controller.dob_bandwidth;
    const auto idx = detail::window(log, 0.0, log.t.back(), {0.0, sc.disturbance.f_ext.t_on, sc.disturbance.f_ext.t_off},
                                    guard);
    double worst = 0.0;
    std::string parts;
    for (int c = 1; c <= 2; ++c)
        for (std::size_t j = 0; j <= std::min<std::size_t>(2, log.order); ++j) {
            const auto truth = true_force_series(log, c, j);
            double lo = std::numeric_limits<double>::infinity(), hi = -lo, se = 0.0;
            for (auto i : idx) {
                lo = std::min(lo, truth[i]);
                hi = std::max(hi, truth[i]);
                const double e = log.d_hat(c, j, static_cast<Eigen::Index>(i)) - truth[i];
                se += e * e;
            }
            const double nrmse = std::sqrt(se / static_cast<double>(idx.size())) / std::max(hi - lo, 1e-300);
            worst = std::max(worst, nrmse);
            parts += format("%sd%d^(%zu) %.3g", parts.empty() ? "" : ", ", c, j, nrmse);
        }
    r.pass = log.order >= 2 && worst < kEstimationNrmseTol;
    r.detail = "range-normalized RMSE: " + parts + format(" (tol %.0e)", kEstimationNrmseTol);
    return r;
}

struct CertificateReport {
    double ell = 0.0, phi = 0.0, delta = 0.0;
    std::size_t tested = 0, violations = 0;
    std::size_t pointwise_violations = 0, samples = 0; // dV/dt <= -ell |xi|^2 + lambda_max(P)^2 |w(t)|^2
    double final_ratio = 0.0; // max ||xi||^2 / (phi/ell) over the last second
};

[[nodiscard]] inline CertificateReport certificate_along(const SimLog& log, const ControllerSpec& spec,
                                                         const NominalParams& nominal) {
    const auto model = build_nominal_model(nominal);
    const RowVector K = place_poles(model, spec.poles);
    const Matrix A_cl = model.A() - model.B() * K;
    const double h = log.dt;
    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i + 1 < log.size(); ++i)
        if (log.t[i] >= kSteadyStart)
            idx.push_back(i);
    if (idx.empty())
        throw Error(ErrorCode::EmptyWindow, "no steady-state samples for the certificate");

    double delta = 0.0;
    for (auto i : idx) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Vector de = (log.xi.col(ii + 1) - log.xi.col(ii - 1)) / (2.0 * h);
        delta = std::max(delta, (de - A_cl * log.xi.col(ii)).norm());
    }
    const Matrix Q = 2.0 * Matrix::Identity(4, 4);
    const auto ub = certify_ultimate_bound(model.A(), model.B(), K, Q, delta);
    const Matrix& P = ub.certificate.P;

    CertificateReport rep;
    rep.ell = ub.ell;
    rep.phi = ub.phi;
    rep.delta = delta;
    const double p2 = ub.certificate.lambda_max_abs_P * ub.certificate.lambda_max_abs_P;
    for (auto i : idx) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Vector xi = log.xi.col(ii);
        const double n2 = xi.squaredNorm();
        const double vp = log.xi.col(ii + 1).dot(P * log.xi.col(ii + 1));
        const double vm = log.xi.col(ii - 1).dot(P * log.xi.col(ii - 1));
        const double vdot = (vp - vm) / (2.0 * h);

        const Vector de = (log.xi.col(ii + 1) - log.xi.col(ii - 1)) / (2.0 * h);
        const double w2 = (de - A_cl * xi).squaredNorm();
        ++rep.samples;
        if (vdot > -ub.ell * n2 + p2 * w2 + kCertificateRelTol * (ub.ell * n2 + p2 * w2))
            ++rep.pointwise_violations;

        if (n2 <= ub.radius_sq)
            continue;
        ++rep.tested;
        const double rhs = -ub.ell * n2 + ub.phi;
        if (vdot > rhs + kCertificateRelTol * (ub.ell * n2 + ub.phi))
            ++rep.violations;
    }
    const double t_last = log.t.back() - 1.0;
    for (auto i : idx)
        if (log.t[i] >= t_last)
            rep.final_ratio = std::max(rep.final_ratio, log.xi.col(static_cast<Eigen::Index>(i)).squaredNorm() / ub.radius_sq);
    return rep;
}

// 10. Ultimate-boundedness certificate along the robust runs.
inline CheckResult check_certificate(Context& ctx) {
    auto r = make_result(10, "ultimate_bound_certificate", "certificate", 60.0);
    r.pass = true;
    for (auto v : {ControllerVariant::BrunovskyRobust, ControllerVariant::PolymatrixRobust}) {
        const auto& run = ctx.example(v);
        if (!run.log) {
            r.pass = false;
            r.detail += std::string(to_string(v)) + ": run failed; ";
            continue;
        }
        const auto sc = example_scenario(v, ctx.options().log_interval);
        try {
            const auto rep = certificate_along(*run.log, sc.controller, sc.nominal);
            const bool ok = rep.violations == 0 && rep.pointwise_violations == 0 && rep.final_ratio <= 1.0;
            r.pass = r.pass && ok;
            r.detail += format("%s: delta %.3g, ell %.3g, phi %.3g, %zu/%zu outside-ball steps violate dV/dt bound, "
                               "%zu/%zu steps violate the pointwise bound with |w(t)|, "
                               "final max |xi|^2/(phi/ell) = %.3g; ",
                               to_string(v), rep.delta, rep.ell, rep.phi, rep.violations, rep.tested,
                               rep.pointwise_violations, rep.samples, rep.final_ratio);
        } catch (const Error& e) {
            r.pass = false;
            r.detail += std::string(to_string(v)) + ": " + e.what() + "; ";
        }
    }
    return r;
}

// Terminal-state error of RK4 with step h on the nominal plant plus observer,
// constant input and disturbance, against the matrix-exponential solution.
// The error is measured in the coordinates (x, tau_hat_j / lambda^j); RK4
// commutes with linear changes of variables, and in these coordinates the
// exponential is well conditioned.
[[nodiscard]] inline double richardson_error(double h, double horizon) {
    const double lambda = 1000.0;
    const auto model = build_nominal_model(NominalParams{});
    const ObserverConfig cfg = ObserverConfig::repeated(model, 2, lambda);
    const Eigen::Index p = 4, nz = cfg.state_size(), n = p + nz;
    const double u = 0.7;
    Vector tau(4);
    tau << 0.0, 3.0, 0.0, -2.0;

    auto rhs = [&](double, const Vector& s, Vector& ds) {
        ds.head(p) = model.A() * s.head(p) + model.B() * u - tau;
        observer_derivatives_into(cfg, s.tail(nz), s.head(p), u, ds.tail(nz));
    };
    // Affine system X' = M X + c, read off the right-hand side column by column.
    Vector c(n);
    rhs(0.0, Vector::Zero(n), c);
    Matrix M(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector d(n);
        rhs(0.0, Vector::Unit(n, j), d);
        M.col(j) = d - c;
    }
    Matrix S = Matrix::Identity(n, n);
    for (std::size_t j = 0; j <= cfg.order(); ++j) {
        const auto r = p + static_cast<Eigen::Index>(j) * p;
        const double w = std::pow(lambda, -static_cast<double>(j));
        S.block(r, r, p, p) *= w;
        S.block(r, 0, p, p) = -cfg.row_gain(j) * w * Matrix::Identity(p, p);
    }
    const Matrix S_inv = S.inverse();
    Matrix aug = Matrix::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = S * M * S_inv;
    aug.col(n).head(n) = S * c;

    Vector X0(n);
    X0.head(p) << 0.01, -0.2, 0.005, 0.1;
    X0.tail(nz) = ObserverState::at_rest(cfg, X0.head(p)).z;
    Vector W0(n + 1);
    W0 << S * X0, 1.0;
    const Vector exact = ((aug * horizon).exp() * W0).head(n);
    const Vector num = integrate_rk4(rhs, 0.0, X0, h, std::lround(horizon / h));
    return (S * num - exact).norm();
}

// 11. Fourth-order convergence of the integrator.
inline CheckResult check_integrator_order(Context&) {
    auto r = make_result(11, "integrator_order", "sim", 30.0);
    const double horizon = 3e-3;
    const double e2 = richardson_error(2e-5, horizon);
    const double e1 = richardson_error(1e-5, horizon);
    const double ratio = e2 / e1;
    r.pass = ratio >= kRichardsonLo && ratio <= kRichardsonHi;
    r.detail = format("E(2e-5) = %.3g, E(1e-5) = %.3g, ratio %.2f (need [%g, %g])", e2, e1, ratio, kRichardsonLo,
                      kRichardsonHi);
    return r;
}

// Not a numbered criterion: the log schema written by `run`.
inline CheckResult check_csv_schema(Context&) {
    auto r = make_result(12, "csv_schema", "sim", 1.0);
    const std::string want =
        "t, q1, dq1, q2, dq2, u, q2_ref, d1_true, d2_true, d1_hat, d2_hat, d1_hat_d1, d2_hat_d1, d1_hat_d2, d2_hat_d2, "
        "xi_norm";
    r.pass = csv_header() == want;
    r.detail = "header: " + csv_header();
    return r;
}

using CheckFn = CheckResult (*)(Context&);

[[nodiscard]] inline const std::vector<std::pair<std::string, CheckFn>>& registry() {
    static const std::vector<std::pair<std::string, CheckFn>> checks{
        {"dob_gain_tuning dob", &check_gain_tuning},
        {"dob_polynomial_exactness dob", &check_polynomial_exactness},
        {"flat_q_polynomials flat", &check_q_polynomials},
        {"pole_placement model", &check_pole_placement},
        {"flat_consistency flat", &check_flat_consistency},
        {"controller_equivalence controller", &check_controller_equivalence},
        {"robustness_ordering controller", &check_robustness_ordering},
        {"dob_force_sensing dob", &check_force_sensing},
        {"dob_estimation_fidelity dob", &check_estimation_fidelity},
        {"ultimate_bound_certificate certificate", &check_certificate},
        {"integrator_order sim", &check_integrator_order},
        {"csv_schema sim", &check_csv_schema},
    };
    return checks;
}

[[nodiscard]] inline bool selected(const std::string& key, const std::string& filter) {
    if (filter.empty())
        return true;
    const auto space = key.find(' ');
    const auto name = key.substr(0, space);
    const auto group = key.substr(space + 1);
    return group == filter || name.find(filter) != std::string::npos;
}

// Runs the selected checks in order; `sink` sees each result as soon as it is done.
inline std::vector<CheckResult> run_checks(const Options& opt,
                                           const std::function<void(const CheckResult&)>& sink = {}) {
    Context ctx(opt);
    std::vector<CheckResult> out;
    for (const auto& [key, fn] : registry()) {
        if (!selected(key, opt.filter))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        CheckResult r;
        try {
            r = fn(ctx);
        } catch (const std::exception& e) {
            r.name = key.substr(0, key.find(' '));
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (r.budget > 0.0 && r.seconds > r.budget) {
            r.pass = false;
            r.detail += format(" [runtime %.2f s exceeds %.0f s]", r.seconds, r.budget);
        }
        if (sink)
            sink(r);
        out.push_back(std::move(r));
    }
    return out;
}

[[nodiscard]] inline std::string format_line(const CheckResult& r) {
    const std::string label = r.id <= 11 ? format("criterion %2d", r.id) : std::string("schema      ");
    return format("%s  %-4s  %-27s %7.2f s  ", label.c_str(), r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds) +
           r.detail;
}

} // namespace adrflat::verify
