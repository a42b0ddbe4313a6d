#include <cmath>
#include <functional>
#include <vector>

#include "adrflat/observer.hpp"
#include "adrflat/rk4.hpp"
#include "test_util.hpp"

using namespace adrflat;

namespace {

StateSpaceModel scalar(double a, double b) { return {Matrix::Constant(1, 1, a), Vector::Constant(1, b)}; }

StateSpaceModel plane() {
    Matrix A(2, 2);
    A << 0, 1, -3, -1;
    return {A, Vector::Unit(2, 1)};
}

// Co-simulates x' = A x + B u(t) - tau(t) with the observer. `tau(t, j)` is the
// j-th derivative of the (scalar-channel) disturbance. Calls `sample(t, e)` with
// the auxiliary error e_j = z_hat_j - (l_j x + tau^(j)) after every step.
void co_simulate(const ObserverConfig& cfg, const std::function<double(double)>& u,
                 const std::function<double(double, std::size_t)>& tau, double h, double t_end,
                 const std::function<void(double, const Vector&)>& sample) {
    const auto p = cfg.dim();
    const auto nz = cfg.state_size();
    Vector X = Vector::Zero(p + nz);
    X.tail(nz) = ObserverState::at_rest(cfg, X.head(p)).z;
    auto f = [&](double t, const Vector& y, Vector& dy) {
        const Vector x = y.head(p);
        dy.head(p) = cfg.model().A() * x + cfg.model().B() * u(t) - Vector::Constant(p, tau(t, 0));
        Vector dz(nz);
        observer_derivatives_into(cfg, y.tail(nz), x, u(t), dz);
        dy.tail(nz) = dz;
    };
    Rk4 rk(X.size());
    const long steps = std::lround(t_end / h);
    for (long n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * h;
        rk.step(f, t, X, h);
        Vector e(nz);
        for (std::size_t j = 0; j <= cfg.order(); ++j)
            e.segment(static_cast<Eigen::Index>(j) * p, p) =
                X.tail(nz).segment(static_cast<Eigen::Index>(j) * p, p) - cfg.row_gain(j) * X.head(p) -
                Vector::Constant(p, tau(t + h, j));
        sample(t + h, e);
    }
}

} // namespace

TEST(Observer, TuneGainsExamples) {
    EXPECT_EQ(tune_gains_repeated(0, 7.0), (std::vector<double>{7.0}));
    EXPECT_EQ(tune_gains_repeated(1, 2.0), (std::vector<double>{4.0, 4.0}));
    EXPECT_EQ(tune_gains_repeated(2, 1000.0), (std::vector<double>{1e9, 3e6, 3000.0}));
    EXPECT_ADRFLAT_ERROR((void)tune_gains_repeated(1, 0.0), ErrorCode::InvalidArgument);
}

TEST(Observer, ConfigRejectsNonHurwitzGains) {
    EXPECT_ADRFLAT_ERROR(ObserverConfig(scalar(0, 1), {-1.0}), ErrorCode::InvalidArgument);
    EXPECT_ADRFLAT_ERROR(ObserverConfig(scalar(0, 1), {}), ErrorCode::InvalidArgument);
    EXPECT_ADRFLAT_ERROR(ObserverConfig(scalar(0, 1), {NAN}), ErrorCode::InvalidArgument);
}

TEST(Observer, PsiExamples) {
    const Matrix psi0 = assemble_psi(ObserverConfig(scalar(0, 1), {5.0}));
    ASSERT_EQ(psi0.rows(), 1);
    EXPECT_EQ(psi0(0, 0), -5.0);

    const Matrix psi1 = assemble_psi(ObserverConfig(scalar(0, 1), {4.0, 4.0}));
    Matrix want(2, 2);
    want << -4, 1, -4, 0;
    EXPECT_EQ(psi1, want);
    EXPECT_LT(max_relative_eigen_mismatch(eigenvalues(psi1), {-2.0, -2.0}), 1e-6);
}

TEST(Observer, PsiUsesReversedGainsPerRow) {
    // With distinct gains the row order matters: (lambda+1)(lambda+2)(lambda+3).
    const ObserverConfig cfg(scalar(0, 1), {6.0, 11.0, 6.0});
    const Matrix psi = assemble_psi(cfg);
    EXPECT_EQ(psi(0, 0), -6.0);  // L_2
    EXPECT_EQ(psi(1, 0), -11.0); // L_1
    EXPECT_EQ(psi(2, 0), -6.0);  // L_0
    const ObserverConfig skew(scalar(0, 1), {2.0, 5.0, 4.0}); // (lambda+1)^2 (lambda+2)
    EXPECT_LT(max_relative_eigen_mismatch(eigenvalues(assemble_psi(skew)), {-1.0, -1.0, -2.0}), 1e-6);
}

TEST(ObserverProperty, SpectrumMatchesRepeatedRoot) {
    Matrix A = Matrix::Zero(4, 4);
    const StateSpaceModel m(A, Vector::Unit(4, 1));
    for (std::size_t k = 0; k <= 4; ++k)
        for (double lam : {1.0, 10.0, 1000.0}) {
            const auto cfg = ObserverConfig::repeated(m, k, lam);
            for (const auto& ev : testutil::eigenvalues_ld(assemble_psi(cfg)))
                EXPECT_LT(std::abs(ev + lam) / lam, 1e-3) << "k=" << k << " lambda=" << lam << " ev=" << ev;
        }
}

TEST(Observer, DerivativeExamples) {
    const ObserverConfig cfg(scalar(0, 1), {10.0});
    const ObserverState zero{Vector::Zero(1)};
    EXPECT_DOUBLE_EQ(observer_derivatives(cfg, zero, Vector::Zero(1), 1.0).z(0), 10.0);

    const auto cfg2 = ObserverConfig::repeated(plane(), 2, 5.0);
    const auto d = observer_derivatives(cfg2, ObserverState{Vector::Zero(cfg2.state_size())}, Vector::Zero(2), 0.0);
    EXPECT_EQ(d.z, Vector::Zero(6));

    EXPECT_ADRFLAT_ERROR((void)observer_derivatives(cfg2, zero, Vector::Zero(2), 0.0), ErrorCode::DimensionMismatch);
}

TEST(Observer, PrintedFormCouplesThroughOwnRow) {
    const auto derived = ObserverConfig::repeated(scalar(0, 1), 1, 2.0, ObserverForm::Derived);
    const auto printed = ObserverConfig::repeated(scalar(0, 1), 1, 2.0, ObserverForm::Printed);
    const ObserverState s{(Vector(2) << 1.0, 3.0).finished()};
    const Vector x = Vector::Zero(1);
    // Row 1 gain is L_0 = 4: -4 z_0 vs -4 z_1.
    EXPECT_DOUBLE_EQ(observer_derivatives(derived, s, x, 0.0).z(1), -4.0);
    EXPECT_DOUBLE_EQ(observer_derivatives(printed, s, x, 0.0).z(1), -12.0);
}

TEST(Observer, ExtractionExamples) {
    const ObserverConfig cfg(plane(), {2.0});
    const auto est = extract_estimates(cfg, ObserverState{(Vector(2) << 5.0, 0.0).finished()}, Vector::Ones(2));
    ASSERT_EQ(est.tau_hat.size(), 1u);
    EXPECT_EQ(est.tau_hat[0], (Vector(2) << 3.0, -2.0).finished());

    const auto rest = ObserverState::at_rest(ObserverConfig::repeated(plane(), 2, 10.0), (Vector(2) << 0.3, -1).finished());
    for (const auto& v : extract_estimates(ObserverConfig::repeated(plane(), 2, 10.0), rest, (Vector(2) << 0.3, -1).finished()).tau_hat)
        EXPECT_LT(v.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ObserverProperty, ExtractionInvertsAuxiliaryDefinition) {
    for (std::size_t k = 0; k <= 3; ++k) {
        const auto cfg = ObserverConfig::repeated(plane(), k, testutil::uniform(1, 100));
        const Vector x = Vector::Random(2);
        std::vector<Vector> tau;
        ObserverState s{Vector(cfg.state_size())};
        for (std::size_t j = 0; j <= k; ++j) {
            tau.push_back(Vector::Random(2));
            s.block(j, 2) = cfg.row_gain(j) * x + tau.back();
        }
        const auto est = extract_estimates(cfg, s, x);
        for (std::size_t j = 0; j <= k; ++j)
            EXPECT_LT((est.tau_hat[j] - tau[j]).cwiseAbs().maxCoeff(), 1e-9 * (1 + cfg.row_gain(j)));
    }
}

TEST(Observer, ConstantDisturbanceMatchesScalarSolution) {
    // tau_hat' = -L0 (tau_hat - tau) from rest: tau_hat(t) = tau (1 - exp(-L0 t)).
    const double L0 = 40.0, tau = 2.5, h = 1e-4;
    const ObserverConfig cfg(scalar(-1.0, 2.0), {L0});
    double worst = 0.0;
    co_simulate(
        cfg, [](double t) { return std::sin(t); }, [&](double, std::size_t j) { return j == 0 ? tau : 0.0; }, h, 0.5,
        [&](double t, const Vector& e) {
            const double err_oracle = -tau * std::exp(-L0 * t);
            worst = std::max(worst, std::abs(e(0) - err_oracle));
        });
    EXPECT_LT(worst, 1e-8);
}

TEST(ObserverProperty, PolynomialDisturbanceIsReconstructedExactly) {
    const double lam = 100.0, h = 1e-4;
    for (std::size_t k = 0; k <= 3; ++k) {
        // tau(t) = sum_i c_i t^i with degree k.
        std::vector<double> c{0.7, -1.3, 2.0, -0.6};
        c.resize(k + 1);
        auto tau = [&](double t, std::size_t j) {
            double acc = 0.0;
            for (std::size_t i = j; i < c.size(); ++i) {
                double fall = 1.0;
                for (std::size_t m = 0; m < j; ++m)
                    fall *= static_cast<double>(i - m);
                acc += c[i] * fall * std::pow(t, static_cast<double>(i - j));
            }
            return acc;
        };
        const auto cfg = ObserverConfig::repeated(scalar(-2.0, 1.0), k, lam);
        const double t_end = 50.0 / lam;
        double scale = 0.0;
        for (std::size_t j = 0; j <= k; ++j)
            scale = std::max(scale, std::abs(tau(t_end, j)));
        Vector last;
        co_simulate(
            cfg, [](double t) { return std::cos(3 * t); }, tau, h, t_end, [&](double, const Vector& e) { last = e; });
        EXPECT_LT(last.cwiseAbs().maxCoeff(), 1e-6 * scale) << "k=" << k;
    }
}

TEST(ObserverProperty, SteadyStateErrorRespectsBound) {
    // Sinusoidal disturbance: |tau^(k+1)| <= a w^{k+1} = delta. For k = 0 the printed
    // asymptote delta/lambda applies directly. For k >= 1 the steady-state gain of
    // the error system is lambda |Psi^-1 Gamma| times that asymptote.
    const double lam = 50.0, a = 3.0, w = 2.0, h = 1e-4;
    for (std::size_t k = 0; k <= 2; ++k) {
        const auto cfg = ObserverConfig::repeated(scalar(-1.0, 1.0), k, lam);
        const Matrix psi = assemble_psi(cfg);
        const Vector gamma = Vector::Unit(psi.rows(), psi.rows() - 1);
        const double kappa = lam * psi.fullPivLu().solve(gamma).norm();
        if (k == 0) {
            EXPECT_NEAR(kappa, 1.0, 1e-12);
        }
        auto tau = [&](double t, std::size_t j) {
            const double arg = w * t + static_cast<double>(j) * M_PI / 2;
            return a * std::pow(w, static_cast<double>(j)) * std::sin(arg);
        };
        const double delta = a * std::pow(w, static_cast<double>(k + 1));
        const double t_end = 8.0;
        double limsup = 0.0;
        co_simulate(
            cfg, [](double t) { return 0.5 * std::sin(5 * t); }, tau, h, t_end, [&](double t, const Vector& e) {
                if (t >= t_end / 2)
                    limsup = std::max(limsup, e.norm());
            });
        const BoundParams bp{std::vector<double>(k + 2, delta), lam};
        EXPECT_LE(limsup, 1.05 * kappa * error_bound(bp, 0.0, t_end)) << "k=" << k;
        // The bound is not vacuous: the error does reach most of it.
        EXPECT_GE(limsup, 0.5 * kappa * error_bound(bp, 0.0, t_end)) << "k=" << k;
    }
}

TEST(Observer, ErrorBoundExamples) {
    const BoundParams zero{{1.0, 0.0}, 10.0};
    EXPECT_DOUBLE_EQ(error_bound(zero, 3.0, 0.0), 3.0);
    EXPECT_LT(error_bound(zero, 3.0, 10.0), 1e-40);
    const BoundParams c{{0.0, 0.0, 0.0, 7.0}, 1000.0};
    EXPECT_DOUBLE_EQ(error_bound(c, 0.0, 1.0), 7.0 / 1000.0);
    EXPECT_ADRFLAT_ERROR((void)error_bound(c, 0.0, -1.0), ErrorCode::InvalidArgument);
}
