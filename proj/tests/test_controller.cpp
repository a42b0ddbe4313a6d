#include <cmath>
#include <vector>

#include "adrflat/controller.hpp"
#include "test_util.hpp"

using namespace adrflat;

namespace {

ControllerSpec spec_for(ControllerVariant v, std::size_t k = 2) {
    ControllerSpec s;
    s.variant = v;
    s.dob_order = k;
    return s;
}

std::vector<double> sine(double t) {
    const double a = 0.1, w = M_PI;
    return {a * std::sin(w * t), a * w * std::cos(w * t), -a * w * w * std::sin(w * t),
            -a * w * w * w * std::cos(w * t), a * w * w * w * w * std::sin(w * t)};
}

} // namespace

TEST(Controller, VariantNames) {
    for (auto v : {ControllerVariant::Conventional, ControllerVariant::BrunovskyRobust,
                   ControllerVariant::PolymatrixRobust})
        EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_EQ(parse_variant("brunovsky_robust"), ControllerVariant::BrunovskyRobust);
    EXPECT_ADRFLAT_ERROR((void)parse_variant("lqr"), ErrorCode::ConfigError);
}

TEST(Controller, GainsMatchPrintedVectors) {
    const auto fm = FlatMachinery::two_mass(NominalParams{});
    struct Case {
        std::vector<Complex> poles;
        std::vector<double> printed;
    };
    const std::vector<Case> cases{{{-25, -25, -30, -30}, {-167.7321, 7.15, 179.8047, -5.3794}},
                                  {{-50, -50, -60, -60}, {714.6429, 14.3, -521.4825, -0.1349}}};
    for (const auto& c : cases) {
        ControllerSpec s;
        s.poles = c.poles;
        const Controller ctrl(s, fm);
        EXPECT_LT((ctrl.K() - place_poles(fm.model, c.poles)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(max_relative_eigen_mismatch(eigenvalues(fm.model.A() - fm.model.B() * ctrl.K()), c.poles), 1e-6);
        // Printed to four decimals.
        for (Eigen::Index i = 0; i < 4; ++i)
            EXPECT_NEAR(ctrl.K()(i), c.printed[static_cast<std::size_t>(i)], 6e-5) << "poles " << c.poles[0] << " i=" << i;
    }
}

TEST(Controller, BuildTimeOrderCheck) {
    const auto fm = FlatMachinery::two_mass(NominalParams{});
    EXPECT_ADRFLAT_ERROR(Controller(spec_for(ControllerVariant::BrunovskyRobust, 1), fm),
                         ErrorCode::InsufficientDerivatives);
    EXPECT_NO_THROW(Controller(spec_for(ControllerVariant::Conventional, 0), fm));
    EXPECT_NO_THROW(Controller(spec_for(ControllerVariant::BrunovskyRobust, 2), fm));
    // The polynomial path needs d2 through order 2 for q3.
    const Controller pm(spec_for(ControllerVariant::PolymatrixRobust, 1), fm);
    EXPECT_ADRFLAT_ERROR((void)pm.evaluate(sine(0.2), DisturbanceEstimates::zeros(1, 4), Vector::Zero(4)),
                         ErrorCode::InsufficientDerivatives);
}

TEST(Controller, ConventionalIgnoresEstimates) {
    const auto fm = FlatMachinery::two_mass(NominalParams{});
    const Controller c(spec_for(ControllerVariant::Conventional), fm);
    DisturbanceEstimates est = DisturbanceEstimates::zeros(2, 4);
    for (auto& v : est.tau_hat)
        v.setRandom();
    const Vector x = Vector::Random(4) * 1e-2;
    EXPECT_EQ(c.evaluate(sine(0.7), est, x).u, c.evaluate(sine(0.7), DisturbanceEstimates::zeros(2, 4), x).u);
}

TEST(Controller, MatchedDisturbanceIsCancelledExactly) {
    // Oracle injection of a matched disturbance tau on the dq1 row: B_n du must equal tau.
    const NominalParams n;
    const auto fm = FlatMachinery::two_mass(n);
    for (auto v : {ControllerVariant::BrunovskyRobust, ControllerVariant::PolymatrixRobust}) {
        const Controller c(spec_for(v), fm);
        DisturbanceEstimates est = DisturbanceEstimates::zeros(2, 4);
        est.tau_hat[0](kDQ1) = 37.0;
        est.tau_hat[1](kDQ1) = -4.0;
        est.tau_hat[2](kDQ1) = 9.0;
        const Vector x = Vector::Random(4) * 1e-2;
        const auto with = c.evaluate(sine(1.3), est, x);
        const auto without = c.evaluate(sine(1.3), DisturbanceEstimates::zeros(2, 4), x);
        const Vector bdu = fm.model.B() * (with.u - without.u);
        EXPECT_NEAR(bdu(kDQ1), 37.0, 1e-9) << to_string(v);
        EXPECT_LT((with.x_ref - without.x_ref).cwiseAbs().maxCoeff(), 1e-12) << to_string(v);
    }
}

TEST(Controller, CertificateExamples) {
    const Matrix A = -Matrix::Identity(1, 1);
    const Vector B = Vector::Ones(1);
    const RowVector K = RowVector::Zero(1);
    const Matrix Q = 2.0 * Matrix::Identity(1, 1);
    const auto zero = certify_ultimate_bound(A, B, K, Q, 0.0);
    EXPECT_EQ(zero.radius_sq, 0.0);
    const auto ub = certify_ultimate_bound(A, B, K, Q, 0.3);
    EXPECT_NEAR(ub.certificate.P(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(ub.ell, 1.0 - 1e-6, 1e-12);
    EXPECT_NEAR(ub.radius_sq, 0.09 / (1.0 - 1e-6), 1e-12);
    EXPECT_ADRFLAT_ERROR((void)certify_ultimate_bound(A, B, K, Matrix::Identity(1, 1), 0.3), ErrorCode::QTooSmall);
    EXPECT_ADRFLAT_ERROR((void)certify_ultimate_bound(Matrix::Identity(1, 1), B, K, Q, 0.3), ErrorCode::NotHurwitz);
}

TEST(Controller, CertificateForTwoMassClosedLoop) {
    const auto fm = FlatMachinery::two_mass(NominalParams{});
    const RowVector K = place_poles(fm.model, {-50.0, -50.0, -60.0, -60.0});
    const Matrix Q = 2.0 * Matrix::Identity(4, 4);
    const auto ub = certify_ultimate_bound(fm.model.A(), fm.model.B(), K, Q, 1.0);
    EXPECT_LT(ub.certificate.residual, 1e-8 * 2.0);
    EXPECT_NEAR(ub.phi, ub.certificate.lambda_max_abs_P * ub.certificate.lambda_max_abs_P, 1e-9 * ub.phi);
    EXPECT_GT(ub.radius_sq, 0.0);
}

TEST(Controller, ReconstructXiExamples) {
    const NominalParams n;
    const auto model = build_poly_model(n);
    const auto param = build_parameterization(model, Normalization{1, Polynomial{n.kn}});
    const Vector x = (Vector(4) << 0.1, -0.2, 0.3, 0.4).finished();
    EXPECT_EQ(reconstruct_xi(x, Matrix::Zero(2, 3), model, param), x);

    Matrix D = Matrix::Zero(2, 3);
    D(1, 0) = 5.3;
    D(1, 1) = -2.0;
    D(0, 0) = 100.0; // matched: never shifts the state
    const Vector xi = reconstruct_xi(x, D, model, param);
    EXPECT_NEAR(xi(kQ1), x(kQ1) - 5.3 / n.kn, 1e-15);
    EXPECT_NEAR(xi(kDQ1), x(kDQ1) + 2.0 / n.kn, 1e-15);
    EXPECT_EQ(xi(kQ2), x(kQ2));
    EXPECT_EQ(xi(kDQ2), x(kDQ2));
    EXPECT_ADRFLAT_ERROR((void)reconstruct_xi(Vector::Zero(3), D, model, param), ErrorCode::DimensionMismatch);
}

TEST(Controller, ReconstructXiCanonicalChain) {
    Matrix A(2, 2);
    A << 0, 1, 0, 0;
    const BrunovskyFlatness flat(to_brunovsky(StateSpaceModel(A, Vector::Unit(2, 1))), {}, 1);
    const TransformedDisturbanceStack s{(Matrix(2, 2) << 0.7, 0.0, 0.0, 0.0).finished()};
    const Vector xi = reconstruct_xi_canonical(flat, (Vector(2) << 2.0, 3.0).finished(), s);
    EXPECT_DOUBLE_EQ(xi(0), 2.0);
    EXPECT_DOUBLE_EQ(xi(1), 3.0 - 0.7);
}

TEST(Controller, OutputGainsAgree) {
    const auto fm = FlatMachinery::two_mass(NominalParams{});
    const Controller b(spec_for(ControllerVariant::BrunovskyRobust), fm);
    const Controller p(spec_for(ControllerVariant::PolymatrixRobust), fm);
    // Both map the flat output to q2 by a constant: the y_DFO scaling differs,
    // the q2 reference must not.
    const auto rb = b.evaluate(sine(0.4), DisturbanceEstimates::zeros(2, 4), Vector::Zero(4));
    const auto rp = p.evaluate(sine(0.4), DisturbanceEstimates::zeros(2, 4), Vector::Zero(4));
    EXPECT_NEAR(rb.x_ref(kQ2), sine(0.4)[0], 1e-12);
    EXPECT_NEAR(rp.x_ref(kQ2), sine(0.4)[0], 1e-12);
    EXPECT_NEAR(rb.u, rp.u, 1e-9 * std::max(1.0, std::abs(rp.u)));
}
