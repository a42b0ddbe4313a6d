#include <string>

#include "adrflat/scenario.hpp"
#include "test_util.hpp"

using namespace adrflat;

namespace {

std::string config_error_message(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
        return e.what();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return {};
}

} // namespace

TEST(Scenario, BundledFileMatchesDefaults) {
    const Scenario sc = load_scenario(std::string(ADRFLAT_SCENARIO_DIR) + "/paper_iv.toml");
    EXPECT_TRUE(sc == Scenario{});
    EXPECT_DOUBLE_EQ(sc.plant.m1, 0.1);
    EXPECT_DOUBLE_EQ(sc.plant.b12, 1.25);
    EXPECT_DOUBLE_EQ(sc.nominal.kn, 265.0);
    EXPECT_DOUBLE_EQ(sc.disturbance.f_ext.amplitude, 25.0);
    EXPECT_DOUBLE_EQ(sc.disturbance.f_ext.t_on, 2.5);
    EXPECT_EQ(sc.controller.dob_order, 2u);
    EXPECT_DOUBLE_EQ(sc.controller.dob_bandwidth, 1000.0);
    EXPECT_EQ(sc.controller.variant, ControllerVariant::PolymatrixRobust);
    EXPECT_EQ(sc.seed, 1u);
}

TEST(Scenario, MissingKeysTakeDefaults) {
    const Scenario sc = parse_scenario("[sim]\nseed = 7\n");
    Scenario want;
    want.seed = 7;
    EXPECT_TRUE(sc == want);
    EXPECT_TRUE(parse_scenario("# only a comment\n\n") == Scenario{});
}

TEST(Scenario, ParsesEveryValueKind) {
    const Scenario sc = parse_scenario(R"([controller]
variant = "brunovsky"   # trailing comment
poles = [-10, -11.5, -12, -13]
derivative_policy = "truncate"
[observer]
order = 3
form = "printed"
[reference]
kind = "step"
[disturbance]
noise_std = [0, 1e-6, 0, 2e-6]
)");
    EXPECT_EQ(sc.controller.variant, ControllerVariant::BrunovskyRobust);
    ASSERT_EQ(sc.controller.poles.size(), 4u);
    EXPECT_EQ(sc.controller.poles[1], Complex(-11.5, 0.0));
    EXPECT_EQ(sc.controller.derivative_policy, DerivativePolicy::Truncate);
    EXPECT_EQ(sc.controller.dob_order, 3u);
    EXPECT_EQ(sc.controller.observer_form, ObserverForm::Printed);
    EXPECT_EQ(sc.reference.kind, ReferenceKind::Step);
    EXPECT_EQ(sc.disturbance.measurement_noise_std[3], 2e-6);
}

TEST(Scenario, UnknownKeyReportsLine) {
    const auto msg = config_error_message("[plant]\nm1 = 0.1\nmass3 = 2.0\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("mass3"), std::string::npos) << msg;
}

TEST(Scenario, MalformedInputsReportLine) {
    EXPECT_NE(config_error_message("[plant\n").find("line 1"), std::string::npos);
    EXPECT_NE(config_error_message("[sim]\n\n[gravity]\n").find("line 3"), std::string::npos);
    EXPECT_NE(config_error_message("m1 = 0.1\n").find("line 1"), std::string::npos);
    EXPECT_NE(config_error_message("[plant]\nm1 0.1\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error_message("[plant]\nm1 = 0.1kg\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error_message("[controller]\nvariant = polymatrix\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error_message("[controller]\nvariant = \"pid\"\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error_message("[observer]\norder = 1.5\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error_message("[sim]\ninitial_state = 0\n").find("line 2"), std::string::npos);
}

TEST(Scenario, DuplicateKeyRejected) {
    const auto msg = config_error_message("[plant]\nk = 1\n\n[nominal]\nkn = 2\n[plant]\nk = 3\n");
    EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(Scenario, MissingFileIsConfigError) {
    EXPECT_ADRFLAT_ERROR((void)load_scenario("/nonexistent/scenario.toml"), ErrorCode::ConfigError);
}

TEST(ScenarioProperty, RoundTrip) {
    for (int trial = 0; trial < 25; ++trial) {
        Scenario sc;
        for (const auto& key : scenario_keys()) {
            if (key.kind == ValueKind::Number && testutil::uniform(0, 1) < 0.5)
                set_scenario_number(sc, key.path(), testutil::uniform(0.001, 1000.0));
            if (key.kind == ValueKind::Integer && testutil::uniform(0, 1) < 0.5)
                set_scenario_number(sc, key.path(), std::floor(testutil::uniform(0, 5)));
        }
        sc.controller.variant = trial % 3 == 0 ? ControllerVariant::Conventional : ControllerVariant::BrunovskyRobust;
        sc.controller.poles = {-1.0 / 3.0, -2.0, {-3.0, 1.0}, {-3.0, -1.0}};
        sc.initial_state = {0.1, -0.2, 1.0 / 7.0, 0.0};
        sc.disturbance.measurement_noise_std = trial % 2 ? std::vector<double>{} : std::vector<double>{1e-7, 0, 0, 0};
        const std::string text = scenario_to_string(sc);
        const Scenario back = parse_scenario(text);
        EXPECT_TRUE(back == sc) << text;
        EXPECT_EQ(scenario_to_string(back), text);
    }
}

TEST(Scenario, NumericOverridesAndAliases) {
    Scenario sc;
    set_scenario_number(sc, "dob-bandwidth", 300.0);
    set_scenario_number(sc, "observer.order", 1.0);
    set_scenario_number(sc, "plant.k", 90.0);
    EXPECT_EQ(sc.controller.dob_bandwidth, 300.0);
    EXPECT_EQ(sc.controller.dob_order, 1u);
    EXPECT_EQ(sc.plant.k, 90.0);
    EXPECT_ADRFLAT_ERROR(set_scenario_number(sc, "plant.mass", 1.0), ErrorCode::ConfigError);
    EXPECT_ADRFLAT_ERROR(set_scenario_number(sc, "controller.variant", 1.0), ErrorCode::ConfigError);
    EXPECT_ADRFLAT_ERROR(set_scenario_number(sc, "dob-order", 1.5), ErrorCode::ConfigError);
}
