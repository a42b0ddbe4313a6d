#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "simulation.hpp"

namespace adrflat {

// Scenario files use a small TOML subset:
//
//   # comment
//   [section]
//   key = 1.5            # number
//   key = "text"         # string
//   key = [1, 2, 3]      # array of numbers
//
// Sections and keys are fixed (see scenario_keys()); anything else is an error.

using ScenarioValue = std::variant<double, std::string, std::vector<double>>;

enum class ValueKind { Number, Integer, String, Array };

struct ScenarioKey {
    std::string section;
    std::string name;
    ValueKind kind;
    std::string unit;
    std::function<ScenarioValue(const Scenario&)> get;
    std::function<void(Scenario&, const ScenarioValue&)> set;

    [[nodiscard]] std::string path() const { return section + "." + name; }
};

namespace detail {

template <typename Ref>
ScenarioKey number_key(std::string sec, std::string name, std::string unit, Ref ref) {
    return {std::move(sec), std::move(name), ValueKind::Number, std::move(unit),
            [ref](const Scenario& s) { return ScenarioValue{ref(s)}; },
            [ref](Scenario& s, const ScenarioValue& v) { ref(s) = std::get<double>(v); }};
}

inline const char* policy_name(DerivativePolicy p) {
    return p == DerivativePolicy::Truncate ? "truncate" : "structural_zeros";
}

inline DerivativePolicy parse_policy(const std::string& s) {
    if (s == "structural_zeros")
        return DerivativePolicy::StructuralZeros;
    if (s == "truncate")
        return DerivativePolicy::Truncate;
    throw Error(ErrorCode::ConfigError, "derivative_policy must be \"structural_zeros\" or \"truncate\", got \"" + s + "\"");
}

inline ObserverForm parse_form(const std::string& s) {
    if (s == "derived")
        return ObserverForm::Derived;
    if (s == "printed")
        return ObserverForm::Printed;
    throw Error(ErrorCode::ConfigError, "observer form must be \"derived\" or \"printed\", got \"" + s + "\"");
}

inline ReferenceKind parse_reference_kind(const std::string& s) {
    if (s == "sine")
        return ReferenceKind::Sine;
    if (s == "step")
        return ReferenceKind::Step;
    throw Error(ErrorCode::ConfigError, "reference kind must be \"sine\" or \"step\", got \"" + s + "\"");
}

} // namespace detail

[[nodiscard]] inline const std::vector<ScenarioKey>& scenario_keys() {
    using detail::number_key;
    static const std::vector<ScenarioKey> keys = [] {
        std::vector<ScenarioKey> k;
        k.push_back(number_key("plant", "m1", "kg", [](auto& s) -> auto& { return s.plant.m1; }));
        k.push_back(number_key("plant", "m2", "kg", [](auto& s) -> auto& { return s.plant.m2; }));
        k.push_back(number_key("plant", "b1", "N s/m", [](auto& s) -> auto& { return s.plant.b1; }));
        k.push_back(number_key("plant", "b2", "N s/m", [](auto& s) -> auto& { return s.plant.b2; }));
        k.push_back(number_key("plant", "b12", "N s/m", [](auto& s) -> auto& { return s.plant.b12; }));
        k.push_back(number_key("plant", "k", "N/m", [](auto& s) -> auto& { return s.plant.k; }));

        k.push_back(number_key("nominal", "m1n", "kg", [](auto& s) -> auto& { return s.nominal.m1n; }));
        k.push_back(number_key("nominal", "m2n", "kg", [](auto& s) -> auto& { return s.nominal.m2n; }));
        k.push_back(number_key("nominal", "b1n", "N s/m", [](auto& s) -> auto& { return s.nominal.b1n; }));
        k.push_back(number_key("nominal", "b2n", "N s/m", [](auto& s) -> auto& { return s.nominal.b2n; }));
        k.push_back(number_key("nominal", "kn", "N/m", [](auto& s) -> auto& { return s.nominal.kn; }));

        k.push_back(number_key("disturbance", "f_ext_amplitude", "N",
                               [](auto& s) -> auto& { return s.disturbance.f_ext.amplitude; }));
        k.push_back(number_key("disturbance", "f_ext_omega_a", "rad/s",
                               [](auto& s) -> auto& { return s.disturbance.f_ext.omega_a; }));
        k.push_back(number_key("disturbance", "f_ext_omega_b", "rad/s",
                               [](auto& s) -> auto& { return s.disturbance.f_ext.omega_b; }));
        k.push_back(number_key("disturbance", "f_ext_sign", "",
                               [](auto& s) -> auto& { return s.disturbance.f_ext.sign; }));
        k.push_back(number_key("disturbance", "t_on", "s", [](auto& s) -> auto& { return s.disturbance.f_ext.t_on; }));
        k.push_back(number_key("disturbance", "t_off", "s", [](auto& s) -> auto& { return s.disturbance.f_ext.t_off; }));
        k.push_back(number_key("disturbance", "f_ud1", "N", [](auto& s) -> auto& { return s.disturbance.f_ud1; }));
        k.push_back(number_key("disturbance", "f_ud2", "N", [](auto& s) -> auto& { return s.disturbance.f_ud2; }));
        k.push_back({"disturbance", "noise_std", ValueKind::Array, "per state (m, m/s, m, m/s)",
                     [](const Scenario& s) { return ScenarioValue{s.disturbance.measurement_noise_std}; },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.disturbance.measurement_noise_std = std::get<std::vector<double>>(v);
                     }});

        k.push_back({"controller", "variant", ValueKind::String, "conventional | brunovsky | polymatrix",
                     [](const Scenario& s) { return ScenarioValue{std::string(to_string(s.controller.variant))}; },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.controller.variant = parse_variant(std::get<std::string>(v));
                     }});
        k.push_back({"controller", "poles", ValueKind::Array, "rad/s (real, negative)",
                     [](const Scenario& s) {
                         std::vector<double> re;
                         for (const auto& p : s.controller.poles)
                             re.push_back(p.real());
                         return ScenarioValue{re};
                     },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.controller.poles.clear();
                         for (double r : std::get<std::vector<double>>(v))
                             s.controller.poles.emplace_back(r, 0.0);
                     }});
        k.push_back({"controller", "derivative_policy", ValueKind::String, "structural_zeros | truncate",
                     [](const Scenario& s) {
                         return ScenarioValue{std::string(detail::policy_name(s.controller.derivative_policy))};
                     },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.controller.derivative_policy = detail::parse_policy(std::get<std::string>(v));
                     }});

        k.push_back({"observer", "order", ValueKind::Integer, "",
                     [](const Scenario& s) { return ScenarioValue{static_cast<double>(s.controller.dob_order)}; },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.controller.dob_order = static_cast<std::size_t>(std::get<double>(v));
                     }});
        k.push_back(number_key("observer", "bandwidth", "rad/s",
                               [](auto& s) -> auto& { return s.controller.dob_bandwidth; }));
        k.push_back({"observer", "form", ValueKind::String, "derived | printed",
                     [](const Scenario& s) {
                         return ScenarioValue{std::string(s.controller.observer_form == ObserverForm::Printed ? "printed"
                                                                                                               : "derived")};
                     },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.controller.observer_form = detail::parse_form(std::get<std::string>(v));
                     }});

        k.push_back({"reference", "kind", ValueKind::String, "sine | step",
                     [](const Scenario& s) {
                         return ScenarioValue{std::string(s.reference.kind == ReferenceKind::Step ? "step" : "sine")};
                     },
                     [](Scenario& s, const ScenarioValue& v) {
                         s.reference.kind = detail::parse_reference_kind(std::get<std::string>(v));
                     }});
        k.push_back(number_key("reference", "amplitude", "m", [](auto& s) -> auto& { return s.reference.amplitude; }));
        k.push_back(number_key("reference", "omega", "rad/s", [](auto& s) -> auto& { return s.reference.omega; }));
        k.push_back(number_key("reference", "phase", "rad", [](auto& s) -> auto& { return s.reference.phase; }));
        k.push_back(number_key("reference", "offset", "m", [](auto& s) -> auto& { return s.reference.offset; }));
        k.push_back(number_key("reference", "t_start", "s", [](auto& s) -> auto& { return s.reference.t_start; }));
        k.push_back(number_key("reference", "rise_time", "s", [](auto& s) -> auto& { return s.reference.rise_time; }));

        k.push_back(number_key("sim", "dt", "s", [](auto& s) -> auto& { return s.dt; }));
        k.push_back(number_key("sim", "duration", "s", [](auto& s) -> auto& { return s.duration; }));
        k.push_back(number_key("sim", "log_interval", "s", [](auto& s) -> auto& { return s.log_interval; }));
        k.push_back({"sim", "seed", ValueKind::Integer, "",
                     [](const Scenario& s) { return ScenarioValue{static_cast<double>(s.seed)}; },
                     [](Scenario& s, const ScenarioValue& v) { s.seed = static_cast<std::uint64_t>(std::get<double>(v)); }});
        k.push_back({"sim", "initial_state", ValueKind::Array, "(q1 m, dq1 m/s, q2 m, dq2 m/s)",
                     [](const Scenario& s) { return ScenarioValue{s.initial_state}; },
                     [](Scenario& s, const ScenarioValue& v) { s.initial_state = std::get<std::vector<double>>(v); }});
        return k;
    }();
    return keys;
}

[[nodiscard]] inline const ScenarioKey* find_scenario_key(const std::string& section, const std::string& name) {
    for (const auto& k : scenario_keys())
        if (k.section == section && k.name == name)
            return &k;
    return nullptr;
}

// Accepts "section.key" or one of the CLI spellings (dob-bandwidth, dob-order, dt, duration, seed).
[[nodiscard]] inline const ScenarioKey* find_scenario_key(const std::string& path) {
    static const std::map<std::string, std::string> aliases{{"dob-bandwidth", "observer.bandwidth"},
                                                            {"dob-order", "observer.order"},
                                                            {"dt", "sim.dt"},
                                                            {"duration", "sim.duration"},
                                                            {"seed", "sim.seed"}};
    std::string p = path;
    if (auto it = aliases.find(p); it != aliases.end())
        p = it->second;
    const auto dot = p.find('.');
    if (dot == std::string::npos)
        return nullptr;
    return find_scenario_key(p.substr(0, dot), p.substr(dot + 1));
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"')
            in_string = !in_string;
        else if (line[i] == '#' && !in_string)
            return line.substr(0, i);
    }
    return line;
}

[[noreturn]] inline void config_error(std::size_t line, const std::string& msg) {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + msg);
}

inline double parse_number(const std::string& text, std::size_t line) {
    const auto t = trim(text);
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.empty() || ec != std::errc{} || ptr != last)
        config_error(line, "expected a number, got '" + t + "'");
    return v;
}

inline ScenarioValue parse_value(const ScenarioKey& key, const std::string& raw, std::size_t line) {
    const auto text = trim(raw);
    switch (key.kind) {
        case ValueKind::String:
            if (text.size() < 2 || text.front() != '"' || text.back() != '"')
                config_error(line, key.path() + " expects a quoted string");
            return text.substr(1, text.size() - 2);
        case ValueKind::Array: {
            if (text.size() < 2 || text.front() != '[' || text.back() != ']')
                config_error(line, key.path() + " expects an array like [1, 2]");
            std::vector<double> out;
            const auto inner = trim(text.substr(1, text.size() - 2));
            if (!inner.empty()) {
                std::stringstream ss(inner);
                std::string item;
                while (std::getline(ss, item, ','))
                    out.push_back(parse_number(item, line));
            }
            return out;
        }
        case ValueKind::Integer: {
            const double v = parse_number(text, line);
            if (v < 0.0 || v != std::floor(v))
                config_error(line, key.path() + " expects a non-negative integer");
            return v;
        }
        case ValueKind::Number: return parse_number(text, line);
    }
    config_error(line, "unsupported value");
}

} // namespace detail

[[nodiscard]] inline Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    std::string section;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(detail::strip_comment(raw));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                detail::config_error(line_no, "malformed section header '" + line + "'");
            section = detail::trim(line.substr(1, line.size() - 2));
            static const std::set<std::string> sections{"plant",    "nominal",   "disturbance", "controller",
                                                        "observer", "reference", "sim"};
            if (!sections.count(section))
                detail::config_error(line_no, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            detail::config_error(line_no, "expected 'key = value'");
        const auto name = detail::trim(line.substr(0, eq));
        if (section.empty())
            detail::config_error(line_no, "key '" + name + "' appears before any section");
        const auto* key = find_scenario_key(section, name);
        if (!key)
            detail::config_error(line_no, "unknown key '" + name + "' in [" + section + "]");
        if (!seen.insert(key->path()).second)
            detail::config_error(line_no, "duplicate key " + key->path());
        const auto value = detail::parse_value(*key, line.substr(eq + 1), line_no);
        try {
            key->set(sc, value);
        } catch (const Error& e) {
            detail::config_error(line_no, e.what());
        }
    }
    return sc;
}

[[nodiscard]] inline Scenario parse_scenario(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

[[nodiscard]] inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::ConfigError, "cannot open scenario file '" + path + "'");
    try {
        return parse_scenario(in);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
}

[[nodiscard]] inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_scenario(std::ostream& os, const Scenario& sc) {
    std::string section;
    for (const auto& key : scenario_keys()) {
        if (key.section != section) {
            os << (section.empty() ? "" : "\n") << '[' << key.section << "]\n";
            section = key.section;
        }
        os << key.name << " = ";
        const auto v = key.get(sc);
        if (const auto* d = std::get_if<double>(&v))
            os << format_number(*d);
        else if (const auto* s = std::get_if<std::string>(&v))
            os << '"' << *s << '"';
        else {
            const auto& a = std::get<std::vector<double>>(v);
            os << '[';
            for (std::size_t i = 0; i < a.size(); ++i)
                os << (i ? ", " : "") << format_number(a[i]);
            os << ']';
        }
        if (!key.unit.empty())
            os << "  # " << key.unit;
        os << '\n';
    }
}

[[nodiscard]] inline std::string scenario_to_string(const Scenario& sc) {
    std::ostringstream os;
    write_scenario(os, sc);
    return os.str();
}

// Numeric override used by `sweep` and the CLI flags.
inline void set_scenario_number(Scenario& sc, const std::string& path, double value) {
    const auto* key = find_scenario_key(path);
    if (!key)
        throw Error(ErrorCode::ConfigError, "unknown scenario key '" + path + "'");
    if (key->kind != ValueKind::Number && key->kind != ValueKind::Integer)
        throw Error(ErrorCode::ConfigError, "scenario key '" + path + "' is not numeric");
    if (key->kind == ValueKind::Integer && (value < 0.0 || value != std::floor(value)))
        throw Error(ErrorCode::ConfigError, "scenario key '" + path + "' expects a non-negative integer");
    key->set(sc, value);
}

[[nodiscard]] inline bool operator==(const Scenario& a, const Scenario& b) {
    for (const auto& key : scenario_keys())
        if (key.get(a) != key.get(b))
            return false;
    return true;
}

} // namespace adrflat
