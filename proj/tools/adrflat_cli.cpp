#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "adrflat/adrflat.hpp"
#include "adrflat/verify.hpp"

namespace fs = std::filesystem;
using namespace adrflat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitUnstable = 2;

fs::path output_root() {
    if (const char* env = std::getenv("ADRFLAT_OUT"); env && *env)
        return env;
    return "out";
}

struct RunOverrides {
    std::optional<std::string> controller;
    std::optional<std::size_t> dob_order;
    std::optional<double> dob_bandwidth;
    std::optional<double> dt;
    std::optional<double> duration;
    std::optional<std::uint64_t> seed;
    std::optional<double> log_interval;

    void apply(Scenario& sc) const {
        if (controller)
            sc.controller.variant = parse_variant(*controller);
        if (dob_order)
            sc.controller.dob_order = *dob_order;
        if (dob_bandwidth)
            sc.controller.dob_bandwidth = *dob_bandwidth;
        if (dt)
            sc.dt = *dt;
        if (duration)
            sc.duration = *duration;
        if (seed)
            sc.seed = *seed;
        if (log_interval)
            sc.log_interval = *log_interval;
    }
};

void write_parameterization(const fs::path& dir, const Scenario& sc) {
    const auto par = build_parameterization(build_poly_model(sc.nominal), Normalization{1, Polynomial{sc.nominal.kn}});
    std::ofstream(dir / "parameterization.txt") << to_text(par);
}

// Runs one scenario into `dir`. Returns the exit code; metrics through `out`.
int run_into(const Scenario& sc, const fs::path& dir, std::optional<Metrics>* out, std::ostream& msg) {
    try {
        const SimLog log = run_scenario(sc);
        const Metrics m = write_run_outputs(dir, sc, log);
        write_parameterization(dir, sc);
        if (out)
            *out = m;
        return kExitOk;
    } catch (const UnstableRun& e) {
        fs::create_directories(dir);
        std::ofstream os(dir / "log.csv");
        write_csv(os, e.partial_log());
        msg << "error: " << e.what() << " (partial log in " << (dir / "log.csv").string() << ")\n";
        return kExitUnstable;
    } catch (const Error& e) {
        msg << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

int cmd_run(const std::string& path, const std::optional<std::string>& out_dir, const RunOverrides& ov) {
    Scenario sc;
    try {
        sc = load_scenario(path);
        ov.apply(sc);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    const fs::path dir = out_dir ? fs::path(*out_dir) : output_root() / fs::path(path).stem();
    std::cout << "scenario: " << path << "\ncontroller: " << to_string(sc.controller.variant) << "\nseed: " << sc.seed
              << "\noutput: " << dir.string() << '\n';
    std::optional<Metrics> m;
    const int rc = run_into(sc, dir, &m, std::cerr);
    if (rc == kExitOk)
        std::cout << "rmse_tracking=" << format_number(m->rmse_tracking)
                  << "\nest_rmse=" << format_number(combined_est_rmse(*m)) << '\n';
    return rc;
}

int cmd_verify(const std::string& filter, const std::string& fault) {
    verify::Options opt;
    opt.filter = filter;
    if (!fault.empty()) {
        if (fault != "gain") {
            std::cerr << "error: unknown fault '" << fault << "' (available: gain)\n";
            return kExitConfig;
        }
        opt.corrupt_gain = true;
    }
    std::size_t failed = 0, total = 0;
    verify::run_checks(opt, [&](const verify::CheckResult& r) {
        ++total;
        failed += r.pass ? 0 : 1;
        std::cout << verify::format_line(r) << std::endl;
    });
    if (total == 0) {
        std::cerr << "error: no check matches filter '" << filter << "'\n";
        return kExitConfig;
    }
    std::cout << (total - failed) << '/' << total << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

int cmd_sweep(const std::string& path, const std::string& param, const std::vector<double>& values,
              const std::optional<std::string>& out_dir, unsigned jobs, const RunOverrides& ov) {
    Scenario base;
    try {
        base = load_scenario(path);
        ov.apply(base);
        if (!find_scenario_key(param))
            throw Error(ErrorCode::ConfigError, "unknown sweep parameter '" + param + "'");
        Scenario probe = base;
        for (double v : values)
            set_scenario_number(probe, param, v);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    if (values.empty()) {
        std::cerr << "error: --values is empty\n";
        return kExitConfig;
    }
    const fs::path root = out_dir ? fs::path(*out_dir) : output_root() / (fs::path(path).stem().string() + "_sweep");
    fs::create_directories(root);
    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(values.size()));
    std::cout << "sweep: " << param << " over " << values.size() << " values, " << jobs << " workers\nseed: " << base.seed
              << "\noutput: " << root.string() << '\n';

    std::vector<std::optional<Metrics>> results(values.size());
    std::vector<int> codes(values.size(), kExitOk);
    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            Scenario sc = base;
            set_scenario_number(sc, param, values[i]);
            const fs::path dir = root / (param + "=" + format_number(values[i]));
            std::ostringstream msg;
            codes[i] = run_into(sc, dir, &results[i], msg);
            std::lock_guard lock(io);
            std::cerr << msg.str();
            std::cout << "  " << param << '=' << format_number(values[i]) << (codes[i] ? " failed" : " done") << '\n';
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    std::ofstream os(root / "sweep_summary.csv");
    os << "value, rmse_tracking, est_rmse\n";
    int rc = kExitOk;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double inf = std::numeric_limits<double>::infinity();
        os << format_number(values[i]) << ", " << format_number(results[i] ? results[i]->rmse_tracking : inf) << ", "
           << format_number(results[i] ? combined_est_rmse(*results[i]) : inf) << '\n';
        rc = std::max(rc, codes[i]);
    }
    std::cout << "summary: " << (root / "sweep_summary.csv").string() << '\n';
    return rc;
}

void add_overrides(CLI::App* cmd, RunOverrides& ov) {
    cmd->add_option("--controller", ov.controller, "Controller variant: conventional, brunovsky, polymatrix");
    cmd->add_option("--dob-order", ov.dob_order, "Disturbance observer order k");
    cmd->add_option("--dob-bandwidth", ov.dob_bandwidth,
                    "Observer bandwidth in rad/s; all observer roots are placed at -bandwidth");
    cmd->add_option("--dt", ov.dt, "Integration step in s");
    cmd->add_option("--duration", ov.duration, "Simulated time in s");
    cmd->add_option("--seed", ov.seed, "Seed for measurement noise");
    cmd->add_option("--log-interval", ov.log_interval, "Logging interval in s");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flatness-based robust tracking control of a two-mass system with a high-order disturbance observer"};
    app.require_subcommand(1);

    RunOverrides ov;
    std::string scenario_path;
    std::optional<std::string> out_dir;

    auto* run = app.add_subcommand("run", "Simulate one scenario and write log.csv, metrics.txt and figures");
    run->add_option("scenario", scenario_path, "Scenario file")->required();
    run->add_option("--out", out_dir, "Output directory (default: $ADRFLAT_OUT/<scenario name>, or out/...)");
    add_overrides(run, ov);

    std::string filter, fault;
    auto* ver = app.add_subcommand("verify", "Run the acceptance checks and print a pass/fail table");
    ver->add_option("--filter", filter, "Only checks whose name contains this text, or whose group equals it "
                                        "(dob, flat, model, controller, certificate, sim)");
    ver->add_option("--inject-fault", fault, "Deliberately corrupt a quantity to exercise failure reporting (gain)");

    std::string param;
    std::vector<double> values;
    unsigned jobs = 0;
    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per parameter value");
    sweep->add_option("scenario", scenario_path, "Scenario file")->required();
    sweep->add_option("--param", param, "Numeric key: section.key, or dob-bandwidth, dob-order, dt, duration, seed")
        ->required();
    sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    sweep->add_option("--out", out_dir, "Output root (default: $ADRFLAT_OUT/<scenario name>_sweep)");
    sweep->add_option("--jobs", jobs, "Worker threads (default: available parallelism)");
    add_overrides(sweep, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run)
            return cmd_run(scenario_path, out_dir, ov);
        if (*ver)
            return cmd_verify(filter, fault);
        return cmd_sweep(scenario_path, param, values, out_dir, jobs, ov);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::UnstableRun ? kExitUnstable : kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
