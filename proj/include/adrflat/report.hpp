#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scenario.hpp"
#include "simulation.hpp"
#include "svg.hpp"

namespace adrflat {

// Metrics window used by `run` and `sweep`: from min(4 s, 40% of the run) to the end.
[[nodiscard]] inline std::pair<double, double> metrics_window(const Scenario& sc) {
    return {std::min(4.0, 0.4 * sc.duration), sc.duration};
}

// Single estimation figure of merit for sweeps: RMS over d1 and d2 (order 0), N.
[[nodiscard]] inline double combined_est_rmse(const Metrics& m) {
    const double a = m.est_rmse_d1.empty() ? 0.0 : m.est_rmse_d1[0];
    const double b = m.est_rmse_d2.empty() ? 0.0 : m.est_rmse_d2[0];
    return std::sqrt(0.5 * (a * a + b * b));
}

inline void write_tracking_figure(std::ostream& os, const SimLog& log) {
    svg::Panel top{"Position tracking", "t [s]", "q2 [m]", {}};
    top.series.push_back({"q2", "#1f77b4", log.t, {}});
    top.series.push_back({"q2_ref", "#d62728", log.t, log.q2_ref, true});
    svg::Panel bottom{"Tracking error", "t [s]", "q2 - q2_ref [m]", {}};
    bottom.series.push_back({"error", "#2ca02c", log.t, {}});
    for (std::size_t i = 0; i < log.size(); ++i) {
        const double q2 = log.x(kQ2, static_cast<Eigen::Index>(i));
        top.series[0].y.push_back(q2);
        bottom.series[0].y.push_back(q2 - log.q2_ref[i]);
    }
    svg::write_figure(os, {top, bottom}, 1);
}

inline void write_disturbance_figure(std::ostream& os, const SimLog& log) {
    std::vector<svg::Panel> panels;
    const std::size_t orders = std::min<std::size_t>(2, log.order) + 1;
    const char* units[] = {"N", "N/s", "N/s^2"};
    for (int c = 1; c <= 2; ++c)
        for (std::size_t j = 0; j < orders; ++j) {
            const std::string name = "d" + std::to_string(c) + (j ? "^(" + std::to_string(j) + ")" : "");
            svg::Panel p{name, "t [s]", std::string("[") + units[j] + "]", {}};
            p.series.push_back({"true", "#1f77b4", log.t, true_force_series(log, c, j)});
            svg::Series est{"estimate", "#d62728", log.t, {}, true};
            for (std::size_t i = 0; i < log.size(); ++i)
                est.y.push_back(log.d_hat(c, j, static_cast<Eigen::Index>(i)));
            p.series.push_back(std::move(est));
            panels.push_back(std::move(p));
        }
    svg::write_figure(os, panels, static_cast<int>(orders));
}

namespace detail {
inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os)
        throw Error(ErrorCode::InvalidArgument, "cannot write '" + p.string() + "'");
    return os;
}
} // namespace detail

// Writes log.csv, metrics.txt, fig_tracking.svg, fig_disturbance.svg and the
// effective scenario.toml into `dir`.
inline Metrics write_run_outputs(const std::filesystem::path& dir, const Scenario& sc, const SimLog& log) {
    std::filesystem::create_directories(dir);
    const auto [t0, t1] = metrics_window(sc);
    const Metrics m = compute_metrics(log, t0, t1);
    {
        auto os = detail::open_out(dir / "log.csv");
        write_csv(os, log);
    }
    {
        auto os = detail::open_out(dir / "metrics.txt");
        os << "controller=" << to_string(sc.controller.variant) << '\n';
        os << "seed=" << sc.seed << '\n';
        os << "window_start=" << t0 << '\n' << "window_end=" << t1 << '\n';
        write_metrics(os, m);
        os << "est_rmse=" << format_number(combined_est_rmse(m)) << '\n';
    }
    {
        auto os = detail::open_out(dir / "fig_tracking.svg");
        write_tracking_figure(os, log);
    }
    {
        auto os = detail::open_out(dir / "fig_disturbance.svg");
        write_disturbance_figure(os, log);
    }
    {
        auto os = detail::open_out(dir / "scenario.toml");
        write_scenario(os, sc);
    }
    return m;
}

} // namespace adrflat
