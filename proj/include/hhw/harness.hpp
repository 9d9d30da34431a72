#pragma once

// Command implementations behind the hhw CLI: simulate, bounds, verify, sweep.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hhw/analysis.hpp"
#include "hhw/integrators.hpp"
#include "hhw/io/config.hpp"
#include "hhw/io/csv.hpp"
#include "hhw/io/report.hpp"
#include "hhw/io/svg.hpp"
#include "hhw/parallel.hpp"
#include "hhw/sampling.hpp"

namespace hhw {

using io::json;

enum ExitCode : int {
    exit_ok = 0,
    exit_verification_failed = 1,
    exit_config_error = 2,
    exit_hypothesis_violation = 3,
    exit_runtime_error = 4,
};

struct CommonOptions {
    bool quiet = false;
    std::optional<std::uint64_t> seed;
    std::ostream* out = &std::cout;
    std::ostream* err = &std::cerr;
};

struct RunOutcome {
    Trajectory trajectory;
    bool completed = false;
    std::string error;
    double wall_ms = 0.0;
};

// Integrates one scenario from y0. Integration blow-up is captured, leaving the
// samples recorded up to that point.
inline RunOutcome run_scenario(const io::ScenarioConfig& c, const NetworkState& y0) {
    RunOutcome out;
    Trajectory& traj = out.trajectory;
    traj.meta = {c.model, c.neurons(), c.integrator.kind, c.integrator.dt,
                 c.memristive() ? std::optional<double>(c.params.alpha) : std::nullopt};
    auto sink = [&](std::uint64_t, double t, std::span<const double> y) { traj.push(t, y); };
    std::vector<double> y(y0.flat().begin(), y0.flat().end());
    const auto start = std::chrono::steady_clock::now();
    try {
        switch (c.integrator.kind) {
        case IntegratorKind::classical_fixed:
            rk4_integrate(ClassicalField{c.base()}, std::move(y), c.integrator, sink);
            break;
        case IntegratorKind::classical_adaptive:
            dopri_integrate(ClassicalField{c.base()}, std::move(y), c.integrator, sink);
            break;
        case IntegratorKind::caputo_pc:
            caputo_integrate(MemristiveField{c.params}, std::move(y), c.params.alpha, c.integrator, sink);
            break;
        }
        out.completed = true;
    } catch (const integration_error& e) {
        out.error = e.what();
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

struct CheckSet {
    std::vector<CheckResult> checks;
    std::string sync = "NOT_APPLICABLE";
    std::string dissipativity = "NOT_RUN";
    std::optional<std::string> hypothesis_violation;

    bool pass() const {
        if (hypothesis_violation)
            return false;
        for (const auto& c : checks)
            if (!c.pass)
                return false;
        return !checks.empty();
    }
};

namespace detail {

inline CheckResult failed_check(std::string name, std::string why) {
    CheckResult r;
    r.name = std::move(name);
    r.pass = false;
    r.detail = std::move(why);
    return r;
}

inline std::string verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

} // namespace detail

// Bound checks applicable to the scenario. rate_scale multiplies the
// envelope rate (mu or delta) and exists only to exercise the failure path.
inline CheckSet run_checks(const io::ScenarioConfig& c, const Trajectory& traj, const GapSeries& gaps,
                           double rate_scale = 1.0) {
    CheckSet set;
    if (traj.empty())
        return set;
    const NetworkState& y0 = traj.states.front();
    const double T0 = transient_time_T0(y0, c.base());

    if (!c.memristive()) {
        const auto cb = classical_bounds(c.base());
        bool diss_ok = false;
        try {
            const auto d = verify_dissipativity(traj, c.base(), cb.G);
            set.checks.push_back(d.tail);
            set.checks.push_back(d.transient);
            diss_ok = d.pass();
        } catch (const domain_error& e) {
            set.checks.push_back(detail::failed_check("dissipativity_tail", e.what()));
        }
        set.dissipativity = detail::verdict(diss_ok);
        if (c.base().P > cb.P_star) {
            const auto s = verify_sync_envelope(gaps, cb.mu * rate_scale, T0);
            set.checks.push_back(s);
            set.sync = detail::verdict(s.pass);
        }
        return set;
    }

    if (!c.params.hypothesis_holds()) {
        set.hypothesis_violation = "a0 > k/beta does not hold";
        return set;
    }
    const auto fb = fractional_bounds(c.params);
    const auto d = verify_dissipativity(traj, c.params, fb.G_alpha);
    set.checks.push_back(d.tail);
    set.checks.push_back(d.transient);
    const auto rho = verify_memductance_bound(traj, fb.rho_bound);
    set.checks.push_back(rho);
    set.dissipativity = detail::verdict(d.pass() && rho.pass);
    if (fb.delta > 0.0) {
        const auto s = verify_frac_sync(gaps, c.params, T0, {}, rate_scale);
        const auto m = verify_monotone_tail(gaps);
        set.checks.push_back(s);
        set.checks.push_back(m);
        set.sync = detail::verdict(s.pass && m.pass);
    }
    return set;
}

namespace detail {

// Writes through a temporary sibling and renames it into place.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw error("cannot write " + tmp.string());
        os << content;
        if (!os)
            throw error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline json run_json(const RunOutcome& run, const GapSeries* gaps, const CheckSet& checks,
                     std::optional<std::uint64_t> seed) {
    json r;
    r["seed"] = seed ? json(*seed) : json(nullptr);
    r["status"] = run.completed ? "completed" : "integration_failed";
    r["partial"] = !run.completed;
    if (!run.completed)
        r["error"] = run.error;
    r["samples"] = run.trajectory.size();
    r["final_time"] = run.trajectory.empty() ? json(nullptr) : json(run.trajectory.times.back());
    r["final_max_gap_sq"] = gaps && gaps->size() ? io::detail::optional_number(gaps->max_gap.back()) : json(nullptr);
    json list = json::array();
    for (const auto& c : checks.checks)
        list.push_back(io::check_json(c));
    r["checks"] = std::move(list);
    r["verdict"] = {{"sync", checks.sync}, {"dissipativity", checks.dissipativity},
                    {"overall", detail::verdict(run.completed && checks.pass())}};
    if (checks.hypothesis_violation)
        r["hypothesis_violation"] = *checks.hypothesis_violation;
    return r;
}

// Theoretical envelope for the gap plot, anchored at the first sample at or
// after T0. Empty when no synchronization rate applies.
inline std::optional<io::PlotSeries> envelope_series(const io::ScenarioConfig& c, const GapSeries& gaps, double T0) {
    const auto ref = hhw::detail::first_at_or_after(gaps.times, T0);
    if (!ref)
        return std::nullopt;
    if (c.memristive() ? !(c.params.hypothesis_holds() && fractional_bounds(c.params).delta > 0.0)
                       : !(c.base().P > threshold_P_star(c.base())))
        return std::nullopt;
    const double g0 = gaps.max_gap[*ref];
    const double t0 = gaps.times[*ref];
    const double mu = rate_mu(c.base());
    io::PlotSeries env{"envelope", {}, {}, "#d62728", true};
    std::vector<double> vals;
    for (std::size_t k = *ref; k < gaps.size(); ++k) {
        const double dt = gaps.times[k] - t0;
        env.x.push_back(gaps.times[k]);
        vals.push_back(c.memristive() ? g0 * rate_mu_alpha(c.params, dt) : g0 * std::exp(-mu * dt));
    }
    env.y = io::log10_clamped(vals);
    return env;
}

inline void write_plots(const io::ScenarioConfig& c, const Trajectory& traj, const GapSeries& gaps, double T0,
                        const std::filesystem::path& dir, const std::string& tag) {
    io::Plot pv;
    pv.title = "Membrane potentials " + tag;
    pv.x_label = "t (ms)";
    pv.y_label = "V_i";
    for (std::size_t i = 0; i < traj.meta.neurons; ++i) {
        io::PlotSeries s;
        s.label = "V_" + std::to_string(i + 1);
        s.color = io::palette()[i % io::palette().size()];
        s.x = traj.times;
        for (const auto& st : traj.states)
            s.y.push_back(st.V()[i]);
        pv.series.push_back(std::move(s));
    }
    write_file(dir / "potentials.svg", io::render_svg(pv));

    io::Plot pg;
    pg.title = "Largest pairwise gap " + tag;
    pg.x_label = "t (ms)";
    pg.y_label = "log10 max_gap_sq";
    pg.series.push_back({"max_gap_sq", gaps.times, io::log10_clamped(gaps.max_gap), "#1f77b4", false});
    if (auto env = envelope_series(c, gaps, T0))
        pg.series.push_back(std::move(*env));
    if (T0 > 0.0)
        pg.rules.push_back({T0, "T0"});
    write_file(dir / "gaps.svg", io::render_svg(pg));
}

inline void apply_seed(io::ScenarioConfig& c, const CommonOptions& opt) {
    if (opt.seed && c.random_initial)
        c.random_initial->seed = *opt.seed;
}

inline std::optional<std::uint64_t> run_seed(const io::ScenarioConfig& c) {
    if (c.random_initial)
        return c.random_initial->seed;
    return std::nullopt;
}

} // namespace detail

// Maps library exceptions to CLI exit codes.
template <class Fn>
int guarded(const CommonOptions& opt, Fn&& fn) {
    try {
        return fn();
    } catch (const config_error& e) {
        *opt.err << "config error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const nlohmann::json::exception& e) {
        *opt.err << "config error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const hypothesis_error& e) {
        *opt.err << "hypothesis violation: " << e.what() << '\n';
        return exit_hypothesis_violation;
    } catch (const std::exception& e) {
        *opt.err << "error: " << e.what() << '\n';
        return exit_runtime_error;
    }
}

inline int cmd_simulate(const std::filesystem::path& config_path, std::optional<std::filesystem::path> out_dir,
                        const CommonOptions& opt = {}) {
    return guarded(opt, [&] {
        auto c = io::load_scenario(config_path);
        detail::apply_seed(c, opt);
        const auto dir = out_dir.value_or(c.output_dir);
        const auto seed = detail::run_seed(c);
        const NetworkState y0 = c.initial_state();

        const RunOutcome run = run_scenario(c, y0);
        const GapSeries gaps = gap_series(run.trajectory);
        const CheckSet checks = run.completed ? run_checks(c, run.trajectory, gaps) : CheckSet{};

        std::filesystem::create_directories(dir);
        if (c.wants(io::Output::trajectory_csv)) {
            std::ostringstream os;
            io::write_trajectory_csv(os, run.trajectory);
            detail::write_file(dir / "trajectory.csv", os.str());
        }
        if (c.wants(io::Output::gaps_csv)) {
            std::ostringstream os;
            io::write_gaps_csv(os, gaps);
            detail::write_file(dir / "gaps.csv", os.str());
        }
        if (c.wants(io::Output::report_json)) {
            json report = io::report_header("simulate", c);
            report["integrator"] = io::integrator_json(c.integrator);
            report["initial"] = io::initial_json(c, seed);
            if (c.memristive() && !c.params.hypothesis_holds())
                report["bounds"] = nullptr;
            else
                report["bounds"] = io::bounds_json(c, &y0);
            report["runs"] = json::array({detail::run_json(run, &gaps, checks, seed)});
            detail::write_file(dir / "report.json", report.dump(2) + "\n");
        }
        if (c.wants(io::Output::plot_svg)) {
            const std::string tag = seed ? "(seed " + std::to_string(*seed) + ")" : "";
            detail::write_plots(c, run.trajectory, gaps, transient_time_T0(y0, c.base()), dir, tag);
        }

        if (!run.completed) {
            *opt.err << "integration failed: " << run.error << " (partial outputs in " << dir.string() << ")\n";
            return static_cast<int>(exit_runtime_error);
        }
        if (!opt.quiet) {
            *opt.out << "simulated " << run.trajectory.size() << " samples to t = " << run.trajectory.times.back()
                     << ", final max_gap_sq = " << gaps.max_gap.back() << "\n";
            *opt.out << "sync " << checks.sync << ", dissipativity " << checks.dissipativity << "\n";
            *opt.out << "outputs in " << dir.string() << "\n";
        }
        return static_cast<int>(exit_ok);
    });
}

inline int cmd_bounds(const std::filesystem::path& config_path, std::optional<std::filesystem::path> out_dir,
                      const CommonOptions& opt = {}) {
    return guarded(opt, [&] {
        auto c = io::load_scenario(config_path);
        detail::apply_seed(c, opt);
        const NetworkState y0 = c.initial_state();
        json report = io::report_header("bounds", c);
        report["initial"] = io::initial_json(c, detail::run_seed(c));
        report["bounds"] = io::bounds_json(c, &y0);
        const std::string text = report.dump(2) + "\n";
        if (out_dir)
            detail::write_file(*out_dir / "bounds.json", text);
        if (!opt.quiet || !out_dir)
            *opt.out << text;
        return static_cast<int>(exit_ok);
    });
}

// Runs the scenario from `seeds` random initial states (or the configured one)
// and checks every applicable conclusion. Exit 0 iff all checks pass.
inline int cmd_verify(const std::filesystem::path& config_path, std::optional<int> seeds, double rate_scale = 1.0,
                      const CommonOptions& opt = {}) {
    return guarded(opt, [&] {
        auto c = io::load_scenario(config_path);
        detail::apply_seed(c, opt);
        if (seeds && *seeds < 1)
            throw config_error("--seeds", "must be at least 1");
        if (seeds && !c.random_initial)
            throw config_error("initial", "--seeds needs a random initial specification");
        if (!(rate_scale > 0.0))
            throw config_error("--debug-rate-scale", "must be positive");
        if (c.memristive())
            c.params.require_hypothesis();

        const std::size_t count = seeds ? static_cast<std::size_t>(*seeds) : 1;
        std::vector<std::optional<std::uint64_t>> run_seeds(count);
        for (std::size_t k = 0; k < count; ++k)
            run_seeds[k] = seeds ? std::optional(derive_seed(c.random_initial->seed, k)) : detail::run_seed(c);

        std::vector<json> runs(count);
        std::vector<int> status(count, exit_ok);
        std::vector<std::string> lines(count);
        parallel_for(count, default_jobs(), [&](std::size_t k) {
            const NetworkState y0 = c.initial_state(run_seeds[k]);
            const RunOutcome run = run_scenario(c, y0);
            const GapSeries gaps = gap_series(run.trajectory);
            const CheckSet checks = run.completed ? run_checks(c, run.trajectory, gaps, rate_scale) : CheckSet{};
            runs[k] = detail::run_json(run, &gaps, checks, run_seeds[k]);
            std::ostringstream os;
            const std::string who = run_seeds[k] ? "seed " + std::to_string(*run_seeds[k]) : "explicit initial state";
            if (!run.completed) {
                status[k] = exit_runtime_error;
                os << "FAIL  " << who << ": integration failed: " << run.error << "\n";
            } else {
                if (!checks.pass())
                    status[k] = exit_verification_failed;
                for (const auto& r : checks.checks) {
                    os << (r.pass ? "PASS  " : "FAIL  ") << who << "  " << r.name << "  measured " << r.measured
                       << " bound " << r.bound << " margin " << r.margin;
                    if (!r.detail.empty())
                        os << "  (" << r.detail << ")";
                    os << "\n";
                }
            }
            lines[k] = os.str();
        });

        int code = exit_ok;
        for (int s : status)
            code = std::max(code, s);
        if (c.wants(io::Output::report_json)) {
            json report = io::report_header("verify", c);
            report["integrator"] = io::integrator_json(c.integrator);
            report["initial"] = io::initial_json(c, detail::run_seed(c));
            report["bounds"] = io::bounds_json(c, nullptr);
            if (rate_scale != 1.0)
                report["debug_rate_scale"] = rate_scale;
            report["runs"] = runs;
            report["verdict"] = {{"overall", detail::verdict(code == exit_ok)}};
            detail::write_file(c.output_dir / "verify_report.json", report.dump(2) + "\n");
        }
        if (!opt.quiet) {
            for (const auto& l : lines)
                *opt.out << l;
            *opt.out << "verify: " << detail::verdict(code == exit_ok) << " (" << count << " run"
                     << (count == 1 ? "" : "s") << ")\n";
        }
        return code;
    });
}

struct SweepRow {
    double value = 0.0;
    int replicate = 0;
    std::uint64_t seed = 0;
    double final_max_gap_sq = 0.0;
    bool sync = false;
    bool completed = false;
    double wall_ms = 0.0;
};

inline std::string sweep_csv_line(const SweepRow& r) {
    std::string s;
    io::append_number(s, r.value);
    s += ',' + std::to_string(r.replicate) + ',' + std::to_string(r.seed) + ',';
    io::append_number(s, r.final_max_gap_sq);
    s += r.sync ? ",true," : ",false,";
    s += r.completed ? "completed\n" : "integration_failed\n";
    return s;
}

// Every value x replicate runs concurrently; replicate r starts from the same
// random state (seed derived from the sweep seed and r) for every value.
inline int cmd_sweep(const std::filesystem::path& config_path, unsigned jobs, const CommonOptions& opt = {}) {
    return guarded(opt, [&] {
        auto s = io::load_sweep(config_path);
        if (opt.seed)
            s.seed = *opt.seed;
        const auto& dir = s.output_dir;
        const auto scratch = dir / ".partial";
        std::filesystem::create_directories(scratch);

        const std::size_t reps = static_cast<std::size_t>(s.replicates);
        const std::size_t total = s.values.size() * reps;
        std::vector<SweepRow> rows(total);
        std::mutex progress;
        std::size_t done = 0;
        parallel_for(total, jobs == 0 ? default_jobs() : jobs, [&](std::size_t k) {
            const std::size_t vi = k / reps;
            const int r = static_cast<int>(k % reps);
            const auto c = s.scenario(s.values[vi]);
            SweepRow row;
            row.value = s.values[vi];
            row.replicate = r;
            row.seed = derive_seed(s.seed, static_cast<std::uint64_t>(r));
            const NetworkState y0 = c.initial_state(row.seed);
            const RunOutcome run = run_scenario(c, y0);
            const GapSeries gaps = gap_series(run.trajectory);
            row.completed = run.completed;
            row.final_max_gap_sq = gaps.size() ? gaps.max_gap.back() : std::numeric_limits<double>::quiet_NaN();
            row.sync = run.completed && row.final_max_gap_sq < s.sync_threshold;
            row.wall_ms = run.wall_ms;
            detail::write_file(scratch / ("run_" + std::to_string(k) + ".csv"), sweep_csv_line(row));
            rows[k] = row;
            if (!opt.quiet) {
                std::lock_guard lock(progress);
                ++done;
                *opt.out << "[" << done << "/" << total << "] " << io::to_string(s.variable) << " = " << row.value
                         << " replicate " << r << ": final max_gap_sq " << row.final_max_gap_sq
                         << (row.sync ? " (sync)" : "") << "\n";
            }
        });

        std::string csv = "value,replicate,seed,final_max_gap_sq,sync_bool,status\n";
        std::string timing = "value,replicate,wall_time_ms\n";
        for (std::size_t k = 0; k < total; ++k) {
            const auto part = scratch / ("run_" + std::to_string(k) + ".csv");
            std::ifstream in(part, std::ios::binary);
            csv.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
            io::append_number(timing, rows[k].value);
            timing += ',' + std::to_string(rows[k].replicate) + ',';
            io::append_number(timing, std::round(rows[k].wall_ms * 1000.0) / 1000.0);
            timing += '\n';
        }
        detail::write_file(dir / "sweep.csv", csv);
        detail::write_file(dir / "sweep_timing.csv", timing);
        std::filesystem::remove_all(scratch);

        if (s.plot) {
            io::Plot p;
            p.title = std::string("Empirical synchronization fraction vs ") + io::to_string(s.variable) +
                      (s.relative ? " (relative to threshold)" : "") + ", seed " + std::to_string(s.seed);
            p.x_label = s.relative ? "P / threshold" : io::to_string(s.variable);
            p.y_label = "fraction synchronized";
            p.markers = true;
            io::PlotSeries frac{"sync fraction", {}, {}, "#1f77b4", false};
            for (std::size_t vi = 0; vi < s.values.size(); ++vi) {
                int n_sync = 0;
                for (std::size_t r = 0; r < reps; ++r)
                    n_sync += rows[vi * reps + r].sync ? 1 : 0;
                frac.x.push_back(s.values[vi]);
                frac.y.push_back(static_cast<double>(n_sync) / static_cast<double>(reps));
            }
            p.series.push_back(std::move(frac));
            if (s.variable == io::SweepVariable::P) {
                const char* name = s.base.memristive() ? "P_*" : "P*";
                p.rules.push_back({s.relative ? 1.0 : s.base.threshold(), name});
            }
            detail::write_file(dir / "sweep.svg", io::render_svg(p));
        }

        bool all_completed = true;
        for (const auto& r : rows)
            all_completed = all_completed && r.completed;
        if (!opt.quiet)
            *opt.out << "sweep: " << total << " runs, results in " << (dir / "sweep.csv").string() << "\n";
        if (!all_completed) {
            *opt.err << "sweep: some runs failed to integrate (status column)\n";
            return static_cast<int>(exit_runtime_error);
        }
        return static_cast<int>(exit_ok);
    });
}

} // namespace hhw
