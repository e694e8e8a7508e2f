#ifndef VACMECH_RUNNER_HPP
#define VACMECH_RUNNER_HPP

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "io.hpp"
#include "lindblad.hpp"
#include "perturb.hpp"

namespace vacmech {

// ---------------------------------------------------------------- config parsing
//
// Declarative JSON scenarios. Shape problems (missing keys, wrong types)
// raise ConfigParseError with the offending field path; out-of-range values
// raise ValidationError from the domain layer.

namespace cfg {

inline const json& need(const json& j, const std::string& ctx, const std::string& key) {
    if (!j.is_object()) throw ConfigParseError(ctx + " must be an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigParseError(ctx + "." + key + " is missing");
    return *it;
}

inline double need_num(const json& j, const std::string& ctx, const std::string& key) {
    const json& v = need(j, ctx, key);
    if (!v.is_number()) throw ConfigParseError(ctx + "." + key + " must be a number");
    return v.get<double>();
}

inline int need_int(const json& j, const std::string& ctx, const std::string& key) {
    const json& v = need(j, ctx, key);
    if (!v.is_number_integer()) throw ConfigParseError(ctx + "." + key + " must be an integer");
    return v.get<int>();
}

inline std::string need_str(const json& j, const std::string& ctx, const std::string& key) {
    const json& v = need(j, ctx, key);
    if (!v.is_string()) throw ConfigParseError(ctx + "." + key + " must be a string");
    return v.get<std::string>();
}

inline double opt_num(const json& j, const std::string& ctx, const std::string& key, double dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    return need_num(j, ctx, key);
}

inline int opt_int(const json& j, const std::string& ctx, const std::string& key, int dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    return need_int(j, ctx, key);
}

inline std::pair<double, double> need_pair(const json& j, const std::string& ctx, const std::string& key) {
    const json& v = need(j, ctx, key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigParseError(ctx + "." + key + " must be [number, number]");
    return {v[0].get<double>(), v[1].get<double>()};
}

inline std::pair<int, int> need_int_pair(const json& j, const std::string& ctx, const std::string& key) {
    const json& v = need(j, ctx, key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ConfigParseError(ctx + "." + key + " must be [integer, integer]");
    return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace cfg

inline ModelParams parse_model(const json& jm) {
    const std::string kind = cfg::need_str(jm, "model", "kind");
    ModelParams p;
    if (kind == "single_atom_single_mode") {
        p = single_atom_single_mode(cfg::need_num(jm, "model", "omega_c"), cfg::need_num(jm, "model", "omega_a"),
                                    cfg::need_num(jm, "model", "g"), cfg::need_num(jm, "model", "lambda"),
                                    cfg::opt_int(jm, "model", "cutoff_phonon", 6),
                                    cfg::opt_int(jm, "model", "cutoff_photon", 6));
    } else if (kind == "single_atom_two_modes") {
        p = single_atom_two_modes(cfg::need_num(jm, "model", "omega_c1"), cfg::need_num(jm, "model", "omega_c2"),
                                  cfg::need_num(jm, "model", "omega_a"), cfg::need_num(jm, "model", "g"),
                                  cfg::need_num(jm, "model", "lambda"),
                                  cfg::opt_int(jm, "model", "cutoff_phonon", 6),
                                  cfg::opt_int(jm, "model", "cutoff_photon1", 5),
                                  cfg::opt_int(jm, "model", "cutoff_photon2", 5));
    } else if (kind == "two_atoms_single_mode") {
        p = two_atoms_single_mode(cfg::need_num(jm, "model", "omega_c"), cfg::need_num(jm, "model", "omega_a1"),
                                  cfg::need_num(jm, "model", "omega_a2"), cfg::need_num(jm, "model", "g"),
                                  cfg::need_num(jm, "model", "lambda1"), cfg::need_num(jm, "model", "lambda2"),
                                  cfg::opt_int(jm, "model", "cutoff_phonon", 6),
                                  cfg::opt_int(jm, "model", "cutoff_photon", 6));
    } else {
        throw ConfigParseError("model.kind '" + kind + "' is not a known model");
    }
    if (p.cutoff_phonon < 1 || p.cutoff_photon < 1 || p.cutoff_photon1 < 1 || p.cutoff_photon2 < 1)
        throw ValidationError("model cutoffs must be >= 1");
    p.validate();
    return p;
}

inline LossRates parse_losses(const json& jl) {
    LossRates l;
    l.kappa = cfg::need_num(jl, "losses", "kappa");
    l.gamma = cfg::need_num(jl, "losses", "gamma");
    l.eta = cfg::need_num(jl, "losses", "eta");
    l.validate();
    return l;
}

inline DriveSpec parse_drive(const json& jd) {
    const std::string kind = cfg::need_str(jd, "drive", "kind");
    if (kind == "cw")
        return cw_drive(cfg::need_num(jd, "drive", "amplitude"), cfg::opt_num(jd, "drive", "omega_d", 1.0));
    if (kind == "gaussian_pulse") {
        const double sigma = cfg::need_num(jd, "drive", "sigma");
        const double t0 = cfg::need_num(jd, "drive", "t0");
        const double wd = cfg::opt_num(jd, "drive", "omega_d", 1.0);
        const bool has_area = jd.contains("area"), has_peak = jd.contains("peak");
        if (has_area == has_peak)
            throw ConfigParseError("drive: specify exactly one of 'area' or 'peak'");
        DriveSpec d = has_area ? gaussian_pulse_by_area(cfg::need_num(jd, "drive", "area"), sigma, t0, wd)
                               : gaussian_pulse_by_peak(cfg::need_num(jd, "drive", "peak"), sigma, t0, wd);
        d.validate();
        return d;
    }
    throw ConfigParseError("drive.kind '" + kind + "' is not a known drive");
}

inline Schedule parse_schedule(const json& js) {
    Schedule s;
    s.parameter = cfg::need_str(js, "schedule", "parameter");
    const json& segs = cfg::need(js, "schedule", "segments");
    if (!segs.is_array()) throw ConfigParseError("schedule.segments must be an array");
    for (const auto& e : segs) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ConfigParseError("schedule.segments entries must be [t_start, value]");
        s.segments.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    s.validate();
    return s;
}

inline InitialState parse_initial(const json& ji) {
    const std::string kind = cfg::need_str(ji, "initial", "kind");
    if (kind == "ground") return initial_ground();
    if (kind == "superposition") {
        const json& comps = cfg::need(ji, "initial", "components");
        if (!comps.is_array() || comps.empty())
            throw ConfigParseError("initial.components must be a non-empty array");
        std::vector<std::pair<std::vector<int>, cplx>> cs;
        for (const auto& c : comps) {
            const json& occ = cfg::need(c, "initial.components[]", "occupation");
            if (!occ.is_array()) throw ConfigParseError("initial occupation must be an array of integers");
            std::vector<int> o;
            for (const auto& v : occ) {
                if (!v.is_number_integer()) throw ConfigParseError("initial occupation must be integers");
                o.push_back(v.get<int>());
            }
            const json& amp = cfg::need(c, "initial.components[]", "amplitude");
            cplx a;
            if (amp.is_number()) a = cplx(amp.get<double>(), 0.0);
            else if (amp.is_array() && amp.size() == 2 && amp[0].is_number() && amp[1].is_number())
                a = cplx(amp[0].get<double>(), amp[1].get<double>());
            else throw ConfigParseError("initial amplitude must be a number or [re, im]");
            cs.emplace_back(std::move(o), a);
        }
        return initial_superposition(std::move(cs));
    }
    throw ConfigParseError("initial.kind '" + kind + "' is not supported in configs");
}

inline std::vector<double> parse_time_grid(const json& jt) {
    const double t_end = cfg::need_num(jt, "time", "t_end");
    const double dt = cfg::need_num(jt, "time", "dt");
    if (!(t_end > 0.0) || !(dt > 0.0)) throw ValidationError("time.t_end and time.dt must be > 0");
    const long n = std::lround(t_end / dt);
    if (n < 2) throw ValidationError("time grid needs at least 2 steps");
    std::vector<double> ts(static_cast<std::size_t>(n) + 1);
    for (long i = 0; i <= n; ++i) ts[static_cast<std::size_t>(i)] = t_end * static_cast<double>(i) / static_cast<double>(n);
    return ts;
}

struct ScenarioConfig {
    std::string scenario;
    ModelParams model;
    std::string basename;
    json raw;
};

inline ScenarioConfig parse_config(const json& j) {
    ScenarioConfig c;
    c.raw = j;
    c.scenario = cfg::need_str(j, "config", "scenario");
    static const std::vector<std::string> known = {"spectrum",        "crossing",        "perturb_compare",
                                                   "dynamics",        "freq_conversion", "joint_excitation"};
    if (std::find(known.begin(), known.end(), c.scenario) == known.end())
        throw ConfigParseError("scenario '" + c.scenario + "' is not one of the supported scenarios");
    c.model = parse_model(cfg::need(j, "config", "model"));
    c.basename = j.contains("output") ? cfg::need_str(j["output"], "output", "basename") : c.scenario;
    return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) { return parse_config(load_json_file(path)); }

// ---------------------------------------------------------------- helpers

namespace detail {

inline json composition_to_json(const std::vector<CompositionEntry>& comp) {
    json arr = json::array();
    for (const auto& e : comp) {
        json o;
        o["label"] = e.label;
        o["re"] = e.amplitude.real();
        o["im"] = e.amplitude.imag();
        o["weight"] = std::norm(e.amplitude);
        arr.push_back(o);
    }
    return arr;
}

inline json crossing_to_json(const std::string& axis, const CrossingReport& rep) {
    json j;
    j["axis"] = axis;
    j["axis_value_at_min"] = rep.axis_value_at_min;
    j["splitting"] = rep.splitting;
    j["level_lo"] = rep.level_lo;
    j["level_hi"] = rep.level_hi;
    j["resonance_order"] = rep.resonance_order;
    j["composition_lo"] = composition_to_json(rep.composition_lo);
    j["composition_hi"] = composition_to_json(rep.composition_hi);
    return j;
}

// analytic formula dispatch by name; "rabi:<method>" selects the
// single-mode Rabi comparison variants
inline CouplingEstimate eval_formula(const std::string& name, const ModelParams& p) {
    if (name == "rate_g10_e01") return rate_g10_e01(p);
    if (name == "rate_g20_e01") return rate_g20_e01(p);
    if (name == "rate_freq_conversion") return rate_freq_conversion(p);
    if (name == "rate_two_atom") return rate_two_atom(p);
    if (name.rfind("rabi:", 0) == 0) return rate_rabi_comparison(p, rabi_method_from_string(name.substr(5)));
    throw UnknownMethod("formula '" + name + "'");
}

inline std::string column_safe(std::string s) {
    for (char& ch : s)
        if (ch == ':') ch = '_';
    return s;
}

// optional pre-run crossing location: replaces one model frequency with the
// numerically found gap minimum before the dynamics run
inline void apply_locate(ModelParams& p, const json& j, json& extra) {
    if (!j.contains("locate")) return;
    const json& jl = j["locate"];
    const std::string axis = cfg::need_str(jl, "locate", "axis");
    const auto bracket = cfg::need_pair(jl, "locate", "bracket");
    const auto pair = cfg::need_int_pair(jl, "locate", "level_pair");
    CrossingReport rep = find_min_splitting(p, axis, bracket.first, bracket.second, pair);
    p = with_axis(p, axis, rep.axis_value_at_min);
    extra["located_axis"] = axis;
    extra["located_value"] = rep.axis_value_at_min;
    extra["located_splitting"] = rep.splitting;
}

inline std::vector<std::string> observable_columns(const TrajectoryRecord& rec) {
    std::vector<std::string> names;
    for (const auto& [k, v] : rec.observables) names.push_back(k);  // map order: alphabetical
    return names;
}

inline void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& rec,
                                 const std::string& digest) {
    std::vector<std::string> cols = {"t"};
    const auto names = observable_columns(rec);
    cols.insert(cols.end(), names.begin(), names.end());
    cols.push_back("trace_deviation");
    CsvTable tab(cols);
    tab.add_comment("config " + digest);
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        std::vector<double> row = {rec.times[i]};
        for (const auto& n : names) row.push_back(rec.observables.at(n)[i]);
        row.push_back(rec.trace_deviation[i]);
        tab.add_row(row);
    }
    tab.write(path);
}

inline void summarize_trajectory(const TrajectoryRecord& rec, json& extra) {
    for (const auto& [name, series] : rec.observables) {
        if (series.empty()) continue;
        double peak = series[0], tpeak = rec.times[0];
        for (std::size_t i = 1; i < series.size(); ++i)
            if (series[i] > peak) {
                peak = series[i];
                tpeak = rec.times[i];
            }
        extra["peak_" + name] = peak;
        extra["peak_" + name + "_time"] = tpeak;
        extra["final_" + name] = series.back();
    }
    double worst_trace = 0.0;
    for (double d : rec.trace_deviation) worst_trace = std::max(worst_trace, d);
    extra["max_trace_deviation"] = worst_trace;
    extra["min_rho_eigenvalue"] = rec.min_rho_eigenvalue;
    extra["max_hermiticity_residual"] = rec.max_hermiticity_residual;
    for (const auto& [k, v] : rec.meta) extra[k] = v;
}

inline void write_spectrum_csv(const std::filesystem::path& path, const TrajectorySpectrum& sp,
                               const std::string& digest) {
    CsvTable tab({"frequency", "magnitude"});
    tab.add_comment("config " + digest);
    tab.add_comment("resolution " + fmt17(sp.resolution));
    for (std::size_t i = 0; i < sp.frequencies.size(); ++i)
        tab.add_row(std::vector<double>{sp.frequencies[i], sp.magnitudes[i]});
    tab.write(path);
}

inline void spectrum_to_extra(const TrajectorySpectrum& sp, json& extra) {
    extra["spectrum_resolution"] = sp.resolution;
    json peaks = json::array();
    for (const auto& p : sp.peaks) {
        json o;
        o["frequency"] = p.frequency;
        o["magnitude"] = p.magnitude;
        peaks.push_back(o);
    }
    extra["spectrum_peaks"] = peaks;
    if (!sp.peaks.empty()) {
        const SpectrumPeak d = sp.dominant();
        extra["dominant_frequency"] = d.frequency;
        extra["dominant_magnitude"] = d.magnitude;
    }
}

}  // namespace detail

// ---------------------------------------------------------------- scenarios

struct RunResult {
    int exit_code = 0;
    RunManifest manifest;
};

inline EvolveSpec build_dynamics_spec(const ScenarioConfig& c, json& extra) {
    const json& j = c.raw;
    EvolveSpec spec;
    spec.params = c.model;
    detail::apply_locate(spec.params, j, extra);
    spec.losses = parse_losses(cfg::need(j, "config", "losses"));
    if (j.contains("drive")) spec.drive = parse_drive(j["drive"]);
    if (j.contains("schedule")) spec.schedule = parse_schedule(j["schedule"]);
    spec.initial = j.contains("initial") ? parse_initial(j["initial"]) : initial_ground();
    spec.t_grid = parse_time_grid(cfg::need(j, "config", "time"));
    spec.level_cap = cfg::opt_int(j, "config", "level_cap", -1);
    return spec;
}

inline RunResult run_scenario(const ScenarioConfig& c, const std::filesystem::path& out_dir);

namespace detail {

inline RunResult run_spectrum(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                              RunManifest& man) {
    const json& js = cfg::need(c.raw, "config", "spectrum");
    const std::string axis = cfg::need_str(js, "spectrum", "axis");
    const double lo = cfg::need_num(js, "spectrum", "from");
    const double hi = cfg::need_num(js, "spectrum", "to");
    const int npts = cfg::need_int(js, "spectrum", "points");
    const int n_levels = cfg::need_int(js, "spectrum", "n_levels");
    if (npts < 2) throw ValidationError("spectrum.points must be >= 2");
    std::vector<double> grid(static_cast<std::size_t>(npts));
    for (int i = 0; i < npts; ++i)
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (npts - 1);
    SpectrumSweep sw = sweep(c.model, axis, grid, n_levels);

    std::vector<std::string> cols = {axis};
    for (int l = 0; l < n_levels; ++l) cols.push_back("level_" + std::to_string(l));
    CsvTable tab(cols);
    tab.add_comment("config " + man.config_digest);
    tab.add_comment("columns level_k hold E_k - E_0");
    for (std::size_t jrow = 0; jrow < grid.size(); ++jrow) {
        std::vector<double> row = {grid[jrow]};
        for (int l = 0; l < n_levels; ++l) row.push_back(sw.tracked_levels[static_cast<std::size_t>(l)][jrow]);
        tab.add_row(row);
    }
    const auto path = out_dir / (c.basename + "_spectrum.csv");
    tab.write(path);
    man.output_files.push_back(path.filename().string());
    double worst = 1.0;
    for (double v : sw.overlap_continuity) worst = std::min(worst, v);
    man.extra["min_overlap_continuity"] = worst;
    return {0, man};
}

inline RunResult run_crossing(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                              RunManifest& man) {
    const json& jc = cfg::need(c.raw, "config", "crossing");
    const std::string axis = cfg::need_str(jc, "crossing", "axis");
    const auto bracket = cfg::need_pair(jc, "crossing", "bracket");
    const auto pair = cfg::need_int_pair(jc, "crossing", "level_pair");
    const int top_k = cfg::opt_int(jc, "crossing", "top_k", 6);
    const double axis_tol = cfg::opt_num(jc, "crossing", "axis_tol", 1e-8);
    CrossingReport rep = find_min_splitting(c.model, axis, bracket.first, bracket.second, pair, axis_tol, top_k);

    const auto jpath = out_dir / (c.basename + "_crossing.json");
    write_json_file(jpath, crossing_to_json(axis, rep));
    CsvTable tab({"axis_value_at_min", "splitting", "level_lo", "level_hi", "resonance_order"});
    tab.add_comment("config " + man.config_digest);
    tab.add_comment("axis " + axis);
    tab.add_row({rep.axis_value_at_min, rep.splitting, static_cast<double>(rep.level_lo),
                 static_cast<double>(rep.level_hi), static_cast<double>(rep.resonance_order)});
    const auto cpath = out_dir / (c.basename + "_crossing.csv");
    tab.write(cpath);
    man.output_files.push_back(jpath.filename().string());
    man.output_files.push_back(cpath.filename().string());
    man.extra["axis_value_at_min"] = rep.axis_value_at_min;
    man.extra["splitting"] = rep.splitting;
    man.extra["resonance_order"] = rep.resonance_order;
    return {0, man};
}

inline RunResult run_compare_impl(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                                  RunManifest& man) {
    const json& jc = cfg::need(c.raw, "config", "compare");
    const std::string axis = cfg::need_str(jc, "compare", "axis");
    const auto bracket = cfg::need_pair(jc, "compare", "bracket");
    const auto pair = cfg::need_int_pair(jc, "compare", "level_pair");
    const json& jg = cfg::need(jc, "compare", "g_values");
    if (!jg.is_array() || jg.empty()) throw ConfigParseError("compare.g_values must be a non-empty array");
    std::vector<double> gs;
    for (const auto& v : jg) {
        if (!v.is_number()) throw ConfigParseError("compare.g_values must be numbers");
        gs.push_back(v.get<double>());
    }
    const json& jf = cfg::need(jc, "compare", "formulas");
    if (!jf.is_array() || jf.empty()) throw ConfigParseError("compare.formulas must be a non-empty array");
    std::vector<std::string> formulas;
    for (const auto& v : jf) formulas.push_back(v.get<std::string>());

    std::vector<std::string> cols = {"g", "axis_value_at_min", "numeric_two_omega"};
    for (const auto& f : formulas) {
        cols.push_back("analytic_" + column_safe(f));
        cols.push_back("rel_err_" + column_safe(f));
    }
    cols.push_back("note");
    CsvTable tab(cols);
    tab.add_comment("config " + man.config_digest);
    tab.add_comment("analytic columns hold 2|Omega| of each formula; rel_err against numeric_two_omega");

    double worst_first_formula = 0.0;
    for (double gval : gs) {
        ModelParams pg = with_axis(c.model, "g", gval);
        // the analytic formulas take omega_c at the located gap minimum
        CrossingReport rep = find_min_splitting(pg, axis, bracket.first, bracket.second, pair);
        ModelParams pm = with_axis(pg, axis, rep.axis_value_at_min);
        std::vector<std::string> row = {fmt17(gval), fmt17(rep.axis_value_at_min), fmt17(rep.splitting)};
        std::string note;
        for (std::size_t fi = 0; fi < formulas.size(); ++fi) {
            try {
                const CouplingEstimate est = eval_formula(formulas[fi], pm);
                const double analytic = 2.0 * std::abs(est.omega_eff);
                const double rel = rep.splitting > 0.0 ? std::abs(analytic - rep.splitting) / rep.splitting : 0.0;
                row.push_back(fmt17(analytic));
                row.push_back(fmt17(rel));
                if (fi == 0) worst_first_formula = std::max(worst_first_formula, rel);
            } catch (const SingularDenominator&) {
                row.push_back("nan");
                row.push_back("nan");
                if (!note.empty()) note += ";";
                note += "singular:" + formulas[fi];
            }
        }
        row.push_back(note);
        tab.add_row(row);
    }
    const auto path = out_dir / (c.basename + "_compare.csv");
    tab.write(path);
    man.output_files.push_back(path.filename().string());
    man.extra["max_rel_err_first_formula"] = worst_first_formula;
    return {0, man};
}

inline RunResult run_dynamics(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                              RunManifest& man) {
    EvolveSpec spec = build_dynamics_spec(c, man.extra);
    TrajectoryRecord rec = evolve(spec);
    const auto tpath = out_dir / (c.basename + "_trajectory.csv");
    write_trajectory_csv(tpath, rec, man.config_digest);
    man.output_files.push_back(tpath.filename().string());
    summarize_trajectory(rec, man.extra);

    if (c.raw.contains("spectrum")) {
        const json& js = c.raw["spectrum"];
        const std::string obs = cfg::need_str(js, "spectrum", "observable");
        const auto window = cfg::need_pair(js, "spectrum", "window");
        const bool hann = js.contains("hann") && js["hann"].get<bool>();
        TrajectorySpectrum sp = spectrum_of(rec, obs, window.first, window.second, hann);
        const auto spath = out_dir / (c.basename + "_spectrum.csv");
        write_spectrum_csv(spath, sp, man.config_digest);
        man.output_files.push_back(spath.filename().string());
        spectrum_to_extra(sp, man.extra);
    }
    if (c.raw.contains("report_levels")) {
        const int nl = cfg::need_int(c.raw, "config", "report_levels");
        HamiltonianAssembler asmb(spec.params);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(asmb.bare(spec.params), Eigen::EigenvaluesOnly);
        json lv = json::array();
        for (int l = 0; l < nl && l < asmb.space()->dim(); ++l)
            lv.push_back(es.eigenvalues()(l) - es.eigenvalues()(0));
        man.extra["levels_minus_e0"] = lv;
    }
    return {0, man};
}

inline RunResult run_freq_conversion(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                                     RunManifest& man) {
    const json& j = c.raw;
    const json& jc = cfg::need(j, "config", "conversion");
    ModelParams p = c.model;
    detail::apply_locate(p, j, man.extra);
    ConversionOptions opt;
    opt.t_on = cfg::opt_num(jc, "conversion", "t_on", 200.0);
    opt.level_pair = jc.contains("level_pair") ? cfg::need_int_pair(jc, "conversion", "level_pair")
                                               : std::pair<int, int>{5, 6};
    opt.level_cap = cfg::opt_int(j, "config", "level_cap", -1);
    const double delta = cfg::need_num(jc, "conversion", "delta_omega_a");

    LossRates losses;
    if (jc.contains("losses_over_rabi")) {
        // kappa = gamma = eta = Omega / ratio, with 2*Omega the gap at resonance
        const double ratio = cfg::need_num(jc, "conversion", "losses_over_rabi");
        if (!(ratio > 0.0)) throw ValidationError("conversion.losses_over_rabi must be > 0");
        HamiltonianAssembler asmb(p);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(asmb.bare(p), Eigen::EigenvaluesOnly);
        const double two_omega = es.eigenvalues()(opt.level_pair.second) - es.eigenvalues()(opt.level_pair.first);
        losses.kappa = losses.gamma = losses.eta = 0.5 * two_omega / ratio;
    } else {
        losses = parse_losses(cfg::need(j, "config", "losses"));
    }

    const std::vector<double> t_grid = parse_time_grid(cfg::need(j, "config", "time"));
    TrajectoryRecord rec = frequency_conversion_protocol(p, losses, delta, t_grid, opt);
    const auto tpath = out_dir / (c.basename + "_trajectory.csv");
    write_trajectory_csv(tpath, rec, man.config_digest);
    man.output_files.push_back(tpath.filename().string());
    summarize_trajectory(rec, man.extra);
    man.extra["loss_rate"] = losses.kappa;
    const auto& a1 = rec.series("mean_photon_1");
    const auto& a2 = rec.series("mean_photon_2");
    const double peak1 = *std::max_element(a1.begin(), a1.end());
    man.extra["transfer_ratio"] = a2.front() > 0.0 ? peak1 / a2.front() : 0.0;
    return {0, man};
}

inline RunResult run_joint_excitation(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                                      RunManifest& man) {
    if (c.model.kind != ModelKind::TwoAtomsSingleMode)
        throw WrongModel("joint excitation needs the two-atom model");
    EvolveSpec spec = build_dynamics_spec(c, man.extra);
    TrajectoryRecord rec = evolve(spec);
    const auto tpath = out_dir / (c.basename + "_trajectory.csv");
    write_trajectory_csv(tpath, rec, man.config_digest);
    man.output_files.push_back(tpath.filename().string());
    summarize_trajectory(rec, man.extra);

    const double tol = cfg::opt_num(c.raw.value("check", json::object()), "check", "tolerance", 0.05);
    JointExcitationReport rep = joint_excitation_check(rec, tol);
    man.extra["joint_max_dev_atom1"] = rep.max_dev_atom1;
    man.extra["joint_max_dev_atom2"] = rep.max_dev_atom2;
    man.extra["joint_max_excitation"] = rep.max_excitation;
    man.extra["joint_check_passed"] = rep.passed;
    if (c.raw.contains("spectrum")) {
        const json& js = c.raw["spectrum"];
        const std::string obs = cfg::need_str(js, "spectrum", "observable");
        const auto window = cfg::need_pair(js, "spectrum", "window");
        const bool hann = js.contains("hann") && js["hann"].get<bool>();
        TrajectorySpectrum sp = spectrum_of(rec, obs, window.first, window.second, hann);
        const auto spath = out_dir / (c.basename + "_spectrum.csv");
        write_spectrum_csv(spath, sp, man.config_digest);
        man.output_files.push_back(spath.filename().string());
        spectrum_to_extra(sp, man.extra);
    }
    return {0, man};
}

}  // namespace detail

inline RunResult run_scenario(const ScenarioConfig& c, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();
    RunManifest man;
    man.config_digest = config_digest(c.raw);
    man.code_version = version_string();
    man.scenario = c.scenario;

    RunResult res;
    if (c.scenario == "spectrum") res = detail::run_spectrum(c, out_dir, man);
    else if (c.scenario == "crossing") res = detail::run_crossing(c, out_dir, man);
    else if (c.scenario == "perturb_compare") res = detail::run_compare_impl(c, out_dir, man);
    else if (c.scenario == "dynamics") res = detail::run_dynamics(c, out_dir, man);
    else if (c.scenario == "freq_conversion") res = detail::run_freq_conversion(c, out_dir, man);
    else if (c.scenario == "joint_excitation") res = detail::run_joint_excitation(c, out_dir, man);
    else throw ConfigParseError("scenario '" + c.scenario + "' is not supported");

    res.manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto mpath = out_dir / (c.basename + "_manifest.json");
    res.manifest.output_files.push_back(mpath.filename().string());
    res.manifest.write(mpath);
    return res;
}

// Reruns the scenario's named scalar across a cutoff ladder and flags
// non-convergence when the last relative change exceeds 1%.
inline RunResult run_converge(const ScenarioConfig& c, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();
    RunManifest man;
    man.config_digest = config_digest(c.raw);
    man.code_version = version_string();
    man.scenario = c.scenario + "+converge";

    const json& jc = cfg::need(c.raw, "config", "converge");
    const std::string quantity = cfg::need_str(jc, "converge", "quantity");
    const json& jl = cfg::need(jc, "converge", "ladder");
    if (!jl.is_array() || jl.size() < 2) throw ConfigParseError("converge.ladder needs >= 2 cutoff sets");

    auto apply_cutoffs = [&](const json& entry) {
        ModelParams p = c.model;
        if (!entry.is_array()) throw ConfigParseError("converge.ladder entries must be arrays of cutoffs");
        std::vector<int> cuts;
        for (const auto& v : entry) cuts.push_back(v.get<int>());
        if (p.kind == ModelKind::SingleAtomTwoModes) {
            if (cuts.size() != 3) throw ConfigParseError("two-mode ladder entries need [phonon, photon1, photon2]");
            p.cutoff_phonon = cuts[0];
            p.cutoff_photon1 = cuts[1];
            p.cutoff_photon2 = cuts[2];
        } else {
            if (cuts.size() != 2) throw ConfigParseError("ladder entries need [phonon, photon]");
            p.cutoff_phonon = cuts[0];
            p.cutoff_photon = cuts[1];
        }
        return p;
    };

    auto scalar_at = [&](const ModelParams& p) -> double {
        ScenarioConfig cc = c;
        cc.model = p;
        if (c.scenario == "crossing") {
            const json& jx = cfg::need(c.raw, "config", "crossing");
            CrossingReport rep = find_min_splitting(p, cfg::need_str(jx, "crossing", "axis"),
                                                    cfg::need_pair(jx, "crossing", "bracket").first,
                                                    cfg::need_pair(jx, "crossing", "bracket").second,
                                                    cfg::need_int_pair(jx, "crossing", "level_pair"));
            if (quantity == "splitting") return rep.splitting;
            if (quantity == "axis_value_at_min") return rep.axis_value_at_min;
            throw ValidationError("converge quantity '" + quantity + "' not a crossing scalar");
        }
        if (c.scenario == "dynamics" || c.scenario == "joint_excitation") {
            json extra;
            EvolveSpec spec = build_dynamics_spec(cc, extra);
            TrajectoryRecord rec = evolve(spec);
            json s;
            detail::summarize_trajectory(rec, s);
            if (!s.contains(quantity))
                throw ValidationError("converge quantity '" + quantity + "' not produced by this scenario");
            return s[quantity].get<double>();
        }
        if (c.scenario == "freq_conversion") {
            RunManifest tmp;
            tmp.config_digest = man.config_digest;
            tmp.code_version = man.code_version;
            const fs::path scratch = out_dir / ".converge_scratch";
            RunResult r = detail::run_freq_conversion(cc, scratch, tmp);
            if (!r.manifest.extra.contains(quantity))
                throw ValidationError("converge quantity '" + quantity + "' not produced by this scenario");
            return r.manifest.extra[quantity].get<double>();
        }
        throw ValidationError("converge is not defined for scenario '" + c.scenario + "'");
    };

    CsvTable tab({"cutoffs", "value", "rel_change"});
    tab.add_comment("config " + man.config_digest);
    tab.add_comment("quantity " + quantity);
    json evidence = json::array();
    double prev = 0.0, last_change = 0.0;
    bool first = true;
    for (const auto& entry : jl) {
        const ModelParams p = apply_cutoffs(entry);
        const double val = scalar_at(p);
        std::string cut_label;
        for (const auto& v : entry) {
            if (!cut_label.empty()) cut_label += "x";
            cut_label += std::to_string(v.get<int>());
        }
        const double change = first ? 0.0 : std::abs(val - prev) / std::max(std::abs(prev), 1e-300);
        tab.add_row(std::vector<std::string>{cut_label, fmt17(val), first ? "" : fmt17(change)});
        json ev;
        ev["cutoffs"] = cut_label;
        ev["value"] = val;
        if (!first) ev["rel_change"] = change;
        evidence.push_back(ev);
        if (!first) last_change = change;
        prev = val;
        first = false;
    }
    const bool converged = last_change <= 0.01;

    const auto cpath = out_dir / (c.basename + "_converge.csv");
    tab.write(cpath);
    man.output_files.push_back(cpath.filename().string());
    man.convergence = json::object();
    man.convergence["quantity"] = quantity;
    man.convergence["ladder"] = evidence;
    man.convergence["final_rel_change"] = last_change;
    man.convergence["converged"] = converged;
    man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto mpath = out_dir / (c.basename + "_converge_manifest.json");
    man.output_files.push_back(mpath.filename().string());
    man.write(mpath);
    return {converged ? 0 : 1, man};
}

inline RunResult run_compare_rates(const ScenarioConfig& c, const std::filesystem::path& out_dir) {
    if (c.scenario != "perturb_compare")
        throw ValidationError("compare-rates needs a perturb_compare scenario config");
    return run_scenario(c, out_dir);
}

}  // namespace vacmech

#endif
