// Command-line interface: parameter sweeps, single-point decompositions,
// Monte-Carlo validation runs and linewidth fits. All frequencies on this
// surface are ordinary MHz (gamma_d in kHz); Rabi frequencies in units of
// Gamma. Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//
// A flat `key = value` config file (keys = long flag names, '-' or '_'
// interchangeable, '#' comments) can seed any subcommand via --config;
// explicit flags override the file.

#include <cstdio>
#include <exception>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eitcorr/bloch.hpp"
#include "eitcorr/errors.hpp"
#include "eitcorr/fit.hpp"
#include "eitcorr/moments.hpp"
#include "eitcorr/oracle.hpp"
#include "eitcorr/scan.hpp"
#include "eitcorr/spectra.hpp"
#include "eitcorr/units.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
    double gamma_mhz = 6.0;
    double gamma_d_khz = 150.0;
    double gamma_bar_mhz = 1.0;
    double rabi1_gamma = 0.30;
    double rabi2_gamma = 0.34;
    double kappa = 0.1;
    double phase_corr = 1.0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--gamma-mhz", o.gamma_mhz, "Excited-state decay Gamma/2pi (MHz)");
    cmd->add_option("--gamma-d-khz", o.gamma_d_khz, "Ground decoherence gamma_d/2pi (kHz)");
    cmd->add_option("--gamma-bar-mhz", o.gamma_bar_mhz,
                    "Laser phase-diffusion coefficient gamma_bar/2pi (MHz)");
    cmd->add_option("--rabi1-gamma", o.rabi1_gamma, "Omega_1 in units of Gamma");
    cmd->add_option("--rabi2-gamma", o.rabi2_gamma, "Omega_2 in units of Gamma");
    cmd->add_option("--kappa", o.kappa, "Thin-sample coupling (both beams)");
    cmd->add_option("--phase-corr", o.phase_corr, "Phase-noise cross-correlation in [0,1]");
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::string cur;
    for (char ch : s + ",") {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (out.empty()) throw eitcorr::invalid_parameter_error("empty list argument");
    return out;
}

eitcorr::DeltaGrid parse_range(const std::string& s) {
    eitcorr::DeltaGrid g;
    const auto c1 = s.find(':');
    const auto c2 = s.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw eitcorr::invalid_parameter_error("--delta-range-mhz expects start:stop:count");
    try {
        g.start_mhz = std::stod(s.substr(0, c1));
        g.stop_mhz = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
        g.count = std::stoi(s.substr(c2 + 1));
    } catch (const std::exception&) {
        throw eitcorr::invalid_parameter_error("--delta-range-mhz expects start:stop:count");
    }
    return g;
}

/// Expand `--config <file>` into flag tokens placed right after the
/// subcommand name, so explicit command-line flags (parsed last) win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    if (path.empty()) return args;
    if (args.empty())
        throw eitcorr::invalid_parameter_error("--config requires a subcommand");
    std::vector<std::string> flags;
    for (const auto& [key, value] : eitcorr::parse_config_file(path)) {
        std::string flag = "--" + key;
        for (auto& ch : flag)
            if (ch == '_') ch = '-';
        flags.push_back(flag + "=" + value);
    }
    std::vector<std::string> out;
    out.push_back(args[0]);
    out.insert(out.end(), flags.begin(), flags.end());
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

void print_point(const eitcorr::SpectralDecomposition& dec,
                 const eitcorr::MomentEngine::FullSpectra& full,
                 const eitcorr::DcTransmission& dc, double g2, bool g2_defined) {
    auto row = [](const char* name, double v, bool defined = true) {
        if (defined)
            std::printf("%-12s % .12e\n", name, v);
        else
            std::printf("%-12s undefined\n", name);
    };
    row("t1", dc.t1);
    row("t2", dc.t2);
    row("g2", g2, g2_defined);
    row("s11", dec.s11);
    row("s22", dec.s22);
    row("s12", dec.s12);
    row("c_analytic", dec.c, dec.c_defined);
    row("c_full", full.c, full.c_defined);
    row("pi_im", dec.pi_im);
    row("pi_re", dec.pi_re);
    row("pi_ri", dec.pi_ri);
    row("pi_ir", dec.pi_ir);
    row("nu_im", dec.nu_im);
    row("nu_re", dec.nu_re);
    row("nu_ri", dec.nu_ri);
    row("nu_ir", dec.nu_ir);
    row("c1", dec.extra_c1);
    row("alpha_c", dec.alpha_c);
    row("alpha_i2", dec.alpha_i2);
    row("beta_c", dec.beta_c);
    row("beta_i1", dec.beta_i1);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EIT intensity-correlation spectroscopy calculator"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    // ---- scan ----
    auto* scan = app.add_subcommand("scan", "Two-photon-detuning sweeps (figure-style tables)");
    CommonOptions scommon;
    add_common(scan, scommon);
    std::string range = "-10:10:401";
    std::string delta1_list = "0.2";
    std::string analysis_list = "2";
    std::string power_list = "1";
    bool oracle_on = false;
    int oracle_traj = 200;
    double oracle_duration = 2000.0;
    double oracle_dt_factor = 0.5;
    std::uint64_t seed = 20240901;
    std::string out_path = "scan.csv";
    std::string format = "csv";
    scan->add_option("--delta-range-mhz", range, "delta grid start:stop:count (MHz)");
    scan->add_option("--delta1-mhz", delta1_list, "comma list of Delta_1 values (MHz)");
    scan->add_option("--analysis-mhz", analysis_list,
                     "comma list of analysis frequencies (MHz)");
    scan->add_option("--power-scale", power_list, "comma list of Omega^2 scale factors");
    scan->add_flag("--oracle", oracle_on, "run the Monte-Carlo oracle at every grid point");
    scan->add_option("--traj", oracle_traj, "oracle trajectories per point");
    scan->add_option("--duration-us", oracle_duration, "oracle trajectory length (us)");
    scan->add_option("--dt-factor", oracle_dt_factor,
                     "oracle dt as fraction of the stability bound");
    scan->add_option("--seed", seed, "base RNG seed");
    scan->add_option("--out", out_path, "output file");
    scan->add_option("--format", format, "csv | json");

    // ---- point ----
    auto* point = app.add_subcommand("point", "Full decomposition at one grid point");
    CommonOptions pcommon;
    add_common(point, pcommon);
    double p_delta1 = 0.2, p_delta = 0.0, p_analysis = 2.0;
    point->add_option("--delta1-mhz", p_delta1, "Delta_1 (MHz)");
    point->add_option("--delta-mhz", p_delta, "two-photon detuning delta (MHz)");
    point->add_option("--analysis-mhz", p_analysis, "analysis frequency (MHz)");

    // ---- oracle ----
    auto* orac = app.add_subcommand("oracle", "Monte-Carlo validation run at one point");
    CommonOptions ocommon;
    add_common(orac, ocommon);
    double o_delta1 = 0.2, o_delta = 0.0;
    std::string o_analysis = "2";
    int o_traj = 200;
    double o_duration = 2000.0, o_dt_factor = 0.5;
    std::uint64_t o_seed = 20240901;
    std::string dump_prefix;
    int dump_count = 0;
    orac->add_option("--delta1-mhz", o_delta1, "Delta_1 (MHz)");
    orac->add_option("--delta-mhz", o_delta, "two-photon detuning delta (MHz)");
    orac->add_option("--analysis-mhz", o_analysis,
                     "comma list of analysis frequencies (MHz)");
    orac->add_option("--traj", o_traj, "trajectory count");
    orac->add_option("--duration-us", o_duration, "trajectory length (us)");
    orac->add_option("--dt-factor", o_dt_factor, "dt as fraction of the stability bound");
    orac->add_option("--seed", o_seed, "base RNG seed");
    orac->add_option("--dump-traj", dump_prefix, "write <prefix><i>.csv raw (t, I1, I2) dumps");
    orac->add_option("--dump-count", dump_count, "how many trajectories to dump");

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "Linewidth extraction on an exported table");
    std::string fit_in, fit_column = "c_full", fit_kind = "peak";
    double fit_min = -1e30, fit_max = 1e30;
    double f_delta1 = -1e30, f_analysis = -1e30, f_power = -1e30;
    fit->add_option("--in", fit_in, "exported csv/json table")->required();
    fit->add_option("--column", fit_column, "value column to fit");
    fit->add_option("--kind", fit_kind, "peak | dip");
    fit->add_option("--delta-min-mhz", fit_min, "restrict fit window");
    fit->add_option("--delta-max-mhz", fit_max, "restrict fit window");
    fit->add_option("--delta1-mhz", f_delta1, "select sub-curve by Delta_1");
    fit->add_option("--analysis-mhz", f_analysis, "select sub-curve by analysis frequency");
    fit->add_option("--power-scale", f_power, "select sub-curve by power scale");

    try {
        std::vector<std::string> args;
        try {
            args = expand_config(argc, argv);
        } catch (const eitcorr::error& e) {
            std::cerr << "configuration error: " << e.what() << "\n";
            return kExitConfig;
        }
        try {
            // CLI11 parses tokens right-to-left
            std::vector<std::string> reversed(args.rbegin(), args.rend());
            app.parse(reversed);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? kExitOk : kExitConfig;
        }

        using namespace eitcorr;
        if (scan->parsed()) {
            ScanConfig cfg;
            cfg.gamma_mhz = scommon.gamma_mhz;
            cfg.gamma_d_khz = scommon.gamma_d_khz;
            cfg.gamma_bar_mhz = scommon.gamma_bar_mhz;
            cfg.rabi1_gamma = scommon.rabi1_gamma;
            cfg.rabi2_gamma = scommon.rabi2_gamma;
            cfg.kappa1 = cfg.kappa2 = scommon.kappa;
            cfg.phase_noise_correlation = scommon.phase_corr;
            cfg.delta_grid = parse_range(range);
            cfg.delta1_mhz = parse_list(delta1_list);
            cfg.analysis_mhz = parse_list(analysis_list);
            cfg.power_scales = parse_list(power_list);
            cfg.oracle_enabled = oracle_on;
            cfg.oracle_n_traj = oracle_traj;
            cfg.oracle_duration_us = oracle_duration;
            cfg.oracle_dt_factor = oracle_dt_factor;
            cfg.base_seed = seed;
            cfg.out_path = out_path;
            cfg.format = format;
            cfg.validate();
            const auto records = run_scan(cfg);
            export_records(records, cfg.out_path, cfg.format);
            std::printf("wrote %zu records to %s\n", records.size(), cfg.out_path.c_str());
            return kExitOk;
        }
        if (point->parsed()) {
            const SystemParams params = make_system_params(
                pcommon.gamma_mhz, pcommon.gamma_d_khz, pcommon.gamma_bar_mhz,
                pcommon.rabi1_gamma, pcommon.rabi2_gamma, p_delta1, p_delta, pcommon.kappa,
                pcommon.kappa, pcommon.phase_corr);
            const BlochSystem sys = build_bloch_system(params);
            const SteadyState ss = steady_state(sys);
            const double omega = mhz_to_rad_us(p_analysis);
            const SpectralDecomposition dec = noise_spectra(sys, ss, params, omega);
            const auto full =
                MomentEngine(sys, params).spectra(omega, params.kappa1, params.kappa2);
            const DcTransmission dc = dc_transmission(ss, params);
            double g2 = 0.0;
            bool g2_defined = true;
            try {
                g2 = g2_zero(ss);
            } catch (const undefined_correlation_error&) {
                g2_defined = false;
            }
            print_point(dec, full, dc, g2, g2_defined);
            return kExitOk;
        }
        if (orac->parsed()) {
            const SystemParams params = make_system_params(
                ocommon.gamma_mhz, ocommon.gamma_d_khz, ocommon.gamma_bar_mhz,
                ocommon.rabi1_gamma, ocommon.rabi2_gamma, o_delta1, o_delta, ocommon.kappa,
                ocommon.kappa, ocommon.phase_corr);
            EnsembleConfig ens;
            ens.n_traj = o_traj;
            ens.duration = o_duration;
            ens.dt_factor = o_dt_factor;
            ens.base_seed = o_seed;
            EstimatorConfig est;
            for (double f : parse_list(o_analysis)) est.freqs.push_back(mhz_to_rad_us(f));
            const OracleResult res = oracle_run(params, ens, est);

            const BlochSystem sys = build_bloch_system(params);
            const SteadyState ss = steady_state(sys);
            const MomentEngine engine(sys, params);
            std::printf("# oracle: %d trajectories x %.0f us, dt = %.6g us\n", res.n_traj,
                        res.duration, res.dt);
            std::printf("%-14s %-14s %-14s %-14s %-14s\n", "analysis_mhz", "c_oracle", "se",
                        "c_analytic", "c_full");
            for (std::size_t i = 0; i < est.freqs.size(); ++i) {
                const double w = est.freqs[i];
                const SpectralDecomposition dec = noise_spectra(sys, ss, params, w);
                const auto full = engine.spectra(w, params.kappa1, params.kappa2);
                std::printf("%-14.6g %-14.6g %-14.6g %-14.6g %-14.6g\n", rad_us_to_mhz(w),
                            res.spectra.c[i], res.spectra.c_se[i],
                            dec.c_defined ? dec.c : std::numeric_limits<double>::quiet_NaN(),
                            full.c_defined ? full.c : std::numeric_limits<double>::quiet_NaN());
            }
            double g2a = std::numeric_limits<double>::quiet_NaN();
            try {
                g2a = g2_zero(ss);
            } catch (const undefined_correlation_error&) {
            }
            std::printf("g2_oracle = %.6g +- %.6g   g2_heuristic = %.6g\n", res.g2, res.g2_se,
                        g2a);
            if (!dump_prefix.empty() && dump_count > 0) {
                const double transient = default_transient(sys);
                for (int i = 0; i < dump_count; ++i) {
                    const Trajectory traj = simulate_trajectory(params, res.dt, o_duration,
                                                                o_seed + i, transient, 8);
                    dump_trajectory_csv(traj, dump_prefix + std::to_string(i) + ".csv");
                }
            }
            return kExitOk;
        }
        if (fit->parsed()) {
            const auto records = import_records(fit_in);
            double ScanRecord::* member = nullptr;
            for (const auto& col : detail::scan_columns())
                if (fit_column == col.name) member = col.member;
            if (!member) throw invalid_parameter_error("fit: unknown column " + fit_column);
            if (fit_kind != "peak" && fit_kind != "dip")
                throw invalid_parameter_error("fit: --kind must be peak or dip");
            std::vector<std::pair<double, double>> curve;
            for (const auto& r : records) {
                if (f_delta1 > -1e29 && std::abs(r.delta1_mhz - f_delta1) > 1e-9) continue;
                if (f_analysis > -1e29 && std::abs(r.analysis_mhz - f_analysis) > 1e-9)
                    continue;
                if (f_power > -1e29 && std::abs(r.power_scale - f_power) > 1e-9) continue;
                const double v = r.*member;
                if (r.delta_mhz < fit_min || r.delta_mhz > fit_max || std::isnan(v)) continue;
                curve.emplace_back(r.delta_mhz, v);
            }
            const ExtremumKind kind =
                fit_kind == "dip" ? ExtremumKind::kDip : ExtremumKind::kPeak;
            const double w = fit_linewidth(curve, kind);
            std::printf("fwhm_mhz = %.6g\n", w);
            return kExitOk;
        }
        return kExitConfig;
    } catch (const eitcorr::invalid_parameter_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const eitcorr::io_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const eitcorr::error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
