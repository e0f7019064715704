#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eitcorr/bloch.hpp"
#include "eitcorr/errors.hpp"
#include "eitcorr/moments.hpp"
#include "eitcorr/oracle.hpp"
#include "eitcorr/params.hpp"
#include "eitcorr/spectra.hpp"
#include "eitcorr/units.hpp"

namespace eitcorr {

// Parameter sweeps over the two-photon detuning, emitting figure-style data
// tables. All user-facing quantities are in ordinary
// frequency (MHz; gamma_d in kHz); Rabi frequencies are given in units of
// Gamma. Undefined observables (dark state, vanishing spectra) are recorded
// as NaN and exported as empty/null cells so curves keep uniform grids.

/// SystemParams from boundary units.
inline SystemParams make_system_params(double gamma_mhz, double gamma_d_khz,
                                       double gamma_bar_mhz, double rabi1_in_gamma,
                                       double rabi2_in_gamma, double delta1_mhz,
                                       double delta_mhz, double kappa1, double kappa2,
                                       double phase_noise_correlation) {
    SystemParams p;
    p.gamma = mhz_to_rad_us(gamma_mhz);
    p.gamma_d = khz_to_rad_us(gamma_d_khz);
    p.gamma_bar = mhz_to_rad_us(gamma_bar_mhz);
    p.rabi1 = rabi1_in_gamma * p.gamma;
    p.rabi2 = rabi2_in_gamma * p.gamma;
    p.delta1 = mhz_to_rad_us(delta1_mhz);
    p.delta2 = mhz_to_rad_us(delta1_mhz + delta_mhz);
    p.kappa1 = kappa1;
    p.kappa2 = kappa2;
    p.phase_noise_correlation = phase_noise_correlation;
    p.validate();
    return p;
}

struct DeltaGrid {
    double start_mhz = -10.0;
    double stop_mhz = 10.0;
    int count = 401;

    void validate() const {
        if (count < 2) throw invalid_parameter_error("delta grid: count must be >= 2");
        if (!(stop_mhz > start_mhz))
            throw invalid_parameter_error("delta grid: stop must exceed start");
        if (!std::isfinite(start_mhz) || !std::isfinite(stop_mhz))
            throw invalid_parameter_error("delta grid: non-finite bound");
    }
    double at(int i) const {
        return start_mhz + (stop_mhz - start_mhz) * double(i) / double(count - 1);
    }
};

struct ScanConfig {
    // fixed baseline (MHz-facing); Rabi frequencies in units of Gamma
    double gamma_mhz = 6.0;
    double gamma_d_khz = 150.0;
    double gamma_bar_mhz = 1.0;
    double rabi1_gamma = 0.30;
    double rabi2_gamma = 0.34;
    double kappa1 = 0.1;
    double kappa2 = 0.1;
    double phase_noise_correlation = 1.0;

    DeltaGrid delta_grid;
    std::vector<double> delta1_mhz = {0.2};
    std::vector<double> analysis_mhz = {2.0};
    std::vector<double> power_scales = {1.0};  ///< multiplies Omega^2

    bool oracle_enabled = false;
    int oracle_n_traj = 200;
    double oracle_duration_us = 2000.0;
    double oracle_dt_factor = 0.5;
    int oracle_sample_stride = 8;
    std::uint64_t base_seed = 20240901;

    std::string out_path;
    std::string format = "csv";  ///< csv | json

    void validate() const {
        delta_grid.validate();
        auto monotonic = [](const std::vector<double>& v) {
            for (std::size_t i = 1; i < v.size(); ++i)
                if (!(v[i] > v[i - 1])) return false;
            return true;
        };
        if (delta1_mhz.empty() || analysis_mhz.empty() || power_scales.empty())
            throw invalid_parameter_error("scan config: empty grid list");
        if (!monotonic(delta1_mhz) || !monotonic(analysis_mhz) || !monotonic(power_scales))
            throw invalid_parameter_error("scan config: grid lists must be strictly increasing");
        for (double w : analysis_mhz)
            if (!(w > 0.0)) throw invalid_parameter_error("scan config: analysis freq <= 0");
        for (double s : power_scales)
            if (!(s > 0.0)) throw invalid_parameter_error("scan config: power scale <= 0");
        if (format != "csv" && format != "json")
            throw invalid_parameter_error("scan config: format must be csv or json");
        if (oracle_enabled && oracle_n_traj < 2)
            throw invalid_parameter_error("scan config: oracle needs >= 2 trajectories");
    }

    SystemParams params_at(double power_scale, double delta1, double delta) const {
        const double s = std::sqrt(power_scale);
        return make_system_params(gamma_mhz, gamma_d_khz, gamma_bar_mhz, rabi1_gamma * s,
                                  rabi2_gamma * s, delta1, delta, kappa1, kappa2,
                                  phase_noise_correlation);
    }
};

/// One row of a sweep. NaN marks an undefined observable.
struct ScanRecord {
    double delta_mhz = 0.0;
    double delta1_mhz = 0.0;
    double analysis_mhz = 0.0;
    double power_scale = 1.0;
    double t1 = nan(), t2 = nan();
    double g2 = nan();
    double c_analytic = nan();  ///< lowest-order linear response
    double c_full = nan();      ///< exact second-moment engine
    double s11 = nan(), s22 = nan(), s12 = nan();  ///< lowest-order spectra
    double pi_im = nan(), pi_re = nan(), pi_ri = nan(), pi_ir = nan();
    double nu_im = nan(), nu_re = nan(), nu_ri = nan(), nu_ir = nan();
    double c1 = nan();
    double c_oracle = nan(), c_oracle_se = nan();

    static constexpr double nan() { return std::numeric_limits<double>::quiet_NaN(); }
};

namespace detail {
struct Column {
    const char* name;
    double ScanRecord::* member;
};

inline const std::vector<Column>& scan_columns() {
    static const std::vector<Column> cols = {
        {"delta_mhz", &ScanRecord::delta_mhz},
        {"delta1_mhz", &ScanRecord::delta1_mhz},
        {"analysis_mhz", &ScanRecord::analysis_mhz},
        {"power_scale", &ScanRecord::power_scale},
        {"t1", &ScanRecord::t1},
        {"t2", &ScanRecord::t2},
        {"g2", &ScanRecord::g2},
        {"c_analytic", &ScanRecord::c_analytic},
        {"c_full", &ScanRecord::c_full},
        {"s11", &ScanRecord::s11},
        {"s22", &ScanRecord::s22},
        {"s12", &ScanRecord::s12},
        {"pi_im", &ScanRecord::pi_im},
        {"pi_re", &ScanRecord::pi_re},
        {"pi_ri", &ScanRecord::pi_ri},
        {"pi_ir", &ScanRecord::pi_ir},
        {"nu_im", &ScanRecord::nu_im},
        {"nu_re", &ScanRecord::nu_re},
        {"nu_ri", &ScanRecord::nu_ri},
        {"nu_ir", &ScanRecord::nu_ir},
        {"c1", &ScanRecord::c1},
        {"c_oracle", &ScanRecord::c_oracle},
        {"c_oracle_se", &ScanRecord::c_oracle_se},
    };
    return cols;
}
}  // namespace detail

/// Evaluate the sweep. Record order is the nested grid order
/// (power, delta1, analysis, delta), so the delta column of each sub-curve is
/// exactly the requested grid. Per-point evaluation errors become NaN markers
/// rather than aborting the scan; configuration errors abort.
inline std::vector<ScanRecord> run_scan(const ScanConfig& cfg) {
    cfg.validate();
    const int nd = cfg.delta_grid.count;
    std::vector<ScanRecord> records;
    records.reserve(cfg.power_scales.size() * cfg.delta1_mhz.size() * cfg.analysis_mhz.size() *
                    static_cast<std::size_t>(nd));

    std::size_t point_index = 0;
    for (double power : cfg.power_scales) {
        for (double d1 : cfg.delta1_mhz) {
            // per-delta state shared across analysis frequencies
            struct PointState {
                bool ok = false;
                SystemParams params;
                BlochSystem sys;
                SteadyState ss;
                std::optional<MomentEngine> engine;
            };
            std::vector<PointState> pts(nd);
            for (int i = 0; i < nd; ++i) {
                PointState& st = pts[i];
                try {
                    st.params = cfg.params_at(power, d1, cfg.delta_grid.at(i));
                    st.sys = build_bloch_system(st.params);
                    st.ss = steady_state(st.sys);
                    st.engine.emplace(st.sys, st.params);
                    st.ok = true;
                } catch (const error&) {
                    st.ok = false;
                }
            }
            for (double w_mhz : cfg.analysis_mhz) {
                const double omega = mhz_to_rad_us(w_mhz);
                for (int i = 0; i < nd; ++i) {
                    ScanRecord rec;
                    rec.delta_mhz = cfg.delta_grid.at(i);
                    rec.delta1_mhz = d1;
                    rec.analysis_mhz = w_mhz;
                    rec.power_scale = power;
                    PointState& st = pts[i];
                    if (st.ok) {
                        const DcTransmission dc = dc_transmission(st.ss, st.params);
                        rec.t1 = dc.t1;
                        rec.t2 = dc.t2;
                        try {
                            rec.g2 = g2_zero(st.ss);
                        } catch (const undefined_correlation_error&) {
                        }
                        try {
                            const SpectralDecomposition dec =
                                noise_spectra(st.sys, st.ss, st.params, omega);
                            rec.s11 = dec.s11;
                            rec.s22 = dec.s22;
                            rec.s12 = dec.s12;
                            rec.pi_im = dec.pi_im;
                            rec.pi_re = dec.pi_re;
                            rec.pi_ri = dec.pi_ri;
                            rec.pi_ir = dec.pi_ir;
                            rec.nu_im = dec.nu_im;
                            rec.nu_re = dec.nu_re;
                            rec.nu_ri = dec.nu_ri;
                            rec.nu_ir = dec.nu_ir;
                            rec.c1 = dec.extra_c1;
                            if (dec.c_defined) rec.c_analytic = dec.c;
                        } catch (const error&) {
                        }
                        try {
                            const auto full = st.engine->spectra(omega, st.params.kappa1,
                                                                 st.params.kappa2);
                            if (full.c_defined) rec.c_full = full.c;
                        } catch (const error&) {
                        }
                        if (cfg.oracle_enabled) {
                            try {
                                EnsembleConfig ens;
                                ens.n_traj = cfg.oracle_n_traj;
                                ens.duration = cfg.oracle_duration_us;
                                ens.dt_factor = cfg.oracle_dt_factor;
                                ens.sample_stride = cfg.oracle_sample_stride;
                                ens.base_seed = cfg.base_seed + 1000003ULL * point_index;
                                EstimatorConfig est;
                                est.freqs = {omega};
                                const OracleResult res = oracle_run(st.params, ens, est);
                                if (res.spectra.c_defined[0]) {
                                    rec.c_oracle = res.spectra.c[0];
                                    rec.c_oracle_se = res.spectra.c_se[0];
                                }
                            } catch (const error&) {
                            }
                        }
                    }
                    records.push_back(rec);
                    ++point_index;
                }
            }
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Export / import. Values are written with 15 significant digits so a
// round-trip is lossless well beyond the documented 12-digit contract;
// undefined cells are empty (CSV) or null (JSON). Formatting is fixed, so
// identical configs give byte-identical files.
// ---------------------------------------------------------------------------

inline std::string format_value(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

inline void export_records(const std::vector<ScanRecord>& records, const std::string& path,
                           const std::string& format) {
    const auto& cols = detail::scan_columns();
    std::ofstream os(path);
    if (!os) throw io_error("export_records: cannot open " + path);
    if (format == "csv") {
        for (std::size_t c = 0; c < cols.size(); ++c)
            os << (c ? "," : "") << cols[c].name;
        os << "\n";
        for (const auto& r : records) {
            for (std::size_t c = 0; c < cols.size(); ++c)
                os << (c ? "," : "") << format_value(r.*(cols[c].member));
            os << "\n";
        }
    } else if (format == "json") {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : records) {
            nlohmann::ordered_json obj;
            for (const auto& col : cols) {
                const double v = r.*(col.member);
                if (std::isnan(v))
                    obj[col.name] = nullptr;
                else
                    obj[col.name] = nlohmann::ordered_json::parse(format_value(v));
            }
            arr.push_back(std::move(obj));
        }
        os << arr.dump(1) << "\n";
    } else {
        throw invalid_parameter_error("export_records: format must be csv or json");
    }
    if (!os) throw io_error("export_records: write failed for " + path);
}

inline std::vector<ScanRecord> import_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("import_records: cannot open " + path);
    const auto& cols = detail::scan_columns();

    // Peek: JSON exports start with '['.
    char first = 0;
    is >> first;
    is.seekg(0);
    std::vector<ScanRecord> out;
    if (first == '[') {
        nlohmann::json arr;
        is >> arr;
        for (const auto& obj : arr) {
            ScanRecord r;
            for (const auto& col : cols) {
                if (obj.contains(col.name) && !obj[col.name].is_null())
                    r.*(col.member) = obj[col.name].get<double>();
            }
            out.push_back(r);
        }
        return out;
    }

    std::string line;
    if (!std::getline(is, line)) throw io_error("import_records: empty file " + path);
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    std::vector<double ScanRecord::*> members(header.size(), nullptr);
    for (std::size_t h = 0; h < header.size(); ++h)
        for (const auto& col : cols)
            if (header[h] == col.name) members[h] = col.member;

    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ScanRecord r;
        std::stringstream ls(line);
        std::string cell;
        std::size_t h = 0;
        while (h < header.size() && std::getline(ls, cell, ',')) {
            if (members[h] && !cell.empty()) r.*(members[h]) = std::stod(cell);
            ++h;
        }
        out.push_back(r);
    }
    return out;
}

/// Flat key-value config file: one `key = value` per line, `#` comments.
/// Returned in file order; the CLI applies them before flag overrides.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("parse_config_file: cannot open " + path);
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw invalid_parameter_error("config line " + std::to_string(lineno) +
                                          ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw invalid_parameter_error("config line " + std::to_string(lineno) +
                                          ": empty key or value");
        out.emplace_back(key, value);
    }
    return out;
}

}  // namespace eitcorr
