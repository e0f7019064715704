#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "eitcorr/bloch.hpp"
#include "eitcorr/errors.hpp"
#include "eitcorr/params.hpp"
#include "eitcorr/units.hpp"

namespace eitcorr {

// Independent stochastic oracle: Euler-Maruyama integration of the Bloch
// equations with the laser phase diffusion realized as common detuning noise
// (variance 2 gamma_bar dt per step), intensity time series, and Welch-style
// cross-spectral estimation in the same S_ij convention as the analytic
// paths. Trajectories are seeded deterministically (base_seed + index) and
// reduced in index order, so results are reproducible and thread-count
// independent.

/// Largest Euler step honoring the stability precondition
/// dt <= 2 pi / (50 max(Gamma, |Delta1|, |Delta2|, Omega1, Omega2, w_max)).
inline double stability_dt_bound(const SystemParams& p, double omega_max = 0.0) {
    const double m = std::max({p.gamma, std::abs(p.delta1), std::abs(p.delta2), p.rabi1,
                               p.rabi2, omega_max});
    return two_pi / (50.0 * m);
}

/// Minimum trajectory length for meaningful statistics.
inline double min_duration(const SystemParams& p) {
    return p.gamma_d > 0.0 ? 100.0 / p.gamma_d : 1e4 / p.gamma;
}

/// Transient to discard: several lifetimes of the slowest relaxation mode.
inline double default_transient(const BlochSystem& sys) {
    Eigen::ComplexEigenSolver<Matrix8cd> es(sys.m, false);
    double slowest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k)
        slowest = std::min(slowest, std::abs(es.eigenvalues()(k).real()));
    if (!(slowest > 0.0) || !std::isfinite(slowest)) return 50.0;
    return 12.0 / slowest;
}

/// One sampled intensity trajectory (after transient discard).
struct Trajectory {
    std::uint64_t seed = 0;
    double sample_dt = 0.0;  ///< dt * stride (us)
    std::vector<double> i1;
    std::vector<double> i2;
};

inline Trajectory simulate_trajectory(const SystemParams& params, double dt, double duration,
                                      std::uint64_t seed, double transient,
                                      int sample_stride = 1) {
    params.validate();
    if (!(dt > 0.0) || !(duration > 0.0) || sample_stride < 1 || !(transient >= 0.0))
        throw invalid_parameter_error("simulate_trajectory: bad dt/duration/stride/transient");
    if (dt > stability_dt_bound(params) * (1.0 + 1e-12))
        throw invalid_parameter_error("simulate_trajectory: dt exceeds the stability bound");
    if (duration < min_duration(params))
        throw invalid_parameter_error("simulate_trajectory: duration too short for statistics");
    if (transient >= duration)
        throw invalid_parameter_error("simulate_trajectory: transient exceeds duration");

    const BlochSystem sys = build_bloch_system(params);
    const SteadyState ss = steady_state(sys);

    // compact row form of M for the inner loop
    struct Entry {
        int col;
        complexd val;
    };
    std::array<std::vector<Entry>, 8> rows;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            if (sys.m(r, c) != complexd(0.0)) rows[r].push_back({c, sys.m(r, c)});

    const double r = params.phase_noise_correlation;
    const bool common_only = (r == 1.0);
    const Vector8cd d1 = detuning_shift_diag_1();
    const Vector8cd d2 = detuning_shift_diag_2();
    const Vector8cd dcm = d1 + d2;
    const double sig = std::sqrt(2.0 * params.gamma_bar * dt);
    const double sr = std::sqrt(r), si = std::sqrt(1.0 - r);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const long n_steps = static_cast<long>(duration / dt);
    const long transient_steps = static_cast<long>(transient / dt);
    const double k1 = params.kappa1, k2 = params.kappa2;

    Trajectory traj;
    traj.seed = seed;
    traj.sample_dt = dt * sample_stride;
    const long n_keep = (n_steps - transient_steps + sample_stride - 1) / sample_stride;
    traj.i1.reserve(static_cast<std::size_t>(std::max(0L, n_keep)));
    traj.i2.reserve(static_cast<std::size_t>(std::max(0L, n_keep)));

    std::array<complexd, 8> x;
    for (int k = 0; k < 8; ++k) x[k] = ss.x_ss(k);
    std::array<complexd, 8> xn;

    for (long step = 0; step < n_steps; ++step) {
        double dphi1, dphi2;
        if (common_only) {
            dphi1 = dphi2 = sig * normal(rng);
        } else {
            const double xc = normal(rng), x1 = normal(rng), x2 = normal(rng);
            dphi1 = sig * (sr * xc + si * x1);
            dphi2 = sig * (sr * xc + si * x2);
        }
        for (int k = 0; k < 8; ++k) {
            complexd acc = sys.x0(k);
            for (const Entry& e : rows[k]) acc += e.val * x[e.col];
            complexd noise = common_only ? dphi1 * dcm(k) * x[k]
                                         : dphi1 * d1(k) * x[k] + dphi2 * d2(k) * x[k];
            xn[k] = x[k] + dt * acc + noise;
        }
        x = xn;

        if ((step & 63) == 0) {
            for (int k = 0; k < 8; ++k)
                if (std::abs(x[k]) > 10.0)
                    throw numerical_instability_error(
                        "simulate_trajectory: state diverged; reduce dt");
        }
        if (step >= transient_steps && (step - transient_steps) % sample_stride == 0) {
            const complexd p1 = x[kRho13];
            const complexd p2 = x[kRho23];
            traj.i1.push_back(1.0 - 2.0 * k1 * p1.imag() + k1 * k1 * std::norm(p1));
            traj.i2.push_back(1.0 - 2.0 * k2 * p2.imag() + k2 * k2 * std::norm(p2));
        }
    }
    // final divergence check so short runs are covered too
    for (int k = 0; k < 8; ++k)
        if (std::abs(x[k]) > 10.0)
            throw numerical_instability_error("simulate_trajectory: state diverged; reduce dt");
    return traj;
}

struct EnsembleConfig {
    double dt = 0.0;           ///< 0: use stability_dt_bound(params, omega_max) * dt_factor
    double dt_factor = 0.5;    ///< safety factor on the stability bound
    double omega_max = 0.0;    ///< largest analysis frequency (enters the dt bound)
    double duration = 500.0;   ///< per-trajectory length (us)
    double transient = -1.0;   ///< <0: default_transient(sys)
    int n_traj = 100;
    std::uint64_t base_seed = 20240901;
    int sample_stride = 8;
    int n_threads = 0;  ///< 0: hardware concurrency
};

struct TrajectoryEnsemble {
    double dt = 0.0;
    double duration = 0.0;
    double transient = 0.0;
    int n_traj = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<Trajectory> series;
};

namespace detail {

template <typename Fn>
inline void run_indexed_parallel(int n, int n_threads, Fn&& fn) {
    if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min(n_threads, n));
    if (n_threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Simulate an ensemble with deterministic per-trajectory seeds
/// (seed = base_seed + index); trajectories may run in parallel, results are
/// stored in index order.
inline TrajectoryEnsemble simulate_ensemble(const SystemParams& params,
                                            const EnsembleConfig& cfg) {
    params.validate();
    if (cfg.n_traj < 1) throw invalid_parameter_error("simulate_ensemble: n_traj < 1");
    const BlochSystem sys = build_bloch_system(params);

    TrajectoryEnsemble ens;
    ens.dt = cfg.dt > 0.0 ? cfg.dt
                          : stability_dt_bound(params, cfg.omega_max) * cfg.dt_factor;
    ens.duration = cfg.duration;
    ens.transient = cfg.transient >= 0.0 ? cfg.transient : default_transient(sys);
    ens.n_traj = cfg.n_traj;
    ens.seeds.resize(cfg.n_traj);
    for (int i = 0; i < cfg.n_traj; ++i) ens.seeds[i] = cfg.base_seed + i;
    ens.series.resize(cfg.n_traj);

    detail::run_indexed_parallel(cfg.n_traj, cfg.n_threads, [&](int i) {
        ens.series[i] = simulate_trajectory(params, ens.dt, ens.duration, ens.seeds[i],
                                            ens.transient, cfg.sample_stride);
    });
    return ens;
}

enum class Window { kHann, kRect };

struct EstimatorConfig {
    int segment_length = 0;  ///< samples; 0: auto from rbw <= min(freq)/20
    Window window = Window::kHann;
    double overlap = 0.5;
    std::vector<double> freqs;  ///< analysis frequencies (rad/us)

    void validate() const {
        if (segment_length != 0 && segment_length < 16)
            throw invalid_parameter_error("EstimatorConfig: segment_length must be >= 16");
        if (overlap < 0.0 || overlap > 0.9)
            throw invalid_parameter_error("EstimatorConfig: overlap must be in [0, 0.9]");
        if (freqs.empty())
            throw invalid_parameter_error("EstimatorConfig: empty frequency grid");
        for (double f : freqs)
            if (!(f > 0.0) || !std::isfinite(f))
                throw invalid_parameter_error("EstimatorConfig: frequencies must be > 0");
    }
};

struct SpectraEstimate {
    std::vector<double> freqs;
    std::vector<double> s11, s22, s12;
    std::vector<double> s11_se, s22_se, s12_se;
    std::vector<double> c, c_se;
    std::vector<bool> c_defined;
};

namespace detail {

/// Per-block (trajectory) averaged periodograms at each frequency.
struct WelchBlock {
    std::vector<double> p11, p22, p12;  // per frequency
    long n_segments = 0;
};

inline int auto_segment_length(double sample_dt, double freq_min, std::size_t n_samples) {
    long n = static_cast<long>(std::ceil(40.0 * std::numbers::pi / (freq_min * sample_dt)));
    n = std::max<long>(n, 16);
    n = std::min<long>(n, static_cast<long>(n_samples));
    return static_cast<int>(n);
}

inline WelchBlock welch_block(const Trajectory& traj, const EstimatorConfig& cfg,
                              int seg_len) {
    const std::size_t n = traj.i1.size();
    const std::size_t nf = cfg.freqs.size();
    WelchBlock blk;
    blk.p11.assign(nf, 0.0);
    blk.p22.assign(nf, 0.0);
    blk.p12.assign(nf, 0.0);
    if (n < static_cast<std::size_t>(seg_len)) return blk;

    const double dt = traj.sample_dt;
    std::vector<double> win(seg_len);
    double w2sum = 0.0;
    for (int i = 0; i < seg_len; ++i) {
        win[i] = cfg.window == Window::kHann
                     ? 0.5 * (1.0 - std::cos(two_pi * i / (seg_len - 1)))
                     : 1.0;
        w2sum += win[i] * win[i];
    }
    w2sum *= dt;

    // windowed complex exponentials, one row per frequency
    std::vector<std::vector<complexd>> kernels(nf, std::vector<complexd>(seg_len));
    for (std::size_t f = 0; f < nf; ++f)
        for (int i = 0; i < seg_len; ++i)
            kernels[f][i] =
                std::polar(win[i], -cfg.freqs[f] * (i * dt));

    const int step = std::max(1, static_cast<int>(seg_len * (1.0 - cfg.overlap)));
    for (std::size_t s0 = 0; s0 + seg_len <= n; s0 += step) {
        double mu1 = 0.0, mu2 = 0.0;
        for (int i = 0; i < seg_len; ++i) {
            mu1 += traj.i1[s0 + i];
            mu2 += traj.i2[s0 + i];
        }
        mu1 /= seg_len;
        mu2 /= seg_len;
        for (std::size_t f = 0; f < nf; ++f) {
            complexd x1(0.0, 0.0), x2(0.0, 0.0);
            const auto& ker = kernels[f];
            for (int i = 0; i < seg_len; ++i) {
                x1 += (traj.i1[s0 + i] - mu1) * ker[i];
                x2 += (traj.i2[s0 + i] - mu2) * ker[i];
            }
            x1 *= dt;
            x2 *= dt;
            blk.p11[f] += std::norm(x1) / w2sum;
            blk.p22[f] += std::norm(x2) / w2sum;
            blk.p12[f] += (x1 * std::conj(x2)).real() / w2sum;
        }
        ++blk.n_segments;
    }
    return blk;
}

/// Pool blocks into spectra + delete-one jackknife standard errors.
inline SpectraEstimate pool_blocks(const std::vector<WelchBlock>& blocks,
                                   const std::vector<double>& freqs) {
    const std::size_t nf = freqs.size();
    long total_segments = 0;
    for (const auto& b : blocks) total_segments += b.n_segments;
    if (total_segments < 8)
        throw insufficient_data_error("estimate_spectra: fewer than 8 averaged segments");

    const double inv2pi = 1.0 / two_pi;
    SpectraEstimate est;
    est.freqs = freqs;
    est.s11.assign(nf, 0.0);
    est.s22.assign(nf, 0.0);
    est.s12.assign(nf, 0.0);
    est.s11_se.assign(nf, 0.0);
    est.s22_se.assign(nf, 0.0);
    est.s12_se.assign(nf, 0.0);
    est.c.assign(nf, std::numeric_limits<double>::quiet_NaN());
    est.c_se.assign(nf, std::numeric_limits<double>::quiet_NaN());
    est.c_defined.assign(nf, false);

    std::vector<const WelchBlock*> live;
    for (const auto& b : blocks)
        if (b.n_segments > 0) live.push_back(&b);
    const std::size_t nb = live.size();

    for (std::size_t f = 0; f < nf; ++f) {
        double t11 = 0.0, t22 = 0.0, t12 = 0.0;
        long tn = 0;
        for (const auto* b : live) {
            t11 += b->p11[f];
            t22 += b->p22[f];
            t12 += b->p12[f];
            tn += b->n_segments;
        }
        const double s11 = inv2pi * t11 / tn;
        const double s22 = inv2pi * t22 / tn;
        const double s12 = inv2pi * t12 / tn;
        est.s11[f] = s11;
        est.s22[f] = s22;
        est.s12[f] = s12;
        if (s11 > 0.0 && s22 > 0.0) {
            est.c[f] = s12 / std::sqrt(s11 * s22);
            est.c_defined[f] = true;
        }
        if (nb >= 2) {
            // delete-one jackknife over blocks
            double mc = 0.0, m11 = 0.0, m22 = 0.0, m12 = 0.0;
            std::vector<double> jc(nb), j11(nb), j22(nb), j12(nb);
            bool all_defined = true;
            for (std::size_t m = 0; m < nb; ++m) {
                const double r11 = (t11 - live[m]->p11[f]) / (tn - live[m]->n_segments);
                const double r22 = (t22 - live[m]->p22[f]) / (tn - live[m]->n_segments);
                const double r12 = (t12 - live[m]->p12[f]) / (tn - live[m]->n_segments);
                j11[m] = inv2pi * r11;
                j22[m] = inv2pi * r22;
                j12[m] = inv2pi * r12;
                if (r11 > 0.0 && r22 > 0.0)
                    jc[m] = r12 / std::sqrt(r11 * r22);
                else
                    all_defined = false;
                m11 += j11[m];
                m22 += j22[m];
                m12 += j12[m];
                mc += jc[m];
            }
            m11 /= nb;
            m22 /= nb;
            m12 /= nb;
            mc /= nb;
            double v11 = 0.0, v22 = 0.0, v12 = 0.0, vc = 0.0;
            for (std::size_t m = 0; m < nb; ++m) {
                v11 += (j11[m] - m11) * (j11[m] - m11);
                v22 += (j22[m] - m22) * (j22[m] - m22);
                v12 += (j12[m] - m12) * (j12[m] - m12);
                vc += (jc[m] - mc) * (jc[m] - mc);
            }
            const double fac = double(nb - 1) / double(nb);
            est.s11_se[f] = std::sqrt(fac * v11);
            est.s22_se[f] = std::sqrt(fac * v22);
            est.s12_se[f] = std::sqrt(fac * v12);
            if (est.c_defined[f] && all_defined) est.c_se[f] = std::sqrt(fac * vc);
        }
    }
    return est;
}

}  // namespace detail

/// Windowed averaged cross-periodogram over segments and trajectories, in the
/// symmetrized S_ij convention; jackknife standard errors over trajectories.
inline SpectraEstimate estimate_spectra(const TrajectoryEnsemble& ens,
                                        const EstimatorConfig& cfg) {
    cfg.validate();
    if (ens.series.empty()) throw insufficient_data_error("estimate_spectra: empty ensemble");
    const double sample_dt = ens.series.front().sample_dt;
    const double fmin = *std::min_element(cfg.freqs.begin(), cfg.freqs.end());
    const int seg_len = cfg.segment_length > 0
                            ? cfg.segment_length
                            : detail::auto_segment_length(sample_dt, fmin,
                                                          ens.series.front().i1.size());
    std::vector<detail::WelchBlock> blocks(ens.series.size());
    for (std::size_t i = 0; i < ens.series.size(); ++i)
        blocks[i] = detail::welch_block(ens.series[i], cfg, seg_len);
    return detail::pool_blocks(blocks, cfg.freqs);
}

/// Equal-time normalized intensity cross-correlation pooled over
/// trajectories (per-trajectory means removed). Exactly in [-1, 1].
inline double estimate_g2_zero(const TrajectoryEnsemble& ens) {
    double s12 = 0.0, s11 = 0.0, s22 = 0.0;
    for (const auto& t : ens.series) {
        const std::size_t n = t.i1.size();
        if (n == 0) continue;
        double mu1 = 0.0, mu2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mu1 += t.i1[i];
            mu2 += t.i2[i];
        }
        mu1 /= n;
        mu2 /= n;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = t.i1[i] - mu1, b = t.i2[i] - mu2;
            s12 += a * b;
            s11 += a * a;
            s22 += b * b;
        }
    }
    if (!(s11 > 0.0) || !(s22 > 0.0))
        throw undefined_correlation_error("estimate_g2_zero: zero variance in a channel");
    return s12 / std::sqrt(s11 * s22);
}

/// Fused simulate-and-estimate runner: streams trajectories (memory stays
/// O(one trajectory per thread)), reduces in index order. Also returns the
/// pooled g2(0) with a jackknife standard error.
struct OracleResult {
    SpectraEstimate spectra;
    double g2 = std::numeric_limits<double>::quiet_NaN();
    double g2_se = std::numeric_limits<double>::quiet_NaN();
    double dt = 0.0;
    double duration = 0.0;
    int n_traj = 0;
};

inline OracleResult oracle_run(const SystemParams& params, const EnsembleConfig& cfg,
                               const EstimatorConfig& est_cfg) {
    params.validate();
    est_cfg.validate();
    if (cfg.n_traj < 1) throw invalid_parameter_error("oracle_run: n_traj < 1");
    const BlochSystem sys = build_bloch_system(params);
    const double omega_max =
        std::max(cfg.omega_max, *std::max_element(est_cfg.freqs.begin(), est_cfg.freqs.end()));
    const double dt =
        cfg.dt > 0.0 ? cfg.dt : stability_dt_bound(params, omega_max) * cfg.dt_factor;
    const double transient = cfg.transient >= 0.0 ? cfg.transient : default_transient(sys);

    struct G2Block {
        double s12 = 0.0, s11 = 0.0, s22 = 0.0;
    };
    std::vector<detail::WelchBlock> blocks(cfg.n_traj);
    std::vector<G2Block> g2b(cfg.n_traj);
    const double sample_dt = dt * cfg.sample_stride;
    const std::size_t n_samples =
        static_cast<std::size_t>((cfg.duration - transient) / sample_dt);
    const double fmin = *std::min_element(est_cfg.freqs.begin(), est_cfg.freqs.end());
    const int seg_len = est_cfg.segment_length > 0
                            ? est_cfg.segment_length
                            : detail::auto_segment_length(sample_dt, fmin, n_samples);

    detail::run_indexed_parallel(cfg.n_traj, cfg.n_threads, [&](int i) {
        Trajectory traj = simulate_trajectory(params, dt, cfg.duration, cfg.base_seed + i,
                                              transient, cfg.sample_stride);
        blocks[i] = detail::welch_block(traj, est_cfg, seg_len);
        double mu1 = 0.0, mu2 = 0.0;
        const std::size_t n = traj.i1.size();
        for (std::size_t k = 0; k < n; ++k) {
            mu1 += traj.i1[k];
            mu2 += traj.i2[k];
        }
        mu1 /= n;
        mu2 /= n;
        for (std::size_t k = 0; k < n; ++k) {
            const double a = traj.i1[k] - mu1, b = traj.i2[k] - mu2;
            g2b[i].s12 += a * b;
            g2b[i].s11 += a * a;
            g2b[i].s22 += b * b;
        }
    });

    OracleResult out;
    out.spectra = detail::pool_blocks(blocks, est_cfg.freqs);
    out.dt = dt;
    out.duration = cfg.duration;
    out.n_traj = cfg.n_traj;

    double t12 = 0.0, t11 = 0.0, t22 = 0.0;
    for (const auto& b : g2b) {
        t12 += b.s12;
        t11 += b.s11;
        t22 += b.s22;
    }
    if (t11 > 0.0 && t22 > 0.0) {
        out.g2 = t12 / std::sqrt(t11 * t22);
        if (cfg.n_traj >= 2) {
            double mean = 0.0;
            std::vector<double> jk(cfg.n_traj);
            for (int m = 0; m < cfg.n_traj; ++m) {
                jk[m] = (t12 - g2b[m].s12) /
                        std::sqrt((t11 - g2b[m].s11) * (t22 - g2b[m].s22));
                mean += jk[m];
            }
            mean /= cfg.n_traj;
            double var = 0.0;
            for (double v : jk) var += (v - mean) * (v - mean);
            out.g2_se = std::sqrt(var * double(cfg.n_traj - 1) / double(cfg.n_traj));
        }
    }
    return out;
}

/// Raw-trajectory dump: CSV of (t, I1, I2) for external inspection.
inline void dump_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("dump_trajectory_csv: cannot open " + path);
    os << "t_us,i1,i2\n";
    char buf[96];
    for (std::size_t i = 0; i < traj.i1.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.15g,%.15g\n", i * traj.sample_dt, traj.i1[i],
                      traj.i2[i]);
        os << buf;
    }
}

}  // namespace eitcorr
