#pragma once

// Test-only oracles: independent re-derivations used to cross-check the
// mainline solver and metrics. Nothing here shares code with the solver
// beyond the feeder data structures themselves.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "openg2g/episode.hpp"
#include "openg2g/feeder.hpp"
#include "openg2g/power_flow.hpp"

namespace oracle {

using openg2g::Complex;

// ------------------------------------------------------- two-bus closed form

// Receiving-end magnitude for source |Vs| behind a tap ratio, series R+jX,
// constant-power load P+jQ: the larger root of
//   |V|^4 - (|t Vs|^2 - 2(PR + QX)) |V|^2 + (P^2 + Q^2)|Z|^2 = 0.
inline double two_bus_voltage_v(double vs_v, double tap, double r_ohm, double x_ohm,
                                double p_w, double q_var) {
    const double vs2 = tap * vs_v * tap * vs_v;
    const double z2 = r_ohm * r_ohm + x_ohm * x_ohm;
    const double a = vs2 - 2.0 * (p_w * r_ohm + q_var * x_ohm);
    const double b = (p_w * p_w + q_var * q_var) * z2;
    const double disc = a * a - 4.0 * b;
    if (disc < 0) throw std::runtime_error("two-bus case has no real solution");
    return std::sqrt(0.5 * (a + std::sqrt(disc)));
}

// d|V|/dP of the closed form above, by implicit differentiation of the
// quadratic in y = |V|^2: dy/dP = (dA/dP + (A dA/dP - 2 dB/dP)/sqrt(A^2-4B))/2.
inline double two_bus_dv_dp(double vs_v, double tap, double r_ohm, double x_ohm,
                            double p_w, double q_var) {
    const double vs2 = tap * vs_v * tap * vs_v;
    const double z2 = r_ohm * r_ohm + x_ohm * x_ohm;
    const double a = vs2 - 2.0 * (p_w * r_ohm + q_var * x_ohm);
    const double b = (p_w * p_w + q_var * q_var) * z2;
    const double s = std::sqrt(a * a - 4.0 * b);
    const double da = -2.0 * r_ohm;
    const double db = 2.0 * p_w * z2;
    const double dy = 0.5 * (da + (a * da - 2.0 * db) / s);
    const double v = std::sqrt(0.5 * (a + s));
    return 0.5 * dy / v;
}

// ------------------------------------------------------- dense Newton oracle

// Full Ybus Newton-Raphson on complex power mismatch with a numerically
// differenced Jacobian, solved densely with Eigen. Regulators are not
// modeled; feeders passed here must not have any.
inline std::vector<double> newton_solve(const openg2g::FeederModel& feeder,
                                        const openg2g::InjectionMap& loads_w,
                                        int max_iter = 60, double tol_w = 1e-4) {
    if (!feeder.regulators.empty())
        throw std::runtime_error("newton oracle does not model regulators");
    const openg2g::CompiledFeeder cf(feeder);
    const auto& ents = cf.v_entries();
    const int n = static_cast<int>(ents.size());

    Eigen::MatrixXcd ybus = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& line : cf.lines()) {
        std::vector<int> ph;
        for (int p = 0; p < 3; ++p)
            if (line.has_phase[p]) ph.push_back(p);
        const int m = static_cast<int>(ph.size());
        Eigen::MatrixXcd z(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) z(i, j) = line.z[ph[i]][ph[j]];
        const Eigen::MatrixXcd yb = z.inverse();
        for (int i = 0; i < m; ++i) {
            const int fi = cf.v_index(line.from, static_cast<openg2g::Phase>(ph[i]));
            const int ti = cf.v_index(line.to, static_cast<openg2g::Phase>(ph[i]));
            for (int j = 0; j < m; ++j) {
                const int fj = cf.v_index(line.from, static_cast<openg2g::Phase>(ph[j]));
                const int tj = cf.v_index(line.to, static_cast<openg2g::Phase>(ph[j]));
                ybus(fi, fj) += yb(i, j);
                ybus(fi, tj) -= yb(i, j);
                ybus(ti, fj) -= yb(i, j);
                ybus(ti, tj) += yb(i, j);
            }
        }
    }

    Eigen::VectorXcd s_load = Eigen::VectorXcd::Zero(n);  // consumption-positive
    for (const auto& [key, val] : loads_w) {
        const int b = cf.bus_index(key.first);
        const int k = cf.v_index(b, key.second);
        if (k < 0) throw std::runtime_error("load on absent phase");
        s_load(k) += val;
    }

    const double th = 2.0 * M_PI / 3.0;
    const Complex rot[3] = {Complex(1.0, 0.0), std::polar(1.0, -th), std::polar(1.0, th)};
    Eigen::VectorXcd v(n);
    for (int k = 0; k < n; ++k)
        v(k) = rot[static_cast<int>(ents[k].second)] *
               (feeder.source_pu * cf.v_base(ents[k].first));

    std::vector<int> unknown;
    for (int k = 0; k < n; ++k)
        if (ents[k].first != cf.source()) unknown.push_back(k);
    const int m2 = 2 * static_cast<int>(unknown.size());

    auto mismatch = [&](const Eigen::VectorXcd& vv) {
        const Eigen::VectorXcd i = ybus * vv;
        Eigen::VectorXd f(m2);
        for (std::size_t u = 0; u < unknown.size(); ++u) {
            const Complex r = vv(unknown[u]) * std::conj(i(unknown[u])) + s_load(unknown[u]);
            f(2 * u) = r.real();
            f(2 * u + 1) = r.imag();
        }
        return f;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::VectorXd f = mismatch(v);
        if (f.lpNorm<Eigen::Infinity>() < tol_w) break;
        Eigen::MatrixXd jac(m2, m2);
        for (std::size_t u = 0; u < unknown.size(); ++u) {
            const double h = 1e-5 * cf.v_base(ents[unknown[u]].first);
            for (int part = 0; part < 2; ++part) {
                Eigen::VectorXcd vp = v, vm = v;
                const Complex d = part == 0 ? Complex(h, 0) : Complex(0, h);
                vp(unknown[u]) += d;
                vm(unknown[u]) -= d;
                jac.col(2 * u + part) = (mismatch(vp) - mismatch(vm)) / (2.0 * h);
            }
        }
        const Eigen::VectorXd dx = jac.fullPivLu().solve(-f);
        for (std::size_t u = 0; u < unknown.size(); ++u)
            v(unknown[u]) += Complex(dx(2 * u), dx(2 * u + 1));
    }
    const Eigen::VectorXd f = mismatch(v);
    if (f.lpNorm<Eigen::Infinity>() >= tol_w)
        throw std::runtime_error("newton oracle failed to converge");

    std::vector<double> pu(n);
    for (int k = 0; k < n; ++k) pu[k] = std::abs(v(k)) / cf.v_base(ents[k].first);
    return pu;
}

// --------------------------------------------------------- random feeders

// Random radial feeder: 2..max_buses buses on one voltage base, child phase
// sets nested in the parent's, diagonally dominant impedance blocks, no
// regulators. Loading is drawn separately (see random_injections).
inline openg2g::FeederModel random_radial_feeder(std::mt19937_64& g, int max_buses = 6) {
    using namespace openg2g;
    std::uniform_int_distribution<int> nbus(2, max_buses);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    FeederModel f;
    f.name = "random";
    f.source_bus = "b0";
    f.source_pu = 1.0 + 0.05 * unit(g);
    const double vbase = 2401.777119828843;

    const int n = nbus(g);
    std::vector<std::vector<Phase>> phases(n);
    phases[0] = {Phase::A, Phase::B, Phase::C};
    f.buses.push_back({"b0", phases[0], vbase});
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> pick_parent(0, i - 1);
        const int parent = pick_parent(g);
        std::vector<Phase> ph;
        do {
            ph.clear();
            for (Phase p : phases[parent])
                if (unit(g) < 0.7) ph.push_back(p);
        } while (ph.empty());
        phases[i] = ph;
        const std::string id = "b" + std::to_string(i);
        f.buses.push_back({id, ph, vbase});

        Line line;
        line.id = "l" + std::to_string(i);
        line.from = "b" + std::to_string(parent);
        line.to = id;
        line.phases = ph;
        std::uniform_real_distribution<double> rr(0.05, 0.45), xx(0.1, 0.6);
        const double r = rr(g), x = xx(g);
        for (Phase p : ph) {
            const int pi = static_cast<int>(p);
            line.z_ohm[pi][pi] = Complex(r * (0.8 + 0.4 * unit(g)), x * (0.8 + 0.4 * unit(g)));
            for (Phase q : ph) {
                const int qi = static_cast<int>(q);
                if (qi <= pi) continue;
                const Complex zm(0.3 * r * unit(g), 0.35 * x * unit(g));
                line.z_ohm[pi][qi] = zm;
                line.z_ohm[qi][pi] = zm;
            }
        }
        f.lines.push_back(line);
    }
    return f;
}

inline openg2g::InjectionMap random_injections(const openg2g::FeederModel& f,
                                               std::mt19937_64& g) {
    using namespace openg2g;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> kw(5.0, 120.0), kvar(0.0, 50.0);
    InjectionMap loads;
    for (const auto& bus : f.buses) {
        if (bus.id == f.source_bus) continue;
        for (Phase p : bus.phases) {
            if (unit(g) < 0.25) continue;
            double pw = kw(g) * 1000.0, qw = kvar(g) * 1000.0;
            if (unit(g) < 0.15) pw = -0.3 * pw;  // embedded generation
            loads[{bus.id, p}] += Complex(pw, qw);
        }
    }
    return loads;
}

// ----------------------------------------------------------- naive metrics

inline double naive_violation(const std::vector<std::vector<double>>& v, double lo, double hi,
                              double dt_s) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k)
        for (double e : v[k]) {
            if (e < lo) acc += (lo - e) * dt_s;
            if (e > hi) acc += (e - hi) * dt_s;
        }
    return acc;
}

inline double naive_mean_throughput(const std::vector<std::vector<double>>& tps) {
    if (tps.empty() || tps.front().size() < 2) return 0.0;
    const std::size_t n = tps.front().size();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double step = 0.0;
        for (const auto& s : tps) step += s[k];
        acc += step;
    }
    return acc / static_cast<double>(n - 1);
}

inline double naive_latency_rate(const std::vector<std::vector<double>>& itl,
                                 const std::vector<double>& deadlines) {
    std::size_t total = 0, bad = 0;
    for (std::size_t i = 0; i < itl.size(); ++i)
        for (double s : itl[i]) {
            ++total;
            if (s > deadlines[i]) ++bad;
        }
    return total ? static_cast<double>(bad) / static_cast<double>(total) : 0.0;
}

inline long long naive_switches(const std::vector<std::vector<int>>& batch) {
    long long c = 0;
    for (const auto& s : batch)
        for (std::size_t k = 1; k < s.size(); ++k)
            if (s[k] != s[k - 1]) ++c;
    return c;
}

// ------------------------------------------------------------- log fuzzer

// Randomized EpisodeLog covering the degenerate shapes too: zero/one grid
// steps, zero models, zero voltage entries.
inline openg2g::EpisodeLog fuzz_log(std::mt19937_64& g) {
    using namespace openg2g;
    std::uniform_int_distribution<int> nstep(0, 40), nent(0, 6), nmodel(0, 4);
    std::uniform_real_distribution<double> vu(0.88, 1.12), itl(0.0, 0.8), tput(0.0, 5e5);
    std::uniform_real_distribution<double> dl(0.1, 0.6);
    static const int ladder[] = {8, 16, 32, 64, 128, 256};
    std::uniform_int_distribution<int> bi(0, 5);

    EpisodeLog log;
    log.grid_dt = Rational(1, 10);
    const int steps = nstep(g), ents = nent(g), models = nmodel(g);
    for (int m = 0; m < models; ++m) {
        log.model_labels.push_back("m" + std::to_string(m));
        log.itl_deadlines_s.push_back(dl(g));
        log.batch.emplace_back();
        log.itl_s.emplace_back();
        log.throughput_tps.emplace_back();
    }
    for (int k = 0; k < steps; ++k) {
        log.time_s.push_back(0.1 * k);
        std::vector<double> v(ents);
        for (auto& e : v) e = vu(g);
        log.voltages_pu.push_back(std::move(v));
        log.total_power_w.push_back(0.0);
        for (int m = 0; m < models; ++m) {
            log.batch[m].push_back(ladder[bi(g)]);
            log.itl_s[m].push_back(itl(g));
            log.throughput_tps[m].push_back(tput(g));
        }
    }
    return log;
}

} // namespace oracle
