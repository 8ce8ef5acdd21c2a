// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sae/cli.hpp"
#include "sae/io.hpp"
#include "sae/simulation.hpp"

using namespace sae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %d. %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::size_t worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Splits [0, n) into contiguous chunks, one per worker.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t T = std::min(worker_count(), n);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < T; ++t) {
        pool.emplace_back([&, t] { fn(t, n * t / T, n * (t + 1) / T); });
    }
    for (auto& th : pool) th.join();
}

ParamVector make_params(double b0, double b1, double s) {
    ParamVector d;
    d.beta = VectorXd(2);
    d.beta << b0, b1;
    d.sigma_u2 = s;
    return d;
}

double mean_of(const VectorXd& v) { return v.mean(); }

// ---------------------------------------------------------------------------

Outcome nonnegativity() {
    std::size_t total = 0, negative = 0, fell_back = 0;
    double lowest = INFINITY;
    for (double s : {1.0, 140.0, 1000.0}) {
        SimulationConfig cfg;
        cfg.sigma_u2 = s;
        const auto design = cfg.design();
        const RandomStream root(cfg.seed + static_cast<std::uint64_t>(s));
        const std::size_t R = 200;
        std::vector<std::size_t> tot(R), neg(R), fb(R);
        std::vector<double> lo(R, INFINITY);
        parallel_chunks(R, [&](std::size_t, std::size_t a, std::size_t b) {
            for (std::size_t r = a; r < b; ++r) {
                RandomStream rng = root.child(r).child(0);
                const auto sim = simulate_dataset(cfg.true_parameters(), design, rng);
                const FitResult f = fit(sim.data);
                const BiasVarEstimate real = bootstrap_bias_var(sim.data, f, {}, 100, root.child(r).child(1));

                std::vector<BiasVarEstimate> variants = {real};
                for (double bs : {-1e6, -1e2, 1e2, 1e6}) {
                    for (double vs : {0.0, 1e3, 1e8}) {
                        BiasVarEstimate bv = real;
                        bv.b_hat *= bs;
                        bv.V_hat *= vs;
                        variants.push_back(bv);
                    }
                }
                RandomStream adv = root.child(r).child(2);
                for (int t = 0; t < 4; ++t) {
                    BiasVarEstimate bv = real;
                    for (Eigen::Index j = 0; j < 3; ++j) bv.b_hat(j) = adv.normal(0.0, 1e8);
                    const MatrixXd A = MatrixXd::NullaryExpr(3, 3, [&] { return adv.normal(0.0, 1e4); });
                    bv.V_hat = A * A.transpose();
                    variants.push_back(bv);
                }
                for (const auto& bv : variants) {
                    for (auto weight : {DiagWeight::half, DiagWeight::one}) {
                        MspeInputs in;
                        in.bv = bv;
                        in.tilt.diag_weight = weight;
                        const auto out = compute_mspe(MspeMethod::tilted, sim.data, f.delta_hat, in);
                        for (const auto& a : out.areas) {
                            ++tot[r];
                            if (!(a.value >= 0.0)) ++neg[r];
                            if (!a.tilt->used_preliminary) ++fb[r];
                            lo[r] = std::min(lo[r], a.value);
                        }
                    }
                }
            }
        });
        for (std::size_t r = 0; r < R; ++r) {
            total += tot[r];
            negative += neg[r];
            fell_back += fb[r];
            lowest = std::min(lowest, lo[r]);
        }
    }
    return {negative == 0, fmt("%zu values, %zu negative or NaN, min %.3g, %zu fallbacks", total,
                               negative, lowest, fell_back)};
}

SimulationSummary& table1_run() {
    static SimulationSummary summary = [] {
        SimulationConfig cfg;
        cfg.R = 2000;
        cfg.B = 500;
        cfg.methods = {MspeMethod::naive, MspeMethod::pr, MspeMethod::jlw, MspeMethod::tilted};
        return run_simulation(cfg);
    }();
    return summary;
}

Outcome table1() {
    const auto& s = table1_run();
    const auto& nw = s.method("new");
    const auto& jlw = s.method("jlw");
    const double rb_new = mean_of(nw.rb), cv_new = mean_of(nw.cv);
    const double rb_jlw = mean_of(jlw.rb), cv_jlw = mean_of(jlw.cv);
    const bool a = std::abs(rb_new - (-0.060)) <= 0.05;
    const bool b = std::abs(cv_new - 0.074) <= 0.05;
    const bool c = rb_jlw < rb_new;
    const bool d = cv_new <= cv_jlw;
    std::string detail = fmt(
        "New RB %.4f (target -0.060 +/- 0.05: %s), New CV %.4f (target 0.074 +/- 0.05: %s), "
        "JLW RB %.4f < New RB: %s, New CV <= JLW CV %.4f: %s",
        rb_new, a ? "ok" : "no", cv_new, b ? "ok" : "no", rb_jlw, c ? "ok" : "no", cv_jlw,
        d ? "ok" : "no");
    detail += fmt("; naive RB %.4f CV %.4f, PR RB %.4f CV %.4f, JLW negatives %zu, New fallback %.3f",
                  mean_of(s.method("naive").rb), mean_of(s.method("naive").cv),
                  mean_of(s.method("pr").rb), mean_of(s.method("pr").cv), jlw.negative_count,
                  *nw.tilt_fallback_rate);
    return {a && b && c && d, detail};
}

Outcome parity() {
    const auto& s = table1_run();
    const double drb = std::abs(mean_of(s.method("new").rb) - mean_of(s.method("pr").rb));
    const double dcv = std::abs(mean_of(s.method("new").cv) - mean_of(s.method("pr").cv));
    return {drb <= 0.01 && dcv <= 0.01, fmt("|dRB| %.4f, |dCV| %.4f (limit 0.01 each)", drb, dcv)};
}

Outcome m1_oracle() {
    struct Point {
        LinkFunction link;
        double b0, b1, s, x1, D;
    };
    const std::vector<Point> points = {
        {LinkFunction::identity, 43.0, 0.25, 0.0, 300.0, 147.0},
        {LinkFunction::identity, 43.0, 0.25, 140.0, 150.0, 147.0},
        {LinkFunction::identity, 43.0, 0.25, 140.0, 460.0, 24.5},
        {LinkFunction::exp, 0.5, 0.1, 0.0, 2.0, 0.4},
        {LinkFunction::exp, 0.5, 0.1, 0.3, 2.0, 0.2},
    };
    const std::size_t N = 1000000;
    bool ok = true;
    std::string detail;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Point& pt = points[p];
        const ParamVector d = make_params(pt.b0, pt.b1, pt.s);
        AreaObservation a;
        a.area_id = 1;
        a.x = VectorXd(2);
        a.x << 1.0, pt.x1;
        a.D = pt.D;
        const double analytic = m1(d, a, pt.link);
        const double mu = a.x.dot(d.beta);
        RandomStream rng(1000 + p);
        double sum = 0.0, sq = 0.0;
        for (std::size_t r = 0; r < N; ++r) {
            const double theta = mu + rng.normal(0.0, pt.s);
            a.y = theta + rng.normal(0.0, pt.D);
            const double h = pt.link == LinkFunction::identity ? theta : std::exp(theta);
            const double err = best_predictor(d, a, pt.link) - h;
            sum += err * err;
            sq += err * err * err * err;
        }
        const double mean = sum / N;
        const double se = std::sqrt(std::max(0.0, sq / N - mean * mean) / N);
        const bool good = std::abs(mean - analytic) <= 3.0 * se;
        ok = ok && good;
        detail += fmt("%s%s s=%g: %.6g vs MC %.6g (%.2f SE)", p ? "; " : "",
                      std::string(to_string(pt.link)).c_str(), pt.s, analytic, mean,
                      se > 0 ? std::abs(mean - analytic) / se : 0.0);
    }
    return {ok, detail};
}

Outcome derivatives() {
    // Reference derivatives by central differences of an independently coded
    // M1 = s D / (s + D) in extended precision.
    auto m1_ref = [](long double s, long double D) { return s * D / (s + D); };
    const std::vector<double> sigmas = {1.0, 10.0, 100.0, 300.0, 500.0};
    const std::vector<double> Ds = {1.0, 50.0, 250.0, 500.0};
    double worst_g = 0.0, worst_h = 0.0, worst_lib_g = 0.0, worst_lib_h = 0.0;
    bool beta_zero = true;
    for (double s : sigmas) {
        for (double D : Ds) {
            const ParamVector d = make_params(43.0, 0.25, s);
            AreaObservation a;
            a.area_id = 1;
            a.x = VectorXd(2);
            a.x << 1.0, 300.0;
            a.D = D;
            a.y = 0.0;
            const Derivatives der = m1_derivatives(d, a, LinkFunction::identity);
            const long double h = 1e-3L * s;
            const long double f0 = m1_ref(s, D), fp = m1_ref(s + h, D), fm = m1_ref(s - h, D);
            const long double fp2 = m1_ref(s + 2 * h, D), fm2 = m1_ref(s - 2 * h, D);
            // Fourth-order stencils.
            const long double g = (-fp2 + 8 * fp - 8 * fm + fm2) / (12 * h);
            const long double hh = (-fp2 + 16 * fp - 30 * f0 + 16 * fm - fm2) / (12 * h * h);
            worst_g = std::max(worst_g, double(std::abs((der.gradient(2) - g) / g)));
            worst_h = std::max(worst_h, double(std::abs((der.hessian(2, 2) - hh) / hh)));
            beta_zero = beta_zero && der.gradient.head(2).isZero(0.0) &&
                        der.hessian.topRows(2).isZero(0.0) && der.hessian.leftCols(2).isZero(0.0);

            // The library's own double-precision differencing, for information.
            const Derivatives fd = finite_diff(
                [&](const ParamVector& q) { return m1(q, a, LinkFunction::identity); }, d);
            worst_lib_g = std::max(worst_lib_g, std::abs((fd.gradient(2) - der.gradient(2)) / der.gradient(2)));
            worst_lib_h = std::max(worst_lib_h, std::abs((fd.hessian(2, 2) - der.hessian(2, 2)) / der.hessian(2, 2)));
        }
    }
    const bool ok = worst_g <= 1e-5 && worst_h <= 1e-5 && beta_zero;
    return {ok, fmt("20 points: max rel err gradient %.2e, Hessian %.2e, beta block zero: %s "
                    "(double-precision library FD: gradient %.2e, Hessian %.2e)",
                    worst_g, worst_h, beta_zero ? "yes" : "no", worst_lib_g, worst_lib_h)};
}

Outcome fallback_trend() {
    const std::vector<std::size_t> reps = {1, 4, 16};
    std::vector<double> rate, se;
    std::string detail;
    for (std::size_t r : reps) {
        SimulationConfig cfg;
        cfg.R = 1000;
        cfg.B = 500;
        cfg.design_replication = r;
        cfg.methods = {MspeMethod::tilted};
        const auto s = run_simulation(cfg);
        rate.push_back(*s.method("new").tilt_fallback_rate);
        se.push_back(*s.method("new").tilt_fallback_se);
        detail += fmt("%sm=%zu: %.4f (SE %.4f)", detail.empty() ? "" : ", ", cfg.m(), rate.back(), se.back());
    }
    bool ok = true;
    for (std::size_t k = 1; k < rate.size(); ++k) {
        const double tol = 2.0 * std::sqrt(se[k] * se[k] + se[k - 1] * se[k - 1]);
        ok = ok && rate[k] <= rate[k - 1] + tol;
    }
    return {ok, detail};
}

Outcome bias_direction() {
    const auto& s = table1_run();
    const double nw = (s.method("new").mean_estimate - s.smspe).cwiseAbs().mean();
    const double naive = (s.method("naive").mean_estimate - s.smspe).cwiseAbs().mean();
    return {nw <= naive, fmt("mean |E - SMSPE|: New %.4f, naive %.4f", nw, naive)};
}

Outcome bootstrap_validity() {
    SimulationConfig cfg;
    const auto design = cfg.design();
    RandomStream rng = RandomStream(cfg.seed).child(0);
    const auto sim = simulate_dataset(cfg.true_parameters(), design, rng);
    const FitResult f = fit(sim.data);
    const std::size_t B = 500;
    const BiasVarEstimate bv = bootstrap_bias_var(sim.data, f, {}, B, RandomStream(cfg.seed).child(1));

    // Outer Monte Carlo at delta_hat with fresh streams.
    const std::size_t N = 100000;
    std::vector<double> draws(N);
    const RandomStream outer(cfg.seed ^ 0x5eed);
    parallel_chunks(N, [&](std::size_t, std::size_t a, std::size_t b) {
        for (std::size_t r = a; r < b; ++r) {
            RandomStream s = outer.child(r);
            draws[r] = fit(simulate_dataset(f.delta_hat, design, s).data).delta_hat.sigma_u2;
        }
    });
    double mean = 0.0;
    for (double x : draws) mean += x;
    mean /= N;
    double m2 = 0.0, m4 = 0.0;
    for (double x : draws) {
        const double c = (x - mean) * (x - mean);
        m2 += c;
        m4 += c * c;
    }
    const double var = m2 / (N - 1);
    m4 /= N;
    // Standard error of a sample variance: sqrt((mu4 - sigma^4) / n).
    const double spread = std::max(0.0, m4 - var * var);
    const double se = std::sqrt(spread / N + spread / B);
    const double v = bv.V_hat(2, 2);
    return {std::abs(v - var) <= 3.0 * se,
            fmt("sigma_hat^2 = %.2f; V_hat(s,s) %.1f vs outer MC %.1f, |diff| = %.2f SE", f.delta_hat.sigma_u2,
                v, var, std::abs(v - var) / se)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "sae_mspe_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"R": 200, "B": 100, "seed": 4242, "methods": ["naive", "pr", "jlw", "new"]})";

    std::vector<std::string> outputs;
    for (const char* threads : {"1", "4", "4", "1"}) {
        ::setenv("SAE_MSPE_THREADS", threads, 1);
        const fs::path out = dir / ("run" + std::to_string(outputs.size()));
        const std::string cfg = (dir / "cfg.json").string(), out_s = out.string();
        const char* argv[] = {"sae-mspe", "simulate", "--config", cfg.c_str(), "--out", out_s.c_str()};
        std::ostringstream sink, err;
        if (cli_main(6, argv, sink, err) != 0) return {false, "simulate failed: " + err.str()};
        outputs.push_back(slurp(out / "summary.json"));
    }
    ::unsetenv("SAE_MSPE_THREADS");
    bool same = !outputs[0].empty();
    for (const auto& o : outputs) same = same && o == outputs[0];
    return {same, fmt("4 runs (threads 1, 4, 4, 1): summary.json %s (%zu bytes)",
                      same ? "byte-identical" : "differs", outputs[0].size())};
}

}  // namespace

int main() {
    report(1, "nonnegativity of the new estimator", nonnegativity);
    report(2, "Table 1 reproduction (R=2000, B=500)", table1);
    report(3, "PR-New parity", parity);
    report(4, "M1 Monte Carlo oracle", m1_oracle);
    report(5, "analytic M1 derivatives vs finite differences", derivatives);
    report(6, "tilt fallback rate nonincreasing in m", fallback_trend);
    report(7, "bias reduction relative to naive", bias_direction);
    report(8, "bootstrap variance validity", bootstrap_validity);
    report(9, "determinism across thread counts", determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
