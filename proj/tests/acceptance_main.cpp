// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any fail. argv[1] = path to the kel binary, argv[2] = configs directory.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kel/curve.hpp"
#include "kel/density.hpp"
#include "kel/energy.hpp"
#include "kel/experiments.hpp"
#include "kel/sampling.hpp"
#include "kel/transport.hpp"

using nlohmann::json;
using namespace kel;
using curve_model::Polygon;

namespace {

int g_failures = 0;

template <class... A>
std::string fmt(const char* f, A... a) {
    char b[512];
    std::snprintf(b, sizeof b, f, a...);
    return b;
}

void report(int k, bool ok, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", k, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void fail_with_exception(int k, const std::exception& e) {
    report(k, false, std::string("exception: ") + e.what());
}

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double find_stat(const std::vector<experiments::Row>& rows, const std::string& param,
                 const std::string& stat) {
    for (const auto& r : rows)
        if (r.param == param && r.stat == stat) return r.value;
    throw std::runtime_error("row not found: param=" + param + " stat=" + stat);
}

std::string run_capture(const std::string& cmd) {
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("popen failed: " + cmd);
    std::string out;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
    pclose(p);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Polygon random_polygon(std::uint64_t seed, int m) {
    std::vector<Vec> vs;
    for (int i = 0; i < m; ++i) {
        double th = 2 * std::numbers::pi * i / m;
        double r = 1.0 + 0.3 * (2.0 * sampling::counter_uniform(seed, static_cast<std::uint64_t>(3 * i)) - 1.0);
        double z = 0.2 * (2.0 * sampling::counter_uniform(seed, static_cast<std::uint64_t>(3 * i + 1)) - 1.0);
        vs.push_back(Vec(r * std::cos(th), r * std::sin(th), z));
    }
    return Polygon::from_vertices(vs);
}

Polygon apply_similarity(const Polygon& P, double lambda, double ang, const Vec& shift) {
    std::vector<Vec> vs;
    double ca = std::cos(ang), sa = std::sin(ang);
    for (const auto& v : P.vertices) {
        double x = v[0], y = v[1], z = v[2];
        double x1 = ca * x - sa * y, y1 = sa * x + ca * y;
        double y2 = ca * y1 - sa * z, z2 = sa * y1 + ca * z;
        vs.push_back(Vec(lambda * x1 + shift[0], lambda * y2 + shift[1], lambda * z2 + shift[2]));
    }
    return Polygon::from_vertices(vs);
}

Polygon apply_inversion(const Polygon& P, const Vec& center) {
    std::vector<Vec> vs;
    for (const auto& v : P.vertices) {
        Vec w = v - center;
        vs.push_back(center + w * (1.0 / norm2(w)));
    }
    return Polygon::from_vertices(vs);
}

double polygon_diameter(const Polygon& P) {
    double d = 0;
    for (size_t i = 0; i < P.vertices.size(); ++i)
        for (size_t j = i + 1; j < P.vertices.size(); ++j)
            d = std::max(d, dist(P.vertices[i], P.vertices[j]));
    return d;
}

transport_metric::TLqElement random_atoms(std::uint64_t seed, int n, double L, int dim) {
    std::vector<double> pos;
    std::vector<Vec> vals;
    for (int i = 0; i < n; ++i) {
        pos.push_back(L * sampling::counter_uniform(seed, static_cast<std::uint64_t>(3 * i)));
        if (dim == 1) {
            vals.push_back(transport_metric::scalar_value(
                2.0 * sampling::counter_uniform(seed, static_cast<std::uint64_t>(3 * i + 1)) - 1.0));
        } else {
            Vec v(2);
            v[0] = sampling::counter_uniform(seed, static_cast<std::uint64_t>(3 * i + 1));
            v[1] = sampling::counter_uniform(seed, static_cast<std::uint64_t>(3 * i + 2));
            vals.push_back(v);
        }
    }
    return transport_metric::TLqElement::from_atoms(L, std::move(pos), vals);
}

}  // namespace

int main(int argc, char** argv) {
    std::string kel_bin = argc > 1 ? argv[1] : "./kel";
    std::string cfg_dir = argc > 2 ? argv[2] : "configs";
    energies::EnergyParams mobius{2.0, 1.0};

    // 1: circle energy against the independent 1-d quadrature oracle
    try {
        double t0 = now_s();
        auto r = energies::ohara_energy(curve_model::make_circle(2 * std::numbers::pi), mobius, 2048);
        double dt = now_s() - t0;
        json oj = json::parse(run_capture("\"" + kel_bin + "\" oracle circle-energy --quad-tol 1e-10"));
        double oracle = oj.at("value").get<double>();
        bool ok = !r.divergent && std::fabs(r.value - oracle) < 1e-3 &&
                  std::fabs(oracle - 4.0) < 1e-6 && dt < 30.0;
        report(1, ok,
               fmt("grid N=2048 gives %.9f, oracle %.9f, |gap|=%.3e, %.2fs", r.value, oracle,
                   std::fabs(r.value - oracle), dt));
    } catch (const std::exception& e) {
        fail_with_exception(1, e);
    }

    // 2: Monte Carlo unbiasedness at n=512 over 200 seeds
    try {
        auto cfg = experiments::ExperimentConfig::load(cfg_dir + "/mc_uniform.json");
        auto res = experiments::run_mc_convergence(cfg);
        double mean = find_stat(res.rows, "512", "mean");
        double se = find_stat(res.rows, "512", "se");
        double target = (1.0 - 1.0 / 512.0) * 4.0;
        bool ok = cfg.seeds.size() >= 200 && std::fabs(mean - target) <= 2.0 * se;
        report(2, ok,
               fmt("mean %.8f vs (1-1/512)*4 = %.8f, |bias| %.3e <= 2se %.3e, %zu seeds", mean,
                   target, std::fabs(mean - target), 2.0 * se, cfg.seeds.size()));
    } catch (const std::exception& e) {
        fail_with_exception(2, e);
    }

    // 3: Monte Carlo sd rate over n in {2^7..2^12}
    try {
        auto cfg = experiments::ExperimentConfig::load(cfg_dir + "/mc_cosine.json");
        bool grid_ok = cfg.n_grid == std::vector<int>{128, 256, 512, 1024, 2048, 4096};
        auto res = experiments::run_mc_convergence(cfg);
        double slope = find_stat(res.rows, "", "sd_slope");
        bool ok = grid_ok && slope >= -0.65 && slope <= -0.35;
        report(3, ok, fmt("sd log-log slope %.4f in [-0.65, -0.35], r2 %.4f", slope,
                          find_stat(res.rows, "", "sd_slope_r2")));
    } catch (const std::exception& e) {
        fail_with_exception(3, e);
    }

    // 4: Kim-Kusner exactness, minimality, scale invariance
    try {
        auto sq = Polygon::from_vertices(
            {Vec(0.0, 0.0), Vec(1.0, 0.0), Vec(1.0, 1.0), Vec(0.0, 1.0)});
        double e4 = energies::kim_kusner_energy(sq, energies::KKVariant::Endpoint).value;
        auto R16 = curve_model::regular_ngon(16);
        double e16 = energies::kim_kusner_energy(R16, energies::KKVariant::Endpoint).value;
        std::vector<Vec> big = R16.vertices;
        for (auto& v : big) v *= 5.3;
        double e16s =
            energies::kim_kusner_energy(Polygon::from_vertices(big), energies::KKVariant::Endpoint)
                .value;
        auto cfg = experiments::ExperimentConfig::load(cfg_dir + "/ngon_min.json");
        bool setup_ok = cfg.raw.value("m", 0) == 16 && cfg.raw.value("trials", 0) == 100 &&
                        cfg.raw.value("delta", 0.0) == 0.05;
        auto res = experiments::run_ngon_min(cfg);
        double wins = find_stat(res.rows, "", "regular_wins");
        bool ok = std::fabs(e4 - 1.0) <= 1e-12 && std::fabs(e16 - e16s) <= 1e-12 * e16 &&
                  setup_ok && wins == 1.0;
        report(4, ok,
               fmt("E4(square)=%.15f, scale drift %.2e, 16-gon beats 100 perturbations: %s", e4,
                   std::fabs(e16 - e16s) / e16, wins == 1.0 ? "yes" : "no"));
    } catch (const std::exception& e) {
        fail_with_exception(4, e);
    }

    // 5: discrete-to-continuum approach of 4 over m in {16, 64, 256}
    try {
        double g16 = std::fabs(
            energies::kim_kusner_energy(curve_model::regular_ngon(16), energies::KKVariant::Endpoint)
                .value - 4.0);
        double g64 = std::fabs(
            energies::kim_kusner_energy(curve_model::regular_ngon(64), energies::KKVariant::Endpoint)
                .value - 4.0);
        double g256 = std::fabs(
            energies::kim_kusner_energy(curve_model::regular_ngon(256), energies::KKVariant::Endpoint)
                .value - 4.0);
        bool ok = g256 < 0.15 && g16 > g64 && g64 > g256;
        report(5, ok, fmt("|E_m - 4| ladder %.4f > %.4f > %.4f, final < 0.15", g16, g64, g256));
    } catch (const std::exception& e) {
        fail_with_exception(5, e);
    }

    // 6: Simon energy normalization and scale invariance
    try {
        double worst = 0;
        for (int m : {4, 8, 32})
            worst = std::max(worst,
                             std::fabs(energies::simon_energy(curve_model::regular_ngon(m)).value - 4.0));
        auto R8 = curve_model::regular_ngon(8);
        std::vector<Vec> big = R8.vertices;
        for (auto& v : big) v *= 5.3;
        double drift = std::fabs(energies::simon_energy(Polygon::from_vertices(big)).value -
                                 energies::simon_energy(R8).value);
        bool ok = worst <= 1e-12 && drift <= 1e-12 * 4.0;
        report(6, ok, fmt("max |E_s(R_m) - 4| = %.2e over m in {4,8,32}, scale drift %.2e", worst,
                          drift));
    } catch (const std::exception& e) {
        fail_with_exception(6, e);
    }

    // 7: cos energy similarity and sphere-inversion invariance
    try {
        double worst_sim = 0, worst_inv = 0;
        for (int t = 0; t < 20; ++t) {
            std::uint64_t s = 300 + static_cast<std::uint64_t>(t);
            auto P = random_polygon(s, 8);
            double e0 = energies::cos_energy(P).value;
            double esim = energies::cos_energy(
                              apply_similarity(P, 2.37, 0.6 + 0.1 * t, Vec(0.4, -1.1, 0.8)))
                              .value;
            double diam = polygon_diameter(P);
            double ang = 2 * std::numbers::pi * t / 20.0;
            Vec center(2.2 * diam * std::cos(ang), 2.2 * diam * std::sin(ang), 0.7 * diam);
            double einv = energies::cos_energy(apply_inversion(P, center)).value;
            double scale = std::max(1.0, std::fabs(e0));
            worst_sim = std::max(worst_sim, std::fabs(e0 - esim) / scale);
            worst_inv = std::max(worst_inv, std::fabs(e0 - einv) / scale);
        }
        bool ok = worst_sim <= 1e-10 && worst_inv <= 1e-8;
        report(7, ok, fmt("20 polygons: similarity drift %.2e <= 1e-10, inversion drift %.2e <= 1e-8",
                          worst_sim, worst_inv));
    } catch (const std::exception& e) {
        fail_with_exception(7, e);
    }

    // 8: TL^q oracle equivalence, triangle inequality, circular W1 agreement
    try {
        double worst_brute = 0;
        for (int t = 0; t < 200; ++t) {
            std::uint64_t s = 7000 + static_cast<std::uint64_t>(t);
            int n = 1 + static_cast<int>(sampling::counter_uniform(s, 999) * 8);
            double L = t % 3 == 0 ? 0.7 : (t % 3 == 1 ? 1.0 : 2.3);
            int dim = t % 2 == 0 ? 1 : 2;
            double q = t % 4 < 2 ? 1.0 : 2.0;
            auto a = random_atoms(2 * s, n, L, dim);
            auto b = random_atoms(2 * s + 1, n, L, dim);
            worst_brute = std::max(worst_brute,
                                   std::fabs(transport_metric::tlq_exact(a, b, q).distance -
                                             transport_metric::tlq_brute_force(a, b, q).distance));
        }
        double worst_tri = 0;
        for (int t = 0; t < 200; ++t) {
            std::uint64_t s = 8000 + static_cast<std::uint64_t>(t);
            int n = 2 + static_cast<int>(sampling::counter_uniform(s, 77) * 62);
            int dim = t % 2 == 0 ? 1 : 2;
            double q = t % 2 == 0 ? 1.0 : 2.0;
            auto a = random_atoms(3 * s, n, 1.0, dim);
            auto b = random_atoms(3 * s + 1, n, 1.0, dim);
            auto c = random_atoms(3 * s + 2, n, 1.0, dim);
            double viol = transport_metric::tlq_exact(a, c, q).distance -
                          transport_metric::tlq_exact(a, b, q).distance -
                          transport_metric::tlq_exact(b, c, q).distance;
            worst_tri = std::max(worst_tri, viol);
        }
        double worst_w1 = 0;
        for (int t = 0; t < 100; ++t) {
            std::uint64_t s = 9500 + static_cast<std::uint64_t>(t);
            int n = 1 + static_cast<int>(sampling::counter_uniform(s, 55) * 48);
            std::vector<double> pa, pb;
            std::vector<Vec> za;
            for (int i = 0; i < n; ++i) {
                pa.push_back(sampling::counter_uniform(s, static_cast<std::uint64_t>(2 * i)));
                pb.push_back(sampling::counter_uniform(s + 1, static_cast<std::uint64_t>(2 * i)));
                za.push_back(transport_metric::scalar_value(0.0));
            }
            auto a = transport_metric::TLqElement::from_atoms(1.0, pa, za);
            auto b = transport_metric::TLqElement::from_atoms(1.0, pb, za);
            worst_w1 = std::max(worst_w1,
                                std::fabs(transport_metric::circular_wasserstein(a, b, 1.0) -
                                          transport_metric::tlq_exact(a, b, 1.0).distance));
        }
        bool ok = worst_brute <= 1e-10 && worst_tri <= 1e-10 && worst_w1 <= 1e-10;
        report(8, ok,
               fmt("brute gap %.2e (200), triangle violation %.2e (200), W1 gap %.2e (100)",
                   worst_brute, worst_tri, worst_w1));
    } catch (const std::exception& e) {
        fail_with_exception(8, e);
    }

    // 9: transport statistic rates and monotonicity
    try {
        auto cfg = experiments::ExperimentConfig::load(cfg_dir + "/transport_rates.json");
        bool grid_ok = cfg.n_grid.front() == 64 && cfg.n_grid.back() == 16384 &&
                       cfg.seeds.size() == 20;
        auto res = experiments::run_transport_rates(cfg);
        double gcs = find_stat(res.rows, "", "gc_slope");
        double sup_final = find_stat(res.rows, "16384", "sup_median");
        bool dec = find_stat(res.rows, "", "gc_median_decreasing") == 1.0 &&
                   find_stat(res.rows, "", "sup_median_decreasing") == 1.0;
        bool ok = grid_ok && gcs >= -0.65 && gcs <= -0.35 && sup_final < 0.02 && dec;
        report(9, ok,
               fmt("gc slope %.4f, sup median at 2^14 = %.6f < 0.02, strictly decreasing: %s", gcs,
                   sup_final, dec ? "yes" : "no"));
    } catch (const std::exception& e) {
        fail_with_exception(9, e);
    }

    // 10: locally uniform convergence with the TL1 diagnostic, both densities
    try {
        double gaps[2];
        bool conv[2];
        const char* names[2] = {"gamma_uniform.json", "gamma_cosine.json"};
        bool ok = true;
        for (int i = 0; i < 2; ++i) {
            auto cfg = experiments::ExperimentConfig::load(cfg_dir + "/" + names[i]);
            auto res = experiments::run_gamma_sequence(cfg);
            conv[i] = find_stat(res.rows, "", "tl1_converging") == 1.0;
            gaps[i] = find_stat(res.rows, "4096", "median_gap");
            ok = ok && conv[i] && gaps[i] < 0.1;
        }
        report(10, ok,
               fmt("median gaps at n=4096: uniform %.5f, cosine %.5f (< 0.1); TL1 diagnostic: %s/%s",
                   gaps[0], gaps[1], conv[0] ? "pass" : "fail", conv[1] ? "pass" : "fail"));
    } catch (const std::exception& e) {
        fail_with_exception(10, e);
    }

    // 11: Blatt finiteness verdicts and square divergence under sampling
    try {
        auto cfg = experiments::ExperimentConfig::load(cfg_dir + "/blatt_divergence.json");
        bool grid_ok = cfg.n_grid == std::vector<int>{256, 1024, 4096} &&
                       cfg.threshold("exceed", 0.0) == 4.0;
        auto res = experiments::run_blatt_divergence(cfg);
        bool circle_ok = find_stat(res.rows, "smooth", "energy_finite") == 1.0 &&
                         find_stat(res.rows, "smooth", "seminorm_finite") == 1.0 &&
                         find_stat(res.rows, "smooth", "verdicts_agree") == 1.0;
        bool square_ok = find_stat(res.rows, "corner", "energy_finite") == 0.0 &&
                         find_stat(res.rows, "corner", "seminorm_finite") == 0.0 &&
                         find_stat(res.rows, "corner", "verdicts_agree") == 1.0;
        bool medians_ok = find_stat(res.rows, "", "corner_medians_increasing") == 1.0 &&
                          find_stat(res.rows, "", "corner_medians_exceed") == 1.0;
        bool ok = grid_ok && circle_ok && square_ok && medians_ok;
        report(11, ok,
               fmt("circle finite/finite, square divergent/divergent, medians %.2f < %.2f < %.2f all > 4",
                   find_stat(res.rows, "256", "corner_Rn_median"),
                   find_stat(res.rows, "1024", "corner_Rn_median"),
                   find_stat(res.rows, "4096", "corner_Rn_median")));
    } catch (const std::exception& e) {
        fail_with_exception(11, e);
    }

    // 12: byte-identical CSV bodies across thread counts
    try {
        std::string base = "\"" + kel_bin + "\" experiment mc --config \"" + cfg_dir +
                           "/mc_uniform.json\" --out ";
        int rc1 = std::system(("KEL_THREADS=1 " + base + "/tmp/kel_acc_t1 > /dev/null").c_str());
        int rc4 = std::system(("KEL_THREADS=4 " + base + "/tmp/kel_acc_t4 > /dev/null").c_str());
        std::string a = slurp("/tmp/kel_acc_t1/mc.csv");
        std::string b = slurp("/tmp/kel_acc_t4/mc.csv");
        bool ok = rc1 == 0 && rc4 == 0 && !a.empty() && a == b;
        report(12, ok, fmt("KEL_THREADS 1 vs 4: %zu-byte CSV bodies %s", a.size(),
                           a == b ? "identical" : "DIFFER"));
    } catch (const std::exception& e) {
        fail_with_exception(12, e);
    }

    std::printf("%d of 12 criteria passed\n", 12 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
