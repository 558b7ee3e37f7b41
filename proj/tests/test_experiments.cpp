#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "kel/experiments.hpp"

using namespace kel::experiments;
using nlohmann::json;

namespace {

double find_stat(const std::vector<Row>& rows, const std::string& param,
                 const std::string& stat) {
    for (const auto& r : rows)
        if (r.param == param && r.stat == stat) return r.value;
    throw std::runtime_error("row not found: param=" + param + " stat=" + stat);
}

}  // namespace

TEST_CASE("loglog fit recovers an exact power law") {
    std::vector<double> xs{2, 4, 8, 16, 32}, ys;
    for (double x : xs) ys.push_back(3.7 * std::pow(x, -0.625));
    auto f = fit_loglog(xs, ys);
    CHECK(f.slope == doctest::Approx(-0.625).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.stderr_slope == doctest::Approx(0.0).epsilon(1e-10));
    CHECK_THROWS(fit_loglog({1.0}, {2.0}));
    CHECK_THROWS(fit_loglog({1.0, -2.0}, {2.0, 3.0}));
}

TEST_CASE("median conventions") {
    CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
    CHECK_THROWS(median({}));
}

TEST_CASE("config parsing and validation") {
    json j{{"experiment", "mc"},
           {"n_grid", {16, 32}},
           {"seed_start", 5},
           {"seed_count", 3},
           {"thresholds", {{"assert_slope", {{"min", -1.0}}}}}};
    auto cfg = ExperimentConfig::from_json(j, "/tmp");
    CHECK(cfg.alpha == 2.0);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{5, 6, 7});
    CHECK(cfg.threshold("missing", 1.5) == 1.5);

    json bad = j;
    bad["n_grid"] = {32, 16};
    CHECK_THROWS(ExperimentConfig::from_json(bad, ""));
    json noseeds = j;
    noseeds.erase("seed_start");
    noseeds.erase("seed_count");
    noseeds["seed_count"] = 0;
    CHECK_THROWS(ExperimentConfig::from_json(noseeds, ""));
    CHECK_THROWS(ExperimentConfig::load("/tmp/kel_missing_config.json"));
}

TEST_CASE("csv writer emits a stable body") {
    std::vector<Row> rows{{"demo", "8", "1", "value", 0.125},
                          {"demo", "", "", "summary", 0.123456789012}};
    const char* path = "/tmp/kel_test_rows.csv";
    write_rows_csv(rows, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() ==
          "experiment,param,seed,stat,value,runtime_s\n"
          "demo,8,1,value,0.125,\n"
          "demo,,,summary,0.123456789012,\n");
}

TEST_CASE("unknown experiment name is rejected") {
    json j{{"n_grid", {8}}, {"seeds", {1}}};
    auto cfg = ExperimentConfig::from_json(j, "");
    CHECK_THROWS(run_experiment("spectral", cfg));
}

TEST_CASE("mc runner produces a full row set") {
    json j{{"experiment", "mc"},
           {"curve", {{"kind", "circle"}, {"length", 1.0}}},
           {"density", {{"kind", "uniform"}}},
           {"n_grid", {16, 32}},
           {"seeds", {1, 2, 3}},
           {"N_ref", 128}};
    auto res = run_mc_convergence(ExperimentConfig::from_json(j, ""));
    CHECK(res.thresholds_met);
    CHECK(find_stat(res.rows, "", "E_rho") == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(find_stat(res.rows, "16", "mean") > 0.0);
    CHECK(find_stat(res.rows, "32", "sd") > 0.0);
    // every sample row carries its seed
    int with_seed = 0;
    for (const auto& r : res.rows)
        if (r.stat == "Rn") {
            CHECK(!r.seed.empty());
            ++with_seed;
        }
    CHECK(with_seed == 6);
    CHECK(res.sidecar.contains("thresholds_met"));
}

TEST_CASE("gamma runner aborts on a non-converging input sequence") {
    json j{{"experiment", "gamma"},
           {"curve", {{"kind", "circle"}, {"length", 1.0}}},
           {"density", {{"kind", "uniform"}}},
           {"n_grid", {32, 64}},
           {"seeds", {1, 2}},
           {"N_ref", 128},
           {"offset", 0.5},
           {"offset_mode", "constant"}};
    auto res = run_gamma_sequence(ExperimentConfig::from_json(j, ""));
    CHECK(!res.thresholds_met);
    CHECK(res.sidecar.value("aborted", false));
    CHECK(find_stat(res.rows, "", "tl1_converging") == 0.0);
    // no energy phase after the abort
    CHECK_THROWS(find_stat(res.rows, "32", "median_gap"));
}

TEST_CASE("gamma runner passes on exact samples") {
    json j{{"experiment", "gamma"},
           {"curve", {{"kind", "circle"}, {"length", 1.0}}},
           {"density", {{"kind", "uniform"}}},
           {"n_grid", {64, 128, 256}},
           {"seeds", {1, 2, 3, 4, 5}},
           {"N_ref", 256},
           {"thresholds", {{"tl_eps", 0.1}, {"eps_gamma", 0.2}}}};
    auto res = run_gamma_sequence(ExperimentConfig::from_json(j, ""));
    CHECK(res.thresholds_met);
    CHECK(find_stat(res.rows, "", "tl1_converging") == 1.0);
    CHECK(find_stat(res.rows, "", "liminf_ok") == 1.0);
    CHECK(find_stat(res.rows, "", "limsup_ok") == 1.0);
}

TEST_CASE("transport rates runner on a small grid") {
    json j{{"experiment", "transport_rates"},
           {"density", {{"kind", "uniform"}}},
           {"L", 1.0},
           {"n_grid", {16, 64, 256}},
           {"seeds", {1, 2, 3, 4, 5}},
           {"opt_max_n", 64},
           {"thresholds", {{"assert_equispaced", true}}}};
    auto res = run_transport_rates(ExperimentConfig::from_json(j, ""));
    CHECK(res.thresholds_met);
    CHECK(find_stat(res.rows, "16", "sup_equispaced") == doctest::Approx(1.0 / 32).epsilon(1e-12));
    CHECK(find_stat(res.rows, "256", "sup_equispaced") ==
          doctest::Approx(1.0 / 512).epsilon(1e-12));
    // optimized rows exist only under the cap
    CHECK(find_stat(res.rows, "64", "sup_optimized_median") > 0.0);
    CHECK_THROWS(find_stat(res.rows, "256", "sup_optimized_median"));
    CHECK(find_stat(res.rows, "", "gc_slope") < 0.0);
}

TEST_CASE("ngon runner flags minimality and the ladder") {
    // at m=8 the discretization deficit is large enough that small perturbations
    // can undercut the regular polygon; 16 is comfortably inside the regime
    // where the regular shape wins
    json j{{"experiment", "ngon_min"},
           {"m", 16},
           {"trials", 10},
           {"delta", 0.05},
           {"m_grid", {8, 16, 64}},
           {"seeds", {1}},
           {"thresholds", {{"assert_min", true}, {"assert_monotone", true}}}};
    auto res = run_ngon_min(ExperimentConfig::from_json(j, ""));
    CHECK(res.thresholds_met);
    CHECK(find_stat(res.rows, "", "regular_wins") == 1.0);
    CHECK(find_stat(res.rows, "", "gap_monotone") == 1.0);
    CHECK(find_stat(res.rows, "8", "regular_energy") < find_stat(res.rows, "64", "regular_energy"));
}

TEST_CASE("compactness runner rejects unbounded densities") {
    json j{{"experiment", "compactness"},
           {"density", {{"kind", "cosine"}, {"c", 1.0}}},
           {"family", 2},
           {"n", 16},
           {"seeds", {1}}};
    CHECK_THROWS(run_compactness_probe(ExperimentConfig::from_json(j, "")));
}

TEST_CASE("blatt runner distinguishes circle from square") {
    json j{{"experiment", "blatt"},
           {"curve", {{"kind", "circle"}, {"length", 1.0}}},
           {"corner_curve", {{"kind", "polygon"}, {"file", "kel_test_sq.txt"}}},
           {"density", {{"kind", "uniform"}}},
           {"N", 256},
           {"n_grid", {64, 256}},
           {"seeds", {1, 2, 3, 4, 5}},
           {"thresholds", {{"exceed", 4.0}}}};
    {
        std::ofstream out("/tmp/kel_test_sq.txt");
        out << "0 0\n0.25 0\n0.25 0.25\n0 0.25\n";
    }
    auto res = run_blatt_divergence(ExperimentConfig::from_json(j, "/tmp"));
    CHECK(res.thresholds_met);
    CHECK(find_stat(res.rows, "smooth", "energy_finite") == 1.0);
    CHECK(find_stat(res.rows, "corner", "energy_finite") == 0.0);
    CHECK(find_stat(res.rows, "corner", "verdicts_agree") == 1.0);
}
