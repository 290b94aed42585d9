#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "stochvsl/experiment.hpp"

using namespace stochvsl;

namespace {

ExperimentConfig small_config(int horizons) {
  auto cfg = case_study_config();
  cfg.horizon.horizons = horizons;
  return cfg;
}

// Trajectory with hand-set inflows; only the fields the metrics read.
Trajectory toy(const std::vector<std::vector<double>>& inflow, const std::vector<std::vector<double>>& demand,
               const std::vector<double>& queue) {
  Trajectory t;
  t.T = 20.0;
  int step = 0;
  for (std::size_t h = 0; h < inflow.size(); ++h) {
    HorizonRecord hr;
    hr.index = static_cast<int>(h);
    hr.initial_queue = queue[h];
    hr.demand_column = demand[h];
    t.horizons.push_back(hr);
    for (double q : inflow[h]) {
      StepRecord s;
      s.step = step++;
      s.horizon = static_cast<int>(h);
      s.inflow = q;
      s.exit_outflow = q;
      t.steps.push_back(s);
    }
  }
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("splitmix64 reference values") {
  // first outputs of the reference generator seeded with 0
  CHECK(splitmix64(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64(0, 1) == 0x6E789E6AA1B965F4ULL);
  CHECK(splitmix64(0, 2) == 0x06C45D188009454FULL);
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const double u = uniform01(42, c);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("demand streams") {
  const DemandDistribution dist{{1.0, 1.5, 2.0}, {0.4, 0.2, 0.4}};
  CHECK(sample_demand_stream(DemandDistribution::point(1.2), 40, 3) == std::vector<double>(40, 1.2));
  CHECK(sample_demand_stream(dist, 40, 9) == sample_demand_stream(dist, 40, 9));
  CHECK(sample_demand_stream(dist, 40, 9) != sample_demand_stream(dist, 40, 10));
  // a longer stream extends a shorter one
  const auto a = sample_demand_stream(dist, 10, 5), b = sample_demand_stream(dist, 40, 5);
  CHECK(std::equal(a.begin(), a.end(), b.begin()));

  const int n = 100000;
  const auto s = sample_demand_stream(dist, n, 1);
  for (int j = 0; j < 3; ++j) {
    const double freq = static_cast<double>(std::count(s.begin(), s.end(), dist.levels[j])) / n;
    CHECK(freq == doctest::Approx(dist.probabilities[j]).epsilon(0.01 / dist.probabilities[j]));
  }
  // zero-probability levels never occur
  const auto sym = sample_demand_stream(DemandDistribution::symmetric(0.0, 1, 1.5, 2), 1000, 2);
  CHECK(sym == std::vector<double>(1000, 1.5));
  CHECK_THROWS_AS(sample_demand_stream(dist, -1, 1), InvalidParameter);
}

TEST_CASE("metrics on hand-built trajectories") {
  const ObjectiveWeights w;
  SUBCASE("zero demand") {
    const auto t = toy({{0, 0, 0, 0}}, {{0, 0, 0, 0}}, {0.0});
    const auto m = compute_metrics(t, w);
    CHECK(m.block == 0.0);
    CHECK(m.fluctuation == 0.0);
    CHECK(m.throughput == 0.0);
    CHECK(m.combined == 0.0);
  }
  SUBCASE("constant per horizon: boundary jumps are not counted") {
    const auto t = toy({{1, 1, 1, 1}, {2, 2, 2, 2}}, {{1, 1, 1, 1}, {2, 2, 2, 2}}, {0.0, 0.0});
    const auto m = compute_metrics(t, w);
    CHECK(m.fluctuation == 0.0);
    CHECK(m.block == 0.0);
    CHECK(m.throughput == doctest::Approx(12 * 20.0));
  }
  SUBCASE("one mid-horizon drop") {
    const auto t = toy({{1, 1, 1, 1}, {1, 1, 0.3, 0.3}}, {{1, 1, 1, 1}, {1, 1, 1, 1}}, {0.0, 0.5});
    const auto m = compute_metrics(t, w);
    CHECK(m.fluctuation == doctest::Approx(w.w4 * 0.7));
    // cumulative shortfall 0, 0, 0.7, 1.4 with e = 0.5
    CHECK(m.block == doctest::Approx(w.w3 * 1.5 * 2.1));
    CHECK(m.combined == doctest::Approx(m.block + m.fluctuation));
    REQUIRE(m.jumps.size() == 6);
    CHECK(m.jumps[4] == doctest::Approx(-0.7));
  }
  SUBCASE("mismatched horizon") {
    auto t = toy({{1, 1}}, {{1, 1, 1}}, {0.0});
    CHECK_THROWS_AS(compute_metrics(t, w), InvalidParameter);
  }
}

TEST_CASE("metrics of a closed-loop run") {
  const auto cfg = small_config(3);
  const auto corridor = build_corridor(cfg);
  const auto traj = run_closed_loop(corridor, {2.0, 1.0, 2.0}, ControllerKind::d_max, settings_from(cfg), 4);
  const auto m = compute_metrics(traj, cfg.weights);
  CHECK(m.ok());
  CHECK(m.block >= 0.0);
  CHECK(m.fluctuation >= 0.0);
  CHECK(m.throughput == doctest::Approx(traj.total_exited));
  CHECK(m.conservation <= 1e-6);
  CHECK(m.queue_series.size() == 24);
  for (double j : m.jumps) CHECK(j <= 1e-9);
}

TEST_CASE("comparison with a point distribution gives identical rows") {
  auto cfg = small_config(2);
  cfg.demand = DemandDistribution::point(1.5);
  const auto rep = run_comparison(cfg, {1}, {1, true, {}});
  REQUIRE(rep.runs.size() == 4);
  REQUIRE(rep.trajectories.size() == 4);
  for (const auto& r : rep.runs) {
    CHECK(r.ok());
    CHECK(r.block == rep.runs[0].block);
    CHECK(r.fluctuation == rep.runs[0].fluctuation);
    CHECK(r.throughput == rep.runs[0].throughput);
  }
  for (auto k : {ControllerKind::d_min, ControllerKind::d_mean, ControllerKind::d_max}) {
    CHECK(rep.of(k).runs == 1);
    if (rep.of(k).combined > 0.0) CHECK(*rep.reduction(k) == doctest::Approx(0.0));
  }
}

TEST_CASE("comparison is deterministic across thread counts") {
  auto cfg = small_config(2);
  cfg.demand = {{1.0, 2.0}, {0.5, 0.5}};
  int seen = 0;
  RunOptions one{1, false, [&](const RunMetrics&) { ++seen; }};
  const auto a = run_comparison(cfg, {1, 2}, one);
  const auto b = run_comparison(cfg, {1, 2}, {2, false, {}});
  CHECK(seen == 8);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].seed == b.runs[i].seed);
    CHECK(a.runs[i].controller == b.runs[i].controller);
    CHECK(a.runs[i].combined == b.runs[i].combined);
    CHECK(a.runs[i].queue_series == b.runs[i].queue_series);
  }
  CHECK(a.runs[0].seed == 1);
  CHECK(a.runs[4].seed == 2);
  CHECK(a.runs[1].controller == ControllerKind::d_min);
}

TEST_CASE("failed runs are recorded and the rest continue") {
  auto cfg = small_config(1);
  cfg.solver.node_limit = 0;
  const auto rep = run_comparison(cfg, {1}, {1, false, {}});
  for (const auto& r : rep.runs) {
    CHECK_FALSE(r.ok());
    CHECK(r.error.find("horizon 0") != std::string::npos);
  }
  CHECK(rep.of(ControllerKind::d_mean).failures == 1);
  CHECK_FALSE(rep.reduction(ControllerKind::d_mean).has_value());
}

TEST_CASE("sweep endpoint and sd column") {
  auto cfg = small_config(2);
  const auto rows = run_sd_sweep(cfg, {0.0}, {1, 2}, {1, false, {}});
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.sd == 0.0);
    CHECK(r.summary.runs == 2);
    CHECK(r.summary.combined == rows[0].summary.combined);
    CHECK(r.summary.throughput == rows[0].summary.throughput);
  }
  CHECK_THROWS_AS(run_sd_sweep(cfg, {0.6}, {1}), InvalidParameter);
}

TEST_CASE("csv outputs and manifest") {
  auto cfg = small_config(1);
  cfg.demand = DemandDistribution::point(1.0);
  const auto rep = run_comparison(cfg, {7}, {1, false, {}});
  const auto dir = std::filesystem::temp_directory_path() / "stochvsl_exp_test";
  std::filesystem::create_directories(dir);
  write_metrics_csv(rep, (dir / "metrics.csv").string());
  write_summary_csv(rep, (dir / "summary.csv").string());
  write_queue_csv(rep, (dir / "queue.csv").string());
  write_jumps_csv(rep, (dir / "jumps.csv").string());
  write_sweep_csv({{0.4, 0.447, rep.summary[0]}}, (dir / "sweep.csv").string());
  write_manifest(cfg, {7}, "compare", (dir / "manifest.json").string());

  const auto metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.rfind("seed,controller,block,", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 5);
  const auto summary = slurp(dir / "summary.csv");
  CHECK(summary.find("two-stage,1,0,") != std::string::npos);
  const auto queue = slurp(dir / "queue.csv");
  CHECK(std::count(queue.begin(), queue.end(), '\n') == 1 + 4 * 8);
  CHECK(slurp(dir / "sweep.csv").find("0.4,0.447000,two-stage") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(j["command"] == "compare");
  CHECK(j["seeds"][0] == 7);
  CHECK(j["config_fnv1a"] == fmt::format("{:016x}", fnv1a(dump_config(cfg))));
  std::filesystem::remove_all(dir);
}
