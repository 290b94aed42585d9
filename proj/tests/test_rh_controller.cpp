#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "stochvsl/rh_controller.hpp"

using namespace stochvsl;

namespace {

const ExperimentConfig kCfg = case_study_config();
const Corridor kCorridor = build_corridor(kCfg);

double vehicles(const CorridorSimulator& sim) {
  double q = 0.0;
  for (const auto& [id, v] : sim.queues()) q += v;
  return sim.stored() + q * kCfg.horizon.T;
}

void check_bounds(const Trajectory& tr, const Corridor& c) {
  for (const auto& s : tr.steps) {
    CHECK(s.queue >= 0.0);
    CHECK(s.ramp_queue >= 0.0);
    CHECK(s.inflow >= 0.0);
    CHECK(s.inflow <= std::max(0.0, s.control) + 1e-9);
    for (const auto& l : c.links) {
      CHECK(s.q_in.at(l.id) >= -1e-12);
      CHECK(s.q_out.at(l.id) >= -1e-12);
      for (double r : s.density.at(l.id)) {
        CHECK(r >= 0.0);
        CHECK(r <= l.fd.rho_m);
      }
      if (l.is_vsl) {
        CHECK(l.speed_index(s.speed_limit.at(l.id)) >= 0);
      }
    }
  }
}

}  // namespace

TEST_CASE("controller names") {
  for (auto k : kAllControllers) CHECK(parse_controller(to_string(k)) == k);
  CHECK(std::string(to_string(ControllerKind::two_stage)) == "two-stage");
  CHECK_THROWS_AS(parse_controller("d-median"), InvalidParameter);
}

TEST_CASE("simulator conserves vehicles under random controls") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.5);
  CorridorSimulator sim(kCorridor, 20.0, empty_state(kCorridor, kCfg.horizon));
  double entered = 0.0, exited = 0.0, arrived = 0.0;
  const double start = vehicles(sim);
  for (int k = 0; k < 48; ++k) {
    const double d = u(rng);
    const auto f = sim.step({{"in", u(rng)}}, {{"in", d}});
    arrived += (d + 0.05) * 20.0;
    entered += (f.entry_inflow + f.ramp_inflow) * 20.0;
    exited += f.q_out.at("L4") * 20.0;
    for (const auto& [id, q] : f.q_in) CHECK(q >= 0.0);
    for (const auto& [id, rho] : sim.state(8).density)
      for (double r : rho) CHECK((r >= 0.0 && r <= 0.5));
    if (k % 4 == 3) sim.chain();
    if (k == 20) sim.set_speed("L3", 1);
  }
  CHECK(vehicles(sim) == doctest::Approx(start + arrived - exited).epsilon(1e-9));
  CHECK(sim.stored() == doctest::Approx(entered - exited).epsilon(1e-9));
  CHECK(sim.speed("L3") == 1);
  CHECK(sim.fd("L3").vf == 15.0);
  CHECK(sim.time() == doctest::Approx(48 * 20.0));
}

TEST_CASE("simulator input errors") {
  CorridorSimulator sim(kCorridor, 20.0, empty_state(kCorridor, kCfg.horizon));
  CHECK_THROWS_AS(sim.step({}, {{"in", 1.0}}), InvalidParameter);
  CHECK_THROWS_AS(sim.step({{"in", 1.0}}, {{"in", -1.0}}), InvalidParameter);
  CHECK_THROWS_AS(sim.set_speed("L3", 5), InvalidParameter);
  CHECK_THROWS_AS(sim.set_speed("L2", 0), InvalidParameter);
  auto bad = empty_state(kCorridor, kCfg.horizon);
  bad.density.erase("L2");
  CHECK_THROWS_AS(CorridorSimulator(kCorridor, 20.0, bad), InvalidParameter);
  bad = empty_state(kCorridor, kCfg.horizon);
  bad.queue["in"] = -1.0;
  CHECK_THROWS_AS(CorridorSimulator(kCorridor, 20.0, bad), InvalidParameter);
}

TEST_CASE("inflow is limited by the control and the waiting vehicles") {
  CorridorSimulator sim(kCorridor, 20.0, empty_state(kCorridor, kCfg.horizon));
  auto f = sim.step({{"in", 0.5}}, {{"in", 2.0}});
  CHECK(f.entry_inflow == doctest::Approx(0.5));
  CHECK(sim.queues().at("in") == doctest::Approx(1.5));
  f = sim.step({{"in", 2.0}}, {{"in", 0.2}});
  CHECK(f.entry_inflow == doctest::Approx(1.7));
  CHECK(sim.queues().at("in") == doctest::Approx(0.0));
  f = sim.step({{"in", 0.0}}, {{"in", 1.0}});
  CHECK(f.entry_inflow == 0.0);
  CHECK(f.ramp_inflow == doctest::Approx(0.05));
}

TEST_CASE("closed loop bounds and conservation") {
  const auto settings = settings_from(kCfg);
  for (auto kind : {ControllerKind::d_min, ControllerKind::d_max}) {
    const auto tr = run_closed_loop(kCorridor, {2.0, 1.0, 1.5}, kind, settings, 7);
    CHECK(tr.controller == kind);
    CHECK(tr.seed == 7);
    REQUIRE(tr.steps.size() == 24);
    REQUIRE(tr.horizons.size() == 3);
    CHECK(conservation_error(tr) <= 1e-6);
    check_bounds(tr, kCorridor);
    for (const auto& h : tr.horizons) {
      CHECK(h.plan.status != "infeasible");
      CHECK(h.replan.status != "infeasible");
      CHECK(h.demand_column.size() == 8);
      CHECK(h.t0 == doctest::Approx(h.index * 160.0));
    }
    // queue carried across horizons
    CHECK(tr.horizons[1].initial_queue == doctest::Approx(tr.steps[7].queue));
  }
}

TEST_CASE("zero demand admits nothing and keeps the top speed") {
  auto cfg = kCfg;
  cfg.ramps[0].demand = 0.0;
  cfg.demand = DemandDistribution::point(0.0);
  const auto c = build_corridor(cfg);
  const auto tr = run_closed_loop(c, {0.0, 0.0}, ControllerKind::two_stage, settings_from(cfg));
  for (const auto& s : tr.steps) {
    CHECK(s.inflow == 0.0);
    CHECK(s.exit_outflow == 0.0);
    CHECK(s.speed_limit.at("L3") == 30.0);
  }
  CHECK(tr.total_entered == 0.0);
}

TEST_CASE("point distribution: two-stage reproduces the baselines") {
  auto cfg = kCfg;
  cfg.demand = DemandDistribution::point(1.5);
  const auto settings = settings_from(cfg);
  const std::vector<double> stream{1.5, 1.5, 1.5};
  const auto two = run_closed_loop(kCorridor, stream, ControllerKind::two_stage, settings);
  for (auto kind : {ControllerKind::d_min, ControllerKind::d_mean, ControllerKind::d_max}) {
    const auto base = run_closed_loop(kCorridor, stream, kind, settings);
    REQUIRE(base.steps.size() == two.steps.size());
    for (std::size_t k = 0; k < two.steps.size(); ++k) {
      CHECK(base.steps[k].control == two.steps[k].control);
      CHECK(base.steps[k].inflow == two.steps[k].inflow);
      CHECK(base.steps[k].speed_limit == two.steps[k].speed_limit);
    }
    CHECK(base.total_exited == two.total_exited);
  }
}

TEST_CASE("closed loop argument checks") {
  const auto settings = settings_from(kCfg);
  CHECK_THROWS_AS(run_closed_loop(kCorridor, {1.2}, ControllerKind::d_mean, settings), InvalidParameter);
  auto two_entries = kCorridor;
  for (auto& e : two_entries.entries) e.controlled = true;
  CHECK_THROWS_AS(run_closed_loop(two_entries, {1.0}, ControllerKind::d_mean, settings), InvalidParameter);
  auto h = settings;
  h.horizon.rolling_steps = 9;
  CHECK_THROWS_AS(run_closed_loop(kCorridor, {1.0}, ControllerKind::d_mean, h), InvalidParameter);
}

TEST_CASE("solver failures carry the horizon") {
  auto settings = settings_from(kCfg);
  settings.solver.node_limit = 0;
  try {
    run_closed_loop(kCorridor, {1.0, 2.0}, ControllerKind::d_mean, settings);
    FAIL("expected a controller error");
  } catch (const ControllerError& e) {
    CHECK(e.horizon() == 0);
    CHECK(std::string(e.what()).find("horizon 0") != std::string::npos);
  }
}

TEST_CASE("trajectory csv") {
  const auto tr = run_closed_loop(kCorridor, {1.0}, ControllerKind::d_mean, settings_from(kCfg), 3);
  const auto path = std::filesystem::temp_directory_path() / "stochvsl_traj.csv";
  write_trajectory_csv(tr, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "controller,seed,step,horizon,t,element,q_in,q_out,queue,control,demand,speed_limit,rho_1,rho_2");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 13);
    CHECK(line.rfind("d-mean,3,", 0) == 0);
  }
  CHECK(rows == 8 * (2 + 4));
  std::filesystem::remove(path);
  CHECK_THROWS(write_trajectory_csv(tr, "/nonexistent/dir/x.csv"));
}
