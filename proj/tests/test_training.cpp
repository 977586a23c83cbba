#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include <lrgen/stats.hpp>
#include <lrgen/training.hpp>

#include "fd_util.hpp"

using namespace lrgen;

TEST_CASE("one-sided t survival matches frozen reference values") {
  // Independently sourced reference probabilities P(T > t) at given df.
  CHECK(student_sf(2.0, 10) == Catch::Approx(0.0366940174).margin(1e-8));
  CHECK(student_sf(1.0, 5) == Catch::Approx(0.1816087338).margin(1e-8));
  CHECK(student_sf(2.5, 63) == Catch::Approx(0.0075176022).margin(1e-8));
  CHECK(student_sf(0.0, 12) == Catch::Approx(0.5).margin(1e-12));
  CHECK(student_sf(-1.2, 30) == Catch::Approx(0.8802348246).margin(1e-8));
  CHECK_THROWS_AS(student_sf(1.0, 0), Error);
}

TEST_CASE("paired t-test flags consistent improvement") {
  // a systematically below b: small p (a better under lower-is-better)
  const std::vector<double> a{1.0, 2.0, 1.5, 1.8, 1.2, 2.1};
  std::vector<double> b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.4 + 0.1 * double(i);
  CHECK(paired_t_pvalue(a, b) < 0.01);
  CHECK(paired_t_pvalue(b, a) > 0.99);

  // identical samples: indeterminate direction
  CHECK(paired_t_pvalue(a, a) == 0.5);

  // constant shift with zero variance collapses to a sign test
  CHECK(paired_t_pvalue(std::vector<double>{1, 1, 1},
                        std::vector<double>{2, 2, 2}) == 0.0);
  CHECK(paired_t_pvalue(std::vector<double>{2, 2, 2},
                        std::vector<double>{1, 1, 1}) == 1.0);

  CHECK_THROWS_AS(paired_t_pvalue(a, std::vector<double>{1.0}),
                  DimensionMismatch);
  CHECK_THROWS_AS(paired_t_pvalue(std::vector<double>{1.0},
                                  std::vector<double>{2.0}),
                  DimensionMismatch);
}

TEST_CASE("training configuration validates its ranges") {
  TrainConfig cfg;
  CHECK(cfg.valid());
  cfg.batch = 0;
  CHECK_FALSE(cfg.valid());
  cfg = {};
  cfg.lr = 0.0f;
  CHECK_FALSE(cfg.valid());
  cfg = {};
  cfg.eval_interval = 0;
  CHECK_FALSE(cfg.valid());
  CHECK_THROWS_AS(
      [&] {
        TrainConfig bad;
        bad.epochs = 0;
        MdlramParams p;
        p.init(1);
        train_reinforce(p, bad, make_preset(5, 2), {},
                        selection_objective({}));
      }(),
      Error);
}

TEST_CASE("log lines carry the cost decomposition") {
  TrainLogEntry e;
  e.epoch = 2;
  e.batch = 17;
  e.mean_cost = 9.25;
  e.p_value = 0.03;
  e.baseline_updated = true;
  std::ostringstream os;
  write_log_line(os, e);
  const std::string line = os.str();
  CHECK(line.find("epoch=2") != std::string::npos);
  CHECK(line.find("batch=17") != std::string::npos);
  CHECK(line.find("cost=9.25") != std::string::npos);
  CHECK(line.find(" p=0.03") != std::string::npos);
  CHECK(line.find("baseline=1") != std::string::npos);
  CHECK(line.back() == '\n');

  TrainLogEntry quiet;
  std::ostringstream os2;
  write_log_line(os2, quiet);
  CHECK(os2.str().find(" p=") == std::string::npos);
}

TEST_CASE("objectives wrap the cost functions") {
  const Instance inst = sample_instance(make_preset(5, 2), 3);
  const RoutePlan plan =
      trace_to_plan(rollout(inst, random_policy(), 4).trace, inst);
  const CostCoefficients co;
  CHECK(selection_objective(co)(plan, inst) ==
        Catch::Approx(cost_sel(plan, inst, co).total).margin(1e-12));
  const std::vector<double> rho{1.0, 2.0};
  CHECK(balanced_objective(co, rho)(plan, inst) ==
        Catch::Approx(cost_balanced(plan, inst, co, rho)).margin(1e-12));
}

TEST_CASE("greedy helpers agree with single-instance solves") {
  MdlramParams P;
  P.init(31);
  const CostCoefficients co;
  std::vector<Instance> insts;
  for (int i = 0; i < 5; ++i)
    insts.push_back(sample_instance(make_preset(6, 2), 70 + i));
  const std::vector<RoutePlan> plans = greedy_plans(P, insts, co);
  const std::vector<double> values =
      greedy_objective_values(P, insts, co, selection_objective(co));
  REQUIRE(plans.size() == 5);
  for (int i = 0; i < 5; ++i) {
    const SolveResult single = solve_greedy(P, insts[i], co);
    CHECK(values[i] == Catch::Approx(single.cost).margin(1e-9));
    CHECK(cost_sel(plans[i], insts[i], co).total ==
          Catch::Approx(single.cost).margin(1e-9));
  }
}

TEST_CASE("critic instances open generated depots for free") {
  const Instance graph = sample_customer_graph(make_preset(6, 2), 80);
  const DepotSet set{{{0.2, 0.3}, {0.7, 0.6}}};
  const Instance critic = make_critic_instance(graph, set);
  REQUIRE(critic.m() == 2);
  CHECK(critic.n() == 6);
  CHECK(critic.depots[0].pos.x == 0.2);
  CHECK(critic.depots[1].pos.y == 0.6);
  for (const DepotCandidate& d : critic.depots) {
    CHECK(d.opening_cost == 0.0);
    CHECK(d.max_supply == Catch::Approx(graph.total_demand()).margin(1e-12));
  }
  CHECK(critic.fleet.capacity == graph.fleet.capacity);
}

TEST_CASE("exact-mode depot gradient matches finite differences") {
  MdlramParams frozen;
  frozen.init(32);
  const CostCoefficients co;
  std::mt19937_64 seeds = make_rng(33);
  for (int rep = 0; rep < 5; ++rep) {
    const Instance graph = sample_customer_graph(make_preset(6, 2), seeds());
    std::uniform_real_distribution<double> u(0.1, 0.9);
    DepotSet set;
    set.positions = {{u(seeds), u(seeds)}, {u(seeds), u(seeds)}};

    const Instance critic = make_critic_instance(graph, set);
    const std::vector<RoutePlan> plans =
        critic_plans(frozen, std::span(&graph, 1), std::span(&set, 1), co);
    const RoutePlan& plan = plans[0];

    const std::vector<double> grad =
        depot_coordinate_gradient(critic, set, plan, co);

    // L_Gen with the route structure frozen, as a function of the coordinates.
    auto objective = [&](const DepotSet& s) {
      const Instance moved = make_critic_instance(graph, s);
      return cost_gen(s, plan_route_length(plan, moved), co);
    };
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      DepotSet plus = set, minus = set;
      double& pv = (j % 2 == 0) ? plus.positions[j / 2].x
                                : plus.positions[j / 2].y;
      double& mv = (j % 2 == 0) ? minus.positions[j / 2].x
                                : minus.positions[j / 2].y;
      pv += h;
      mv -= h;
      const double fd = (objective(plus) - objective(minus)) / (2 * h);
      INFO("rep " << rep << " coordinate " << j);
      CHECK(lrgen_test::rel_err(fd, grad[j]) < 1e-2);
    }
  }
}

TEST_CASE("reinforce micro-run trains and evaluates") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 6;
  cfg.batch = 8;
  cfg.eval_interval = 3;
  cfg.eval_batches = 1;
  cfg.seed = 5;
  const ScalePreset preset = make_preset(5, 2);
  const CostCoefficients co;

  MdlramParams params;
  params.init(cfg.seed);
  const std::uint64_t before_hash = params.weights_hash();
  std::ostringstream log;
  const ReinforceOutcome out =
      train_reinforce(params, cfg, preset, co, selection_objective(co), &log);

  CHECK(params.weights_hash() != before_hash);  // the policy moved
  REQUIRE(out.log.size() == 6);
  for (const TrainLogEntry& e : out.log) {
    CHECK(std::isfinite(e.mean_cost));
    CHECK(std::isfinite(e.grad_norm));
    CHECK(e.grad_norm >= 0.0);
  }
  CHECK(out.eval_before > 0.0);
  CHECK(out.eval_after > 0.0);
  CHECK(out.eval_set.size() == std::size_t(cfg.eval_batches) * cfg.batch);
  CHECK_FALSE(log.str().empty());
  // significance tests happen exactly at the interval marks
  CHECK(out.log[2].p_value >= 0.0);
  CHECK(out.log[0].p_value < 0.0);
}

TEST_CASE("balance fine-tuning optimizes the augmented objective") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 4;
  cfg.batch = 8;
  cfg.eval_interval = 2;
  cfg.eval_batches = 1;
  cfg.seed = 6;
  const ScalePreset preset = make_preset(5, 2);
  const CostCoefficients co;

  MdlramParams params;
  params.init(7);
  const std::vector<double> rho{1.0, 1.0};
  const ReinforceOutcome out = finetune_balance(params, rho, cfg, preset, co);
  CHECK(out.eval_before > 0.0);
  CHECK(std::isfinite(out.eval_after));

  // the augmented objective exceeds the plain selection objective
  MdlramParams probe;
  probe.init(7);
  const Instance inst = sample_instance(preset, 99);
  const double sel = selection_objective(co)(
      greedy_plans(probe, std::span(&inst, 1), co)[0], inst);
  const double bal = balanced_objective(co, rho)(
      greedy_plans(probe, std::span(&inst, 1), co)[0], inst);
  CHECK(bal >= sel - 1e-12);
}

TEST_CASE("generator training micro-runs stay finite and move weights") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 3;
  cfg.main_batch = 3;
  cfg.sub_batch = 4;
  cfg.seed = 8;
  const ScalePreset preset = make_preset(5, 2);
  const CostCoefficients co;

  MdlramParams frozen;
  frozen.init(9);
  const std::uint64_t frozen_hash = frozen.weights_hash();

  SECTION("gaussian mode") {
    DgmTrainResult res = train_dgm_gaussian(cfg, frozen, preset, co);
    CHECK(frozen.weights_hash() == frozen_hash);
    REQUIRE(res.log.size() == 3);
    for (const TrainLogEntry& e : res.log) CHECK(std::isfinite(e.mean_cost));
    DgmParams fresh;
    fresh.init(preset.m, cfg.seed);
    CHECK(res.params.weights_hash() != fresh.weights_hash());

    const std::vector<Instance> held{sample_customer_graph(preset, 1000),
                                     sample_customer_graph(preset, 1001)};
    DgmParams trained = res.params;
    const double eval = dgm_gaussian_eval(trained, frozen, held, co, 4, 55);
    CHECK(std::isfinite(eval));
    CHECK(eval > 0.0);
  }
  SECTION("exact mode") {
    DgmTrainResult res = train_dgm_exact(cfg, frozen, preset, co);
    CHECK(frozen.weights_hash() == frozen_hash);
    REQUIRE(res.log.size() == 3);
    DgmParams trained = res.params;
    const std::vector<Instance> held{sample_customer_graph(preset, 1002)};
    const double eval = dgm_exact_eval(trained, frozen, held, co);
    CHECK(std::isfinite(eval));
    CHECK(eval > 0.0);
  }
  SECTION("random depot baseline is reproducible") {
    const std::vector<Instance> held{sample_customer_graph(preset, 1003)};
    const double a = random_depot_eval(frozen, held, preset.m, co, 8, 5);
    const double b = random_depot_eval(frozen, held, preset.m, co, 8, 5);
    const double c = random_depot_eval(frozen, held, preset.m, co, 8, 6);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a > 0.0);
  }
}

TEST_CASE("divergence guard rejects non-finite objectives") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 2;
  cfg.batch = 4;
  cfg.eval_interval = 1;
  cfg.eval_batches = 1;
  MdlramParams params;
  params.init(10);
  const PlanObjective bad = [](const RoutePlan&, const Instance&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(train_reinforce(params, cfg, make_preset(5, 2), {}, bad),
                  Error);
}
