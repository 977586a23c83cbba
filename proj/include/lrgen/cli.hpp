#pragma once

// Command-line front end: gen / solve / train / eval / bench / plot.
// Exposed as cli_run(argc, argv) so tests can drive it in-process; the
// binary's main() is a thin wrapper. Exit codes: 0 success, 1 any module
// error, 2 flag misuse.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cost.hpp"
#include "dgm.hpp"
#include "heuristics.hpp"
#include "instance.hpp"
#include "io.hpp"
#include "mdlram.hpp"
#include "oracle.hpp"
#include "svg.hpp"
#include "training.hpp"

namespace lrgen {

namespace cli_detail {

inline std::string default_out_dir() {
  const char* e = std::getenv("LRGEN_OUT_DIR");
  return e && *e ? e : ".";
}

inline ScalePreset resolve_preset(const std::string& name, int n, int m) {
  ScalePreset p;
  if (name == "small")
    p = preset_small();
  else if (name == "medium")
    p = preset_medium();
  else if (name == "large")
    p = preset_large();
  else
    throw Error("unknown preset: " + name);
  if (n > 0) p.n = n;
  if (m > 0) p.m = m;
  if (!p.valid()) throw Error("preset overrides produce an invalid scale");
  return p;
}

inline MdlramParams load_policy(const std::string& checkpoint,
                                std::uint64_t seed) {
  if (checkpoint.empty()) {
    MdlramParams p;
    p.init(seed);
    return p;
  }
  return MdlramParams::from_checkpoint(nn::load_checkpoint(checkpoint));
}

inline double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

inline RunRecord run_method(const Instance& inst, const CostCoefficients& co,
                            const std::string& method, std::uint64_t seed,
                            int samples, int iterations,
                            const std::string& checkpoint) {
  RunRecord rec;
  rec.method = method;
  rec.seed = seed;
  rec.instance_hash = instance_hash(inst);
  const auto start = std::chrono::steady_clock::now();
  if (method == "alns") {
    AlnsParams p;
    if (iterations > 0) p.iterations = iterations;
    rec.plan = solve_alns(inst, co, p, seed);
  } else if (method == "ga") {
    GaParams p;
    if (iterations > 0) p.generations = iterations;
    rec.plan = solve_ga(inst, co, p, seed);
  } else if (method == "ts") {
    TsParams p;
    if (iterations > 0) p.iterations = iterations;
    rec.plan = solve_ts(inst, co, p, seed);
  } else if (method == "oracle") {
    rec.plan = brute_force(inst, co).best_plan;
  } else if (method == "mdlram-greedy") {
    MdlramParams policy = load_policy(checkpoint, seed);
    rec.plan = solve_greedy(policy, inst, co).plan;
  } else if (method == "mdlram-sample") {
    MdlramParams policy = load_policy(checkpoint, seed);
    rec.plan = solve_sampling(policy, inst, co, samples, seed).plan;
  } else {
    throw Error("unknown method: " + method);
  }
  rec.wall_time_s = seconds_since(start);
  rec.cost = cost_sel(rec.plan, inst, co);
  return rec;
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string part = s.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) out.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct EvalRow {
  std::string method;
  double total = 0, length = 0, depot_cost = 0, depots = 0;
  double vehicle_cost = 0, vehicles = 0, supply_penalty = 0, time_s = 0;
};

inline void print_eval_table(std::ostream& os,
                             const std::vector<EvalRow>& rows) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %10s %10s %14s %14s %10s %10s",
                "Method", "Ttl.C.", "Len.", "Dpt.C.(Nb.)", "Veh.C.(Nb.)",
                "Dpt.P.", "Time(s)");
  os << line << "\n";
  for (const EvalRow& r : rows) {
    char dep[32], veh[32];
    std::snprintf(dep, sizeof(dep), "%.3f(%.2f)", r.depot_cost, r.depots);
    std::snprintf(veh, sizeof(veh), "%.3f(%.2f)", r.vehicle_cost, r.vehicles);
    std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %14s %14s %10.4f %10.2f",
                  r.method.c_str(), r.total, r.length, dep, veh,
                  r.supply_penalty, r.time_s);
    os << line << "\n";
  }
}

}  // namespace cli_detail

inline int cli_run(int argc, const char* const* argv) {
  namespace fs = std::filesystem;
  using cli_detail::resolve_preset;
  using cli_detail::run_method;

  CLI::App app{"location-routing toolkit: instances, solvers, training, plots"};
  app.require_subcommand(1);

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "sample instances to canonical files");
  std::string g_preset = "small", g_out = cli_detail::default_out_dir();
  int g_n = 0, g_m = 0, g_count = 1;
  std::uint64_t g_seed = 1;
  gen->add_option("--preset", g_preset, "small | medium | large");
  gen->add_option("--n", g_n, "customer count override");
  gen->add_option("--m", g_m, "depot count override");
  gen->add_option("--count", g_count, "number of instances");
  gen->add_option("--seed", g_seed, "base seed; instance i uses seed+i");
  gen->add_option("--out", g_out, "output directory");

  // --- solve ---
  auto* solve = app.add_subcommand("solve", "solve one instance file");
  std::string s_instance, s_method, s_checkpoint, s_out;
  std::uint64_t s_seed = 1;
  int s_samples = 1280, s_iterations = 0;
  solve->add_option("--instance", s_instance, "canonical instance file")
      ->required();
  solve
      ->add_option("--method", s_method,
                   "mdlram-greedy | mdlram-sample | alns | ga | ts | oracle")
      ->required();
  solve->add_option("--seed", s_seed, "seed");
  solve->add_option("--samples", s_samples, "rollouts for mdlram-sample");
  solve->add_option("--iterations", s_iterations,
                    "iteration/generation override for heuristics");
  solve->add_option("--checkpoint", s_checkpoint, "policy checkpoint");
  solve->add_option("--out", s_out, "results JSON path");
  double s_alpha = -1, s_beta = -1, s_delta = -1;
  solve->add_option("--alpha", s_alpha, "depot opening weight override");
  solve->add_option("--beta", s_beta, "vehicle setup weight override");
  solve->add_option("--delta", s_delta, "supply penalty weight override");

  // --- train ---
  auto* train = app.add_subcommand("train", "train a model");
  std::string t_model, t_preset = "small", t_out = cli_detail::default_out_dir();
  std::string t_mdlram_ckpt, t_input_ckpt;
  int t_n = 10, t_m = 2, t_epochs = 3, t_batches = 300, t_batch = 64;
  int t_main_batch = 8, t_sub_batch = 16, t_eval_interval = 100,
      t_eval_batches = 4;
  double t_lr = 1e-4;
  std::uint64_t t_seed = 1;
  std::vector<double> t_rho;
  train
      ->add_option("--model", t_model,
                   "mdlram | dgm-gaussian | dgm-exact | balance")
      ->required();
  train->add_option("--preset", t_preset, "small | medium | large");
  train->add_option("--n", t_n, "customer count (default 10, desk scale)");
  train->add_option("--m", t_m, "depot count (default 2, desk scale)");
  train->add_option("--epochs", t_epochs, "epochs");
  train->add_option("--batches", t_batches, "batches per epoch");
  train->add_option("--batch", t_batch, "policy batch size");
  train->add_option("--main-batch", t_main_batch, "generator graphs per batch");
  train->add_option("--sub-batch", t_sub_batch, "depot sets per graph");
  train->add_option("--lr", t_lr, "learning rate");
  train->add_option("--eval-interval", t_eval_interval,
                    "batches between baseline tests");
  train->add_option("--eval-batches", t_eval_batches,
                    "evaluation set size in batches");
  train->add_option("--seed", t_seed, "seed");
  train->add_option("--mdlram-checkpoint", t_mdlram_ckpt,
                    "frozen policy for generator training");
  train->add_option("--checkpoint", t_input_ckpt,
                    "input policy for balance fine-tuning");
  train->add_option("--rho", t_rho, "balance target proportions");
  train->add_option("--out", t_out, "output directory");

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "compare methods over instances");
  std::string e_dir, e_methods = "alns,mdlram-greedy", e_checkpoint, e_out;
  std::string e_preset = "small";
  int e_n = 0, e_m = 0, e_count = 20, e_samples = 1280, e_iterations = 0;
  std::uint64_t e_seed = 1;
  eval->add_option("--instances", e_dir, "directory of canonical files");
  eval->add_option("--preset", e_preset, "preset when sampling instances");
  eval->add_option("--n", e_n, "customer count override");
  eval->add_option("--m", e_m, "depot count override");
  eval->add_option("--count", e_count, "sampled instance count");
  eval->add_option("--methods", e_methods, "comma-separated method list");
  eval->add_option("--seed", e_seed, "seed");
  eval->add_option("--samples", e_samples, "rollouts for mdlram-sample");
  eval->add_option("--iterations", e_iterations, "heuristic iterations");
  eval->add_option("--checkpoint", e_checkpoint, "policy checkpoint");
  eval->add_option("--out", e_out, "summary JSON path");

  // --- bench ---
  auto* bench = app.add_subcommand("bench", "run methods on a benchmark file");
  std::string b_file, b_dialect, b_methods = "alns", b_checkpoint, b_out;
  std::uint64_t b_seed = 1;
  int b_samples = 1280, b_iterations = 0;
  bench->add_option("--file", b_file, "benchmark instance file")->required();
  bench->add_option("--dialect", b_dialect, "prodhon | barreto")->required();
  bench->add_option("--methods", b_methods, "comma-separated method list");
  bench->add_option("--seed", b_seed, "seed");
  bench->add_option("--samples", b_samples, "rollouts for mdlram-sample");
  bench->add_option("--iterations", b_iterations, "heuristic iterations");
  bench->add_option("--checkpoint", b_checkpoint, "policy checkpoint");
  bench->add_option("--out", b_out, "results JSON path");

  // --- plot ---
  auto* plot = app.add_subcommand("plot", "render SVG figures");
  std::string p_instance, p_results, p_dist, p_out;
  int p_record = 0, p_resolution = 200;
  plot->add_option("--instance", p_instance, "canonical instance file");
  plot->add_option("--results", p_results, "results JSON (route map)");
  plot->add_option("--record", p_record, "record index in the results file");
  plot->add_option("--dist", p_dist, "distribution JSON (heatmap)");
  plot->add_option("--resolution", p_resolution, "heatmap grid resolution");
  plot->add_option("--out", p_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const ScalePreset preset = resolve_preset(g_preset, g_n, g_m);
      fs::create_directories(g_out);
      for (int i = 0; i < g_count; ++i) {
        const std::uint64_t seed = g_seed + std::uint64_t(i);
        const Instance inst = sample_instance(preset, seed);
        const fs::path path =
            fs::path(g_out) / ("instance_" + std::to_string(seed) + ".lrp");
        write_text_file(path.string(), emit_canonical(inst));
        std::cout << path.string() << "\n";
      }
    } else if (solve->parsed()) {
      CanonicalFile cf = parse_canonical(read_text_file(s_instance));
      if (s_alpha >= 0) cf.coeffs.alpha = s_alpha;
      if (s_beta >= 0) cf.coeffs.beta = s_beta;
      if (s_delta >= 0) cf.coeffs.delta = s_delta;
      const RunRecord rec =
          run_method(cf.instance, cf.coeffs, s_method, s_seed, s_samples,
                     s_iterations, s_checkpoint);
      if (s_out.empty())
        s_out = (fs::path(cli_detail::default_out_dir()) / "results.json")
                    .string();
      nlohmann::json j = nlohmann::json::array({run_record_json(rec)});
      write_text_file(s_out, j.dump(2) + "\n");
      std::cout << s_method << " total=" << rec.cost.total
                << " length=" << rec.cost.route_length
                << " time=" << rec.wall_time_s << "s -> " << s_out << "\n";
    } else if (train->parsed()) {
      ScalePreset preset = resolve_preset(t_preset, t_n, t_m);
      TrainConfig cfg;
      cfg.epochs = t_epochs;
      cfg.batches_per_epoch = t_batches;
      cfg.batch = t_batch;
      cfg.main_batch = t_main_batch;
      cfg.sub_batch = t_sub_batch;
      cfg.lr = float(t_lr);
      cfg.eval_interval = t_eval_interval;
      cfg.eval_batches = t_eval_batches;
      cfg.seed = t_seed;
      fs::create_directories(t_out);
      std::ofstream metrics((fs::path(t_out) / "metrics.log").string());
      const CostCoefficients co;
      const nlohmann::json config{{"model", t_model}, {"n", preset.n},
                                  {"m", preset.m},    {"seed", t_seed},
                                  {"width", 128},     {"heads", 8}};
      if (t_model == "mdlram") {
        MdlramTrainResult res = train_mdlram(cfg, preset, co, &metrics);
        const fs::path ckpt = fs::path(t_out) / "mdlram.ckpt";
        nn::save_checkpoint(ckpt.string(),
                            res.params.to_checkpoint(config.dump()));
        std::cout << "eval before=" << res.outcome.eval_before
                  << " after=" << res.outcome.eval_after << " -> "
                  << ckpt.string() << "\n";
      } else if (t_model == "balance") {
        if (t_input_ckpt.empty())
          throw Error("balance fine-tuning needs --checkpoint");
        MdlramParams params =
            MdlramParams::from_checkpoint(nn::load_checkpoint(t_input_ckpt));
        std::vector<double> rho = t_rho;
        if (rho.empty()) rho.assign(preset.m, 1.0);
        const ReinforceOutcome outcome =
            finetune_balance(params, rho, cfg, preset, co, &metrics);
        const fs::path ckpt = fs::path(t_out) / "mdlram-balance.ckpt";
        nn::save_checkpoint(ckpt.string(),
                            params.to_checkpoint(config.dump()));
        std::cout << "eval before=" << outcome.eval_before
                  << " after=" << outcome.eval_after << " -> " << ckpt.string()
                  << "\n";
      } else if (t_model == "dgm-gaussian" || t_model == "dgm-exact") {
        if (t_mdlram_ckpt.empty())
          throw Error("generator training needs --mdlram-checkpoint");
        MdlramParams frozen =
            MdlramParams::from_checkpoint(nn::load_checkpoint(t_mdlram_ckpt));
        DgmTrainResult res =
            t_model == "dgm-gaussian"
                ? train_dgm_gaussian(cfg, frozen, preset, co, &metrics)
                : train_dgm_exact(cfg, frozen, preset, co, &metrics);
        const fs::path ckpt = fs::path(t_out) / (t_model + ".ckpt");
        nn::save_checkpoint(ckpt.string(),
                            res.params.to_checkpoint(config.dump()));
        std::cout << "final mean generation cost="
                  << (res.log.empty() ? 0.0 : res.log.back().mean_cost)
                  << " -> " << ckpt.string() << "\n";
        if (t_model == "dgm-gaussian") {
          // export one held-out distribution for plotting
          const Instance graph = sample_customer_graph(preset, t_seed + 777);
          nn::Var h = dgm_encode(res.params,
                                 std::span<const Instance>(&graph, 1), false);
          const GaussianHeadOut head = gaussian_head(res.params, h, false);
          const fs::path dist_path = fs::path(t_out) / "dist.json";
          write_text_file(dist_path.string(),
                          distribution_json(head.distribution(0)).dump(2) +
                              "\n");
          std::cout << "sample distribution -> " << dist_path.string() << "\n";
        }
      } else {
        throw Error("unknown model: " + t_model);
      }
    } else if (eval->parsed()) {
      std::vector<Instance> insts;
      std::vector<CostCoefficients> coeffs;
      if (!e_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(e_dir))
          if (entry.path().extension() == ".lrp") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw Error("no .lrp files in " + e_dir);
        for (const auto& f : files) {
          CanonicalFile cf = parse_canonical(read_text_file(f.string()));
          insts.push_back(std::move(cf.instance));
          coeffs.push_back(cf.coeffs);
        }
      } else {
        const ScalePreset preset = resolve_preset(e_preset, e_n, e_m);
        for (int i = 0; i < e_count; ++i) {
          insts.push_back(sample_instance(preset, e_seed + std::uint64_t(i)));
          coeffs.emplace_back();
        }
      }
      std::vector<cli_detail::EvalRow> rows;
      nlohmann::json records = nlohmann::json::array();
      for (const std::string& method : cli_detail::split_csv(e_methods)) {
        cli_detail::EvalRow row;
        row.method = method;
        for (std::size_t i = 0; i < insts.size(); ++i) {
          const RunRecord rec =
              run_method(insts[i], coeffs[i], method, e_seed, e_samples,
                         e_iterations, e_checkpoint);
          row.total += rec.cost.total;
          row.length += rec.cost.route_length;
          row.depot_cost += rec.cost.depot_cost;
          row.depots += rec.cost.depots_opened;
          row.vehicle_cost += rec.cost.vehicle_cost;
          row.vehicles += rec.cost.vehicles_used;
          row.supply_penalty += rec.cost.supply_penalty;
          row.time_s += rec.wall_time_s;
          records.push_back(run_record_json(rec));
        }
        const double inv = 1.0 / double(insts.size());
        row.total *= inv;
        row.length *= inv;
        row.depot_cost *= inv;
        row.depots *= inv;
        row.vehicle_cost *= inv;
        row.vehicles *= inv;
        row.supply_penalty *= inv;
        rows.push_back(row);
      }
      cli_detail::print_eval_table(std::cout, rows);
      if (!e_out.empty()) {
        nlohmann::json summary = nlohmann::json::array();
        for (const auto& r : rows)
          summary.push_back({{"method", r.method},
                             {"total", r.total},
                             {"length", r.length},
                             {"depot_cost", r.depot_cost},
                             {"depots", r.depots},
                             {"vehicle_cost", r.vehicle_cost},
                             {"vehicles", r.vehicles},
                             {"supply_penalty", r.supply_penalty},
                             {"time_s", r.time_s}});
        write_text_file(e_out, nlohmann::json{{"summary", summary},
                                              {"records", records}}
                                   .dump(2) +
                                   "\n");
      }
    } else if (bench->parsed()) {
      const BenchmarkInstance b =
          parse_benchmark(read_text_file(b_file), b_dialect);
      std::cout << "benchmark n=" << b.n << " m=" << b.m
                << " scale=" << b.scale
                << " rounded_costs=" << (b.rounded_costs ? 1 : 0) << "\n";
      const CostCoefficients co;
      nlohmann::json records = nlohmann::json::array();
      for (const std::string& method : cli_detail::split_csv(b_methods)) {
        const RunRecord rec = run_method(b.normalized, co, method, b_seed,
                                         b_samples, b_iterations, b_checkpoint);
        const double raw_total = rec.cost.total * b.scale;
        std::cout << method << " normalized=" << rec.cost.total
                  << " raw=" << raw_total << " time=" << rec.wall_time_s
                  << "s\n";
        nlohmann::json j = run_record_json(rec);
        j["raw_total"] = raw_total;
        j["scale"] = b.scale;
        j["rounded_costs"] = b.rounded_costs;
        records.push_back(std::move(j));
      }
      if (!b_out.empty())
        write_text_file(b_out, records.dump(2) + "\n");
    } else if (plot->parsed()) {
      if (!p_dist.empty()) {
        const DepotDistribution dist = distribution_from_json(
            nlohmann::json::parse(read_text_file(p_dist)));
        write_text_file(p_out, render_gaussian_heatmap(dist, p_resolution));
      } else {
        if (p_instance.empty() || p_results.empty())
          throw Error("route map needs --instance and --results");
        const CanonicalFile cf = parse_canonical(read_text_file(p_instance));
        const nlohmann::json results =
            nlohmann::json::parse(read_text_file(p_results));
        if (!results.is_array() || p_record < 0 ||
            p_record >= static_cast<int>(results.size()))
          throw Error("record index out of range in results file");
        RoutePlan plan;
        for (const auto& jr : results[p_record].at("routes")) {
          Route r;
          r.depot = jr.at("depot").get<int>();
          r.stops = jr.at("stops").get<std::vector<int>>();
          plan.routes.push_back(std::move(r));
        }
        write_text_file(p_out, render_route_map(cf.instance, plan));
      }
      std::cout << p_out << "\n";
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lrgen
