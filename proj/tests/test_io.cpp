#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <lrgen/cli.hpp>
#include <lrgen/io.hpp>
#include <lrgen/svg.hpp>

using namespace lrgen;
namespace fs = std::filesystem;

namespace {

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t p = hay.find(needle); p != std::string_view::npos;
       p = hay.find(needle, p + needle.size()))
    ++n;
  return n;
}

std::string data_path(const std::string& rel) {
  return std::string(LRGEN_DATA_DIR) + "/" + rel;
}

fs::path fresh_tmp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(std::initializer_list<std::string> args) {
  const std::vector<std::string> owned(args);
  std::vector<const char*> argv;
  argv.push_back("lrgen");
  for (const std::string& s : owned) argv.push_back(s.c_str());
  return cli_run(int(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("doubles render to shortest exact round trip") {
  for (const double v : {0.1, 1.0 / 3.0, 13.142135623730953, -2.5, 0.0, 70.0}) {
    const std::string s = render_double(v);
    double back = 0.0;
    REQUIRE(std::from_chars(s.data(), s.data() + s.size(), back).ec ==
            std::errc{});
    CHECK(back == v);
  }
  CHECK(render_double(70.0).size() <= 4);
}

TEST_CASE("canonical files round-trip losslessly") {
  std::mt19937_64 rng = make_rng(4242);
  for (int i = 0; i < 300; ++i) {
    const int n = 1 + int(rng() % 12), m = 1 + int(rng() % 3);
    const Instance inst = sample_instance(make_preset(n, m), rng());
    CostCoefficients co;
    co.alpha = 0.5 * double(rng() % 5);
    co.lambda = 1.0 + double(rng() % 20);
    co.l_min = 0.1 + 0.01 * double(rng() % 10);
    const std::string text = emit_canonical(inst, co);
    const CanonicalFile f = parse_canonical(text);
    INFO("instance " << i << " n=" << n << " m=" << m);
    REQUIRE(emit_canonical(f.instance, f.coeffs) == text);
  }

  // decoded fields, not just the re-emitted string
  const Instance inst = sample_instance(make_preset(4, 2), 99);
  CostCoefficients co;
  co.delta = 3.25;
  const CanonicalFile f = parse_canonical(emit_canonical(inst, co));
  CHECK(f.instance.n() == 4);
  CHECK(f.instance.m() == 2);
  CHECK(f.instance.fleet.capacity == inst.fleet.capacity);
  CHECK(f.instance.fleet.setup_cost == inst.fleet.setup_cost);
  CHECK(f.coeffs.delta == 3.25);
  for (int k = 0; k < 2; ++k) {
    CHECK(f.instance.depots[k].pos.x == inst.depots[k].pos.x);
    CHECK(f.instance.depots[k].max_supply == inst.depots[k].max_supply);
    CHECK(f.instance.depots[k].opening_cost == inst.depots[k].opening_cost);
  }
  for (int k = 0; k < 4; ++k) {
    CHECK(f.instance.customers[k].pos.y == inst.customers[k].pos.y);
    CHECK(f.instance.customers[k].demand == inst.customers[k].demand);
  }

  // customer-free and depot-free corner files survive too
  Instance corner;
  corner.depots = {{{0.5, 0.5}, 20.0, 3.0}};
  corner.fleet = {30.0, 0.3};
  const std::string corner_text = emit_canonical(corner);
  CHECK(emit_canonical(parse_canonical(corner_text).instance) == corner_text);
}

TEST_CASE("instance hashes are stable and discriminating") {
  const Instance a = sample_instance(make_preset(5, 2), 7);
  const std::string h1 = instance_hash(a);
  CHECK(h1 == instance_hash(a));
  CHECK(h1.size() == 16);
  CHECK(h1.find_first_not_of("0123456789abcdef") == std::string::npos);
  Instance b = a;
  b.customers[0].demand += 1.0;
  CHECK(instance_hash(b) != h1);
}

TEST_CASE("canonical parser reports where it failed") {
  const std::string good = emit_canonical(sample_instance(make_preset(2, 1), 3));

  SECTION("truncation") {
    CHECK_THROWS_AS(parse_canonical(good.substr(0, good.size() / 2)),
                    ParseError);
  }
  SECTION("wrong header") {
    CHECK_THROWS_AS(parse_canonical("nonsense v1\nn 1\n"), ParseError);
  }
  SECTION("reordered sections") {
    std::string swapped = good;
    const auto n_pos = swapped.find("\nn ");
    swapped.replace(n_pos, 3, "\nm ");
    CHECK_THROWS_AS(parse_canonical(swapped), ParseError);
  }
  SECTION("trailing content") {
    try {
      parse_canonical(good + "extra 1 2\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("trailing") != std::string::npos);
      CHECK(e.line > 1);
    }
  }
  SECTION("non-numeric token with line and column") {
    const std::string text =
        "lrgen-instance v1\n"
        "n 2\n"
        "m 1\n"
        "capacity 30\n"
        "setup_cost 0.3\n"
        "coeffs 1 1 2 10 10 0.2 0.7\n"
        "depot 0.5 0.5 20 3\n"
        "customer 0.1 0.2 4\n"
        "customer 0.3 0.4 abc\n";
    try {
      parse_canonical(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line == 9);
      CHECK(e.column == 18);
    }
  }
}

TEST_CASE("bundled depot-coords-first benchmark parses and normalizes") {
  const BenchmarkInstance b =
      parse_benchmark(read_text_file(data_path("benchmarks/sample-20-5.dat")),
                      "prodhon");
  CHECK(b.n == 20);
  CHECK(b.m == 5);
  CHECK(b.rounded_costs);
  CHECK(b.raw.fleet.capacity == 70.0);
  CHECK(b.raw.fleet.setup_cost == 1000.0);
  CHECK(b.raw.depots[0].pos.x == 6.0);
  CHECK(b.raw.depots[0].pos.y == 7.0);
  CHECK(b.raw.depots[0].opening_cost == 10841.0);
  CHECK(b.raw.depots[2].max_supply == 140.0);
  CHECK(b.raw.customers[0].pos.x == 12.0);
  CHECK(b.raw.customers[0].demand == 17.0);

  // isotropic max-span normalization: x spans 2..46, y spans 5..45
  CHECK(b.scale == 44.0);
  CHECK(b.offset.x == 2.0);
  CHECK(b.offset.y == 5.0);
  for (int v = 0; v < b.normalized.vertex_count(); ++v) {
    const Position& p = b.normalized.vertex_pos(v);
    CHECK(p.x >= 0.0);
    CHECK(p.x <= 1.0);
    CHECK(p.y >= 0.0);
    CHECK(p.y <= 1.0);
  }
  CHECK(b.normalized.depots[0].pos.x == Catch::Approx(4.0 / 44.0));
  CHECK(b.normalized.depots[0].opening_cost ==
        Catch::Approx(10841.0 / 44.0));
  CHECK(b.normalized.fleet.setup_cost == Catch::Approx(1000.0 / 44.0));
  CHECK(b.normalized.fleet.capacity == 70.0);        // loads are untouched
  CHECK(b.normalized.customers[0].demand == 17.0);

  // raw length = scale * normalized length
  const double raw_d = distance(b.raw.depots[0].pos, b.raw.depots[1].pos);
  const double norm_d =
      distance(b.normalized.depots[0].pos, b.normalized.depots[1].pos);
  CHECK(raw_d == Catch::Approx(b.scale * norm_d).margin(1e-9));
}

TEST_CASE("bundled customer-coords-first benchmark parses and normalizes") {
  const BenchmarkInstance b =
      parse_benchmark(read_text_file(data_path("benchmarks/sample-12-2.dat")),
                      "barreto");
  CHECK(b.n == 12);
  CHECK(b.m == 2);
  CHECK_FALSE(b.rounded_costs);
  CHECK(b.raw.fleet.capacity == 80.0);
  CHECK(b.raw.fleet.setup_cost == 0.0);
  // the first coordinate block belongs to the customers in this layout
  CHECK(b.raw.customers[0].pos.x == 22.0);
  CHECK(b.raw.customers[0].pos.y == 22.0);
  CHECK(b.raw.customers[0].demand == 18.0);
  CHECK(b.raw.depots[0].pos.x == 15.0);
  CHECK(b.raw.depots[1].pos.y == 31.0);
  CHECK(b.raw.depots[1].max_supply == 135.0);
  CHECK(b.raw.depots[1].opening_cost == 270.0);
  // x spans 15..55 (40), y spans 20..66 (46); the larger span wins
  CHECK(b.scale == 46.0);
  CHECK(b.offset.x == 15.0);
  CHECK(b.offset.y == 20.0);
}

TEST_CASE("benchmarks already inside the unit square are left alone") {
  const std::string text =
      "1 1\n"
      "0.2 0.3\n"
      "0.6 0.5\n"
      "10\n"
      "20\n"
      "4\n"
      "3\n"
      "0.5\n"
      "0\n";
  const BenchmarkInstance b = parse_benchmark(text, "prodhon");
  CHECK(b.scale == 1.0);
  CHECK(b.offset.x == 0.0);
  CHECK(emit_canonical(b.normalized) == emit_canonical(b.raw));
}

TEST_CASE("benchmark parsing rejects malformed input") {
  CHECK_THROWS_AS(parse_benchmark("1 1\n0 0\n", "martello"),
                  UnsupportedDialect);
  CHECK_THROWS_AS(parse_benchmark("0 1\n", "prodhon"), ParseError);
  const std::string good = read_text_file(data_path("benchmarks/sample-12-2.dat"));
  CHECK_THROWS_AS(parse_benchmark(good.substr(0, good.size() - 10), "barreto"),
                  ParseError);
  CHECK_THROWS_AS(parse_benchmark(good + "\n99\n", "barreto"), ParseError);
}

TEST_CASE("run records serialize every cost component") {
  RunRecord r;
  r.instance_hash = "00ff00ff00ff00ff";
  r.method = "alns";
  r.seed = 7;
  r.cost.total = 5.5;
  r.cost.route_length = 2.5;
  r.cost.depot_cost = 1.0;
  r.cost.depots_opened = 1;
  r.cost.vehicle_cost = 2.0;
  r.cost.vehicles_used = 2;
  r.plan.routes = {{0, {2, 3}, 7.0}, {0, {4}, 3.0}};
  r.wall_time_s = 0.125;
  const nlohmann::json j = run_record_json(r);
  CHECK(j.at("instance") == "00ff00ff00ff00ff");
  CHECK(j.at("method") == "alns");
  CHECK(j.at("seed") == 7);
  CHECK(j.at("cost").at("total") == 5.5);
  CHECK(j.at("cost").at("vehicles_used") == 2);
  CHECK(j.at("cost").at("supply_penalty") == 0.0);
  REQUIRE(j.at("routes").size() == 2);
  CHECK(j.at("routes")[0].at("depot") == 0);
  CHECK(j.at("routes")[0].at("stops") == std::vector<int>{2, 3});
  CHECK(j.at("wall_time_s") == 0.125);
}

TEST_CASE("depot distributions survive JSON export") {
  DepotDistribution d;
  d.m = 2;
  d.mean = {0.1, -0.2, 0.3, 0.4};
  d.factor.assign(16, 0.0);
  for (int i = 0; i < 4; ++i) d.factor[std::size_t(i) * 4 + i] = 0.5 + 0.1 * i;
  d.factor[1 * 4 + 0] = -0.3;

  const nlohmann::json j = distribution_json(d);
  CHECK(j.at("covariance").size() == 16);
  const DepotDistribution back = distribution_from_json(j);
  CHECK(back.m == 2);
  CHECK(back.mean == d.mean);
  CHECK(back.factor == d.factor);

  nlohmann::json bad = j;
  bad["factor"] = std::vector<double>(15, 0.0);
  CHECK_THROWS_AS(distribution_from_json(bad), DimensionMismatch);
}

TEST_CASE("text file helpers round-trip bytes") {
  const fs::path dir = fresh_tmp_dir("lrgen_io_files");
  const std::string path = (dir / "probe.txt").string();
  const std::string content = "line one\nline two\n\ttab and \xc3\xa9\n";
  write_text_file(path, content);
  CHECK(read_text_file(path) == content);
  CHECK_THROWS_AS(read_text_file((dir / "missing.txt").string()), Error);
}

TEST_CASE("route maps draw every route, customer, and depot") {
  Instance inst;
  inst.depots = {{{0.1, 0.1}, 50.0, 2.0}, {{0.9, 0.9}, 50.0, 2.0}};
  inst.customers = {{{0.3, 0.2}, 4.0}, {{0.5, 0.6}, 5.0}, {{0.8, 0.7}, 6.0}};
  inst.fleet = {30.0, 0.3};
  RoutePlan plan;
  plan.routes = {{0, {2, 3}, 9.0}, {1, {4}, 6.0}, {1, {}, 0.0}};

  const std::string svg = render_route_map(inst, plan);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_occurrences(svg, "<polyline") == 2);  // empty routes are skipped
  CHECK(count_occurrences(svg, "<circle") == 3);
  // background, unit-square frame, and one square per depot
  CHECK(count_occurrences(svg, "<rect") == 4);
}

TEST_CASE("density grids integrate to one per depot") {
  SECTION("single centered depot") {
    DepotDistribution d;
    d.m = 1;
    d.mean = {0.0, 0.0};
    d.factor = {0.5, 0.0, 0.0, 0.5};
    const int res = 64;
    const std::vector<double> grid = gaussian_density_grid(d, res);
    double mass = 0.0;
    double peak = -1.0;
    int peak_cell = -1;
    for (int i = 0; i < res * res; ++i) {
      mass += grid[i];
      if (grid[i] > peak) {
        peak = grid[i];
        peak_cell = i;
      }
    }
    mass /= double(res) * res;  // cell area
    CHECK(mass == Catch::Approx(1.0).margin(0.05));
    // mode of the unimodal transformed density sits at sigmoid(0) = 0.5
    const double px = (peak_cell % res + 0.5) / res;
    const double py = (peak_cell / res + 0.5) / res;
    CHECK(std::abs(px - 0.5) < 0.1);
    CHECK(std::abs(py - 0.5) < 0.1);
  }
  SECTION("two depots double the mass") {
    DepotDistribution d;
    d.m = 2;
    d.mean = {0.0, 0.0, 2.0, 2.0};
    d.factor.assign(16, 0.0);
    for (int i = 0; i < 4; ++i) d.factor[std::size_t(i) * 4 + i] = 0.5;
    const int res = 64;
    const std::vector<double> grid = gaussian_density_grid(d, res);
    double mass = 0.0;
    for (double g : grid) mass += g;
    mass /= double(res) * res;
    CHECK(mass == Catch::Approx(2.0).margin(0.1));
  }
}

TEST_CASE("heatmaps mark each depot mean") {
  DepotDistribution d;
  d.m = 2;
  d.mean = {0.0, 0.0, 1.5, -1.0};
  d.factor.assign(16, 0.0);
  for (int i = 0; i < 4; ++i) d.factor[std::size_t(i) * 4 + i] = 0.4;
  const std::string svg = render_gaussian_heatmap(d, 24);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_occurrences(svg, "<circle") == 2);
  CHECK(count_occurrences(svg, "<rect") > 10);  // heat cells rendered
}

TEST_CASE("command line drives generate, solve, and plot") {
  const fs::path dir = fresh_tmp_dir("lrgen_io_cli");

  SECTION("happy path") {
    REQUIRE(run_cli({"gen", "--n", "6", "--m", "2", "--count", "2", "--seed",
                     "11", "--out", dir.string()}) == 0);
    const std::string inst_path = (dir / "instance_11.lrp").string();
    REQUIRE(fs::exists(inst_path));
    REQUIRE(fs::exists(dir / "instance_12.lrp"));
    const CanonicalFile cf = parse_canonical(read_text_file(inst_path));
    CHECK(cf.instance.n() == 6);
    CHECK(cf.instance.m() == 2);

    const std::string results = (dir / "results.json").string();
    REQUIRE(run_cli({"solve", "--instance", inst_path, "--method", "alns",
                     "--iterations", "60", "--seed", "3", "--out",
                     results}) == 0);
    const nlohmann::json j =
        nlohmann::json::parse(read_text_file(results));
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 1);
    CHECK(j[0].at("method") == "alns");
    CHECK(j[0].at("cost").at("total").get<double>() > 0.0);
    CHECK(!j[0].at("routes").empty());

    const std::string map_path = (dir / "map.svg").string();
    REQUIRE(run_cli({"plot", "--instance", inst_path, "--results", results,
                     "--out", map_path}) == 0);
    CHECK(read_text_file(map_path).rfind("<svg", 0) == 0);

    DepotDistribution d;
    d.m = 1;
    d.mean = {0.0, 0.0};
    d.factor = {0.5, 0.0, 0.0, 0.5};
    const std::string dist_path = (dir / "dist.json").string();
    write_text_file(dist_path, distribution_json(d).dump());
    const std::string heat_path = (dir / "heat.svg").string();
    REQUIRE(run_cli({"plot", "--dist", dist_path, "--resolution", "16",
                     "--out", heat_path}) == 0);
    CHECK(read_text_file(heat_path).rfind("<svg", 0) == 0);
  }
  SECTION("exit codes distinguish usage errors from runtime errors") {
    CHECK(run_cli({}) == 2);                      // a subcommand is required
    CHECK(run_cli({"solve"}) == 2);               // missing required options
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"solve", "--instance", (dir / "nope.lrp").string(),
                   "--method", "alns"}) == 1);    // unreadable input
    CHECK(run_cli({"gen", "--preset", "galactic", "--out", dir.string()}) ==
          1);                                     // unknown preset
  }
}
