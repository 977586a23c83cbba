#pragma once

// Serialization: the canonical instance text format (lossless round-trip),
// table-driven parsers for two classical benchmark layouts, and JSON export
// of run results, training metrics, and depot distributions.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "cost.hpp"
#include "dgm.hpp"
#include "instance.hpp"
#include "solution.hpp"

namespace lrgen {

// ---- number rendering -------------------------------------------------------

// Shortest decimal that round-trips the exact double.
inline std::string render_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

struct Token {
  std::string_view text;
  int line = 0, column = 0;
};

// Whitespace-separated tokens with 1-based line/column positions.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1, column = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      column = 1;
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++column;
      ++i;
    } else {
      const int tline = line, tcol = column;
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '\t' &&
             text[j] != '\r' && text[j] != '\n') {
        ++j;
        ++column;
      }
      out.push_back({text.substr(i, j - i), tline, tcol});
      i = j;
    }
  }
  return out;
}

class TokenReader {
 public:
  TokenReader(std::vector<Token> tokens, std::string_view what)
      : tokens_(std::move(tokens)), what_(what) {}

  [[nodiscard]] bool done() const { return pos_ >= tokens_.size(); }
  [[nodiscard]] const Token& peek() const {
    if (done())
      throw ParseError(std::string(what_) + ": unexpected end of input",
                       last_line(), 1);
    return tokens_[pos_];
  }

  std::string_view word(const char* section) {
    if (done())
      throw ParseError(std::string("missing ") + section, last_line(), 1);
    return tokens_[pos_++].text;
  }

  double number(const char* section) {
    if (done())
      throw ParseError(std::string("missing ") + section, last_line(), 1);
    const Token& t = tokens_[pos_];
    double v = 0.0;
    const auto res = std::from_chars(t.text.data(),
                                     t.text.data() + t.text.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size())
      throw ParseError(std::string("expected a number in ") + section +
                           ", got '" + std::string(t.text) + "'",
                       t.line, t.column);
    ++pos_;
    return v;
  }

  int integer(const char* section) {
    const Token& t = peek();
    const double v = number(section);
    const int i = static_cast<int>(v);
    if (double(i) != v)
      throw ParseError(std::string("expected an integer in ") + section,
                       t.line, t.column);
    return i;
  }

  void expect(std::string_view literal, const char* section) {
    const Token t = tokens_.empty() || done() ? Token{} : tokens_[pos_];
    if (word(section) != literal)
      throw ParseError(std::string("expected '") + std::string(literal) +
                           "' in " + section,
                       t.line, t.column);
  }

  [[nodiscard]] int last_line() const {
    return tokens_.empty() ? 1 : tokens_.back().line;
  }

 private:
  std::vector<Token> tokens_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// ---- canonical instance format ---------------------------------------------

struct CanonicalFile {
  Instance instance;
  CostCoefficients coeffs;
};

inline std::string emit_canonical(const Instance& inst,
                                  const CostCoefficients& co = {}) {
  std::string out;
  out += "lrgen-instance v1\n";
  out += "n " + std::to_string(inst.n()) + "\n";
  out += "m " + std::to_string(inst.m()) + "\n";
  out += "capacity " + render_double(inst.fleet.capacity) + "\n";
  out += "setup_cost " + render_double(inst.fleet.setup_cost) + "\n";
  out += "coeffs " + render_double(co.alpha) + " " + render_double(co.beta) +
         " " + render_double(co.delta) + " " + render_double(co.lambda) + " " +
         render_double(co.epsilon) + " " + render_double(co.l_min) + " " +
         render_double(co.l_max) + "\n";
  for (const DepotCandidate& d : inst.depots)
    out += "depot " + render_double(d.pos.x) + " " + render_double(d.pos.y) +
           " " + render_double(d.max_supply) + " " +
           render_double(d.opening_cost) + "\n";
  for (const Customer& c : inst.customers)
    out += "customer " + render_double(c.pos.x) + " " +
           render_double(c.pos.y) + " " + render_double(c.demand) + "\n";
  return out;
}

inline CanonicalFile parse_canonical(std::string_view text) {
  detail::TokenReader r(detail::tokenize(text), "canonical instance");
  r.expect("lrgen-instance", "header");
  r.expect("v1", "header version");
  r.expect("n", "customer count");
  const int n = r.integer("customer count");
  r.expect("m", "depot count");
  const int m = r.integer("depot count");
  if (n < 0 || m < 0)
    throw ParseError("negative count in header", 2, 1);
  r.expect("capacity", "capacity");
  CanonicalFile f;
  f.instance.fleet.capacity = r.number("capacity");
  r.expect("setup_cost", "vehicle setup cost");
  f.instance.fleet.setup_cost = r.number("vehicle setup cost");
  r.expect("coeffs", "coefficient block");
  f.coeffs.alpha = r.number("coefficient block");
  f.coeffs.beta = r.number("coefficient block");
  f.coeffs.delta = r.number("coefficient block");
  f.coeffs.lambda = r.number("coefficient block");
  f.coeffs.epsilon = r.number("coefficient block");
  f.coeffs.l_min = r.number("coefficient block");
  f.coeffs.l_max = r.number("coefficient block");
  f.instance.depots.resize(m);
  for (int i = 0; i < m; ++i) {
    r.expect("depot", "depot records");
    f.instance.depots[i].pos.x = r.number("depot records");
    f.instance.depots[i].pos.y = r.number("depot records");
    f.instance.depots[i].max_supply = r.number("depot records");
    f.instance.depots[i].opening_cost = r.number("depot records");
  }
  f.instance.customers.resize(n);
  for (int i = 0; i < n; ++i) {
    r.expect("customer", "customer records");
    f.instance.customers[i].pos.x = r.number("customer records");
    f.instance.customers[i].pos.y = r.number("customer records");
    f.instance.customers[i].demand = r.number("customer records");
  }
  if (!r.done()) {
    const auto& t = r.peek();
    throw ParseError("trailing content after customer records", t.line,
                     t.column);
  }
  return f;
}

inline std::string instance_hash(const Instance& inst) {
  const std::string text = emit_canonical(inst);
  return hex64(fnv1a(text.data(), text.size()));
}

// ---- benchmark dialects -------------------------------------------------------

enum class BenchField {
  customer_count,
  depot_count,
  depot_coords,
  customer_coords,
  vehicle_capacity,
  depot_capacities,
  demands,
  opening_costs,
  route_cost,
  rounding_flag,
};

// Field order of each supported layout; new layouts are new tables.
inline std::vector<BenchField> benchmark_dialect(std::string_view tag) {
  using F = BenchField;
  if (tag == "prodhon")
    return {F::customer_count, F::depot_count,    F::depot_coords,
            F::customer_coords, F::vehicle_capacity, F::depot_capacities,
            F::demands,         F::opening_costs, F::route_cost,
            F::rounding_flag};
  if (tag == "barreto")
    return {F::customer_count, F::depot_count,  F::customer_coords,
            F::depot_coords,   F::vehicle_capacity, F::demands,
            F::depot_capacities, F::opening_costs, F::route_cost,
            F::rounding_flag};
  throw UnsupportedDialect("unknown benchmark dialect: " + std::string(tag));
}

struct BenchmarkInstance {
  int n = 0, m = 0;
  bool rounded_costs = false;  // the file's cost-rounding convention
  Instance raw;                // original coordinates and costs
  Instance normalized;         // unit-square coordinates, costs rescaled
  double scale = 1.0;          // raw length = scale * normalized length
  Position offset;             // raw position = scale * normalized + offset
};

inline BenchmarkInstance parse_benchmark(std::string_view text,
                                         std::string_view dialect) {
  const std::vector<BenchField> fields = benchmark_dialect(dialect);
  detail::TokenReader r(detail::tokenize(text), "benchmark instance");

  BenchmarkInstance b;
  b.n = -1;
  b.m = -1;
  auto need_counts = [&](const char* section) {
    if (b.n < 0 || b.m < 0)
      throw ParseError(std::string("counts must precede ") + section, 1, 1);
  };
  for (const BenchField f : fields) {
    switch (f) {
      case BenchField::customer_count:
        b.n = r.integer("customer count");
        if (b.n < 1) throw ParseError("customer count must be positive", 1, 1);
        break;
      case BenchField::depot_count:
        b.m = r.integer("depot count");
        if (b.m < 1) throw ParseError("depot count must be positive", 1, 1);
        break;
      case BenchField::depot_coords:
        need_counts("depot coordinates");
        b.raw.depots.resize(b.m);
        for (int i = 0; i < b.m; ++i) {
          b.raw.depots[i].pos.x = r.number("depot coordinates");
          b.raw.depots[i].pos.y = r.number("depot coordinates");
        }
        break;
      case BenchField::customer_coords:
        need_counts("customer coordinates");
        b.raw.customers.resize(b.n);
        for (int i = 0; i < b.n; ++i) {
          b.raw.customers[i].pos.x = r.number("customer coordinates");
          b.raw.customers[i].pos.y = r.number("customer coordinates");
        }
        break;
      case BenchField::vehicle_capacity:
        b.raw.fleet.capacity = r.number("vehicle capacity");
        break;
      case BenchField::depot_capacities:
        need_counts("depot capacities");
        for (int i = 0; i < b.m; ++i)
          b.raw.depots[i].max_supply = r.number("depot capacities");
        break;
      case BenchField::demands:
        need_counts("customer demands");
        for (int i = 0; i < b.n; ++i)
          b.raw.customers[i].demand = r.number("customer demands");
        break;
      case BenchField::opening_costs:
        need_counts("depot opening costs");
        for (int i = 0; i < b.m; ++i)
          b.raw.depots[i].opening_cost = r.number("depot opening costs");
        break;
      case BenchField::route_cost:
        b.raw.fleet.setup_cost = r.number("route opening cost");
        break;
      case BenchField::rounding_flag:
        b.rounded_costs = r.integer("rounding flag") != 0;
        break;
    }
  }
  if (!r.done()) {
    const auto& t = r.peek();
    throw ParseError("trailing content after benchmark fields", t.line,
                     t.column);
  }

  // Normalize into the unit square only when coordinates leave it; fixed
  // costs are divided by the isotropic scale so the optimal plan is
  // preserved (raw total = scale * normalized total).
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (int v = 0; v < b.raw.vertex_count(); ++v) {
    const Position& p = b.raw.vertex_pos(v);
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  const bool inside =
      min_x >= 0.0 && min_y >= 0.0 && max_x <= 1.0 && max_y <= 1.0;
  if (inside) {
    b.normalized = b.raw;
    b.scale = 1.0;
    b.offset = {0.0, 0.0};
  } else {
    double span = std::max(max_x - min_x, max_y - min_y);
    if (!(span > 0)) span = 1.0;
    b.scale = span;
    b.offset = {min_x, min_y};
    b.normalized = b.raw;
    for (auto& d : b.normalized.depots) {
      d.pos.x = (d.pos.x - min_x) / span;
      d.pos.y = (d.pos.y - min_y) / span;
      d.opening_cost /= span;
    }
    for (auto& c : b.normalized.customers) {
      c.pos.x = (c.pos.x - min_x) / span;
      c.pos.y = (c.pos.y - min_y) / span;
    }
    b.normalized.fleet.setup_cost /= span;
  }
  return b;
}

// ---- JSON export --------------------------------------------------------------

struct RunRecord {
  std::string instance_hash;
  std::string method;
  std::uint64_t seed = 0;
  CostBreakdown cost;
  RoutePlan plan;
  double wall_time_s = 0.0;
};

inline nlohmann::json run_record_json(const RunRecord& r) {
  nlohmann::json routes = nlohmann::json::array();
  for (const Route& rt : r.plan.routes) {
    nlohmann::json jr;
    jr["depot"] = rt.depot;
    jr["stops"] = rt.stops;
    routes.push_back(std::move(jr));
  }
  return nlohmann::json{
      {"instance", r.instance_hash},
      {"method", r.method},
      {"seed", r.seed},
      {"cost",
       {{"total", r.cost.total},
        {"route_length", r.cost.route_length},
        {"depot_cost", r.cost.depot_cost},
        {"depots_opened", r.cost.depots_opened},
        {"vehicle_cost", r.cost.vehicle_cost},
        {"vehicles_used", r.cost.vehicles_used},
        {"supply_penalty", r.cost.supply_penalty}}},
      {"routes", std::move(routes)},
      {"wall_time_s", r.wall_time_s}};
}

inline nlohmann::json distribution_json(const DepotDistribution& d) {
  return nlohmann::json{{"m", d.m},
                        {"mean", d.mean},
                        {"factor", d.factor},
                        {"covariance", d.covariance()}};
}

inline DepotDistribution distribution_from_json(const nlohmann::json& j) {
  DepotDistribution d;
  d.m = j.at("m").get<int>();
  d.mean = j.at("mean").get<std::vector<double>>();
  d.factor = j.at("factor").get<std::vector<double>>();
  const std::size_t dim = std::size_t(2) * d.m;
  if (d.mean.size() != dim || d.factor.size() != dim * dim)
    throw DimensionMismatch("distribution JSON arrays do not match m");
  return d;
}

// ---- file helpers --------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path,
                            std::string_view content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open file for writing: " + path);
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw Error("short write: " + path);
}

}  // namespace lrgen
