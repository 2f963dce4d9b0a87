#include "syncml/report.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "syncml/error.hpp"

namespace syncml {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string opt(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::size_t parse_count(const std::string& s) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("expected a count, got '" + s + "'");
  return v;
}

void expect_header(const CsvTable& t, const std::vector<std::string>& want, const char* what) {
  if (t.header != want) throw ConfigError(std::string("unexpected ") + what + " header");
}

const std::vector<std::string> kRoundsHeader{"round",      "t_worker",  "t_master",     "t_overhead",
                                             "t_tot_cum",  "objective", "suboptimality"};
const std::vector<std::string> kSweepHeader{"H",  "N_eps", "T_eps_seconds", "t1_ms",
                                            "t2_us", "a", "b", "r2", "h_opt_predicted", "status"};
const std::vector<std::string> kCompareHeader{
    "algorithm",  "H",        "gamma",    "status",     "rounds",  "rounds_to_target",
    "time_to_target_seconds", "t_worker", "t_master",   "t_overhead", "final_suboptimality"};

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("missing column '" + name + "'", 1);
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       lineno);
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("empty CSV", lineno);
  return t;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

std::string format_double(double x) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ec == std::errc() ? p : buf);
}

double parse_double(const std::string& text) {
  double v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size())
    throw ConfigError("expected a number, got '" + text + "'");
  return v;
}

std::vector<RoundRow> round_rows(std::span<const RoundRecord> rounds) {
  std::vector<RoundRow> rows;
  Nanos cum{0};
  for (const auto& r : rounds) {
    cum += r.timings.t_tot;
    rows.push_back({r.round, seconds(r.timings.t_worker), seconds(r.timings.t_master),
                    seconds(r.timings.t_overhead), seconds(cum), r.objective, r.suboptimality});
  }
  return rows;
}

void write_rounds_csv(std::ostream& out, std::span<const RoundRow> rows) {
  CsvTable t{kRoundsHeader, {}};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.round), format_double(r.t_worker), format_double(r.t_master),
                      format_double(r.t_overhead), format_double(r.t_tot_cum),
                      format_double(r.objective), format_double(r.suboptimality)});
  write_csv(out, t);
}

std::vector<RoundRow> read_rounds_csv(std::istream& in) {
  const auto t = read_csv(in);
  expect_header(t, kRoundsHeader, "rounds.csv");
  std::vector<RoundRow> rows;
  for (const auto& c : t.rows)
    rows.push_back({parse_count(c[0]), parse_double(c[1]), parse_double(c[2]), parse_double(c[3]),
                    parse_double(c[4]), parse_double(c[5]), parse_double(c[6])});
  return rows;
}

std::vector<SweepRow> sweep_rows(std::span<const SweepPoint> points,
                                 const std::optional<PerfFit>& model) {
  std::vector<SweepRow> rows;
  for (const auto& p : points) {
    SweepRow r;
    r.h = p.h;
    if (p.rounds_to_target) r.n_eps = static_cast<double>(*p.rounds_to_target);
    r.t_eps_seconds = p.time_to_target;
    r.status = std::string(to_string(p.status));
    if (model) {
      r.t1_ms = model->t1 * 1e3;
      r.t2_us = model->t2 * 1e6;
      r.a = model->convergence.a;
      r.b = model->convergence.b;
      r.r2 = model->convergence.r_squared;
      if (!model->h_opt.unbounded && model->convergence.a > 0)
        r.h_opt_predicted = static_cast<double>(model->h_opt.h);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  CsvTable t{kSweepHeader, {}};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.h), opt(r.n_eps), opt(r.t_eps_seconds), opt(r.t1_ms),
                      opt(r.t2_us), opt(r.a), opt(r.b), opt(r.r2), opt(r.h_opt_predicted),
                      r.status});
  write_csv(out, t);
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  const auto t = read_csv(in);
  expect_header(t, kSweepHeader, "sweep.csv");
  std::vector<SweepRow> rows;
  for (const auto& c : t.rows)
    rows.push_back({parse_count(c[0]), parse_opt(c[1]), parse_opt(c[2]), parse_opt(c[3]),
                    parse_opt(c[4]), parse_opt(c[5]), parse_opt(c[6]), parse_opt(c[7]),
                    parse_opt(c[8]), c[9]});
  return rows;
}

void write_compare_csv(std::ostream& out, std::span<const CompareRow> rows) {
  CsvTable t{kCompareHeader, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.algorithm, std::to_string(r.h), format_double(r.gamma), r.status,
                      std::to_string(r.rounds), opt(r.rounds_to_target),
                      opt(r.time_to_target_seconds), format_double(r.t_worker),
                      format_double(r.t_master), format_double(r.t_overhead),
                      format_double(r.final_suboptimality)});
  write_csv(out, t);
}

std::vector<CompareRow> read_compare_csv(std::istream& in) {
  const auto t = read_csv(in);
  expect_header(t, kCompareHeader, "compare.csv");
  std::vector<CompareRow> rows;
  for (const auto& c : t.rows)
    rows.push_back({c[0], parse_count(c[1]), parse_double(c[2]), c[3], parse_count(c[4]),
                    parse_opt(c[5]), parse_opt(c[6]), parse_double(c[7]), parse_double(c[8]),
                    parse_double(c[9]), parse_double(c[10])});
  return rows;
}

}  // namespace syncml
