#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "syncml/engine.hpp"
#include "syncml/perf.hpp"

namespace syncml {

// Plain comma-separated table, no quoting. Every row has the header's width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws ParseError if absent
};

CsvTable read_csv(std::istream& in);
void write_csv(std::ostream& out, const CsvTable& table);

// Shortest text that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);  // throws ConfigError

// rounds.csv: round, t_worker, t_master, t_overhead, t_tot_cum (seconds),
// objective, suboptimality.
struct RoundRow {
  std::size_t round = 0;
  double t_worker = 0, t_master = 0, t_overhead = 0, t_tot_cum = 0;
  double objective = 0, suboptimality = 0;
};

std::vector<RoundRow> round_rows(std::span<const RoundRecord> rounds);
void write_rounds_csv(std::ostream& out, std::span<const RoundRow> rows);
std::vector<RoundRow> read_rounds_csv(std::istream& in);

// sweep.csv: H, N_eps, T_eps_seconds, t1_ms, t2_us, a, b, r2, h_opt_predicted,
// status. Cells of unreached points and unknown model values are empty.
struct SweepRow {
  std::size_t h = 0;
  std::optional<double> n_eps, t_eps_seconds;
  std::optional<double> t1_ms, t2_us, a, b, r2, h_opt_predicted;
  std::string status;
};

std::vector<SweepRow> sweep_rows(std::span<const SweepPoint> points,
                                 const std::optional<PerfFit>& model);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
std::vector<SweepRow> read_sweep_csv(std::istream& in);

// compare.csv: one row per algorithm.
struct CompareRow {
  std::string algorithm;
  std::size_t h = 0;
  double gamma = 0;
  std::string status;
  std::size_t rounds = 0;
  std::optional<double> rounds_to_target, time_to_target_seconds;
  double t_worker = 0, t_master = 0, t_overhead = 0;  // bucket totals, seconds
  double final_suboptimality = 0;
};

void write_compare_csv(std::ostream& out, std::span<const CompareRow> rows);
std::vector<CompareRow> read_compare_csv(std::istream& in);

}  // namespace syncml
