// syncml: train, sweep, tune, compare and measure distributed ridge solvers.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "syncml/dataset.hpp"
#include "syncml/engine.hpp"
#include "syncml/error.hpp"
#include "syncml/perf.hpp"
#include "syncml/report.hpp"
#include "syncml/ridge.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace syncml;

namespace {

struct Options {
  std::string data;
  std::string algorithm = "cocoa";
  std::size_t workers = 2;
  std::string h = "1x";
  std::vector<std::string> h_grid;
  double gamma = 1.0;
  double lambda = 1.0;
  double target = 1e-3;
  std::size_t max_rounds = 1000;
  std::string transport = "inproc";
  double latency_ms = 0.0;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string listen;
  std::string port_file;
  std::size_t timeout_ms = 30000;
  std::size_t trials = 20;
  bool check = false;
};

// Master-side connection to the workers: threads in this process, or remote
// worker processes that dialled in.
class Cluster {
 public:
  Cluster(const Options& o, const Dataset& data, std::size_t workers) {
    TransportOptions t;
    t.workers = workers;
    t.injected_latency = std::chrono::duration_cast<Nanos>(
        std::chrono::duration<double, std::milli>(o.latency_ms));
    t.timeout = std::chrono::milliseconds(o.timeout_ms);
    if (o.latency_ms < 0) throw ConfigError("latency must be nonnegative");
    const auto backend = parse_backend(o.transport);
    if (o.listen.empty()) {
      local_ = std::make_unique<LocalCluster>(data, backend, t);
      return;
    }
    if (backend != Backend::Tcp) throw ConfigError("--listen needs --transport tcp");
    const auto colon = o.listen.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--listen expects HOST:PORT");
    TcpListener listener(o.listen.substr(0, colon),
                         static_cast<std::uint16_t>(std::stoul(o.listen.substr(colon + 1))));
    std::cerr << "listening on port " << listener.port() << " for " << workers << " workers\n";
    if (!o.port_file.empty()) {
      const auto tmp = o.port_file + ".tmp";
      std::ofstream(tmp) << listener.port() << '\n';
      fs::rename(tmp, o.port_file);
    }
    remote_ = listener.accept_workers(t);
  }

  ~Cluster() {
    if (remote_) {
      try {
        shutdown_workers(*remote_);
      } catch (const std::exception&) {
      }
    }
  }

  Transport& transport() { return local_ ? local_->transport() : *remote_; }

 private:
  std::unique_ptr<LocalCluster> local_;
  std::unique_ptr<Transport> remote_;
};

struct Loaded {
  std::unique_ptr<RidgeProblem> problem;
  double f_star = 0.0;
};

Loaded load(const Options& o) {
  if (o.data.empty()) throw ConfigError("no dataset given (--data)");
  if (!fs::exists(o.data)) throw ConfigError("dataset not found: " + o.data);
  Loaded l;
  l.problem = std::make_unique<RidgeProblem>(load_dataset(o.data), o.lambda);
  l.f_star = optimal_objective(*l.problem);
  return l;
}

AlgorithmConfig make_config(const Options& o, Algorithm alg) {
  AlgorithmConfig c;
  c.algorithm = alg;
  c.gamma = o.gamma;
  c.workers = o.workers;
  c.max_rounds = o.max_rounds;
  c.target_suboptimality = o.target;
  c.seed = o.seed;
  c.check_consistency = o.check;
  return c;
}

std::vector<std::size_t> resolve_grid(const Options& o, double n_k) {
  std::vector<std::size_t> grid;
  for (const auto& s : o.h_grid) grid.push_back(HSpec::parse(s).resolve(n_k));
  return grid;
}

fs::path out_dir(const Options& o) {
  fs::create_directories(o.out);
  return o.out;
}

template <class F>
void write_file(const fs::path& path, F&& body) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  body(f);
  if (!f) throw Error("failed writing " + path.string());
}

json opt_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json bucket_totals(const RunResult& r) {
  Nanos w{0}, m{0}, o{0}, instr{0};
  for (const auto& rec : r.rounds) {
    w += rec.timings.t_worker;
    m += rec.timings.t_master;
    o += rec.timings.t_overhead;
    instr += rec.t_instrumentation;
  }
  return {{"t_worker", seconds(w)},
          {"t_master", seconds(m)},
          {"t_overhead", seconds(o)},
          {"t_instrumentation", seconds(instr)}};
}

int cmd_train(const Options& o) {
  auto l = load(o);
  const auto alg = parse_algorithm(o.algorithm);
  auto cfg = make_config(o, alg);
  const double n_k = mean_local_count(*l.problem, alg, o.workers);
  cfg.h = HSpec::parse(o.h).resolve(n_k);
  Cluster cluster(o, l.problem->data(), o.workers);
  const auto r = run(cfg, *l.problem, cluster.transport(), l.f_star);

  const auto dir = out_dir(o);
  const auto rows = round_rows(r.rounds);
  write_file(dir / "rounds.csv", [&](std::ostream& f) { write_rounds_csv(f, rows); });
  const auto hit = time_to_target(r.initial_suboptimality, r.rounds, cfg.target_suboptimality);
  json s;
  s["algorithm"] = std::string(to_string(alg));
  s["dataset"] = o.data;
  s["samples"] = l.problem->samples();
  s["features"] = l.problem->dims();
  s["workers"] = o.workers;
  s["h"] = cfg.h;
  s["gamma"] = cfg.gamma;
  s["sigma_prime"] = cfg.effective_sigma_prime();
  s["lambda"] = o.lambda;
  s["target"] = cfg.target_suboptimality;
  s["transport"] = o.transport;
  s["latency_ms"] = o.latency_ms;
  s["seed"] = o.seed;
  s["status"] = std::string(to_string(r.status));
  s["unreached"] = r.status == RunStatus::Unreached;
  s["diverged"] = r.status == RunStatus::Diverged;
  s["h_clamped"] = r.clamped;
  s["rounds"] = r.rounds.size();
  s["f_star"] = r.f_star;
  s["initial_suboptimality"] = r.initial_suboptimality;
  s["final_objective"] = r.rounds.empty() ? r.initial_objective : r.rounds.back().objective;
  s["final_suboptimality"] =
      r.rounds.empty() ? r.initial_suboptimality : r.rounds.back().suboptimality;
  s["total_time"] = seconds(r.total_time());
  s["rounds_to_target"] = hit ? json(hit->rounds) : json(nullptr);
  s["time_to_target"] = hit ? json(hit->time) : json(nullptr);
  s["buckets"] = bucket_totals(r);
  write_file(dir / "summary.json", [&](std::ostream& f) { f << s.dump(2) << '\n'; });

  std::cout << to_string(alg) << " K=" << o.workers << " H=" << cfg.h << ": "
            << to_string(r.status) << " after " << r.rounds.size() << " rounds, suboptimality "
            << s["final_suboptimality"].get<double>() << ", " << seconds(r.total_time())
            << " s\n";
  return 0;
}

struct SweepOutcome {
  std::vector<SweepPoint> points;
  std::optional<PerfFit> model;
  std::string warning;
};

SweepOutcome do_sweep(const Options& o, const Loaded& l, Algorithm alg, Transport& t,
                      bool need_model) {
  auto cfg = make_config(o, alg);
  const double n_k = mean_local_count(*l.problem, alg, o.workers);
  const auto grid = resolve_grid(o, n_k);
  if (grid.empty()) throw ConfigError("--h-grid is required");
  if (need_model && grid.size() < 3) throw ConfigError("tuning needs an H grid of at least 3 points");
  SweepOutcome out;
  out.points = sweep_h(cfg, grid, *l.problem, t, l.f_star);

  const auto samples = convergence_samples(out.points);
  if (samples.size() < 3) {
    out.warning = "fewer than 3 grid points reached the target; no model fit";
    return out;
  }
  try {
    PerfFit m;
    m.convergence = fit_convergence(samples);
    m.t1 = seconds(measure_t1(t, round_payload_dim(*l.problem, alg), o.trials));
    m.t2 = measure_t2(*l.problem, alg, o.workers, o.trials);
    if (m.convergence.degenerate) {
      out.warning = "degenerate fit (rounds do not depend on H)";
    } else {
      m.h_opt = predict_h_opt(m.convergence, m.t1, m.t2);
      if (m.h_opt.unbounded) out.warning = "fit has b = 0: communication-free regime, H unbounded";
    }
    out.model = m;
  } catch (const RankError& e) {
    out.warning = e.what();
  }
  return out;
}

std::string short_number(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 6);
  return std::string(buf, ec == std::errc() ? end : buf);
}

void print_sweep(const SweepOutcome& s) {
  std::cout << std::setw(10) << "H" << std::setw(10) << "N_eps" << "  " << std::setw(14) << "T_eps[s]"
            << "  status\n";
  for (const auto& p : s.points) {
    std::cout << std::setw(10) << p.h << std::setw(10)
              << (p.rounds_to_target ? std::to_string(*p.rounds_to_target) : "-") << "  " << std::setw(14)
              << (p.time_to_target ? short_number(*p.time_to_target) : "-") << "  "
              << to_string(p.status) << '\n';
  }
  if (s.model) {
    const auto& m = *s.model;
    std::cout << "fit: a=" << m.convergence.a << " b=" << m.convergence.b
              << " r2=" << m.convergence.r_squared << (m.convergence.intercept_clamped ? " (b clamped)" : "")
              << "  t1=" << m.t1 * 1e3 << " ms  t2=" << m.t2 * 1e6 << " us\n";
  }
  if (!s.warning.empty()) std::cerr << "warning: " << s.warning << '\n';
}

int cmd_sweep(const Options& o) {
  auto l = load(o);
  const auto alg = parse_algorithm(o.algorithm);
  Cluster cluster(o, l.problem->data(), o.workers);
  const auto s = do_sweep(o, l, alg, cluster.transport(), false);
  const auto rows = sweep_rows(s.points, s.model);
  write_file(out_dir(o) / "sweep.csv", [&](std::ostream& f) { write_sweep_csv(f, rows); });
  print_sweep(s);
  return 0;
}

int cmd_tune(const Options& o) {
  if (o.h_grid.size() < 3) throw ConfigError("tuning needs an H grid of at least 3 points");
  auto l = load(o);
  const auto alg = parse_algorithm(o.algorithm);
  Cluster cluster(o, l.problem->data(), o.workers);
  const auto s = do_sweep(o, l, alg, cluster.transport(), true);
  const auto rows = sweep_rows(s.points, s.model);
  const auto dir = out_dir(o);
  write_file(dir / "sweep.csv", [&](std::ostream& f) { write_sweep_csv(f, rows); });
  print_sweep(s);

  const auto best = measured_argmin(s.points);
  json rep;
  rep["algorithm"] = std::string(to_string(alg));
  rep["workers"] = o.workers;
  rep["latency_ms"] = o.latency_ms;
  rep["measured_argmin_h"] = best ? json(best->h) : json(nullptr);
  rep["measured_argmin_time"] = best ? opt_json(best->time_to_target) : json(nullptr);
  json predicted = nullptr, ratio = nullptr;
  if (s.model && !s.model->convergence.degenerate && !s.model->h_opt.unbounded) {
    predicted = s.model->h_opt.h;
    if (best) ratio = static_cast<double>(s.model->h_opt.h) / static_cast<double>(best->h);
    rep["a"] = s.model->convergence.a;
    rep["b"] = s.model->convergence.b;
    rep["r2"] = s.model->convergence.r_squared;
    rep["t1_ms"] = s.model->t1 * 1e3;
    rep["t2_us"] = s.model->t2 * 1e6;
    rep["predicted_time"] = s.model->h_opt.predicted_time;
  }
  rep["predicted_h"] = predicted;
  rep["predicted_over_measured"] = ratio;
  rep["warning"] = s.warning.empty() ? json(nullptr) : json(s.warning);
  write_file(dir / "tune.json", [&](std::ostream& f) { f << rep.dump(2) << '\n'; });

  std::cout << "measured argmin H: " << (best ? std::to_string(best->h) : "none")
            << "\nmodel H*: " << (predicted.is_null() ? "n/a" : predicted.dump())
            << "\nratio: " << (ratio.is_null() ? "n/a" : ratio.dump()) << '\n';
  return 0;
}

// ALG[:H[:GAMMA]]
struct RunSpec {
  Algorithm algorithm;
  std::optional<std::string> h;
  std::optional<double> gamma;
};

RunSpec parse_run_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty() || parts.size() > 3) throw ConfigError("bad --run '" + text + "'");
  RunSpec r{parse_algorithm(parts[0]), std::nullopt, std::nullopt};
  if (parts.size() > 1 && !parts[1].empty()) r.h = parts[1];
  if (parts.size() > 2 && !parts[2].empty()) r.gamma = parse_double(parts[2]);
  return r;
}

int cmd_compare(const Options& o, const std::vector<std::string>& runs) {
  if (runs.size() < 2) throw ConfigError("compare needs at least two --run ALG[:H[:GAMMA]]");
  std::vector<RunSpec> specs;
  for (const auto& r : runs) specs.push_back(parse_run_spec(r));
  auto l = load(o);
  Cluster cluster(o, l.problem->data(), o.workers);
  std::vector<CompareRow> rows;
  for (const auto& spec : specs) {
    auto cfg = make_config(o, spec.algorithm);
    if (spec.gamma) cfg.gamma = *spec.gamma;
    cfg.h = HSpec::parse(spec.h.value_or(o.h))
                .resolve(mean_local_count(*l.problem, spec.algorithm, o.workers));
    const auto r = run(cfg, *l.problem, cluster.transport(), l.f_star);
    const auto hit = time_to_target(r.initial_suboptimality, r.rounds, cfg.target_suboptimality);
    CompareRow row;
    row.algorithm = std::string(to_string(spec.algorithm));
    row.h = cfg.h;
    row.gamma = cfg.gamma;
    row.status = std::string(to_string(r.status));
    row.rounds = r.rounds.size();
    if (hit) {
      row.rounds_to_target = static_cast<double>(hit->rounds);
      row.time_to_target_seconds = hit->time;
    }
    for (const auto& rec : r.rounds) {
      row.t_worker += seconds(rec.timings.t_worker);
      row.t_master += seconds(rec.timings.t_master);
      row.t_overhead += seconds(rec.timings.t_overhead);
    }
    row.final_suboptimality =
        r.rounds.empty() ? r.initial_suboptimality : r.rounds.back().suboptimality;
    rows.push_back(row);
  }
  write_file(out_dir(o) / "compare.csv", [&](std::ostream& f) { write_compare_csv(f, rows); });
  write_compare_csv(std::cout, rows);
  return 0;
}

int cmd_measure(const Options& o) {
  auto l = load(o);
  const auto alg = parse_algorithm(o.algorithm);
  Cluster cluster(o, l.problem->data(), o.workers);
  const auto dim = round_payload_dim(*l.problem, alg);
  const double t1 = seconds(measure_t1(cluster.transport(), dim, o.trials));
  const double t2 = measure_t2(*l.problem, alg, o.workers, o.trials);
  json j{{"algorithm", std::string(to_string(alg))}, {"workers", o.workers},
         {"payload_dim", dim},    {"latency_ms", o.latency_ms},
         {"t1_ms", t1 * 1e3},     {"t2_us", t2 * 1e6}};
  write_file(out_dir(o) / "measure.json", [&](std::ostream& f) { f << j.dump(2) << '\n'; });
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_report(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("report needs at least one CSV file or directory");
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      for (const char* name : {"rounds.csv", "sweep.csv", "compare.csv"})
        if (fs::exists(fs::path(p) / name)) files.push_back(fs::path(p) / name);
    } else if (fs::exists(p)) {
      files.emplace_back(p);
    } else {
      throw ConfigError("not found: " + p);
    }
  }
  for (const auto& f : files) {
    std::ifstream in(f);
    const auto table = read_csv(in);
    in.clear();
    in.seekg(0);
    std::cout << "== " << f.string() << '\n';
    if (table.header.front() == "round") {
      const auto rows = read_rounds_csv(in);
      double w = 0, m = 0, ov = 0;
      for (const auto& r : rows) {
        w += r.t_worker;
        m += r.t_master;
        ov += r.t_overhead;
      }
      std::cout << "rounds " << rows.size();
      if (!rows.empty())
        std::cout << ", final suboptimality " << rows.back().suboptimality << ", total "
                  << rows.back().t_tot_cum << " s (worker " << w << ", master " << m
                  << ", overhead " << ov << ")";
      std::cout << '\n';
    } else if (table.header.front() == "H") {
      write_sweep_csv(std::cout, read_sweep_csv(in));
    } else if (table.header.front() == "algorithm") {
      write_compare_csv(std::cout, read_compare_csv(in));
    } else {
      throw ConfigError("unrecognized CSV: " + f.string());
    }
  }
  return 0;
}

int cmd_worker(const Options& o, const std::string& connect, std::size_t id) {
  const auto colon = connect.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--connect expects HOST:PORT");
  if (o.data.empty() || !fs::exists(o.data)) throw ConfigError("dataset not found: " + o.data);
  const auto data = load_dataset(o.data);
  auto ch = connect_worker(connect.substr(0, colon),
                           static_cast<std::uint16_t>(std::stoul(connect.substr(colon + 1))),
                           static_cast<std::uint16_t>(id), std::chrono::milliseconds(o.timeout_ms));
  serve_worker(*ch, data);
  return 0;
}

int cmd_gen(const SyntheticSpec& spec, const std::string& path) {
  const auto data = make_synthetic(spec);
  if (fs::path(path).extension() == ".bin")
    save_binary(path, data);
  else
    save_libsvm(path, data);
  std::cout << "wrote " << path << ": " << data.samples() << " x " << data.dims() << ", "
            << data.features.nnz() << " nonzeros\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchronous distributed ridge regression: CoCoA, mini-batch SCD, mini-batch SGD"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file; keys are the long option names");

  Options o;
  app.add_option("--data", o.data, "dataset (LIBSVM text, or .bin cache)");
  app.add_option("--algorithm", o.algorithm, "cocoa | mb-scd | mb-sgd")->capture_default_str();
  app.add_option("-K,--workers", o.workers, "worker count")->capture_default_str();
  app.add_option("--h", o.h, "local updates per round: absolute (5000) or relative to n_k (0.2x)")
      ->capture_default_str();
  app.add_option("--h-grid", o.h_grid, "comma-separated H values for sweep/tune")->delimiter(',');
  app.add_option("--gamma", o.gamma, "aggregation weight (cocoa) or step size")->capture_default_str();
  app.add_option("--lambda", o.lambda, "ridge regularization")->capture_default_str();
  app.add_option("--target", o.target, "target relative suboptimality")->capture_default_str();
  app.add_option("--max-rounds", o.max_rounds)->capture_default_str();
  app.add_option("--transport", o.transport, "inproc | tcp")->capture_default_str();
  app.add_option("--latency-ms", o.latency_ms, "injected per-round latency")->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--out", o.out, "output directory")->envname("SYNCML_OUT")->capture_default_str();
  app.add_option("--listen", o.listen, "HOST:PORT; wait for external tcp workers");
  app.add_option("--port-file", o.port_file, "write the listening port here");
  app.add_option("--timeout-ms", o.timeout_ms)->capture_default_str();
  app.add_option("--trials", o.trials, "t1/t2 measurement trials")->capture_default_str();
  app.add_flag("--check-consistency", o.check, "verify v = A*alpha after every round");

  auto* train = app.add_subcommand("train", "run one training job");
  auto* sweep = app.add_subcommand("sweep", "run once per H in --h-grid");
  auto* tune = app.add_subcommand("tune", "sweep, fit the round model, recommend H");
  auto* compare = app.add_subcommand("compare", "compare algorithms at their own H and gamma");
  std::vector<std::string> runs;
  compare->add_option("--run", runs, "ALG[:H[:GAMMA]], repeatable");
  auto* measure = app.add_subcommand("measure", "measure t1 and t2");
  auto* report = app.add_subcommand("report", "summarize CSV artifacts");
  std::vector<std::string> report_paths;
  report->add_option("paths", report_paths, "CSV files or output directories");
  auto* worker = app.add_subcommand("worker", "serve as a tcp worker process");
  std::string connect;
  std::size_t worker_id = 0;
  worker->add_option("--connect", connect, "HOST:PORT of the master")->required();
  worker->add_option("--id", worker_id, "worker id in 0..K-1")->required();
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset");
  SyntheticSpec spec;
  std::string gen_path;
  gen->add_option("--samples", spec.samples)->capture_default_str();
  gen->add_option("--features", spec.features)->capture_default_str();
  gen->add_option("--density", spec.density)->capture_default_str();
  gen->add_option("--noise", spec.noise)->capture_default_str();
  gen->add_option("--gen-seed", spec.seed)->capture_default_str();
  gen->add_option("path", gen_path, "output file (.bin for the binary cache)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(o);
    if (*sweep) return cmd_sweep(o);
    if (*tune) return cmd_tune(o);
    if (*compare) return cmd_compare(o, runs);
    if (*measure) return cmd_measure(o);
    if (*report) return cmd_report(report_paths);
    if (*worker) return cmd_worker(o, connect, worker_id);
    if (*gen) return cmd_gen(spec, gen_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
