#include "cli.hpp"

#include "cycflow/checkpoint.hpp"
#include "cycflow/coupling.hpp"
#include "cycflow/decode.hpp"
#include "cycflow/errors.hpp"
#include "cycflow/flow.hpp"
#include "cycflow/oracle.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cycflow::cli {

namespace {

using Json = nlohmann::ordered_json;

struct Global {
  bool deterministic = false;
  int threads = 0;  // 0 = all cores

  int workers() const {
    if (deterministic && threads == 0) return 1;
    if (threads > 0) return threads;
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }
};

// Runs f(i) for i in [0, count) on a small pool. Results must be written by
// index, so the output never depends on scheduling.
template <typename F>
void parallel_for(std::size_t count, int threads, F&& f) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failed_at = count;
  std::mutex mu;
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          // keep the lowest failing index so the message is reproducible
          if (i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  return f;
}

void write_json(const std::string& path, const Json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

struct LabelCounts {
  std::size_t exact = 0, heuristic = 0, decoded = 0, none = 0;

  explicit LabelCounts(const Dataset& d) {
    for (const auto& r : d.records) {
      if (!r.tour) ++none;
      else if (r.tour->provenance == Provenance::exact) ++exact;
      else if (r.tour->provenance == Provenance::heuristic) ++heuristic;
      else ++decoded;
    }
  }
  // Exact denominators only if every reference is exact.
  bool all_exact() const { return heuristic == 0 && decoded == 0; }
  Json to_json() const {
    return Json{{"exact", exact}, {"heuristic", heuristic}, {"decoded", decoded}, {"unlabeled", none}};
  }
  std::string summary() const {
    std::ostringstream os;
    os << "exact " << exact << ", heuristic " << heuristic;
    if (decoded) os << ", decoded " << decoded;
    os << ", unlabeled " << none;
    return os.str();
  }
};

Json report_header(const std::string& command, const Dataset& data, const Global& g) {
  Json j;
  j["tool"] = "cycflow";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["dataset_fingerprint"] = fingerprint(data);
  j["instances"] = data.records.size();
  j["label_provenance"] = LabelCounts(data).to_json();
  j["deterministic"] = g.deterministic;
  return j;
}

Json model_json(const ModelConfig& m) {
  return Json{{"dim", m.dim},         {"layers", m.layers}, {"heads", m.heads},
              {"ff_mult", m.ff_mult}, {"t_dim", m.t_dim},   {"seed", m.seed}};
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  int n = 20;
  int count = 100;
  std::uint64_t seed = 0;
  std::string solver = "heuristic";
  int kicks = 0;
  std::string out;
};

void cmd_gen(const GenArgs& a, const Global& g, std::ostream& out) {
  if (a.n < 3) throw InvalidArgument("--n must be at least 3");
  if (a.count < 1) throw InvalidArgument("--count must be positive");
  if (a.solver == "heldkarp" && a.n > kHeldKarpMaxNodes) {
    throw SizeLimitError("held-karp is limited to n <= " + std::to_string(kHeldKarpMaxNodes) + " (got n=" +
                         std::to_string(a.n) + "); use --solver heuristic");
  }
  if (a.solver == "brute" && a.n > kBruteForceMaxNodes) {
    throw SizeLimitError("brute force is limited to n <= " + std::to_string(kBruteForceMaxNodes) + " (got n=" +
                         std::to_string(a.n) + "); use --solver heldkarp or --solver heuristic");
  }
  Dataset d = gen_uniform(a.n, a.count, a.seed);
  parallel_for(d.records.size(), g.workers(), [&](std::size_t i) {
    Record& r = d.records[i];
    if (a.solver == "heldkarp") r.tour = held_karp(r.instance);
    else if (a.solver == "brute") r.tour = brute_force_opt(r.instance);
    else if (a.solver == "heuristic") r.tour = heuristic_label(r.instance, a.seed, {a.kicks});
  });
  write_dataset(d, a.out);
  out << "wrote " << d.records.size() << " instances (n=" << a.n << ") to " << a.out << "\n"
      << "labels: " << LabelCounts(d).summary() << "\n"
      << "fingerprint " << fingerprint(d) << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string telemetry;
  std::string objective = "flow";
  TrainConfig cfg;
};

void cmd_train(TrainArgs a, const Global& g, std::ostream& out) {
  const Dataset data = read_dataset(a.data);
  if (!data.fully_labeled()) {
    const LabelCounts c(data);
    throw DataError("dataset '" + a.data + "' has " + std::to_string(c.none) +
                    " unlabeled records; regenerate it with a solver");
  }
  TrainConfig& cfg = a.cfg;
  cfg.objective = parse_objective(a.objective);
  cfg.model.seed = cfg.seed;
  cfg.threads = g.deterministic ? 1 : g.workers();
  cfg.validate();

  const std::string telemetry = a.telemetry.empty() ? a.out + ".telemetry.csv" : a.telemetry;
  auto tel = open_out(telemetry);
  tel << "epoch,loss,lr,wallclock_s\n";
  const int every = std::max(1, cfg.epochs / 20);
  const auto result = train(cfg, data, [&](const EpochStats& s) {
    tel << s.epoch << ',' << format_double(s.loss) << ',' << format_double(s.lr) << ','
        << (g.deterministic ? "0" : format_double(s.wallclock_s)) << '\n';
    tel.flush();
    if ((s.epoch + 1) % every == 0 || s.epoch + 1 == cfg.epochs) {
      out << "epoch " << s.epoch + 1 << "/" << cfg.epochs << "  loss " << std::setprecision(6) << s.loss
          << "  lr " << s.lr << "\n";
    }
  });

  Checkpoint ck{result.params, {}};
  ck.meta.objective = std::string(to_string(cfg.objective));
  ck.meta.epochs = cfg.epochs;
  ck.meta.final_loss = result.history.empty() ? 0.0 : result.history.back().loss;
  ck.meta.dataset_fingerprint = fingerprint(data);
  save_checkpoint(ck, a.out);
  out << "saved " << to_string(cfg.objective) << " checkpoint to " << a.out << " ("
      << result.params.parameter_count() << " parameters)\n"
      << "telemetry " << telemetry << "\n";
}

// ---------------------------------------------------------------- solve / eval

struct DecodeArgs {
  std::string ckpt;
  std::string data;
  int steps = 20;
  bool no_refine = false;
  std::string strategy = "best";
  int max_passes = 100;

  TwoOptOptions two_opt_options() const {
    if (strategy != "best" && strategy != "first") throw InvalidArgument("--strategy must be best or first");
    if (max_passes < 0) throw InvalidArgument("--max-passes must be non-negative");
    return {max_passes, strategy == "best" ? TwoOptStrategy::best : TwoOptStrategy::first};
  }
  Json to_json() const {
    return Json{{"steps", steps}, {"refine", !no_refine}, {"two_opt_strategy", strategy}, {"max_passes", max_passes}};
  }
};

Checkpoint load_model(const std::string& path, const std::string& role) {
  if (path.empty()) throw InvalidArgument("missing " + role + " checkpoint");
  if (!std::filesystem::exists(path)) throw DataError(role + " checkpoint '" + path + "' does not exist");
  return load_checkpoint(path);
}

SolveResult run_method(const Checkpoint* ck, const Instance& inst, const DecodeArgs& a, bool refine) {
  const auto opts = a.two_opt_options();
  if (!ck) return solve_angular(inst, refine, opts);
  if (ck->meta.objective == "direct") return solve_direct(ck->params, inst, refine, opts);
  return solve(ck->params, inst, a.steps, refine, opts);
}

struct SolveArgs {
  DecodeArgs d;
  std::string out;
  std::string trajectory;
};

void cmd_solve(const SolveArgs& a, const Global& g, std::ostream& out) {
  const Checkpoint ck = load_model(a.d.ckpt, "model");
  Dataset data = read_dataset(a.d.data);
  std::vector<SolveResult> results(data.records.size());
  parallel_for(results.size(), g.workers(), [&](std::size_t i) {
    results[i] = run_method(&ck, data.records[i].instance, a.d, !a.d.no_refine);
  });
  out << std::left << std::setw(10) << "id" << std::setw(6) << "n" << std::setw(14) << "decoded" << "length\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& inst = data.records[i].instance;
    out << std::left << std::setw(10) << inst.id << std::setw(6) << inst.size() << std::setw(14)
        << fixed(results[i].decoded.length, 6) << fixed(results[i].tour.length, 6) << "\n";
  }
  if (!a.out.empty()) {
    Dataset solved = data;
    for (std::size_t i = 0; i < results.size(); ++i) {
      solved.records[i].tour = results[i].tour;
      solved.records[i].target.reset();
    }
    write_dataset(solved, a.out);
    out << "wrote decoded tours to " << a.out << "\n";
  }
  if (!a.trajectory.empty()) {
    if (ck.meta.objective != "flow") throw InvalidArgument("--trajectory needs a flow checkpoint");
    auto f = open_out(a.trajectory);
    f << "id,step,t,node,x,y\n";
    for (const auto& r : data.records) {
      integrate(ck.params, r.instance, a.d.steps, [&](int step, const Cloud& x) {
        const std::string t = format_double(static_cast<double>(step) / a.d.steps);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          f << r.instance.id << ',' << step << ',' << t << ',' << i << ',' << format_double(x(i, 0)) << ','
            << format_double(x(i, 1)) << '\n';
        }
      });
    }
    out << "wrote trajectories to " << a.trajectory << "\n";
  }
}

struct EvalArgs {
  DecodeArgs d;
  std::string csv;
  std::string summary;
};

void cmd_eval(const EvalArgs& a, const Global& g, std::ostream& out) {
  const Checkpoint ck = load_model(a.d.ckpt, "model");
  const Dataset data = read_dataset(a.d.data);
  const LabelCounts labels(data);
  const bool exact = labels.all_exact();
  const std::string gap_name = exact ? "gap_percent" : "gap_vs_heuristic_percent";
  const bool refine = !a.d.no_refine;

  std::vector<SolveResult> results(data.records.size());
  parallel_for(results.size(), g.workers(),
               [&](std::size_t i) { results[i] = run_method(&ck, data.records[i].instance, a.d, refine); });

  std::vector<double> gaps, raw_gaps, t_int, t_dec, t_ref, t_tot;
  std::ostringstream csv;
  csv << "id,n,length,decoded_length,ref_length,ref_provenance," << gap_name << ",decoded_" << gap_name;
  if (!g.deterministic) csv << ",integrate_s,decode_s,refine_s,total_s";
  csv << '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    const Record& r = data.records[i];
    const SolveResult& s = results[i];
    csv << r.instance.id << ',' << r.instance.size() << ',' << format_double(s.tour.length) << ','
        << format_double(s.decoded.length) << ',';
    if (r.tour) {
      const double gap = gap_percent(s.tour.length, r.tour->length);
      const double raw = gap_percent(s.decoded.length, r.tour->length);
      gaps.push_back(gap);
      raw_gaps.push_back(raw);
      csv << format_double(r.tour->length) << ',' << to_string(r.tour->provenance) << ',' << format_double(gap)
          << ',' << format_double(raw);
    } else {
      csv << ",,,";
    }
    if (!g.deterministic) {
      csv << ',' << format_double(s.times.integrate_s) << ',' << format_double(s.times.decode_s) << ','
          << format_double(s.times.refine_s) << ',' << format_double(s.times.total());
    }
    csv << '\n';
    t_int.push_back(s.times.integrate_s);
    t_dec.push_back(s.times.decode_s);
    t_ref.push_back(s.times.refine_s);
    t_tot.push_back(s.times.total());
  }
  if (!a.csv.empty()) open_out(a.csv) << csv.str();

  Json j = report_header("eval", data, g);
  j["method"] = ck.meta.objective;
  j["checkpoint"] = {{"objective", ck.meta.objective},
                     {"epochs", ck.meta.epochs},
                     {"trained_on", ck.meta.dataset_fingerprint},
                     {"model", model_json(ck.params.config)}};
  j["config"] = a.d.to_json();
  j["gap_reference"] = exact ? "exact" : "heuristic";
  j["labeled_instances"] = gaps.size();
  j["mean_" + gap_name] = mean(gaps);
  j["mean_decoded_" + gap_name] = mean(raw_gaps);
  if (!g.deterministic) {
    j["median_seconds"] = {{"integrate", median(t_int)},
                           {"decode", median(t_dec)},
                           {"refine", median(t_ref)},
                           {"total", median(t_tot)}};
  }
  if (!a.summary.empty()) write_json(a.summary, j);

  const std::string label = exact ? "gap" : "gap vs heuristic";
  out << "eval " << ck.meta.objective << " model on " << data.records.size() << " instances (" << labels.summary()
      << ")\n"
      << "  dataset fingerprint  " << fingerprint(data) << "\n"
      << "  Euler steps          " << a.d.steps << "\n"
      << "  mean " << label << " (decoded)  " << fixed(mean(raw_gaps), 3) << " %\n"
      << "  mean " << label << (refine ? " (2-opt)    " : " (no 2-opt) ") << fixed(mean(gaps), 3) << " %\n";
  if (!g.deterministic) {
    out << "  median per-instance ms: integrate " << fixed(1e3 * median(t_int), 3) << ", decode "
        << fixed(1e3 * median(t_dec), 3) << ", 2-opt " << fixed(1e3 * median(t_ref), 3) << ", total "
        << fixed(1e3 * median(t_tot), 3) << "\n";
  }
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  DecodeArgs d;
  std::string flow_ckpt;
  std::string direct_ckpt;
  std::string csv;
  std::string summary;
};

void cmd_ablate(const AblateArgs& a, const Global& g, std::ostream& out) {
  const Dataset data = read_dataset(a.d.data);
  const Checkpoint direct = load_model(a.direct_ckpt, "direct angular regression (--direct-ckpt)");
  const Checkpoint flow = load_model(a.flow_ckpt, "flow (--flow-ckpt)");
  if (direct.meta.objective != "direct") throw DataError("--direct-ckpt was trained with objective " + direct.meta.objective);
  if (flow.meta.objective != "flow") throw DataError("--flow-ckpt was trained with objective " + flow.meta.objective);
  if (!data.fully_labeled()) throw DataError("ablation needs reference tours for every instance");
  const LabelCounts labels(data);
  const bool exact = labels.all_exact();
  const std::string gap_name = exact ? "gap_percent" : "gap_vs_heuristic_percent";

  struct Row {
    std::string method;
    const Checkpoint* ck;
    double raw = 0.0, refined = 0.0;
  };
  std::vector<Row> rows{{"Angular Sort", nullptr}, {"Direct Angular Reg.", &direct}, {"CycFlow", &flow}};
  const auto& recs = data.records;
  for (auto& row : rows) {
    std::vector<double> raw(recs.size()), ref(recs.size());
    parallel_for(recs.size(), g.workers(), [&](std::size_t i) {
      const auto s = run_method(row.ck, recs[i].instance, a.d, true);
      raw[i] = gap_percent(s.decoded.length, recs[i].tour->length);
      ref[i] = gap_percent(s.tour.length, recs[i].tour->length);
    });
    row.raw = mean(raw);
    row.refined = mean(ref);
  }

  std::ostringstream csv;
  csv << "method," << gap_name << ",refined_" << gap_name << '\n';
  for (const auto& r : rows) csv << r.method << ',' << format_double(r.raw) << ',' << format_double(r.refined) << '\n';
  if (!a.csv.empty()) open_out(a.csv) << csv.str();

  Json j = report_header("ablate", data, g);
  j["config"] = a.d.to_json();
  j["gap_reference"] = exact ? "exact" : "heuristic";
  j["checkpoints"] = {{"flow", {{"path", a.flow_ckpt}, {"trained_on", flow.meta.dataset_fingerprint}}},
                      {"direct", {{"path", a.direct_ckpt}, {"trained_on", direct.meta.dataset_fingerprint}}}};
  Json jr = Json::array();
  for (const auto& r : rows) jr.push_back({{"method", r.method}, {gap_name, r.raw}, {"refined_" + gap_name, r.refined}});
  j["rows"] = jr;
  if (!a.summary.empty()) write_json(a.summary, j);

  const std::string label = exact ? "gap %" : "gap vs heur. %";
  out << "ablation on " << recs.size() << " instances, fingerprint " << fingerprint(data) << " (" << labels.summary()
      << ")\n";
  out << std::left << std::setw(24) << "method" << std::setw(18) << label << "with 2-opt\n";
  for (const auto& r : rows)
    out << std::left << std::setw(24) << r.method << std::setw(18) << fixed(r.raw, 3) << fixed(r.refined, 3) << "\n";
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  DecodeArgs d;
  std::vector<int> sizes{20, 50, 100};
  int count = 100;
  std::uint64_t seed = 0;
  std::string csv;
};

std::string hardware_descriptor() {
  std::ifstream cpu("/proc/cpuinfo");
  std::string line, model = "unknown cpu";
  while (std::getline(cpu, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

void cmd_bench(const BenchArgs& a, const Global&, std::ostream& out) {
  const Checkpoint ck = load_model(a.d.ckpt, "model");
  if (a.count < 1) throw InvalidArgument("--count must be positive");
  const bool refine = !a.d.no_refine;
  std::ostringstream csv;
  csv << "n,count,steps,integrate_ms,decode_ms,refine_ms,stage_sum_ms,total_ms\n";
  out << "hardware: " << hardware_descriptor() << "\n"
      << "method " << ck.meta.objective << ", " << a.count << " instances per size, medians in ms, single thread\n";
  out << std::left << std::setw(7) << "n" << std::setw(12) << "integrate" << std::setw(10) << "decode"
      << std::setw(10) << "2-opt" << std::setw(10) << "stages" << "total\n";
  using Clock = std::chrono::steady_clock;
  for (int n : a.sizes) {
    std::vector<double> ti, td, tr, ts, tt;
    for (int i = 0; i < a.count; ++i) {
      const Instance inst = random_instance(n, a.seed, static_cast<std::uint64_t>(i));
      const auto t0 = Clock::now();
      const auto s = run_method(&ck, inst, a.d, refine);
      tt.push_back(std::chrono::duration<double>(Clock::now() - t0).count() * 1e3);
      ti.push_back(s.times.integrate_s * 1e3);
      td.push_back(s.times.decode_s * 1e3);
      tr.push_back(s.times.refine_s * 1e3);
      ts.push_back(s.times.total() * 1e3);
    }
    csv << n << ',' << a.count << ',' << a.d.steps << ',' << format_double(median(ti)) << ','
        << format_double(median(td)) << ',' << format_double(median(tr)) << ',' << format_double(median(ts)) << ','
        << format_double(median(tt)) << '\n';
    out << std::left << std::setw(7) << n << std::setw(12) << fixed(median(ti), 3) << std::setw(10)
        << fixed(median(td), 3) << std::setw(10) << fixed(median(tr), 3) << std::setw(10) << fixed(median(ts), 3)
        << fixed(median(tt), 3) << "\n";
  }
  if (!a.csv.empty()) open_out(a.csv) << csv.str();
}

// ---------------------------------------------------------------- couple

struct CoupleArgs {
  std::string data;
  std::string out;
};

void cmd_couple(const CoupleArgs& a, const Global& g, std::ostream& out) {
  Dataset data = read_dataset(a.data);
  parallel_for(data.records.size(), g.workers(), [&](std::size_t i) {
    Record& r = data.records[i];
    if (!r.tour) throw DataError("record " + std::to_string(i) + " has no tour to couple");
    const CoupledPair pair = build_coupled_pair(r.instance, *r.tour);
    // Shift the circle back onto the instance so both overlay in a plot.
    Cloud target = pair.x1;
    target.rowwise() += centroid(r.instance.points).transpose();
    r.target = target;
  });
  write_dataset(data, a.out);
  out << "wrote " << data.records.size() << " coupled pairs to " << a.out << "\n";
}

void add_decode_options(CLI::App* sub, DecodeArgs& d, bool need_ckpt) {
  auto* opt = sub->add_option("--ckpt", d.ckpt, "model checkpoint")->check(CLI::ExistingFile);
  if (need_ckpt) opt->required();
  sub->add_option("--data", d.data, "dataset file")->required()->check(CLI::ExistingFile);
  sub->add_option("--steps", d.steps, "Euler steps K")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_flag("--no-refine", d.no_refine, "skip 2-opt refinement");
  sub->add_option("--strategy", d.strategy, "2-opt move selection: best or first")
      ->capture_default_str()
      ->check(CLI::IsMember({"best", "first"}));
  sub->add_option("--max-passes", d.max_passes, "2-opt pass limit")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cycflow: TSP tours by transporting points onto a circle"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "TOML file with one [section] per subcommand; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_flag("--deterministic", g.deterministic,
               "single-threaded training, timing columns zeroed or omitted; byte-identical outputs");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  GenArgs gen;
  auto* s_gen = app.add_subcommand("gen", "generate a uniform dataset and label it");
  s_gen->add_option("--n", gen.n, "nodes per instance")->capture_default_str();
  s_gen->add_option("--count", gen.count, "number of instances")->capture_default_str();
  s_gen->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  s_gen->add_option("--solver", gen.solver, "heldkarp, brute, heuristic or none")
      ->capture_default_str()
      ->check(CLI::IsMember({"heldkarp", "brute", "heuristic", "none"}));
  s_gen->add_option("--kicks", gen.kicks, "iterated local search rounds for heuristic labels")->capture_default_str();
  s_gen->add_option("--out", gen.out, "output dataset")->required();

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "train a flow or direct-regression model");
  s_train->add_option("--data", tr.data, "labeled dataset")->required()->check(CLI::ExistingFile);
  s_train->add_option("--out", tr.out, "checkpoint path")->required();
  s_train->add_option("--telemetry", tr.telemetry, "epoch CSV (default <out>.telemetry.csv)");
  s_train->add_option("--objective", tr.objective, "flow or direct")
      ->capture_default_str()
      ->check(CLI::IsMember({"flow", "direct"}));
  s_train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  s_train->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  s_train->add_option("--lr", tr.cfg.lr, "peak learning rate")->capture_default_str();
  s_train->add_option("--lr-final-ratio", tr.cfg.lr_final_ratio, "cosine floor as a fraction of --lr")
      ->capture_default_str();
  s_train->add_option("--warmup", tr.cfg.warmup_steps, "linear warmup steps")->capture_default_str();
  s_train->add_option("--grad-clip", tr.cfg.grad_clip, "global norm clip, 0 disables")->capture_default_str();
  s_train->add_option("--seed", tr.cfg.seed)->capture_default_str();
  s_train->add_option("--dim", tr.cfg.model.dim)->capture_default_str();
  s_train->add_option("--layers", tr.cfg.model.layers)->capture_default_str();
  s_train->add_option("--heads", tr.cfg.model.heads)->capture_default_str();
  s_train->add_option("--ff-mult", tr.cfg.model.ff_mult)->capture_default_str();
  s_train->add_option("--t-dim", tr.cfg.model.t_dim)->capture_default_str();

  SolveArgs so;
  auto* s_solve = app.add_subcommand("solve", "decode tours for every instance in a dataset");
  add_decode_options(s_solve, so.d, true);
  s_solve->add_option("--out", so.out, "write a dataset holding the decoded tours");
  s_solve->add_option("--trajectory", so.trajectory, "CSV of every Euler snapshot (flow models)");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "gap and timing report against stored labels");
  add_decode_options(s_eval, ev.d, true);
  s_eval->add_option("--csv", ev.csv, "per-instance CSV report");
  s_eval->add_option("--summary", ev.summary, "JSON summary");

  AblateArgs ab;
  auto* s_ablate = app.add_subcommand("ablate", "angular sort vs direct regression vs flow on one dataset");
  add_decode_options(s_ablate, ab.d, false);
  s_ablate->add_option("--flow-ckpt", ab.flow_ckpt, "flow checkpoint")->check(CLI::ExistingFile);
  s_ablate->add_option("--direct-ckpt", ab.direct_ckpt, "direct angular regression checkpoint")
      ->check(CLI::ExistingFile);
  s_ablate->add_option("--csv", ab.csv, "table as CSV");
  s_ablate->add_option("--summary", ab.summary, "JSON summary");

  BenchArgs be;
  auto* s_bench = app.add_subcommand("bench", "per-stage latency on fresh random instances");
  s_bench->add_option("--ckpt", be.d.ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  s_bench->add_option("--sizes", be.sizes, "node counts")->delimiter(',')->capture_default_str();
  s_bench->add_option("--count", be.count, "instances per size")->capture_default_str();
  s_bench->add_option("--seed", be.seed)->capture_default_str();
  s_bench->add_option("--steps", be.d.steps, "Euler steps K")->capture_default_str()->check(CLI::PositiveNumber);
  s_bench->add_flag("--no-refine", be.d.no_refine, "skip 2-opt refinement");
  s_bench->add_option("--csv", be.csv, "table as CSV");

  CoupleArgs cp;
  auto* s_couple = app.add_subcommand("couple", "dump coupled circle targets for a labeled dataset");
  s_couple->add_option("--data", cp.data, "labeled dataset")->required()->check(CLI::ExistingFile);
  s_couple->add_option("--out", cp.out, "output dataset with target rows")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (s_gen->parsed()) cmd_gen(gen, g, out);
    else if (s_train->parsed()) cmd_train(tr, g, out);
    else if (s_solve->parsed()) cmd_solve(so, g, out);
    else if (s_eval->parsed()) cmd_eval(ev, g, out);
    else if (s_ablate->parsed()) cmd_ablate(ab, g, out);
    else if (s_bench->parsed()) cmd_bench(be, g, out);
    else if (s_couple->parsed()) cmd_couple(cp, g, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"cycflow"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cycflow::cli
