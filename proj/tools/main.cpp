#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "server.hpp"
#include "sqsafe/io.hpp"
#include "sqsafe/sim.hpp"
#include "sqsafe/voxel.hpp"
#include "studies.hpp"

namespace {

using namespace sqsafe;

std::atomic<bool> g_stop{false};

bool parse_switch(const std::string& s) { return s == "on"; }

// Writes to `out` when given, else to stdout.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << text;
}

int cmd_run(const std::string& path, const std::string& filter, const std::string& out, std::optional<long> seed,
            int workers) {
  Scenario s = Scenario::load(path, seed ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(*seed)) : std::nullopt);
  if (workers > 0) s.filter.workers = workers;
  const RunResult r = run(s, parse_switch(filter));
  if (!out.empty()) write_run(out, r);
  std::cout << r.metrics.to_json().dump(2) << '\n';
  return 0;
}

int cmd_bench(const std::vector<int>& pairs, const std::vector<int>& workers, int cycles, long seed,
              const std::string& out) {
  int max_pairs = 0;
  for (int p : pairs) {
    if (p < 0) throw std::invalid_argument("bench: pair counts must be non-negative");
    max_pairs = std::max(max_pairs, p);
  }
  studies::PairBenchmark bench(max_pairs, static_cast<std::uint64_t>(seed));
  std::ostringstream csv;
  csv << std::setprecision(9) << "pairs,workers,cycles,mean_s,std_s\n";
  for (int w : workers) {
    std::vector<double> x, y;
    for (int p : pairs) {
      const studies::BenchPoint b = bench.run(p, w, cycles);
      csv << b.pairs << ',' << b.workers << ',' << b.cycles << ',' << b.mean << ',' << b.stddev << '\n';
      std::cerr << "workers=" << w << " pairs=" << p << " mean=" << b.mean * 1e3 << " ms\n";
      x.push_back(p);
      y.push_back(b.mean);
    }
    if (x.size() >= 2) std::cerr << "workers=" << w << " R^2=" << studies::r_squared(x, y) << '\n';
  }
  emit(out, csv.str());
  return 0;
}

int cmd_gradstudy(const std::vector<double>& d_cs, const std::vector<double>& temps, const std::string& out) {
  studies::GradStudy study;
  std::ostringstream csv;
  csv << std::setprecision(9) << "e,orientation,d_c,temperature,estimate,reference,rel_error,converged\n";
  for (const studies::GradCell& c :
       study.grid({1.0, 0.3}, {studies::Orientation::kFaceFace, studies::Orientation::kVertexVertex}, d_cs, temps)) {
    csv << c.exponent << ',' << studies::to_string(c.orientation) << ',' << c.d_c << ',' << c.temperature << ','
        << c.estimate << ',' << c.reference << ',' << c.rel_error << ',' << c.converged << '\n';
  }
  emit(out, csv.str());
  return 0;
}

int cmd_figtwo(int samples, const std::string& out) {
  std::ostringstream csv;
  csv << std::setprecision(12) << "x,f_star,df_dx,f_gauge,d,grad_norm,converged\n";
  for (const auto& s : studies::figtwo(samples)) {
    csv << s.x << ',' << s.f_star << ',' << s.df_dx << ',' << s.f_gauge << ',' << s.d << ',' << s.grad_norm << ','
        << s.converged << '\n';
  }
  emit(out, csv.str());
  return 0;
}

int cmd_voxel(const std::string& model, const std::string& reference, double delta, const std::string& out) {
  const auto m = sq_set_from_json(read_json_file(model));
  const auto r = sq_set_from_json(read_json_file(reference));
  const VoxelMetrics v = voxel_metrics(m, r, delta);
  const nlohmann::json j = {{"coverage", v.coverage},
                            {"over_approx", v.over_approx},
                            {"reference_voxels", v.reference_voxels},
                            {"model_voxels", v.model_voxels},
                            {"intersection_voxels", v.intersection_voxels},
                            {"delta", delta}};
  emit(out, j.dump(2) + "\n");
  return 0;
}

int cmd_plot(const std::string& jsonl, const std::string& out) {
  std::ifstream f(jsonl);
  if (!f) throw std::runtime_error("cannot read " + jsonl);
  std::ostringstream csv;
  write_plot_data(csv, read_jsonl(f));
  emit(out, csv.str());
  return 0;
}

int cmd_serve(const std::string& path, const std::string& filter, int port, const std::string& address,
              std::optional<long> seed) {
  const Scenario s =
      Scenario::load(path, seed ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(*seed)) : std::nullopt);
  TeleopServer::Options o;
  o.address = address;
  o.port = static_cast<std::uint16_t>(port);
  o.session.filter_on = parse_switch(filter);
  TeleopServer server(s, o);
  server.start();
  std::cerr << "serving " << s.name << " on ws://" << address << ':' << server.port() << '\n';
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  const auto st = server.stats();
  std::cerr << "ticks=" << st.ticks << " overruns=" << st.overruns << " max_cycle=" << st.max_cycle * 1e3
            << " ms\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superquadric safety filter: scenarios, studies and teleoperation"};
  app.require_subcommand(1);

  std::string filter = "on";
  std::string out;
  std::optional<long> seed;
  int workers = 0;
  int port = 8765;

  auto* run = app.add_subcommand("run", "Simulate a scenario and write logs and metrics");
  std::string scenario;
  run->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--filter", filter, "on|off")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--out", out, "Output directory for logs");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--workers", workers, "Distance workers (default from scenario)");

  auto* bench = app.add_subcommand("bench", "Distance+gradient cycle time over pair counts");
  std::vector<int> pairs{8, 16, 32, 64, 128, 256};
  std::vector<int> bench_workers{1};
  int cycles = 50;
  long bench_seed = 7;
  bench->add_option("--pairs", pairs, "Pair counts");
  bench->add_option("--workers", bench_workers, "Worker counts");
  bench->add_option("--cycles", cycles, "Timed cycles per point")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Pair generator seed");
  bench->add_option("--out", out, "CSV path (default stdout)");

  auto* grad = app.add_subcommand("gradstudy", "Gradient accuracy against the reference SDF");
  std::vector<double> d_cs{0.3, 0.5, 1.0};
  std::vector<double> temps{1e-2, 1e-4, 1e-6, 1e-8, 1e-10};
  grad->add_option("--dc", d_cs, "Centroid distances");
  grad->add_option("--eps", temps, "Temperatures");
  grad->add_option("--out", out, "CSV path (default stdout)");

  auto* fig = app.add_subcommand("figtwo", "Implicit-function surrogate against signed distance");
  int samples = 61;
  fig->add_option("--samples", samples, "Offsets in [-3, 3]")->check(CLI::Range(2, 100000));
  fig->add_option("--out", out, "CSV path (default stdout)");

  auto* vox = app.add_subcommand("voxel", "Coverage and over-approximation of an SQ model");
  std::string model, reference;
  double delta = 0.005;
  vox->add_option("model", model, "Model SQ set JSON")->required()->check(CLI::ExistingFile);
  vox->add_option("reference", reference, "Reference SQ set JSON")->required()->check(CLI::ExistingFile);
  vox->add_option("--delta", delta, "Voxel size")->check(CLI::PositiveNumber);
  vox->add_option("--out", out, "JSON path (default stdout)");

  auto* plot = app.add_subcommand("plot", "Regenerate plot data from a cycle log");
  std::string jsonl;
  plot->add_option("log", jsonl, "cycles.jsonl")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out, "CSV path (default stdout)");

  auto* serve = app.add_subcommand("serve", "WebSocket teleoperation server");
  std::string address = "127.0.0.1";
  serve->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--address", address, "Bind address");
  serve->add_option("--filter", filter, "on|off")->check(CLI::IsMember({"on", "off"}));
  serve->add_option("--seed", seed, "Override the scenario seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, filter, out, seed, workers);
    if (*bench) return cmd_bench(pairs, bench_workers, cycles, bench_seed, out);
    if (*grad) return cmd_gradstudy(d_cs, temps, out);
    if (*fig) return cmd_figtwo(samples, out);
    if (*vox) return cmd_voxel(model, reference, delta, out);
    if (*plot) return cmd_plot(jsonl, out);
    if (*serve) return cmd_serve(scenario, filter, port, address, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
