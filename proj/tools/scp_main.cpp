// scp: worker node launcher, benchmark harness and data generator.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

#include <scp/bench.hpp>
#include <scp/scp.hpp>

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

std::string self_binary() {
  char buf[4096];
  ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return "scp";
  buf[n] = '\0';
  return std::string(buf);
}

std::shared_ptr<const scp::Registry> cluster_registry() {
  auto reg = std::make_shared<scp::Registry>();
  scp::register_bench_support(*reg);
  return reg;
}

// Plain key=value config files seed the defaults below; command-line flags
// override them. Keys are the long option names, '-' and '_' interchangeable.
class ConfigDefaults {
 public:
  ConfigDefaults(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "--config" && i + 1 < argc)
        kv_ = scp::parse_kv_file(argv[i + 1]);
      else if (a.rfind("--config=", 0) == 0)
        kv_ = scp::parse_kv_file(a.substr(9));
    }
    std::map<std::string, std::string> norm;
    for (auto& [k, v] : kv_) {
      std::string key = k;
      for (char& c : key)
        if (c == '_') c = '-';
      norm[key] = v;
    }
    kv_ = std::move(norm);
  }

  template <class T>
  void apply(const char* key, T& var) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
      var = it->second;
    } else if constexpr (std::is_same_v<T, bool>) {
      var = it->second == "1" || it->second == "true" || it->second == "yes";
    } else if constexpr (std::is_signed_v<T>) {
      var = static_cast<T>(std::stoll(it->second));
    } else {
      var = static_cast<T>(std::stoull(it->second));
    }
  }

 private:
  std::map<std::string, std::string> kv_;
};

int run_node(int32_t id, const std::string& listen, const std::string& peers_path,
             const std::string& backend, size_t batch_size, int64_t timeout_ms) {
  scp::NodeConfig cfg;
  cfg.backend = scp::parse_backend(backend);
  cfg.batch_size = batch_size;
  cfg.request_timeout = std::chrono::milliseconds(timeout_ms);

  auto transport = std::make_shared<scp::SocketTransport>(listen, cfg.max_frame,
                                                          std::chrono::seconds(10));
  // advertise the resolved port so ":0" listeners stay dialable in pump
  // destinations and peer tables
  auto [host, port] = scp::split_host_port(listen);
  cfg.self = scp::Place{id, host + ":" + std::to_string(transport->listen_port())};
  if (!peers_path.empty()) cfg.peers = scp::parse_peers_file(peers_path);

  scp::NodeRuntime node(cfg, cluster_registry(), transport);
  node.start();
  std::cout << "scp node " << id << " listening on " << cfg.self.address << " (port "
            << transport->listen_port() << "), backend " << backend << std::endl;

  std::signal(SIGTERM, on_signal);
  std::signal(SIGINT, on_signal);
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));

  node.stop();
  std::cout << "scp node " << id << " shut down" << std::endl;
  return 0;
}

int run_bench(scp::BenchConfig cfg, const std::string& backend, bool local, bool spawn,
              const std::string& peers_path) {
  cfg.run_generic = backend == "generic" || backend == "both";
  cfg.run_specialized = backend == "specialized" || backend == "both";
  if (local) {
    cfg.mode = scp::BenchConfig::Mode::local;
  } else if (spawn) {
    cfg.mode = scp::BenchConfig::Mode::spawn;
    cfg.node_binary = self_binary();
  } else if (!peers_path.empty()) {
    cfg.mode = scp::BenchConfig::Mode::peers;
    cfg.peers = scp::parse_peers_file(peers_path);
  } else {
    std::cerr << "bench needs one of --local, --spawn or --peers FILE\n";
    return 2;
  }
  scp::BenchReport report = scp::run_benchmark(cfg);
  std::cout << report.human_text();
  return 0;
}

int run_gen(size_t records, uint64_t seed, const std::string& out_path) {
  std::vector<scp::Person> people = scp::gen_people(records, seed);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "cannot open " << out_path << "\n";
      return 1;
    }
    out = &file;
  }
  for (const scp::Person& p : people) *out << p.id << "," << p.name << "," << p.age << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scp: silos, spores and pluggable serialization over a small cluster"};
  app.require_subcommand(1);

  ConfigDefaults conf(argc, argv);
  std::string config_path;

  // node
  auto* node = app.add_subcommand("node", "run a worker node until SIGTERM");
  node->add_option("--config", config_path, "plain key=value config file; flags override it");
  int32_t id = 1;
  std::string listen = "127.0.0.1:7001";
  std::string peers_path;
  std::string backend = "specialized";
  size_t batch_size = 1024;
  int64_t timeout_ms = 30000;
  conf.apply("id", id);
  conf.apply("listen", listen);
  conf.apply("peers", peers_path);
  conf.apply("backend", backend);
  conf.apply("batch-size", batch_size);
  conf.apply("timeout-ms", timeout_ms);
  node->add_option("--id", id, "node id (unique in the cluster)");
  node->add_option("--listen", listen, "listen address host:port");
  node->add_option("--peers", peers_path, "peers file: lines of id=host:port");
  node->add_option("--backend", backend, "serialization backend: generic|specialized")
      ->check(CLI::IsMember({"generic", "specialized"}));
  node->add_option("--batch-size", batch_size, "elements per EmitBatch frame");
  node->add_option("--timeout-ms", timeout_ms, "request timeout in milliseconds");

  // bench
  auto* bench = app.add_subcommand("bench", "serialization backend benchmark (map + groupByKey)");
  bench->add_option("--config", config_path, "plain key=value config file; flags override it");
  scp::BenchConfig bcfg;
  std::string bench_backend = "both";
  bool local = false;
  bool spawn = false;
  std::string bench_peers;
  conf.apply("records", bcfg.records);
  conf.apply("reps", bcfg.reps);
  conf.apply("warmup", bcfg.warmup);
  conf.apply("seed", bcfg.seed);
  conf.apply("backend", bench_backend);
  conf.apply("local", local);
  conf.apply("spawn", spawn);
  conf.apply("peers", bench_peers);
  conf.apply("batch-size", bcfg.batch_size);
  bench->add_option("--records", bcfg.records, "number of person records");
  bench->add_option("--reps", bcfg.reps, "timed repetitions per backend");
  bench->add_option("--warmup", bcfg.warmup, "warmup repetitions per backend");
  bench->add_option("--seed", bcfg.seed, "data generator seed");
  bench->add_option("--backend", bench_backend, "generic|specialized|both")
      ->check(CLI::IsMember({"generic", "specialized", "both"}));
  bench->add_flag("--local", local, "run 4 in-process nodes over the loopback transport");
  bench->add_flag("--spawn", spawn, "spawn 4 worker processes over TCP");
  bench->add_option("--peers", bench_peers, "peers file of 4 already-running workers");
  bench->add_option("--batch-size", bcfg.batch_size, "elements per EmitBatch frame");
  int64_t bench_timeout_ms = 30000;
  conf.apply("timeout-ms", bench_timeout_ms);
  bench->add_option("--timeout-ms", bench_timeout_ms, "request timeout in milliseconds");

  // gen
  auto* gen = app.add_subcommand("gen", "generate person records as CSV");
  gen->add_option("--config", config_path, "plain key=value config file; flags override it");
  size_t gen_records = 100000;
  uint64_t gen_seed = 42;
  std::string gen_out;
  conf.apply("records", gen_records);
  conf.apply("seed", gen_seed);
  conf.apply("out", gen_out);
  gen->add_option("--records", gen_records, "number of records");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (node->parsed()) return run_node(id, listen, peers_path, backend, batch_size, timeout_ms);
    if (bench->parsed()) {
      bcfg.timeout = std::chrono::milliseconds(bench_timeout_ms);
      return run_bench(bcfg, bench_backend, local, spawn, bench_peers);
    }
    if (gen->parsed()) return run_gen(gen_records, gen_seed, gen_out);
  } catch (const scp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
