#pragma once

#include <signal.h>
#include <sys/wait.h>

#include <algorithm>
#include <sstream>

#include "local_cluster.hpp"
#include "people.hpp"
#include "socket_transport.hpp"

namespace scp {

// The map + groupByKey benchmark: 4 silos of Person records on 4 nodes,
// keyed by age decile, grouped across the cluster, results pulled back to
// the driver. Compares the generic and specialized serialization backends
// end to end.

struct BenchConfig {
  size_t records = 100000;
  int nodes = 4;
  int reps = 10;
  int warmup = 3;
  uint64_t seed = 42;
  bool run_generic = true;
  bool run_specialized = true;

  enum class Mode { local, spawn, peers } mode = Mode::local;
  std::string node_binary;    // spawn mode: the CLI binary to exec as workers
  std::vector<Place> peers;   // peers mode: already-running workers, ids 1..nodes
  size_t batch_size = 1024;
  std::chrono::milliseconds timeout{30000};
  bool verbose = true;
};

struct BenchRun {
  Backend backend;
  int rep;
  double millis;
};

struct BenchReport {
  size_t records = 0;
  int nodes = 0;
  int reps = 0;
  int warmup = 0;
  uint64_t seed = 0;
  bool gate_passed = false;
  std::vector<BenchRun> runs;

  std::vector<double> times_of(Backend b) const {
    std::vector<double> out;
    for (const BenchRun& r : runs)
      if (r.backend == b) out.push_back(r.millis);
    return out;
  }

  static double median(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  }

  double median_ms(Backend b) const { return median(times_of(b)); }

  bool has(Backend b) const { return !times_of(b).empty(); }

  // (t_gen - t_spec) / t_gen, from medians.
  std::optional<double> speedup_percent() const {
    if (!has(Backend::generic) || !has(Backend::specialized)) return std::nullopt;
    double tg = median_ms(Backend::generic);
    double ts = median_ms(Backend::specialized);
    if (tg <= 0) return std::nullopt;
    return (tg - ts) / tg * 100.0;
  }

  std::string machine_lines() const {
    std::ostringstream os;
    for (const BenchRun& r : runs)
      os << "run," << to_string(r.backend) << "," << r.rep << "," << r.millis << "\n";
    return os.str();
  }

  std::string human_text() const {
    std::ostringstream os;
    os << "scp bench: map + groupByKey over " << nodes << " silos / " << nodes << " nodes\n";
    os << "records: " << records << ", reps: " << reps << " (+" << warmup
       << " warmup), seed: " << seed << "\n";
    os << "timing window: first send() to last future completion"
       << " (data generation and populate excluded)\n";
    os << "correctness gate: " << (gate_passed ? "PASS" : "FAIL") << "\n";
    os << machine_lines();
    if (has(Backend::generic)) os << "median generic: " << median_ms(Backend::generic) << " ms\n";
    if (has(Backend::specialized))
      os << "median specialized: " << median_ms(Backend::specialized) << " ms\n";
    if (auto s = speedup_percent())
      os << "speedup (specialized vs generic): " << *s
         << "% (the original Scala prototype of this model reported ~48%)\n";
    return os.str();
  }
};

namespace bench_detail {

using GroupedVec = std::vector<std::pair<int32_t, std::vector<Person>>>;

inline GroupedVec normalize(GroupedVec g) {
  for (auto& [k, vs] : g)
    std::sort(vs.begin(), vs.end(), [](const Person& a, const Person& b) {
      return canonical_bytes(a) < canonical_bytes(b);
    });
  std::sort(g.begin(), g.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return g;
}

struct Pipeline {
  std::vector<SiloRef<std::vector<std::pair<int32_t, Person>>>> keyed;
  std::vector<SiloRef<GroupedVec>> grouped;
};

inline Pipeline build_pipeline(NodeRuntime& driver,
                               const std::vector<SiloRef<std::vector<Person>>>& inputs,
                               const std::vector<Place>& places) {
  const Registry& reg = driver.registry();
  auto user = make_spore<Person, std::pair<int32_t, Person>>(reg, kAgeBucketBodyId);
  Pipeline p;
  for (const auto& in : inputs) p.keyed.push_back(map_silo(in, user));
  auto part = hash_partitioner<int32_t>(reg, static_cast<int32_t>(places.size()));
  p.grouped = group_by_key<int32_t, Person>(driver, p.keyed, part, places);
  return p;
}

// One full distributed round: build fresh lineage, send every grouped silo
// concurrently, await all results. Returns the decoded outputs.
inline std::vector<GroupedVec> run_round(NodeRuntime& driver,
                                         const std::vector<SiloRef<std::vector<Person>>>& inputs,
                                         const std::vector<Place>& places) {
  Pipeline p = build_pipeline(driver, inputs, places);
  std::vector<Future<GroupedVec>> futs;
  futs.reserve(p.grouped.size());
  for (const auto& g : p.grouped) futs.push_back(g.send());
  std::vector<GroupedVec> out;
  out.reserve(futs.size());
  for (auto& f : futs) out.push_back(f.take());
  return out;
}

struct WorkerProc {
  pid_t pid = -1;
  ~WorkerProc() { terminate(); }
  void terminate() {
    if (pid > 0) {
      ::kill(pid, SIGTERM);
      int status = 0;
      ::waitpid(pid, &status, 0);
      pid = -1;
    }
  }
};

inline std::vector<uint16_t> probe_free_ports(int n) {
  std::vector<std::unique_ptr<SocketTransport>> held;
  std::vector<uint16_t> ports;
  for (int i = 0; i < n; ++i) {
    held.push_back(std::make_unique<SocketTransport>("127.0.0.1:0"));
    ports.push_back(held.back()->listen_port());
  }
  return ports;  // holders close on return; tiny reuse race, retried by caller
}

inline pid_t spawn_worker(const std::string& binary, int id, uint16_t port,
                          const std::string& peers_file, Backend backend, size_t batch) {
  pid_t pid = ::fork();
  if (pid < 0) raise(Errc::node_unreachable, "fork failed");
  if (pid == 0) {
    std::string listen = "127.0.0.1:" + std::to_string(port);
    std::string id_s = std::to_string(id);
    std::string batch_s = std::to_string(batch);
    std::string backend_s(to_string(backend));
    const char* argv[] = {binary.c_str(), "node",      "--id",     id_s.c_str(),
                          "--listen",     listen.c_str(), "--peers",  peers_file.c_str(),
                          "--backend",    backend_s.c_str(), "--batch-size", batch_s.c_str(),
                          nullptr};
    ::execv(binary.c_str(), const_cast<char**>(argv));
    ::_exit(127);
  }
  return pid;
}

}  // namespace bench_detail

// Runs the configured benchmark for one backend and appends its timed runs.
// Throws if the correctness gate fails; timing never happens without it.
inline void run_backend(const BenchConfig& cfg, Backend backend, BenchReport& report) {
  using namespace bench_detail;
  auto reg = std::make_shared<Registry>();
  register_bench_support(*reg);

  std::vector<Person> everyone = gen_people(cfg.records, cfg.seed);

  std::unique_ptr<LocalCluster> local;
  std::unique_ptr<NodeRuntime> driver_holder;
  std::vector<std::unique_ptr<WorkerProc>> procs;
  std::string peers_file;
  NodeRuntime* driver = nullptr;
  std::vector<Place> places;

  if (cfg.mode == BenchConfig::Mode::local) {
    NodeConfig proto;
    proto.backend = backend;
    proto.batch_size = cfg.batch_size;
    proto.request_timeout = cfg.timeout;
    local = std::make_unique<LocalCluster>(cfg.nodes, reg, proto);
    driver = &local->driver();
    for (int i = 1; i <= cfg.nodes; ++i) places.push_back(local->place(i));
  } else {
    if (cfg.mode == BenchConfig::Mode::spawn) {
      std::vector<uint16_t> ports = probe_free_ports(cfg.nodes);
      peers_file = "/tmp/scp_bench_peers." + std::to_string(::getpid()) + "." +
                   std::to_string(ports[0]);
      {
        std::ofstream out(peers_file);
        for (int i = 0; i < cfg.nodes; ++i)
          out << (i + 1) << "=127.0.0.1:" << ports[i] << "\n";
      }
      for (int i = 0; i < cfg.nodes; ++i) {
        auto wp = std::make_unique<WorkerProc>();
        wp->pid = spawn_worker(cfg.node_binary, i + 1, ports[i], peers_file, backend,
                               cfg.batch_size);
        procs.push_back(std::move(wp));
      }
      for (int i = 0; i < cfg.nodes; ++i)
        places.push_back(Place{i + 1, "127.0.0.1:" + std::to_string(ports[i])});
    } else {
      places = cfg.peers;
      if (static_cast<int>(places.size()) != cfg.nodes)
        raise(Errc::size_mismatch, "need exactly " + std::to_string(cfg.nodes) + " peers");
    }
    NodeConfig dcfg;
    dcfg.self = Place{0, ""};
    dcfg.peers = places;
    dcfg.backend = backend;
    dcfg.batch_size = cfg.batch_size;
    dcfg.request_timeout = cfg.timeout;
    driver_holder = std::make_unique<NodeRuntime>(dcfg, reg, std::make_shared<SocketTransport>(""));
    driver_holder->start();
    driver = driver_holder.get();
    // wait until every worker answers a handshake
    auto deadline = std::chrono::steady_clock::now() + cfg.timeout;
    for (const Place& p : places) {
      for (;;) {
        try {
          driver->probe(p);
          break;
        } catch (const Error& e) {
          if (e.code() == Errc::registry_mismatch) throw;
          if (std::chrono::steady_clock::now() > deadline)
            raise(Errc::node_unreachable, "worker " + std::to_string(p.node_id) +
                                              " did not come up at " + p.address);
          std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
      }
    }
  }

  // split the records evenly into one silo per node
  std::vector<SiloRef<std::vector<Person>>> inputs;
  ReferenceEvaluator oracle(reg, backend);
  for (int i = 0; i < cfg.nodes; ++i) {
    std::vector<Person> slice;
    for (size_t j = static_cast<size_t>(i); j < everyone.size(); j += static_cast<size_t>(cfg.nodes))
      slice.push_back(everyone[j]);
    auto ref = populate<Person>(*driver, places[static_cast<size_t>(i)], slice);
    oracle.add_source(ref, std::move(slice));
    inputs.push_back(ref);
  }

  // correctness gate: distributed result must equal the single-process
  // interpreter before any timed run counts
  {
    Pipeline p = build_pipeline(*driver, inputs, places);
    std::vector<Future<GroupedVec>> futs;
    for (const auto& g : p.grouped) futs.push_back(g.send());
    for (size_t j = 0; j < futs.size(); ++j) {
      GroupedVec got = normalize(futs[j].take());
      GroupedVec want = normalize(oracle.eval_as(p.grouped[j]));
      if (got != want)
        raise(Errc::remote_eval_error,
              "correctness gate failed for backend " + std::string(to_string(backend)));
    }
  }

  for (int rep = 0; rep < cfg.warmup; ++rep) run_round(*driver, inputs, places);

  for (int rep = 0; rep < cfg.reps; ++rep) {
    auto t0 = std::chrono::steady_clock::now();
    run_round(*driver, inputs, places);
    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    report.runs.push_back(BenchRun{backend, rep, ms});
    if (cfg.verbose)
      std::cout << "run," << to_string(backend) << "," << rep << "," << ms << std::endl;
  }

  if (driver_holder) driver_holder->stop();
  for (auto& p : procs) p->terminate();
  if (!peers_file.empty()) ::unlink(peers_file.c_str());
}

inline BenchReport run_benchmark(const BenchConfig& cfg) {
  BenchReport report;
  report.records = cfg.records;
  report.nodes = cfg.nodes;
  report.reps = cfg.reps;
  report.warmup = cfg.warmup;
  report.seed = cfg.seed;
  if (cfg.run_generic) run_backend(cfg, Backend::generic, report);
  if (cfg.run_specialized) run_backend(cfg, Backend::specialized, report);
  report.gate_passed = true;  // run_backend throws when the gate fails
  return report;
}

}  // namespace scp
