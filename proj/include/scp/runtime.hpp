#pragma once

#include <atomic>
#include <deque>
#include <iostream>
#include <thread>
#include <unordered_map>

#include "future.hpp"
#include "transport.hpp"

namespace scp {

struct NodeConfig {
  Place self;
  std::vector<Place> peers;
  Backend backend = Backend::specialized;
  size_t batch_size = 1024;
  std::chrono::milliseconds request_timeout{30000};
  size_t max_frame = kDefaultMaxFrame;
  size_t reply_warn_bytes = 64ull << 20;  // soft warning; send stays small-data by contract
  size_t emit_window = 4;                 // unacknowledged EmitBatch frames per source
};

// A send/populate reply before typed decoding.
struct ReplyPayload {
  std::string pickler_id;
  Bytes data;
};

struct RuntimeStats {
  uint64_t apply_evaluations = 0;  // spore applications performed by materialize
  uint64_t emitted_values = 0;     // values pushed through pump emitters
  uint64_t requests_served = 0;
  uint64_t ignored_frames = 0;
};

// One cluster participant: owns the silo store, serves send/pump traffic and
// issues its own requests. All materialization state is confined to the
// dispatcher thread; pump sources stream from dedicated threads and talk
// back to the dispatcher through the inbox.
class NodeRuntime {
 public:
  NodeRuntime(NodeConfig cfg, std::shared_ptr<const Registry> reg, std::shared_ptr<Transport> tr)
      : cfg_(std::move(cfg)), reg_(std::move(reg)), transport_(std::move(tr)) {
    peers_[cfg_.self.node_id] = cfg_.self;
    for (const Place& p : cfg_.peers) peers_[p.node_id] = p;
  }

  ~NodeRuntime() { stop(); }

  NodeRuntime(const NodeRuntime&) = delete;
  NodeRuntime& operator=(const NodeRuntime&) = delete;

  void start() {
    transport_->start(cfg_.self.node_id, reg_->fingerprint(),
                      [this](int32_t from, Bytes body) { deliver(from, std::move(body)); });
    dispatcher_ = std::thread([this] { run_dispatcher(); });
  }

  void stop() {
    {
      std::lock_guard lk(inbox_m_);
      if (stopping_) return;
      stopping_ = true;
    }
    inbox_cv_.notify_all();
    if (dispatcher_.joinable()) dispatcher_.join();
    {
      // only the dispatcher spawns streams, so after the join this abort
      // reaches every window that will ever exist
      std::lock_guard lk(windows_m_);
      for (auto& [key, win] : windows_) win->abort();
    }
    transport_->stop();
    {
      std::lock_guard lk(streams_m_);
      for (std::thread& t : stream_threads_)
        if (t.joinable()) t.join();
      stream_threads_.clear();
    }
    fail_all_pending(Error(Errc::node_unreachable, "node stopped"));
  }

  const NodeConfig& config() const { return cfg_; }
  const Place& self() const { return cfg_.self; }
  const Registry& registry() const { return *reg_; }
  std::shared_ptr<const Registry> registry_ptr() const { return reg_; }

  Place peer(int32_t node_id) const {
    auto it = peers_.find(node_id);
    if (it == peers_.end())
      raise(Errc::node_unreachable, "node " + std::to_string(node_id) + " is not a known peer");
    return it->second;
  }

  SiloId new_silo_id() { return Uid{cfg_.self.node_id, ++seq_}; }

  // Forces a connection and registry handshake with a peer.
  void probe(const Place& peer) { transport_->probe(resolve(peer)); }

  // Ships the lineage to its owning node and returns the eventual pickled
  // result. Completes with NodeUnreachable after the configured timeout.
  Future<ReplyPayload> request_send(LineagePtr lineage) {
    Uid rid = new_silo_id();
    Promise<ReplyPayload> p = register_pending(rid);
    Place dest = resolve(lineage->place);
    try {
      transport_->send(dest, encode_message(SendRequest{rid, std::move(lineage)}));
    } catch (const Error& e) {
      if (erase_pending(rid)) p.set_error(e);
    }
    return p.future();
  }

  // Creates a Source silo at the destination from already-pickled data.
  Future<ReplyPayload> request_populate(SiloId silo_id, const Place& place, TypeTag type,
                                        std::string pickler_id, Bytes data) {
    Uid rid = new_silo_id();
    Promise<ReplyPayload> p = register_pending(rid);
    try {
      transport_->send(resolve(place),
                       encode_message(PopulateRequest{rid, silo_id, std::move(type),
                                                      std::move(pickler_id), std::move(data)}));
    } catch (const Error& e) {
      if (erase_pending(rid)) p.set_error(e);
    }
    return p.future();
  }

  RuntimeStats stats() const {
    RuntimeStats s;
    s.apply_evaluations = apply_evals_.load();
    s.emitted_values = emitted_.load();
    s.requests_served = served_.load();
    s.ignored_frames = ignored_.load();
    return s;
  }

 private:
  struct StoredSilo {
    std::shared_ptr<const std::any> data;
    TypeTag type;
  };

  using Cont = std::function<void(const StoredSilo*, const Error*)>;

  struct InFlight {
    LineagePtr lineage;
    std::vector<Cont> conts;
  };

  struct PumpState {
    SiloId dest_silo;
    TypeTag result_type;
    std::unique_ptr<Builder> builder;
    uint8_t waiting_mask = 0b11;
  };

  struct EmitWindow {
    std::mutex m;
    std::condition_variable cv;
    size_t inflight = 0;
    size_t limit = 4;
    bool aborted = false;

    bool acquire() {
      std::unique_lock lk(m);
      cv.wait(lk, [&] { return aborted || inflight < limit; });
      if (aborted) return false;
      ++inflight;
      return true;
    }
    void release() {
      std::lock_guard lk(m);
      if (inflight > 0) --inflight;
      cv.notify_all();
    }
    void abort() {
      std::lock_guard lk(m);
      aborted = true;
      cv.notify_all();
    }
  };

  struct Pending {
    Promise<ReplyPayload> promise;
    std::chrono::steady_clock::time_point deadline;
  };

  struct Item {
    int32_t from = -1;
    Bytes body;
    std::function<void()> job;
  };

  // Streams one pump source: encodes emitted values into batches and ships
  // them under the flow-control window.
  class NetEmitter final : public Emitter {
   public:
    NetEmitter(NodeRuntime* rt, const PumpRequest& req, std::shared_ptr<EmitWindow> win)
        : Emitter(rt->cfg_.backend), rt_(rt), req_(req), win_(std::move(win)) {}

    void flush_final() { flush(); }

   protected:
    void push(const std::string& pickler_id, Bytes encoded) override {
      if (!batch_.empty() && pickler_id != batch_pickler_) flush();
      batch_pickler_ = pickler_id;
      batch_.push_back(std::move(encoded));
      if (batch_.size() >= rt_->cfg_.batch_size) flush();
    }

   private:
    void flush() {
      if (batch_.empty()) return;
      if (!win_->acquire()) raise(Errc::remote_eval_error, "pump aborted");
      EmitBatch b{req_.pump_id, req_.role, batch_pickler_, std::move(batch_)};
      batch_.clear();
      rt_->emitted_ += b.elements.size();
      rt_->transport_->send(rt_->resolve(req_.dest), encode_message(b));
    }

    NodeRuntime* rt_;
    const PumpRequest& req_;
    std::shared_ptr<EmitWindow> win_;
    std::string batch_pickler_;
    std::vector<Bytes> batch_;
  };

  Place resolve(const Place& p) const {
    auto it = peers_.find(p.node_id);
    return it != peers_.end() ? it->second : p;
  }

  Promise<ReplyPayload> register_pending(Uid rid) {
    Promise<ReplyPayload> p;
    {
      std::lock_guard lk(pending_m_);
      pending_.emplace(rid, Pending{p, std::chrono::steady_clock::now() + cfg_.request_timeout});
    }
    post([] {});  // wake the dispatcher so it picks up the new deadline
    return p;
  }

  bool erase_pending(Uid rid) {
    std::lock_guard lk(pending_m_);
    return pending_.erase(rid) > 0;
  }

  void fail_all_pending(const Error& e) {
    std::unordered_map<Uid, Pending, UidHash> taken;
    {
      std::lock_guard lk(pending_m_);
      taken.swap(pending_);
    }
    for (auto& [rid, p] : taken) p.promise.set_error(e);
  }

  void deliver(int32_t from, Bytes body) {
    {
      std::lock_guard lk(inbox_m_);
      if (stopping_) return;
      inbox_.push_back(Item{from, std::move(body), nullptr});
    }
    inbox_cv_.notify_one();
  }

  void post(std::function<void()> job) {
    {
      std::lock_guard lk(inbox_m_);
      if (stopping_) return;
      inbox_.push_back(Item{-1, Bytes(), std::move(job)});
    }
    inbox_cv_.notify_one();
  }

  void run_dispatcher() {
    for (;;) {
      Item item;
      bool have = false;
      {
        std::unique_lock lk(inbox_m_);
        inbox_cv_.wait_until(lk, next_deadline(), [&] { return stopping_ || !inbox_.empty(); });
        if (stopping_) return;
        if (!inbox_.empty()) {
          item = std::move(inbox_.front());
          inbox_.pop_front();
          have = true;
        }
      }
      if (have) {
        if (item.job) {
          item.job();
        } else {
          try {
            Message m = decode_message(item.body);
            handle(item.from, m);
          } catch (const std::exception& e) {
            ++ignored_;
            std::cerr << "[scp node " << cfg_.self.node_id << "] dropped frame from " << item.from
                      << ": " << e.what() << "\n";
          }
        }
      }
      sweep_timeouts();
    }
  }

  std::chrono::steady_clock::time_point next_deadline() {
    std::lock_guard lk(pending_m_);
    auto t = std::chrono::steady_clock::now() + std::chrono::hours(1);
    for (const auto& [rid, p] : pending_) t = std::min(t, p.deadline);
    return t;
  }

  void sweep_timeouts() {
    std::vector<Promise<ReplyPayload>> expired;
    {
      std::lock_guard lk(pending_m_);
      auto now = std::chrono::steady_clock::now();
      for (auto it = pending_.begin(); it != pending_.end();) {
        if (it->second.deadline <= now) {
          expired.push_back(it->second.promise);
          it = pending_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (Promise<ReplyPayload>& p : expired)
      p.set_error(Error(Errc::node_unreachable, "request timed out"));
  }

  void handle(int32_t from, Message& m) {
    std::visit(
        [&](auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, SendRequest>)
            handle_send_request(from, v);
          else if constexpr (std::is_same_v<T, SendReply>)
            handle_send_reply(v);
          else if constexpr (std::is_same_v<T, ErrorReply>)
            handle_error_reply(v);
          else if constexpr (std::is_same_v<T, PopulateRequest>)
            handle_populate(from, v);
          else if constexpr (std::is_same_v<T, PumpRequest>)
            handle_pump_request(v);
          else if constexpr (std::is_same_v<T, EmitBatch>)
            handle_emit_batch(from, v);
          else if constexpr (std::is_same_v<T, EmitAck>)
            handle_emit_ack(v);
          else if constexpr (std::is_same_v<T, PumpDone>)
            handle_pump_done(v);
          else
            ++ignored_;  // handshakes live below the runtime
        },
        m);
  }

  // Remote failures travel as RemoteEvalError except the codes the protocol
  // keeps distinct.
  Error wrap_remote(const Error& e) const {
    if (e.code() == Errc::unknown_silo || e.code() == Errc::builder_unknown ||
        e.code() == Errc::remote_eval_error)
      return e;
    return Error(Errc::remote_eval_error,
                 "node " + std::to_string(cfg_.self.node_id) + ": " + e.what());
  }

  void send_error_to(const Place& dest, Uid rid, const Error& e) {
    try {
      transport_->send(resolve(dest),
                       encode_message(ErrorReply{rid, e.code(), cfg_.self.node_id, e.what()}));
    } catch (...) {
    }
  }

  // ---- materialization (dispatcher thread only) ----

  void materialize(const LineagePtr& lin, Cont k) {
    if (auto it = store_.find(lin->result_id); it != store_.end()) {
      k(&it->second, nullptr);
      return;
    }
    auto [iit, fresh] = inflight_.try_emplace(lin->result_id);
    iit->second.conts.push_back(std::move(k));
    if (!fresh) return;  // someone is already computing this silo
    iit->second.lineage = lin;
    if (lin->place.node_id != cfg_.self.node_id) {
      finish_err(lin->result_id,
                 Error(Errc::remote_eval_error, "lineage for node " +
                                                    std::to_string(lin->place.node_id) +
                                                    " routed to node " +
                                                    std::to_string(cfg_.self.node_id)));
      return;
    }
    if (std::holds_alternative<SourceOp>(lin->op)) {
      finish_err(lin->result_id,
                 Error(Errc::unknown_silo, "silo " + to_string(lin->result_id) + " not present on node " +
                                               std::to_string(cfg_.self.node_id)));
    } else if (const ApplyOp* a = std::get_if<ApplyOp>(&lin->op)) {
      materialize(a->parent, [this, lin](const StoredSilo* parent, const Error* err) {
        if (err) {
          finish_err(lin->result_id, *err);
          return;
        }
        run_apply(lin, *parent);
      });
    } else {
      start_pump(lin);
    }
  }

  void run_apply(const LineagePtr& lin, const StoredSilo& parent) {
    try {
      const ApplyOp& a = std::get<ApplyOp>(lin->op);
      ++apply_evals_;
      std::any out = eval_spore(*reg_, a.spore, *parent.data);
      store_and_finish(lin->result_id, lin->result_type, std::move(out));
    } catch (const Error& e) {
      finish_err(lin->result_id, wrap_remote(e));
    } catch (const std::exception& e) {
      finish_err(lin->result_id, Error(Errc::remote_eval_error,
                                       "node " + std::to_string(cfg_.self.node_id) + ": " + e.what()));
    }
  }

  void store_and_finish(SiloId id, const TypeTag& type, std::any data) {
    store_.emplace(id, StoredSilo{std::make_shared<const std::any>(std::move(data)), type});
    finish_ok(id);
  }

  void finish_ok(SiloId id) {
    auto it = inflight_.find(id);
    if (it == inflight_.end()) return;
    std::vector<Cont> conts = std::move(it->second.conts);
    inflight_.erase(it);
    const StoredSilo& silo = store_.at(id);
    for (Cont& k : conts) k(&silo, nullptr);
  }

  void finish_err(SiloId id, const Error& e) {
    auto it = inflight_.find(id);
    if (it == inflight_.end()) return;
    std::vector<Cont> conts = std::move(it->second.conts);
    inflight_.erase(it);
    for (Cont& k : conts) k(nullptr, &e);
  }

  // ---- server side ----

  void handle_send_request(int32_t from, const SendRequest& m) {
    ++served_;
    Uid rid = m.request_id;
    materialize(m.lineage, [this, from, rid](const StoredSilo* silo, const Error* err) {
      if (err) {
        send_error_to(Place{from, ""}, rid, *err);
        return;
      }
      try {
        const ErasedPickler& pk =
            reg_->picklers().derive_for_tag(silo->type, cfg_.backend);
        ByteWriter w;
        pk.encode(w, *silo->data);
        Bytes data = w.take();
        if (data.size() >= cfg_.reply_warn_bytes)
          std::cerr << "[scp node " << cfg_.self.node_id << "] warning: send() reply of "
                    << data.size() << " bytes; send is meant for small data\n";
        if (data.size() + 64 > cfg_.max_frame)
          raise(Errc::remote_eval_error, "reply exceeds max frame size");
        transport_->send(resolve(Place{from, ""}),
                         encode_message(SendReply{rid, pk.id, std::move(data)}));
      } catch (const Error& e) {
        send_error_to(Place{from, ""}, rid, wrap_remote(e));
      }
    });
  }

  void handle_send_reply(SendReply& m) {
    Promise<ReplyPayload> p;
    {
      std::lock_guard lk(pending_m_);
      auto it = pending_.find(m.request_id);
      if (it == pending_.end()) {
        ++ignored_;
        return;
      }
      p = it->second.promise;
      pending_.erase(it);
    }
    p.set_value(ReplyPayload{std::move(m.pickler_id), std::move(m.data)});
  }

  void handle_error_reply(const ErrorReply& m) {
    {
      Promise<ReplyPayload> p;
      bool found = false;
      {
        std::lock_guard lk(pending_m_);
        auto it = pending_.find(m.request_id);
        if (it != pending_.end()) {
          p = it->second.promise;
          pending_.erase(it);
          found = true;
        }
      }
      if (found) {
        p.set_error(Error(m.code, m.text));
        return;
      }
    }
    if (auto it = pumps_.find(m.request_id); it != pumps_.end()) {
      abort_pump(m.request_id, Error(m.code, m.text));
      return;
    }
    ++ignored_;
  }

  void handle_populate(int32_t from, const PopulateRequest& m) {
    try {
      const ErasedPickler& pk = reg_->picklers().by_id(m.pickler_id);
      ByteReader r(m.data);
      std::any v = pk.decode(r);
      r.expect_end();
      store_.emplace(m.silo_id, StoredSilo{std::make_shared<const std::any>(std::move(v)), m.type});
      transport_->send(resolve(Place{from, ""}),
                       encode_message(SendReply{m.request_id, "", Bytes()}));
    } catch (const Error& e) {
      send_error_to(Place{from, ""}, m.request_id, wrap_remote(e));
    }
  }

  // ---- pump destination side ----

  void start_pump(const LineagePtr& lin) {
    const PumpToOp& op = std::get<PumpToOp>(lin->op);
    const BuilderFactory* bf = reg_->builders().maybe_by_id(op.builder_id);
    if (!bf) {
      finish_err(lin->result_id,
                 Error(Errc::builder_unknown, "builder '" + op.builder_id + "' not registered at node " +
                                                  std::to_string(cfg_.self.node_id)));
      return;
    }
    Uid pump_id = new_silo_id();
    PumpState st;
    st.dest_silo = lin->result_id;
    st.result_type = lin->result_type;
    st.builder = bf->make();
    pumps_.emplace(pump_id, std::move(st));
    const LineagePtr sources[2] = {op.left, op.right};
    for (uint8_t role = 0; role < 2; ++role) {
      PumpRequest req{pump_id, lin->result_id, cfg_.self, role, sources[role], op.fun, op.builder_id};
      try {
        transport_->send(resolve(sources[role]->place), encode_message(req));
      } catch (const Error& e) {
        abort_pump(pump_id, wrap_remote(e));
        return;
      }
    }
  }

  void handle_emit_batch(int32_t from, const EmitBatch& m) {
    auto it = pumps_.find(m.pump_id);
    if (it == pumps_.end()) {
      // aborted or unknown pump: still credit the source so its stream can
      // drain and terminate instead of parking on a starved window
      ++ignored_;
      ack_batch(from, m);
      return;
    }
    try {
      for (const Bytes& e : m.elements) it->second.builder->add_encoded(m.pickler_id, e);
    } catch (const Error& e) {
      abort_pump(m.pump_id, wrap_remote(e));
    }
    ack_batch(from, m);
  }

  void ack_batch(int32_t from, const EmitBatch& m) {
    try {
      transport_->send(resolve(Place{from, ""}), encode_message(EmitAck{m.pump_id, m.role}));
    } catch (...) {
    }
  }

  void handle_pump_done(const PumpDone& m) {
    auto it = pumps_.find(m.pump_id);
    if (it == pumps_.end()) {
      ++ignored_;
      return;
    }
    it->second.waiting_mask &= static_cast<uint8_t>(~(1u << m.role));
    if (it->second.waiting_mask != 0) return;
    SiloId dest = it->second.dest_silo;
    TypeTag type = it->second.result_type;
    std::unique_ptr<Builder> builder = std::move(it->second.builder);
    pumps_.erase(it);
    try {
      std::any out = builder->finish();
      store_and_finish(dest, type, std::move(out));
    } catch (const std::exception& e) {
      finish_err(dest, Error(Errc::remote_eval_error, e.what()));
    }
  }

  void abort_pump(Uid pump_id, const Error& e) {
    auto it = pumps_.find(pump_id);
    if (it == pumps_.end()) return;
    SiloId dest = it->second.dest_silo;
    pumps_.erase(it);
    finish_err(dest, e);
  }

  // ---- pump source side ----

  void handle_pump_request(const PumpRequest& m) {
    materialize(m.source, [this, m](const StoredSilo* silo, const Error* err) {
      if (err) {
        send_error_to(m.dest, m.pump_id, *err);
        return;
      }
      spawn_stream(m, silo->data);
    });
  }

  void spawn_stream(const PumpRequest& req, std::shared_ptr<const std::any> data) {
    auto win = std::make_shared<EmitWindow>();
    win->limit = cfg_.emit_window;
    std::pair<Uid, uint8_t> key{req.pump_id, req.role};
    {
      std::lock_guard lk(windows_m_);
      windows_[key] = win;
    }
    std::lock_guard lk(streams_m_);
    stream_threads_.emplace_back([this, req, data = std::move(data), win, key] {
      stream_main(req, *data, win);
      std::lock_guard wlk(windows_m_);
      windows_.erase(key);
    });
  }

  void stream_main(const PumpRequest& req, const std::any& data, std::shared_ptr<EmitWindow> win) {
    try {
      NetEmitter em(this, req, win);
      eval_pump_spore(*reg_, req.fun, data, em);
      em.flush_final();
      transport_->send(resolve(req.dest), encode_message(PumpDone{req.pump_id, req.role}));
    } catch (const Error& e) {
      send_error_to(req.dest, req.pump_id, wrap_remote(e));
    } catch (const std::exception& e) {
      send_error_to(req.dest, req.pump_id,
                    Error(Errc::remote_eval_error,
                          "node " + std::to_string(cfg_.self.node_id) + ": " + e.what()));
    }
  }

  void handle_emit_ack(const EmitAck& m) {
    std::shared_ptr<EmitWindow> win;
    {
      std::lock_guard lk(windows_m_);
      auto it = windows_.find({m.pump_id, m.role});
      if (it != windows_.end()) win = it->second;
    }
    if (win) win->release();
  }

  NodeConfig cfg_;
  std::shared_ptr<const Registry> reg_;
  std::shared_ptr<Transport> transport_;
  std::unordered_map<int32_t, Place> peers_;

  std::atomic<uint64_t> seq_{0};
  std::atomic<uint64_t> apply_evals_{0};
  std::atomic<uint64_t> emitted_{0};
  std::atomic<uint64_t> served_{0};
  std::atomic<uint64_t> ignored_{0};

  std::mutex inbox_m_;
  std::condition_variable inbox_cv_;
  std::deque<Item> inbox_;
  bool stopping_ = false;
  std::thread dispatcher_;

  std::mutex pending_m_;
  std::unordered_map<Uid, Pending, UidHash> pending_;

  // dispatcher-thread state
  std::unordered_map<SiloId, StoredSilo, UidHash> store_;
  std::unordered_map<SiloId, InFlight, UidHash> inflight_;
  std::unordered_map<Uid, PumpState, UidHash> pumps_;

  std::mutex windows_m_;
  std::map<std::pair<Uid, uint8_t>, std::shared_ptr<EmitWindow>> windows_;
  std::mutex streams_m_;
  std::vector<std::thread> stream_threads_;
};

}  // namespace scp
