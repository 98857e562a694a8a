#pragma once

#include "silo.hpp"

namespace scp {

// Single-process interpreter for lineage trees. Given the source silo
// contents, it computes what the distributed runtime should produce, going
// through the same spore/emitter/builder machinery but never a transport.
// Tests use it as the independent route to check send() results against.
class ReferenceEvaluator {
 public:
  explicit ReferenceEvaluator(std::shared_ptr<const Registry> reg,
                              Backend backend = Backend::specialized)
      : reg_(std::move(reg)), backend_(backend) {}

  void add_source(SiloId id, std::any data) { sources_[id] = std::move(data); }

  template <Picklable E>
  void add_source(const SiloRef<std::vector<E>>& ref, std::vector<E> data) {
    add_source(ref.id(), std::any(std::move(data)));
  }

  const std::any& eval(const Lineage& lin) {
    if (auto it = memo_.find(lin.result_id); it != memo_.end()) return it->second;
    std::any out;
    if (std::holds_alternative<SourceOp>(lin.op)) {
      auto it = sources_.find(lin.result_id);
      if (it == sources_.end())
        raise(Errc::unknown_silo, "reference evaluator has no data for silo " + to_string(lin.result_id));
      out = it->second;
    } else if (const ApplyOp* a = std::get_if<ApplyOp>(&lin.op)) {
      out = eval_spore(*reg_, a->spore, eval(*a->parent));
    } else {
      const PumpToOp& p = std::get<PumpToOp>(lin.op);
      std::unique_ptr<Builder> builder = reg_->builders().by_id(p.builder_id).make();
      CollectingEmitter em(backend_, *builder);
      eval_pump_spore(*reg_, p.fun, eval(*p.left), em);
      eval_pump_spore(*reg_, p.fun, eval(*p.right), em);
      out = builder->finish();
    }
    return memo_[lin.result_id] = std::move(out);
  }

  template <class T>
  T eval_as(const SiloRef<T>& ref) {
    const std::any& out = eval(*ref.lineage());
    const T* t = std::any_cast<T>(&out);
    if (!t) raise(Errc::type_mismatch, "reference result has unexpected type");
    return *t;
  }

 private:
  // Feeds emitted values straight into the builder; values still go through
  // an encode at emit time, like on the wire.
  class CollectingEmitter final : public Emitter {
   public:
    CollectingEmitter(Backend b, Builder& builder) : Emitter(b), builder_(builder) {}

   protected:
    void push(const std::string& pickler_id, Bytes encoded) override {
      builder_.add_encoded(pickler_id, encoded);
    }

   private:
    Builder& builder_;
  };

  std::shared_ptr<const Registry> reg_;
  Backend backend_;
  std::unordered_map<SiloId, std::any, UidHash> sources_;
  std::unordered_map<SiloId, std::any, UidHash> memo_;
};

}  // namespace scp
