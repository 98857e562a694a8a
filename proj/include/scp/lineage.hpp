#pragma once

#include <memory>
#include <variant>

#include "place.hpp"
#include "spore.hpp"

namespace scp {

struct Lineage;
using LineagePtr = std::shared_ptr<const Lineage>;

// Leaf: a silo that already exists (or will exist) in a node's store.
struct SourceOp {};

// A spore applied to the parent's data, on the parent's node.
struct ApplyOp {
  LineagePtr parent;
  Spore spore;
};

// Stream both sources through a pump spore into a builder at this node.
struct PumpToOp {
  LineagePtr left;
  LineagePtr right;
  Spore fun;
  std::string builder_id;
};

// The DAG of deferred operations defining a silo. Immutable and acyclic by
// construction; every node records the id and type of the silo it denotes
// and the place where that silo will live.
struct Lineage {
  SiloId result_id;
  TypeTag result_type;
  Place place;
  std::variant<SourceOp, ApplyOp, PumpToOp> op;

  static LineagePtr source(SiloId id, TypeTag type, Place place) {
    return std::make_shared<Lineage>(Lineage{id, std::move(type), std::move(place), SourceOp{}});
  }

  // An applied silo always lives where its parent lives.
  static LineagePtr apply(SiloId id, TypeTag type, LineagePtr parent, Spore spore) {
    Place place = parent->place;
    return std::make_shared<Lineage>(
        Lineage{id, std::move(type), std::move(place), ApplyOp{std::move(parent), std::move(spore)}});
  }

  static LineagePtr pump_to(SiloId id, TypeTag type, Place dest, LineagePtr left, LineagePtr right,
                            Spore fun, std::string builder_id) {
    return std::make_shared<Lineage>(
        Lineage{id, std::move(type), std::move(dest),
                PumpToOp{std::move(left), std::move(right), std::move(fun), std::move(builder_id)}});
  }
};

namespace wire {

inline void write_uid(ByteWriter& w, const Uid& u) {
  w.i32_le(u.origin);
  w.u64_le(u.seq);
}

inline Uid read_uid(ByteReader& r) {
  Uid u;
  u.origin = r.i32_le();
  u.seq = r.u64_le();
  return u;
}

inline void write_place(ByteWriter& w, const Place& p) {
  w.i32_le(p.node_id);
  w.str(p.address);
}

inline Place read_place(ByteReader& r) {
  Place p;
  p.node_id = r.i32_le();
  p.address = std::string(r.str());
  return p;
}

inline void write_lineage(ByteWriter& w, const Lineage& lin) {
  w.u8(static_cast<uint8_t>(lin.op.index()));
  write_uid(w, lin.result_id);
  w.str(lin.result_type.canonical());
  write_place(w, lin.place);
  if (const ApplyOp* a = std::get_if<ApplyOp>(&lin.op)) {
    write_lineage(w, *a->parent);
    write_spore(w, a->spore);
  } else if (const PumpToOp* p = std::get_if<PumpToOp>(&lin.op)) {
    write_lineage(w, *p->left);
    write_lineage(w, *p->right);
    write_spore(w, p->fun);
    w.str(p->builder_id);
  }
}

inline LineagePtr read_lineage(ByteReader& r) {
  uint8_t kind = r.u8();
  SiloId id = read_uid(r);
  TypeTag type = TypeTag::parse(r.str());
  Place place = read_place(r);
  switch (kind) {
    case 0:
      return Lineage::source(id, std::move(type), std::move(place));
    case 1: {
      LineagePtr parent = read_lineage(r);
      Spore s = read_spore(r);
      return std::make_shared<Lineage>(
          Lineage{id, std::move(type), std::move(place), ApplyOp{std::move(parent), std::move(s)}});
    }
    case 2: {
      LineagePtr left = read_lineage(r);
      LineagePtr right = read_lineage(r);
      Spore fun = read_spore(r);
      std::string builder_id(r.str());
      return std::make_shared<Lineage>(
          Lineage{id, std::move(type), std::move(place),
                  PumpToOp{std::move(left), std::move(right), std::move(fun), std::move(builder_id)}});
    }
    default:
      raise(Errc::decode_failure, "unknown lineage kind");
  }
}

}  // namespace wire

// Depth-first walk over every node of a lineage tree.
template <class F>
void walk_lineage(const Lineage& lin, F&& visit) {
  visit(lin);
  if (const ApplyOp* a = std::get_if<ApplyOp>(&lin.op)) {
    walk_lineage(*a->parent, visit);
  } else if (const PumpToOp* p = std::get_if<PumpToOp>(&lin.op)) {
    walk_lineage(*p->left, visit);
    walk_lineage(*p->right, visit);
  }
}

}  // namespace scp
