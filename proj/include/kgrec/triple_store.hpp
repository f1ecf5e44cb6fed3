#pragma once

#include <compare>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgrec/error.hpp"

namespace kgrec {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Dense label <-> id bijection. Ids are assigned in insertion order from 0.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::span<const std::string> labels) {
    for (const auto& l : labels) add(l);
  }

  std::uint32_t add(std::string_view label) {
    auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(labels_.size());
    labels_.emplace_back(label);
    index_.emplace(labels_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t at(std::string_view label) const {
    auto id = find(label);
    if (!id) throw DataError("unknown label '" + std::string(label) + "'");
    return *id;
  }

  bool contains(std::string_view label) const { return find(label).has_value(); }
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Triple set over an entity and a relation vocabulary. Insertion order is
// preserved for iteration; membership is exact.
class TripleStore {
 public:
  TripleStore() = default;
  TripleStore(Vocabulary entities, Vocabulary relations)
      : entities_(std::move(entities)), relations_(std::move(relations)) {}

  // Returns false if the triple was already present.
  bool insert(const Triple& t) {
    if (t.head >= entities_.size() || t.tail >= entities_.size())
      throw std::out_of_range("triple references unknown entity");
    if (t.relation >= relations_.size())
      throw std::out_of_range("triple references unknown relation");
    if (!keys_.insert(t).second) return false;
    triples_.push_back(t);
    return true;
  }

  bool insert(std::string_view head, std::string_view relation, std::string_view tail) {
    Triple t;
    t.head = entities_.add(head);
    t.relation = relations_.add(relation);
    t.tail = entities_.add(tail);
    return insert(t);
  }

  bool contains(EntityId h, RelationId r, EntityId t) const {
    if (h >= entities_.size() || t >= entities_.size() || r >= relations_.size())
      return false;
    return keys_.contains(Triple{h, r, t});
  }
  bool contains(const Triple& t) const { return contains(t.head, t.relation, t.tail); }

  const std::vector<Triple>& triples() const { return triples_; }
  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  const std::string& head_label(const Triple& t) const { return entities_.label(t.head); }
  const std::string& relation_label(const Triple& t) const {
    return relations_.label(t.relation);
  }
  const std::string& tail_label(const Triple& t) const { return entities_.label(t.tail); }

 private:
  struct Hash {
    std::size_t operator()(const Triple& t) const {
      std::uint64_t k = (static_cast<std::uint64_t>(t.head) << 32) | t.tail;
      k ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
      return std::hash<std::uint64_t>{}(k);
    }
  };

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple, Hash> keys_;
};

struct LoadStats {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
};

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline TripleStore read_triples(std::istream& in, LoadStats* stats = nullptr,
                                const std::string& source = "<stream>") {
  TripleStore store;
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    ++local.lines;
    if (!store.insert(fields[0], fields[1], fields[2])) ++local.duplicates;
  }
  if (stats) *stats = local;
  return store;
}

inline TripleStore load_triples(const std::string& path, LoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file '" + path + "'");
  LoadStats local;
  auto store = read_triples(in, &local, path);
  if (local.duplicates > 0) {
    std::cerr << "warning: " << path << ": dropped " << local.duplicates
              << " duplicate triple(s)\n";
  }
  if (stats) *stats = local;
  return store;
}

inline void write_triples(std::ostream& out, const TripleStore& store) {
  for (const auto& t : store.triples()) {
    out << store.head_label(t) << '\t' << store.relation_label(t) << '\t'
        << store.tail_label(t) << '\n';
  }
}

inline void save_triples(const std::string& path, const TripleStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write triple file '" + path + "'");
  write_triples(out, store);
}

}  // namespace kgrec
