#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace denrl {

// Half-open token span [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool contains(int t) const { return t >= start && t < end; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  bool operator==(const Span& o) const = default;
  auto operator<=>(const Span& o) const = default;
};

struct EntityMention {
  Span span;
  std::string entity_type;

  bool operator==(const EntityMention& o) const = default;
};

// Directed head -> tail relation between two mentions (indices into
// Sentence::mentions).
struct RelationAnnotation {
  int head = -1;
  int tail = -1;
  std::string relation_type;

  bool operator==(const RelationAnnotation& o) const = default;
};

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<EntityMention> mentions;
  std::vector<RelationAnnotation> relations;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct Ontology {
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;

  int entity_index(const std::string& t) const;
  int relation_index(const std::string& t) const;
  bool has_entity(const std::string& t) const { return entity_index(t) >= 0; }
  bool has_relation(const std::string& t) const { return relation_index(t) >= 0; }
};

// Extraction record. Head-only sequences yield records without tail/relation.
struct Quadruplet {
  Span e1;
  int tag1 = -1;                // entity type index
  std::optional<Span> e2;
  std::optional<int> re;        // relation type index

  auto key() const {
    return std::make_tuple(e1, tag1, e2.value_or(Span{-1, -1}),
                           re.value_or(-1));
  }
  bool operator==(const Quadruplet& o) const { return key() == o.key(); }
  bool operator<(const Quadruplet& o) const { return key() < o.key(); }
};

// Tag inventory: O plus B/I per entity type and per relation type.
class TagVocab {
 public:
  TagVocab() = default;
  explicit TagVocab(Ontology onto);

  int size() const { return size_; }
  static constexpr int O = 0;

  int b_entity(int e) const { return 1 + 2 * e; }
  int i_entity(int e) const { return 2 + 2 * e; }
  int b_relation(int r) const { return 1 + 2 * ne_ + 2 * r; }
  int i_relation(int r) const { return 2 + 2 * ne_ + 2 * r; }

  bool is_o(int t) const { return t == O; }
  bool is_b(int t) const { return t != O && (t - 1) % 2 == 0; }
  bool is_i(int t) const { return t != O && (t - 1) % 2 == 1; }
  bool is_entity(int t) const { return t >= 1 && t <= 2 * ne_; }
  bool is_relation(int t) const { return t > 2 * ne_ && t < size_; }
  // Label index within its own ontology list (entity or relation).
  int label_of(int t) const;
  // B-X for the same label as tag t.
  int b_of(int t) const { return is_b(t) ? t : t - 1; }

  std::string name(int t) const;
  int parse(const std::string& name) const;

  const Ontology& ontology() const { return onto_; }

 private:
  Ontology onto_;
  int ne_ = 0;
  int size_ = 1;
};

// One of the T per-start-position tag sequences of a sentence.
struct Instance {
  int sentence_index = -1;
  int start_position = 0;
  std::vector<int> gold_tags;
  bool positive = false;
  // Relations headed by the mention starting at start_position.
  struct Rel {
    int relation = -1;  // relation type index
    Span head;
    Span tail;
  };
  std::vector<Rel> relations;
  // Entity type index of the mention starting at start_position, -1 if none.
  int head_entity_type = -1;
};

inline int Ontology::entity_index(const std::string& t) const {
  for (size_t i = 0; i < entity_types.size(); ++i)
    if (entity_types[i] == t) return static_cast<int>(i);
  return -1;
}

inline int Ontology::relation_index(const std::string& t) const {
  for (size_t i = 0; i < relation_types.size(); ++i)
    if (relation_types[i] == t) return static_cast<int>(i);
  return -1;
}

}  // namespace denrl
