#include "denrl/corpus.hpp"

#include <memory>
#include <algorithm>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace denrl {

using nlohmann::json;

TagVocab::TagVocab(Ontology onto) : onto_(std::move(onto)) {
  ne_ = static_cast<int>(onto_.entity_types.size());
  size_ = 1 + 2 * (ne_ + static_cast<int>(onto_.relation_types.size()));
}

int TagVocab::label_of(int t) const {
  if (t == O) return -1;
  if (is_entity(t)) return (t - 1) / 2;
  return (t - 1 - 2 * ne_) / 2;
}

std::string TagVocab::name(int t) const {
  if (t == O) return "O";
  const char* prefix = is_b(t) ? "B-" : "I-";
  int l = label_of(t);
  return prefix + (is_entity(t) ? onto_.entity_types[l] : onto_.relation_types[l]);
}

int TagVocab::parse(const std::string& name) const {
  if (name == "O") return O;
  if (name.size() < 3 || (name[0] != 'B' && name[0] != 'I') || name[1] != '-')
    throw std::invalid_argument("bad tag: " + name);
  bool b = name[0] == 'B';
  std::string label = name.substr(2);
  if (int e = onto_.entity_index(label); e >= 0)
    return b ? b_entity(e) : i_entity(e);
  if (int r = onto_.relation_index(label); r >= 0)
    return b ? b_relation(r) : i_relation(r);
  throw std::invalid_argument("unknown tag label: " + label);
}

void validate_sentence(const Sentence& s, const Ontology& onto) {
  if (s.tokens.empty()) throw std::invalid_argument("empty token list");
  int T = s.length();
  for (const auto& m : s.mentions) {
    if (m.span.start < 0 || m.span.end > T || m.span.start >= m.span.end)
      throw std::invalid_argument("mention span out of bounds");
    if (!onto.has_entity(m.entity_type))
      throw std::invalid_argument("unknown entity type: " + m.entity_type);
  }
  for (size_t i = 0; i < s.mentions.size(); ++i)
    for (size_t j = i + 1; j < s.mentions.size(); ++j)
      if (s.mentions[i].span.overlaps(s.mentions[j].span))
        throw std::invalid_argument("overlapping mentions");
  int nm = static_cast<int>(s.mentions.size());
  for (const auto& r : s.relations) {
    if (r.head < 0 || r.head >= nm || r.tail < 0 || r.tail >= nm)
      throw std::invalid_argument("relation mention index out of range");
    if (r.head == r.tail)
      throw std::invalid_argument("relation head == tail");
    if (!onto.has_relation(r.relation_type))
      throw std::invalid_argument("unknown relation type: " + r.relation_type);
  }
}

static void write_span(std::vector<int>& tags, const Span& sp, int b, int i) {
  tags[sp.start] = b;
  for (int t = sp.start + 1; t < sp.end; ++t) tags[t] = i;
}

std::vector<Instance> encode_tag_sequences(const Sentence& s,
                                           const TagVocab& tags,
                                           int* conflict_count) {
  const Ontology& onto = tags.ontology();
  int T = s.length();
  std::vector<Instance> out;
  out.reserve(T);
  for (int p = 0; p < T; ++p) {
    Instance inst;
    inst.start_position = p;
    inst.gold_tags.assign(T, TagVocab::O);
    int head = -1;
    for (size_t m = 0; m < s.mentions.size(); ++m)
      if (s.mentions[m].span.start == p) head = static_cast<int>(m);
    if (head >= 0) {
      const auto& hm = s.mentions[head];
      int e = onto.entity_index(hm.entity_type);
      inst.head_entity_type = e;
      write_span(inst.gold_tags, hm.span, tags.b_entity(e), tags.i_entity(e));
      std::set<Span> tagged_tails;
      for (const auto& rel : s.relations) {
        if (rel.head != head) continue;
        const auto& tm = s.mentions[rel.tail];
        if (!tagged_tails.insert(tm.span).second) {
          // Second relation to the same tail span is unrepresentable; the
          // first one by annotation order wins.
          if (conflict_count) ++(*conflict_count);
          continue;
        }
        int r = onto.relation_index(rel.relation_type);
        write_span(inst.gold_tags, tm.span, tags.b_relation(r),
                   tags.i_relation(r));
        inst.relations.push_back({r, hm.span, tm.span});
      }
      inst.positive = !inst.relations.empty();
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// Repairs dangling I-X (preceded by neither B-X nor I-X) into B-X.
static std::vector<int> repair_bio(const std::vector<int>& seq,
                                   const TagVocab& tags) {
  std::vector<int> out = seq;
  for (size_t t = 0; t < out.size(); ++t) {
    if (!tags.is_i(out[t])) continue;
    int b = tags.b_of(out[t]);
    if (t == 0 || (out[t - 1] != b && out[t - 1] != out[t])) out[t] = b;
  }
  return out;
}

std::set<Quadruplet> decode_quadruplets(
    const std::vector<std::vector<int>>& sequences, const TagVocab& tags) {
  std::set<Quadruplet> out;
  for (size_t p = 0; p < sequences.size(); ++p) {
    std::vector<int> seq = repair_bio(sequences[p], tags);
    int T = static_cast<int>(seq.size());
    // Head entity span must start exactly at p.
    if (static_cast<int>(p) >= T) continue;
    if (!tags.is_b(seq[p]) || !tags.is_entity(seq[p])) continue;
    Quadruplet q;
    q.tag1 = tags.label_of(seq[p]);
    int end = static_cast<int>(p) + 1;
    while (end < T && seq[end] == tags.i_entity(q.tag1)) ++end;
    q.e1 = {static_cast<int>(p), end};
    bool any_rel = false;
    for (int t = 0; t < T;) {
      if (tags.is_b(seq[t]) && tags.is_relation(seq[t])) {
        int r = tags.label_of(seq[t]);
        int re = t + 1;
        while (re < T && seq[re] == tags.i_relation(r)) ++re;
        Quadruplet qr = q;
        qr.e2 = Span{t, re};
        qr.re = r;
        out.insert(qr);
        any_rel = true;
        t = re;
      } else {
        ++t;
      }
    }
    if (!any_rel) out.insert(q);
  }
  return out;
}

std::set<Quadruplet> gold_records(const Sentence& s, const TagVocab& tags) {
  const Ontology& onto = tags.ontology();
  std::set<Quadruplet> out;
  for (size_t m = 0; m < s.mentions.size(); ++m) {
    Quadruplet q;
    q.e1 = s.mentions[m].span;
    q.tag1 = onto.entity_index(s.mentions[m].entity_type);
    bool heads_any = false;
    std::set<Span> seen_tails;
    for (const auto& rel : s.relations) {
      if (rel.head != static_cast<int>(m)) continue;
      Span tail = s.mentions[rel.tail].span;
      if (!seen_tails.insert(tail).second) continue;  // first wins
      Quadruplet qr = q;
      qr.e2 = tail;
      qr.re = onto.relation_index(rel.relation_type);
      out.insert(qr);
      heads_any = true;
    }
    if (!heads_any) out.insert(q);
  }
  return out;
}

static Sentence sentence_from_json(const json& j) {
  Sentence s;
  s.id = j.at("id").get<std::string>();
  s.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& m : j.at("mentions")) {
    EntityMention em;
    em.span = {m.at("start").get<int>(), m.at("end").get<int>()};
    em.entity_type = m.at("type").get<std::string>();
    s.mentions.push_back(std::move(em));
  }
  for (const auto& r : j.at("relations")) {
    RelationAnnotation ra;
    ra.head = r.at("head").get<int>();
    ra.tail = r.at("tail").get<int>();
    ra.relation_type = r.at("type").get<std::string>();
    s.relations.push_back(std::move(ra));
  }
  return s;
}

static json sentence_to_json(const Sentence& s) {
  json j;
  j["id"] = s.id;
  j["tokens"] = s.tokens;
  j["mentions"] = json::array();
  for (const auto& m : s.mentions)
    j["mentions"].push_back(
        {{"start", m.span.start}, {"end", m.span.end}, {"type", m.entity_type}});
  j["relations"] = json::array();
  for (const auto& r : s.relations)
    j["relations"].push_back(
        {{"head", r.head}, {"tail", r.tail}, {"type", r.relation_type}});
  return j;
}

std::vector<Sentence> load_corpus(const std::filesystem::path& path,
                                  const Ontology& onto, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());
  std::vector<Sentence> out;
  LoadStats local;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Sentence s = sentence_from_json(json::parse(line));
    // Unknown labels are hard errors; structural violations skip the record.
    for (const auto& m : s.mentions)
      if (!onto.has_entity(m.entity_type))
        throw std::runtime_error("unknown entity type '" + m.entity_type +
                                 "' at line " + std::to_string(lineno));
    for (const auto& r : s.relations)
      if (!onto.has_relation(r.relation_type))
        throw std::runtime_error("unknown relation type '" + r.relation_type +
                                 "' at line " + std::to_string(lineno));
    try {
      validate_sentence(s, onto);
    } catch (const std::invalid_argument&) {
      ++local.skipped;
      continue;
    }
    // Duplicate (head, tail) pairs: keep the first by annotation order.
    std::set<std::pair<int, int>> pairs;
    std::vector<RelationAnnotation> kept;
    for (const auto& r : s.relations) {
      if (pairs.insert({r.head, r.tail}).second)
        kept.push_back(r);
      else
        ++local.relation_conflicts;
    }
    s.relations = std::move(kept);
    out.push_back(std::move(s));
  }
  if (local.skipped || local.relation_conflicts)
    std::cerr << path.filename().string() << ": skipped " << local.skipped
              << " invalid records, dropped " << local.relation_conflicts
              << " duplicate-pair relations\n";
  if (stats) *stats = local;
  return out;
}

void save_corpus(const std::vector<Sentence>& sentences,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : sentences) out << sentence_to_json(s).dump() << "\n";
}

Ontology load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ontology: " + path.string());
  json j = json::parse(in);
  Ontology onto;
  onto.entity_types = j.at("entity_types").get<std::vector<std::string>>();
  onto.relation_types = j.at("relation_types").get<std::vector<std::string>>();
  return onto;
}

void save_ontology(const Ontology& onto, const std::filesystem::path& path) {
  std::ofstream out(path);
  json j;
  j["entity_types"] = onto.entity_types;
  j["relation_types"] = onto.relation_types;
  out << j.dump(2) << "\n";
}

}  // namespace denrl
