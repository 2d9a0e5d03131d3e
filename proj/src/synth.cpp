#include "denrl/synth.hpp"

#include <memory>
#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "denrl/corpus.hpp"

namespace denrl {

namespace {

using Rng = std::mt19937_64;

const char* kEntityNames[] = {"PERSON",  "ORGANIZATION", "LOCATION",
                              "FACILITY", "PRODUCT",      "EVENT"};
const char* kRelationNames[] = {"founder_of", "located_in", "worked_at",
                                "capital_of", "contains",   "parent_of",
                                "lives_in",   "part_of"};
const char* kFunctionWords[] = {"of", "in", "at", "the", "by", "for"};

std::string nth_name(const char* const* table, int table_size,
                     const char* fallback, int i) {
  if (i < table_size) return table[i];
  return fallback + std::to_string(i);
}

struct Pools {
  // surfaces[type] -> list of multi-token-capable surface forms
  std::vector<std::vector<std::vector<std::string>>> surfaces;
  std::vector<std::vector<std::vector<std::string>>> patterns;  // per relation
  std::vector<std::vector<std::string>> neutral;
  std::vector<int> head_type, tail_type;
  std::vector<double> rel_weight;     // long-tailed relation frequencies
  std::vector<int> distractor_from;   // confusable relation per relation

  // Distant-supervision false positives: the KB asserts relation r for the
  // pair, but the sentence actually carries a confusable pattern. Real DS
  // noise is systematic — a frequent KB relation keeps mislabeling the
  // surface patterns of a rarer relation that links the same entity types —
  // so the distractor comes from one fixed confusable relation rather than
  // uniformly from all of them.
  const std::vector<std::string>& distractor(Rng& rng, int r, int n_rel) {
    if (n_rel <= 1) return neutral[rng() % neutral.size()];
    const auto& src = patterns[distractor_from[r]];
    return src[rng() % src.size()];
  }
};

// Patterns draw only from their own content pool; keeping relation,
// neutral, and filler vocabularies disjoint is what lets pattern-based
// trust signals discriminate at all.
std::vector<std::string> make_pattern(Rng& rng,
                                      const std::vector<std::string>& content) {
  std::uniform_int_distribution<int> len_dist(2, 3);
  int len = std::min<int>(len_dist(rng), static_cast<int>(content.size()));
  // sample without replacement; repeated tokens would distort the word
  // statistics the trust signals lean on
  std::vector<std::string> pool = content;
  std::shuffle(pool.begin(), pool.end(), rng);
  return {pool.begin(), pool.begin() + len};
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Pools build_pools(const SynthConfig& cfg, const Ontology& onto, Rng& rng) {
  Pools pools;
  pools.surfaces.resize(cfg.entity_types);
  for (int t = 0; t < cfg.entity_types; ++t) {
    for (int k = 0; k < cfg.entities_per_type; ++k) {
      std::string stem = "ent" + std::to_string(t) + "x" + std::to_string(k);
      if (k % 3 == 0)
        pools.surfaces[t].push_back({stem + "a", stem + "b"});
      else
        pools.surfaces[t].push_back({stem});
    }
  }
  pools.patterns.resize(cfg.relation_types);
  for (int r = 0; r < cfg.relation_types; ++r) {
    std::vector<std::string> content;
    for (int j = 0; j < 5; ++j)
      content.push_back("r" + std::to_string(r) + "w" + std::to_string(j));
    std::set<std::string> seen;
    while (static_cast<int>(pools.patterns[r].size()) <
           cfg.patterns_per_relation) {
      auto pat = make_pattern(rng, content);
      if (seen.insert(join(pat)).second) pools.patterns[r].push_back(pat);
    }
    // Relations come in two groups sharing an entity-type signature, the
    // way KB schemas reuse (PERSON, ORGANIZATION)-style pairs; sharing is
    // what makes mislabeled pairs type-plausible.
    int group = cfg.relation_types > 1 ? r % 2 : 0;
    pools.head_type.push_back(group % cfg.entity_types);
    pools.tail_type.push_back((group + 1) % cfg.entity_types);
  }
  // Long-tailed relation frequencies. Within each confusability group the
  // head relation is 3.5x more frequent than the second member, which it
  // mislabels: at a 30% noise rate the second member's patterns then carry
  // roughly 0.3/0.7 * 3.5 = 1.5x more wrong-label occurrences than true
  // ones, so their DS-label majority is wrong. Everyone else mislabels the
  // group head, whose far larger true mass shrugs it off, and inside every
  // relation's own labeled data the injected patterns stay well below the
  // genuine ones (0.3 vs 0.7 of that label's mass over equal pattern
  // counts).
  for (int r = 0; r < cfg.relation_types; ++r) {
    int rank = cfg.relation_types > 1 ? r / 2 : 0;
    double base = (cfg.relation_types > 1 && r % 2) ? 0.75 : 1.0;
    pools.rel_weight.push_back(
        base / (rank == 0 ? 1.0 : 3.5 + (rank - 1)));
  }
  for (int r = 0; r < cfg.relation_types; ++r) {
    // Group head targets the group's second member; everyone else targets
    // the head. Relations without a type twin fall back to any other.
    int first = -1, second = -1;
    for (int o = 0; o < cfg.relation_types; ++o) {
      if (pools.head_type[o] != pools.head_type[r] ||
          pools.tail_type[o] != pools.tail_type[r])
        continue;
      if (first < 0) first = o;
      else if (second < 0) second = o;
    }
    int pick = r == first ? second : first;
    if (pick < 0 && cfg.relation_types > 1) pick = (r + 1) % cfg.relation_types;
    pools.distractor_from.push_back(pick);
  }
  {
    std::vector<std::string> content;
    for (int j = 0; j < 10; ++j) content.push_back("n" + std::to_string(j));
    for (const char* w : kFunctionWords) content.push_back(w);
    std::set<std::string> seen;
    while (static_cast<int>(pools.neutral.size()) < cfg.neutral_patterns) {
      auto pat = make_pattern(rng, content);
      if (seen.insert(join(pat)).second) pools.neutral.push_back(pat);
    }
  }
  (void)onto;
  return pools;
}

int sample_weighted(Rng& rng, const std::vector<double>& w) {
  std::discrete_distribution<int> dist(w.begin(), w.end());
  return dist(rng);
}

}  // namespace

SynthResult synthesize_corpus(const SynthConfig& cfg) {
  if (cfg.relation_types <= 0)
    throw std::invalid_argument("synthesize_corpus: zero relation types");
  if (cfg.entity_types <= 0)
    throw std::invalid_argument("synthesize_corpus: zero entity types");
  if (cfg.relation_noise_rate < 0 || cfg.relation_noise_rate > 1 ||
      cfg.entity_noise_rate < 0 || cfg.entity_noise_rate > 1)
    throw std::invalid_argument("synthesize_corpus: noise rate out of [0,1]");

  SynthResult res;
  for (int t = 0; t < cfg.entity_types; ++t)
    res.ontology.entity_types.push_back(
        nth_name(kEntityNames, std::size(kEntityNames), "TYPE", t));
  for (int r = 0; r < cfg.relation_types; ++r)
    res.ontology.relation_types.push_back(
        nth_name(kRelationNames, std::size(kRelationNames), "rel", r));

  Rng pool_rng(cfg.seed);
  Pools pools = build_pools(cfg, res.ontology, pool_rng);
  for (int r = 0; r < cfg.relation_types; ++r) {
    res.rules.emplace_back(res.ontology.relation_types[r],
                           res.ontology.entity_types[pools.head_type[r]]);
    for (const auto& p : pools.patterns[r])
      res.planted_patterns[res.ontology.relation_types[r]].push_back(join(p));
  }

  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 0x100000 * (cfg.split + 1) + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> filler_len(0, 2);

  for (int i = 0; i < cfg.n_sentences; ++i) {
    // Plan the sentence as (surface, relation) choices first.
    struct PlannedEntity {
      std::vector<std::string> tokens;
      int type;
    };
    std::vector<PlannedEntity> ents;
    std::vector<std::vector<std::string>> between;  // pattern text after ent k
    std::vector<RelationAnnotation> rels;
    std::vector<bool> rel_noisy;

    auto pick_surface = [&](int type) {
      const auto& pool = pools.surfaces[type];
      return PlannedEntity{pool[rng() % pool.size()], type};
    };

    if (u(rng) < cfg.positive_fraction) {
      int r = sample_weighted(rng, pools.rel_weight);
      ents.push_back(pick_surface(pools.head_type[r]));
      ents.push_back(pick_surface(pools.tail_type[r]));
      bool noisy = u(rng) < cfg.relation_noise_rate;
      between.push_back(
          noisy ? pools.distractor(rng, r, cfg.relation_types)
                : pools.patterns[r][rng() % pools.patterns[r].size()]);
      rels.push_back({0, 1, res.ontology.relation_types[r]});
      rel_noisy.push_back(noisy);
      if (u(rng) < cfg.multi_relation_prob) {
        // Chain a second relation headed by the first tail (shared entity).
        std::vector<int> candidates;
        std::vector<double> cand_weight;
        for (int r2 = 0; r2 < cfg.relation_types; ++r2)
          if (pools.head_type[r2] == ents[1].type) {
            candidates.push_back(r2);
            cand_weight.push_back(pools.rel_weight[r2]);
          }
        if (!candidates.empty()) {
          int r2 = candidates[sample_weighted(rng, cand_weight)];
          ents.push_back(pick_surface(pools.tail_type[r2]));
          bool noisy2 = u(rng) < cfg.relation_noise_rate;
          between.push_back(
              noisy2 ? pools.distractor(rng, r2, cfg.relation_types)
                     : pools.patterns[r2][rng() % pools.patterns[r2].size()]);
          rels.push_back({1, 2, res.ontology.relation_types[r2]});
          rel_noisy.push_back(noisy2);
        }
      }
    } else {
      int t1 = static_cast<int>(rng() % cfg.entity_types);
      int t2 = static_cast<int>(rng() % cfg.entity_types);
      ents.push_back(pick_surface(t1));
      ents.push_back(pick_surface(t2));
      between.push_back(pools.neutral[rng() % pools.neutral.size()]);
    }

    // Materialize tokens and true mention spans.
    Sentence clean;
    clean.id = "s" + std::to_string(cfg.split) + "_" + std::to_string(i);
    for (size_t k = 0; k < ents.size(); ++k) {
      int start = clean.length();
      for (const auto& tok : ents[k].tokens) clean.tokens.push_back(tok);
      clean.mentions.push_back(
          {{start, clean.length()},
           res.ontology.entity_types[ents[k].type]});
      if (k < between.size())
        for (const auto& tok : between[k]) clean.tokens.push_back(tok);
    }
    int nfill = filler_len(rng);
    for (int f = 0; f < nfill; ++f)
      clean.tokens.push_back("f" + std::to_string(rng() % 10));
    clean.relations = rels;

    Sentence train = clean;
    NoiseFlags flags;
    for (size_t k = 0; k < rels.size(); ++k)
      if (rel_noisy[k]) flags.noisy_relations.push_back(static_cast<int>(k));
    // The DS label keeps the relation; the clean labels drop it because the
    // sentence text carries a non-relational pattern.
    {
      std::vector<RelationAnnotation> kept;
      for (size_t k = 0; k < clean.relations.size(); ++k)
        if (!rel_noisy[k]) kept.push_back(clean.relations[k]);
      clean.relations = std::move(kept);
    }

    for (size_t m = 0; m < train.mentions.size(); ++m) {
      if (u(rng) >= cfg.entity_noise_rate) continue;
      auto& mention = train.mentions[m];
      bool boundary = u(rng) < 0.5;
      bool corrupted = false;
      if (boundary) {
        Span grown{mention.span.start, mention.span.end + 1};
        bool ok = grown.end <= train.length();
        for (size_t o = 0; ok && o < train.mentions.size(); ++o)
          if (o != m && grown.overlaps(train.mentions[o].span)) ok = false;
        if (ok) {
          mention.span = grown;
          corrupted = true;
        } else if (mention.span.length() >= 2) {
          mention.span.end -= 1;
          corrupted = true;
        }
      }
      if (!corrupted) {
        int true_type = res.ontology.entity_index(mention.entity_type);
        int other =
            (true_type + 1 + static_cast<int>(rng() % std::max(
                                  1, cfg.entity_types - 1))) %
            cfg.entity_types;
        if (other == true_type) continue;  // single-type ontology
        mention.entity_type = res.ontology.entity_types[other];
        corrupted = true;
      }
      if (corrupted) flags.noisy_mentions.push_back(static_cast<int>(m));
    }

    res.train.push_back(std::move(train));
    res.clean.push_back(std::move(clean));
    res.flags.push_back(std::move(flags));
  }
  return res;
}

void save_flags(const std::vector<NoiseFlags>& flags,
                const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : flags)
    j.push_back({{"noisy_mentions", f.noisy_mentions},
                 {"noisy_relations", f.noisy_relations}});
  std::ofstream out(path);
  out << j.dump() << "\n";
}

std::vector<NoiseFlags> load_flags(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open noise sidecar: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  std::vector<NoiseFlags> flags;
  for (const auto& e : j) {
    NoiseFlags f;
    f.noisy_mentions = e.at("noisy_mentions").get<std::vector<int>>();
    f.noisy_relations = e.at("noisy_relations").get<std::vector<int>>();
    flags.push_back(std::move(f));
  }
  return flags;
}

bool instance_relation_clean(const Sentence& train_sentence,
                             const NoiseFlags& flags, const Instance& inst) {
  int head = -1;
  for (size_t m = 0; m < train_sentence.mentions.size(); ++m)
    if (train_sentence.mentions[m].span.start == inst.start_position)
      head = static_cast<int>(m);
  if (head < 0) return true;
  for (size_t r = 0; r < train_sentence.relations.size(); ++r) {
    if (train_sentence.relations[r].head != head) continue;
    for (int nr : flags.noisy_relations)
      if (nr == static_cast<int>(r)) return false;
  }
  return true;
}

bool instance_is_clean(const Sentence& train_sentence, const NoiseFlags& flags,
                       const Instance& inst) {
  int head = -1;
  for (size_t m = 0; m < train_sentence.mentions.size(); ++m)
    if (train_sentence.mentions[m].span.start == inst.start_position)
      head = static_cast<int>(m);
  if (head < 0) return true;  // all-O instance, nothing to corrupt
  for (int nm : flags.noisy_mentions)
    if (nm == head) return false;
  for (size_t r = 0; r < train_sentence.relations.size(); ++r) {
    const auto& rel = train_sentence.relations[r];
    if (rel.head != head) continue;
    for (int nr : flags.noisy_relations)
      if (nr == static_cast<int>(r)) return false;
    for (int nm : flags.noisy_mentions)
      if (nm == rel.tail) return false;
  }
  return true;
}

}  // namespace denrl
