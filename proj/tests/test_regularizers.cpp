#include <random>

#include "denrl/regularizers.hpp"
#include "denrl/sal.hpp"
#include "doctest.h"

using namespace denrl;

namespace {

Ontology contains_ontology() {
  return {{"PERSON", "LOCATION"}, {"Contains", "Company_worked"}};
}

}  // namespace

TEST_CASE("BoW counts aggregate over a relation's trusted patterns") {
  PatternSet set;
  set.by_relation["Contains"] = {{", the capital of", 4, 0, 0, 0},
                                 {", section of", 2, 0, 0, 0},
                                 {""
                                  "near", 1, 0, 0, 0}};
  BowTable bow = set.bow();
  CHECK(bow.count("Contains", "of") == 2);  // appears in two patterns
  CHECK(bow.count("Contains", "capital") == 1);
  CHECK(bow.count("Contains", "near") == 1);
  CHECK(bow.count("Contains", "banana") == 0);
  CHECK(bow.count("Nope", "of") == 0);
}

TEST_CASE("guidance distribution weights BoW and entity tokens") {
  Ontology onto = contains_ontology();
  TagVocab tags(onto);
  // "Lyor Cohen , chief manager at Warner Music"
  std::vector<std::string> tokens = {"Lyor",   "Cohen", ",",     "chief",
                                     "manager", "at",    "Warner", "Music"};
  Instance inst;
  inst.start_position = 0;
  inst.positive = true;
  inst.head_entity_type = 0;
  inst.relations = {{1, {0, 2}, {6, 8}}};  // Company_worked

  BowTable bow;
  bow.counts["Company_worked"] = {
      {"chief", 8}, {"manager", 14}, {"at", 7}, {"of", 16}};

  Vec a = guidance_for_relation(tokens, inst, 1, "Company_worked", bow);
  REQUIRE(a.size() == 8);
  CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.minCoeff() > 0.0);
  // "manager" carries the largest mass, entity tokens beat the comma
  int argmax = 0;
  for (int i = 1; i < 8; ++i)
    if (a(i) > a(argmax)) argmax = i;
  CHECK(argmax == 4);
  CHECK(a(0) > a(2));
  CHECK(a(0) == doctest::Approx(a(6)).epsilon(1e-12));  // both scored 1.0

  // no BoW hits: softmax over the entity indicator
  BowTable empty;
  Vec b = guidance_for_relation(tokens, inst, 1, "Company_worked", empty);
  double hi = std::exp(1.0), lo = std::exp(0.0);
  double denom = 4 * hi + 4 * lo;
  CHECK(b(0) == doctest::Approx(hi / denom).epsilon(1e-9));
  CHECK(b(3) == doctest::Approx(lo / denom).epsilon(1e-9));

  CHECK_THROWS_AS(guidance_for_relation(tokens, inst, 0, "Contains", bow),
                  std::invalid_argument);
}

TEST_CASE("instance guidance averages over distinct relation types") {
  Vec a(3), b(3);
  a << 0.5, 0.3, 0.2;
  b << 0.1, 0.1, 0.8;
  Vec m = instance_guidance({a, b});
  CHECK(m(0) == doctest::Approx(0.3));
  CHECK(m(2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(instance_guidance({}), std::invalid_argument);
}

TEST_CASE("attention summary is the mean of the rows") {
  Mat A(2, 3);
  A << 0.2, 0.3, 0.5, 0.6, 0.2, 0.2;
  Vec s = model_attention_summary(A);
  CHECK(s(0) == doctest::Approx(0.4));
  CHECK(s(1) == doctest::Approx(0.25));
  CHECK(s(2) == doctest::Approx(0.35));
}

TEST_CASE("br loss equals the elementwise oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0, 1);
  Vec g(5), s(5);
  for (int i = 0; i < 5; ++i) {
    g(i) = d(rng);
    s(i) = d(rng);
  }
  double expected = 0;
  for (int i = 0; i < 5; ++i) expected += (g(i) - s(i)) * (g(i) - s(i));
  CHECK(br_loss(g, s) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(br_loss(Vec::Zero(3), Vec::Zero(4)),
                  std::invalid_argument);
}

TEST_CASE("logic distance reproduces the worked examples") {
  Ontology onto = contains_ontology();
  TagVocab tags(onto);
  CompiledRules rules =
      compile_rules({{"Contains", "LOCATION"}}, tags);  // Contains -> LOCATION
  int b_loc = tags.b_entity(1);
  int b_contains = tags.b_relation(0);
  int V = tags.size();

  // p(Contains|e2) = 0.7, p(LOCATION|e1) = 0.4 -> distance 0.3
  Vec p1 = Vec::Constant(V, 0.01), p2 = Vec::Constant(V, 0.01);
  p1(b_loc) = 0.4;
  p2(b_contains) = 0.7;
  CHECK(logic_distance(p1, p2, b_loc, b_contains, rules) ==
        doctest::Approx(0.3).epsilon(1e-12));

  // 0.8 vs 0.8 -> fully satisfied, distance 0
  p1(b_loc) = 0.8;
  p2(b_contains) = 0.8;
  CHECK(logic_distance(p1, p2, b_loc, b_contains, rules) == 0.0);

  // predicted tail tag matches no rule -> 0
  CHECK(logic_distance(p1, p2, b_loc, tags.b_relation(1), rules) == 0.0);
}

TEST_CASE("olf loss sums the distances over the entity pairs") {
  Ontology onto = contains_ontology();
  TagVocab tags(onto);
  CompiledRules rules = compile_rules({{"Contains", "LOCATION"}}, tags);
  int V = tags.size();
  // Rows built so the softmax argmax hits B-Contains at the tail rows.
  Mat Z = Mat::Zero(4, V);
  Z(1, tags.b_relation(0)) = 4.0;  // tail of pair 1
  Z(3, tags.b_relation(0)) = 4.0;  // tail of pair 2
  Z(0, tags.b_entity(1)) = 1.0;
  Z(2, tags.b_entity(1)) = 3.0;

  auto softmax_at = [&](int row, int tag) {
    Eigen::RowVectorXd r = Z.row(row);
    double m = r.maxCoeff();
    return std::exp(r(tag) - m) / (r.array() - m).exp().sum();
  };
  double d1 = std::max(0.0, softmax_at(1, tags.b_relation(0)) -
                                softmax_at(0, tags.b_entity(1)));
  double d2 = std::max(0.0, softmax_at(3, tags.b_relation(0)) -
                                softmax_at(2, tags.b_entity(1)));
  double total = olf_loss(Z, {{0, 1}, {2, 3}}, rules);
  CHECK(total == doctest::Approx(d1 + d2).epsilon(1e-12));
  CHECK(olf_loss(Z, {}, rules) == 0.0);
}

TEST_CASE("total loss arithmetic") {
  CHECK(total_loss(2, 3, 4, 1.0, 0.5) == doctest::Approx(7.0));
  CHECK(total_loss(2, 3, 4, 0.0, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("br node gradient matches finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.01, 1.0);
  int T = 4;
  Param A("a", Mat::Zero(T, T));
  for (int r = 0; r < T; ++r)
    for (int c = 0; c < T; ++c) A.value(r, c) = d(rng);
  Vec guidance(T);
  for (int i = 0; i < T; ++i) guidance(i) = d(rng);
  guidance /= guidance.sum();

  Tape tape;
  int node = br_loss_node(tape, tape.input(A), guidance);
  CHECK(tape.val(node)(0, 0) ==
        doctest::Approx(br_loss(guidance, model_attention_summary(A.value)))
            .epsilon(1e-12));
  tape.backward(node);

  const double h = 1e-6;
  for (int r = 0; r < T; ++r)
    for (int c = 0; c < T; ++c) {
      auto eval = [&](double delta) {
        Mat a2 = A.value;
        a2(r, c) += delta;
        return br_loss(guidance, model_attention_summary(a2));
      };
      double fd = (eval(h) - eval(-h)) / (2 * h);
      CHECK(A.grad(r, c) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("olf node value and gradient match the scalar oracle") {
  Ontology onto = contains_ontology();
  TagVocab tags(onto);
  CompiledRules rules = compile_rules(
      {{"Contains", "LOCATION"}, {"Company_worked", "PERSON"}}, tags);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d(0, 1);
  int T = 5, V = tags.size();
  Param Z("z", Mat::Zero(T, V));
  for (int r = 0; r < T; ++r)
    for (int c = 0; c < V; ++c) Z.value(r, c) = d(rng);
  // push a tail row toward B-Contains so a rule matches with a hinge active
  Z.value(2, tags.b_relation(0)) += 4.0;
  std::vector<std::pair<int, int>> pairs = {{0, 2}, {1, 4}};

  Tape tape;
  int node = olf_loss_node(tape, tape.input(Z), pairs, rules);
  double expected = olf_loss(Z.value, pairs, rules);
  CHECK(tape.val(node)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  REQUIRE(expected > 0.0);
  tape.backward(node);

  const double h = 1e-6;
  for (int r = 0; r < T; ++r)
    for (int c = 0; c < V; ++c) {
      auto eval = [&](double delta) {
        Mat z2 = Z.value;
        z2(r, c) += delta;
        return olf_loss(z2, pairs, rules);
      };
      double fd = (eval(h) - eval(-h)) / (2 * h);
      CHECK(Z.grad(r, c) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("rules files round trip and validate against the ontology") {
  Ontology onto = contains_ontology();
  auto path = std::filesystem::temp_directory_path() / "rules_test.json";
  OntologyRules rules = {{"Contains", "LOCATION"}};
  save_rules(rules, path);
  OntologyRules back = load_rules(path, onto);
  REQUIRE(back.size() == 1);
  CHECK(back[0].relation == "Contains");
  CHECK(back[0].head_entity == "LOCATION");

  save_rules({{"Contains", "ALIEN"}}, path);
  CHECK_THROWS_AS(load_rules(path, onto), std::runtime_error);
  std::filesystem::remove(path);
}
