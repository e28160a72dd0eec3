#include <catch2/catch_amalgamated.hpp>

#include "evex/text.hpp"

using namespace evex;

TEST_CASE("sentence splitting pins") {
  CHECK(split_sentences("A. B.") == std::vector<std::string>{"A.", "B."});
  CHECK(split_sentences("No terminator") == std::vector<std::string>{"No terminator"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   ").empty());
  CHECK(split_sentences("Hey! Really? Yes.") == std::vector<std::string>{"Hey!", "Really?", "Yes."});
  // a terminator not followed by whitespace does not split
  CHECK(split_sentences("v1.2 shipped. done") == std::vector<std::string>{"v1.2 shipped.", "done"});
  CHECK(split_sentences("what?! ok.") == std::vector<std::string>{"what?!", "ok."});
}

TEST_CASE("tokenize lowercases and splits on whitespace") {
  CHECK(tokenize("The  quick\tFox") == std::vector<std::string>{"the", "quick", "fox"});
  CHECK(tokenize("").empty());
}

TEST_CASE("hashed embeddings are unit norm, deterministic and seed sensitive") {
  vec a = hashed_embedding("the cat sat on the mat", 64, 7);
  vec b = hashed_embedding("the cat sat on the mat", 64, 7);
  CHECK(a == b);
  CHECK(norm2(a) == Catch::Approx(1.0).margin(1e-9));
  CHECK(static_cast<int>(a.size()) == 64);

  vec c = hashed_embedding("the cat sat on the mat", 64, 8);
  CHECK(a != c);

  vec zero = hashed_embedding("", 64, 7);
  CHECK(norm2(zero) == 0.0);

  CHECK_THROWS_AS(hashed_embedding("x", 4, 0), parameter_error);
}

TEST_CASE("similar sentences score above unrelated ones") {
  vec q = hashed_embedding("solar panels cut energy bills", 64, 3);
  vec near = hashed_embedding("energy bills drop with solar panels", 64, 3);
  vec far = hashed_embedding("the opera premiere was postponed", 64, 3);
  CHECK(dot(q, near) > dot(q, far));
}

TEST_CASE("importance matrix aggregates claim rows") {
  std::vector<vec> claim{{1.0, 0.0}, {0.0, 1.0}};
  std::vector<vec> docs{{0.8, 0.0}, {0.0, 0.5}, {-1.0, 0.0}};
  auto res = importance_matrix(claim, docs, aggregation::max);
  CHECK(res.scores == vec{0.8, 0.5, 0.0});
  CHECK(res.argmax == std::vector<int>{0, 1, 1});
  auto mean = importance_matrix(claim, docs, aggregation::mean);
  CHECK(mean.scores[0] == Catch::Approx(0.4));
  CHECK(mean.scores[2] == Catch::Approx(-0.5));

  // unit inputs keep every entry in [-1, 1]
  rng_stream rng(4242);
  std::vector<vec> c2, d2;
  for (int i = 0; i < 3; ++i) {
    vec v(16);
    for (auto& x : v) x = rng.normal();
    double n = norm2(v);
    for (auto& x : v) x /= n;
    c2.push_back(v);
  }
  for (int i = 0; i < 9; ++i) {
    vec v(16);
    for (auto& x : v) x = rng.normal();
    double n = norm2(v);
    for (auto& x : v) x /= n;
    d2.push_back(v);
  }
  auto r2 = importance_matrix(c2, d2, aggregation::max);
  for (const auto& row : r2.matrix)
    for (double e : row) {
      REQUIRE(e >= -1.0 - 1e-12);
      REQUIRE(e <= 1.0 + 1e-12);
    }

  CHECK_THROWS_AS(importance_matrix({}, docs), size_error);
  CHECK_THROWS_AS(importance_matrix(claim, {{1.0, 0.0, 0.0}}), dimension_error);
}

TEST_CASE("tfidf pins on the two-document corpus") {
  tfidf_index idx;
  idx.fit({"a b", "a c"});
  CHECK(idx.idf("a") == Catch::Approx(1.0).margin(1e-12));
  CHECK(idx.idf("b") == Catch::Approx(1.4054651081081644).margin(1e-12));
  CHECK(idx.idf("c") == Catch::Approx(1.4054651081081644).margin(1e-12));
  CHECK(idx.score("c", "a c") == Catch::Approx(0.8148024746671689).margin(1e-12));
}

TEST_CASE("tfidf similarity is symmetric, bounded and ignores unknown tokens") {
  tfidf_index idx;
  idx.fit({"solar power is clean", "coal power is dirty", "rivers carry water"});
  rng_stream rng(99);
  std::vector<std::string> texts{"solar power", "power is", "rivers", "clean water", "unseen words here",
                                 "coal dirty power"};
  for (const auto& a : texts)
    for (const auto& b : texts) {
      double ab = idx.score(a, b);
      REQUIRE(ab >= 0.0);
      REQUIRE(ab <= 1.0 + 1e-12);
      REQUIRE(ab == Catch::Approx(idx.score(b, a)).margin(1e-12));
    }
  CHECK(idx.score("unseen words here", "solar power") == 0.0);
  CHECK(idx.score("solar power is clean", "solar power is clean") == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("tfidf refuses to score before fitting") {
  tfidf_index idx;
  CHECK_THROWS_AS(idx.score("a", "b"), state_error);
  CHECK_THROWS_AS(idx.fit({}), size_error);
}
