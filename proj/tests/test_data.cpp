#include <doctest.h>

#include "segctc/data.hpp"
#include "support.hpp"

using namespace segctc;

TEST_CASE("Vocabulary") {
  const Vocabulary v({"aa", "b", "sil"});
  CHECK(v.size() == 3);
  CHECK(v.id("sil") == 2);
  CHECK(v.symbol(1) == "b");
  CHECK(v.encode({"b", "aa"}) == LabelSequence{1, 0});
  CHECK(v.decode({2, 2}) == SymbolSequence{"sil", "sil"});
  CHECK_THROWS_WITH_AS(v.id("zz"), doctest::Contains("unknown symbol 'zz'"), Error);
  CHECK_THROWS_AS(v.symbol(3), Error);
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), Error);
  CHECK_THROWS_AS(Vocabulary({"a", ""}), Error);
}

TEST_CASE("dataset files") {
  test::TempDir dir("data");
  test::write_file(dir / "vocab", "a\nb\nc\n");

  SUBCASE("round trip is bit exact") {
    SynthConfig c;
    c.num_utterances = 7;
    c.seed = 3;
    const SynthData s = synth_generate(c);
    write_dataset(s.utterances, s.vocab, dir / "f", dir / "l");
    write_vocabulary(s.vocab, dir / "v");
    const Dataset back = load_dataset(dir / "f", dir / "l", dir / "v");
    REQUIRE(back.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(back[i].id == s.utterances[i].id);
      CHECK(back[i].labels == s.utterances[i].labels);
      CHECK(back[i].features == s.utterances[i].features);
    }
    write_dataset(back, s.vocab, dir / "f2", dir / "l2");
    CHECK(test::read_file(dir / "f") == test::read_file(dir / "f2"));
  }

  SUBCASE("empty label file names the first utterance") {
    test::write_file(dir / "f", "u1 1 2\n0 1\nu2 1 2\n1 1\n");
    test::write_file(dir / "l", "");
    CHECK_THROWS_WITH_AS(load_dataset(dir / "f", dir / "l", dir / "vocab"),
                         doctest::Contains("no labels for utterance 'u1'"), Error);
  }

  SUBCASE("row with the wrong dimension reports its line") {
    test::write_file(dir / "f", "u1 2 3\n0 1 2\n0 1\n");
    CHECK_THROWS_WITH_AS(load_features(dir / "f"), doctest::Contains(":3:"), Error);
  }

  SUBCASE("ragged dimensions across utterances") {
    test::write_file(dir / "f", "u1 1 2\n0 1\nu2 1 3\n0 1 2\n");
    CHECK_THROWS_WITH_AS(load_features(dir / "f"), doctest::Contains("ragged"), Error);
  }

  SUBCASE("truncated utterance") {
    test::write_file(dir / "f", "u1 3 2\n0 1\n");
    CHECK_THROWS_AS(load_features(dir / "f"), Error);
  }

  SUBCASE("unknown symbol names the utterance") {
    test::write_file(dir / "f", "u1 1 1\n0\n");
    test::write_file(dir / "l", "u1 a q\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir / "f", dir / "l", dir / "vocab"), doctest::Contains("'u1'"), Error);
  }

  SUBCASE("labels without features") {
    test::write_file(dir / "f", "u1 1 1\n0\n");
    test::write_file(dir / "l", "u1 a\nu2 b\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir / "f", dir / "l", dir / "vocab"),
                         doctest::Contains("no features for utterance 'u2'"), Error);
  }

  SUBCASE("empty files give an empty dataset") {
    test::write_file(dir / "f", "");
    test::write_file(dir / "l", "");
    CHECK(load_dataset(dir / "f", dir / "l", dir / "vocab").empty());
  }
}

TEST_CASE("map_labels") {
  const PhoneMapping identity = PhoneMapping::identity(Vocabulary({"a", "b", "c"}));
  CHECK(map_labels({"a", "c", "b"}, identity) == SymbolSequence{"a", "c", "b"});

  const PhoneMapping fold({{"a", "a"}, {"b", "a"}, {"c", "c"}});
  CHECK(map_labels({"a", "b"}, fold) == SymbolSequence{"a"});
  CHECK(map_labels({"b", "c", "b"}, fold) == SymbolSequence{"a", "c", "a"});
  CHECK_THROWS_WITH_AS(map_labels({"d"}, fold), doctest::Contains("unmapped"), Error);

  test::TempDir dir("map");
  test::write_file(dir / "m", "a a\nb a\nc c\n");
  CHECK(map_labels({"a", "b", "c"}, load_mapping(dir / "m")) == SymbolSequence{"a", "c"});
  test::write_file(dir / "bad", "a a\na b\n");
  CHECK_THROWS_AS(load_mapping(dir / "bad"), Error);
}

TEST_CASE("synth_generate") {
  SynthConfig c;
  c.num_utterances = 20;
  c.vocab_size = 4;
  c.feature_dim = 3;

  SUBCASE("deterministic") {
    const SynthData x = synth_generate(c), y = synth_generate(c);
    REQUIRE(x.utterances.size() == y.utterances.size());
    for (std::size_t i = 0; i < x.utterances.size(); ++i) {
      CHECK(x.utterances[i].features == y.utterances[i].features);
      CHECK(x.utterances[i].labels == y.utterances[i].labels);
    }
    c.seed = 2;
    CHECK_FALSE(synth_generate(c).utterances[0].features == x.utterances[0].features);
    CHECK(synth_generate(c).prototypes == x.prototypes);
  }

  SUBCASE("fixed segment length fixes T") {
    c.min_seg_len = c.max_seg_len = 3;
    c.min_labels = c.max_labels = 4;
    for (const auto& u : synth_generate(c).utterances) {
      CHECK(u.features.rows() == 12);
      CHECK(u.labels.size() == 4);
      for (std::size_t j = 1; j < 4; ++j) CHECK(u.labels[j] != u.labels[j - 1]);
    }
  }

  SUBCASE("sigma zero reproduces prototypes and is separable") {
    c.noise_sigma = 0.0;
    const SynthData s = synth_generate(c);
    for (const auto& u : s.utterances) {
      // nearest prototype per frame, then merge runs
      LabelSequence runs;
      for (std::size_t t = 0; t < u.features.rows(); ++t) {
        int best = 0;
        double best_d = 1e300;
        for (std::size_t y = 0; y < c.vocab_size; ++y) {
          double d = 0.0;
          for (std::size_t k = 0; k < c.feature_dim; ++k) {
            const double diff = u.features(t, k) - s.prototypes(y, k);
            d += diff * diff;
          }
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(y);
          }
        }
        CHECK(best_d == 0.0);
        if (runs.empty() || runs.back() != best) runs.push_back(best);
      }
      CHECK(runs == u.labels);
    }
  }

  SUBCASE("bad ranges") {
    c.min_seg_len = 5;
    c.max_seg_len = 4;
    CHECK_THROWS_AS(synth_generate(c), Error);
  }
}
