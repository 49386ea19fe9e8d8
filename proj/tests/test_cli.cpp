#include <doctest.h>

#include <sstream>

#include "commands.hpp"
#include "segctc/checkpoint.hpp"
#include "segctc/config.hpp"
#include "support.hpp"

using namespace segctc;

namespace {

const char* kMinimalConfig =
    "[data]\n"
    "train_features = t.feats\n"
    "train_labels = t.labels\n"
    "valid_features = v.feats\n"
    "valid_labels = v.labels\n"
    "vocab = vocab.txt\n"
    "[train]\n"
    "epochs = 3\n"
    "seed = 4\n"
    "out_dir = run\n";

// A tiny generated task with a fast model.
void small_generated_task(const test::TempDir& dir) {
  cli::GenerateArgs g;
  g.out_dir = dir.path();
  g.synth.vocab_size = 3;
  g.synth.feature_dim = 4;
  g.synth.min_seg_len = 4;
  g.synth.max_seg_len = 6;
  g.synth.min_labels = 2;
  g.synth.max_labels = 3;
  g.train_utterances = 6;
  g.valid_utterances = 3;
  std::ostringstream sink;
  REQUIRE(cli::cmd_generate(g, sink) == 0);
}

cli::TrainArgs train_args(const test::TempDir& dir, int epochs, const std::string& out = "run") {
  cli::TrainArgs a;
  a.config = dir / "train.ini";
  a.overrides = {"train.epochs=" + std::to_string(epochs), "train.out_dir=" + out, "encoder.hidden_dim=4",
                 "scrf.label_dim=3", "scrf.feature_dim=4"};
  a.quiet = true;
  return a;
}

}  // namespace

TEST_CASE("run config") {
  const RunConfig c = parse_run_config(kMinimalConfig, {}, "/base");
  CHECK(c.data.vocab == std::filesystem::path("/base/vocab.txt"));
  CHECK(c.out_dir == std::filesystem::path("/base/run"));
  CHECK_FALSE(c.data.mapping.has_value());
  CHECK(c.train.epochs == 3);
  CHECK_FALSE(c.train.valid_mode.has_value());

  const RunConfig o = parse_run_config(kMinimalConfig, {parse_override("train.lambda = 0.25"),
                                                        parse_override("encoder.layers=2"),
                                                        parse_override("encoder.subsample=3")});
  CHECK(o.train.lambda == 0.25);
  CHECK(o.model.subsample == std::vector<std::size_t>{3});

  std::string missing = kMinimalConfig;
  missing.erase(missing.find("seed = 4\n"), 9);
  CHECK_THROWS_WITH_AS(parse_run_config(missing), doctest::Contains("train.seed"), Error);
  CHECK_THROWS_WITH_AS(parse_run_config(kMinimalConfig, {{"train.learning_rate", "1"}}),
                       doctest::Contains("unknown config key 'train.learning_rate'"), Error);
  CHECK_THROWS_WITH_AS(parse_run_config(kMinimalConfig, {{"train.lambda", "half"}}),
                       doctest::Contains("train.lambda"), Error);
  CHECK_THROWS_AS(parse_run_config(kMinimalConfig, {{"encoder.layers", "3"}, {"encoder.subsample", "2"}}), Error);
  CHECK_THROWS_AS(parse_override("lambda"), Error);

  SUBCASE("model snapshot round trip") {
    ModelConfig m = o.model;
    m.input_dim = 7;
    m.vocab_size = 2;
    const auto [m2, t2] = parse_model_snapshot(format_model_snapshot(m, o.train));
    CHECK(format_model_snapshot(m2, t2) == format_model_snapshot(m, o.train));
    CHECK(t2.lambda == 0.25);
  }
}

TEST_CASE("checkpoint") {
  ModelConfig m;
  m.input_dim = 3;
  m.vocab_size = 2;
  m.hidden_dim = 3;
  m.layers = 2;
  m.subsample = {2};
  m.label_dim = 2;
  m.feature_dim = 3;
  TrainConfig t;
  t.seed = 9;
  Checkpoint c{Vocabulary({"a", "bb"}), m, t, initial_state(m, t)};
  c.state.epochs_done = 2;
  c.state.decay_count = 1;
  c.state.previous_error = 12.5;
  c.state.log.records.push_back({1, 0.1, 1.0 / 3.0, 0.5, 0.25, 40.0, Phase::kPretrain});

  const std::string bytes = serialize_checkpoint(c);
  CHECK(bytes.compare(0, 8, std::string(kCheckpointMagic, 8)) == 0);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.vocab.symbols() == c.vocab.symbols());
  CHECK(back.state.params == c.state.params);
  CHECK(back.state.previous_error == c.state.previous_error);
  CHECK(back.state.log == c.state.log);
  CHECK(serialize_checkpoint(back) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad), doctest::Contains("magic"), Error);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);

  test::TempDir dir("ckpt");
  save_checkpoint(c, dir / "c.ckpt");
  CHECK(test::read_file(dir / "c.ckpt") == bytes);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_CASE("train, decode and score commands") {
  test::TempDir dir("cli");
  small_generated_task(dir);
  std::ostringstream log;

  SUBCASE("zero epochs writes the initial model only") {
    REQUIRE(cli::cmd_train(train_args(dir, 0), log) == 0);
    CHECK(std::filesystem::exists(dir / "run" / cli::kFinalCheckpoint));
    CHECK_FALSE(std::filesystem::exists(dir / "run" / cli::kConvergenceCsv));
    CHECK(load_checkpoint(dir / "run" / cli::kFinalCheckpoint).state.epochs_done == 0);
  }

  SUBCASE("training is reproducible and resumable") {
    REQUIRE(cli::cmd_train(train_args(dir, 2, "a"), log) == 0);
    REQUIRE(cli::cmd_train(train_args(dir, 2, "b"), log) == 0);
    CHECK(test::read_file(dir / "a" / cli::kFinalCheckpoint) == test::read_file(dir / "b" / cli::kFinalCheckpoint));
    CHECK(test::read_file(dir / "a" / cli::kConvergenceCsv) == test::read_file(dir / "b" / cli::kConvergenceCsv));
    CHECK(std::filesystem::exists(dir / "a" / cli::epoch_checkpoint_name(1)));
    CHECK(cli::epoch_checkpoint_name(7) == "epoch-007.ckpt");

    // one epoch, then resume to two
    REQUIRE(cli::cmd_train(train_args(dir, 1, "c"), log) == 0);
    auto resume = train_args(dir, 2, "c");
    resume.resume = dir / "c" / cli::kFinalCheckpoint;
    REQUIRE(cli::cmd_train(resume, log) == 0);
    CHECK(test::read_file(dir / "c" / cli::kFinalCheckpoint) == test::read_file(dir / "a" / cli::kFinalCheckpoint));

    auto changed = resume;
    changed.overrides.push_back("train.lambda=0.9");
    CHECK_THROWS_AS(cli::cmd_train(changed, log), Error);
  }

  SUBCASE("decode and score") {
    REQUIRE(cli::cmd_train(train_args(dir, 1), log) == 0);
    cli::DecodeArgs d;
    d.checkpoint = dir / "run" / cli::kFinalCheckpoint;
    d.features = dir / "valid.feats";
    d.out = dir / "hyp.txt";
    REQUIRE(cli::cmd_decode(d, log) == 0);
    CHECK(load_transcripts(d.out).size() == 3);

    d.mode = DecodeMode::kCtc;
    d.out = dir / "hyp_ctc.txt";
    REQUIRE(cli::cmd_decode(d, log) == 0);
    CHECK(load_transcripts(d.out).size() == 3);

    test::write_file(dir / "empty.feats", "");
    d.features = dir / "empty.feats";
    d.out = dir / "empty.txt";
    REQUIRE(cli::cmd_decode(d, log) == 0);
    CHECK(test::read_file(d.out).empty());

    test::write_file(dir / "other_vocab.txt", "p\nq\nr\n");
    d.vocab = dir / "other_vocab.txt";
    CHECK_THROWS_AS(cli::cmd_decode(d, log), Error);
  }

  SUBCASE("score") {
    test::write_file(dir / "ref.txt", "u1 a b c d e\nu2 a b c d e\n");
    test::write_file(dir / "hyp.txt", "u2 a b c d e\nu1 a b c d e\n");
    cli::ScoreArgs s{dir / "ref.txt", dir / "hyp.txt", std::nullopt, false};
    std::ostringstream out;
    REQUIRE(cli::cmd_score(s, out) == 0);
    CHECK(out.str() == "total sub 0 ins 0 del 0 ref 10\nPER 0.0\n");

    test::write_file(dir / "hyp.txt", "u1 a b c d\nu2 a b c d e\n");
    std::ostringstream out2;
    REQUIRE(cli::cmd_score(s, out2) == 0);
    CHECK(out2.str().find("PER 10.0\n") != std::string::npos);

    test::write_file(dir / "map.txt", "a a\nb a\nc c\nd d\ne e\n");
    test::write_file(dir / "hyp.txt", "u1 b c d e\nu2 a c d e\n");
    s.mapping = dir / "map.txt";
    std::ostringstream out3;
    REQUIRE(cli::cmd_score(s, out3) == 0);
    CHECK(out3.str().find("PER 0.0\n") != std::string::npos);
  }
}
