#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "segctc/checkpoint.hpp"
#include "segctc/eval.hpp"

namespace segctc::cli {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Everything except the epoch budget must match for a resume to be valid.
void check_resumable(const Checkpoint& ckpt, const Vocabulary& vocab, const ModelConfig& model,
                     const TrainConfig& train) {
  if (!(ckpt.vocab == vocab)) throw Error("resume: checkpoint vocabulary differs from data.vocab");
  if (!(ckpt.model == model)) throw Error("resume: checkpoint model settings differ from the config");
  TrainConfig a = ckpt.train, b = train;
  a.epochs = b.epochs = 0;
  if (!(a == b)) throw Error("resume: checkpoint [train] settings differ from the config");
  if (ckpt.state.epochs_done > train.epochs) {
    throw Error("resume: checkpoint is at epoch " + std::to_string(ckpt.state.epochs_done) +
                ", past train.epochs=" + std::to_string(train.epochs));
  }
}

}  // namespace

std::string epoch_checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%03d.ckpt", epoch);
  return buf;
}

int cmd_train(const TrainArgs& args, std::ostream& out) {
  std::vector<ConfigOverride> overrides;
  for (const auto& o : args.overrides) overrides.push_back(parse_override(o));
  RunConfig run = load_run_config(args.config, overrides);

  const Vocabulary vocab = load_vocabulary(run.data.vocab);
  const Dataset train_set = load_dataset(run.data.train_features, run.data.train_labels, vocab);
  const Dataset valid_set = load_dataset(run.data.valid_features, run.data.valid_labels, vocab);
  if (train_set.empty()) throw Error("training set '" + run.data.train_features.string() + "' is empty");
  const PhoneMapping mapping = run.data.mapping ? load_mapping(*run.data.mapping) : PhoneMapping::identity(vocab);

  run.model.input_dim = train_set.front().features.cols();
  run.model.vocab_size = vocab.size();
  for (const Dataset* d : {&train_set, &valid_set}) {
    for (const auto& u : *d) {
      if (u.features.cols() != run.model.input_dim) {
        throw Error("utterance '" + u.id + "' has feature dimension " + std::to_string(u.features.cols()) +
                    ", expected " + std::to_string(run.model.input_dim));
      }
    }
  }
  check_alignable(train_set, run.model);

  TrainState state;
  if (args.resume) {
    Checkpoint ckpt = load_checkpoint(*args.resume);
    check_resumable(ckpt, vocab, run.model, run.train);
    state = std::move(ckpt.state);
    if (!args.quiet) out << "resuming after epoch " << state.epochs_done << "\n";
  } else {
    state = initial_state(run.model, run.train);
  }

  std::filesystem::create_directories(run.out_dir);
  auto snapshot = [&](const TrainState& s) { return Checkpoint{vocab, run.model, run.train, s}; };

  const TrainContext ctx{train_set, valid_set, vocab, mapping,
                         [&](const TrainState& s, const EpochStats& stats) {
                           save_checkpoint(snapshot(s), run.out_dir / epoch_checkpoint_name(s.epochs_done));
                           if (args.quiet) return;
                           const EpochRecord& r = s.log.records.back();
                           out << "epoch " << r.epoch << " " << phase_name(r.phase) << " lr " << r.lr
                               << " loss " << fixed(r.loss_total, 4) << " ctc " << fixed(r.loss_ctc, 4)
                               << " scrf " << fixed(r.loss_scrf, 4) << " valid_per " << format_per(r.valid_per);
                           if (stats.clipped_updates > 0) {
                             out << " clipped " << stats.clipped_updates << "/" << stats.updates;
                           }
                           out << "\n";
                         }};
  train(state, run.model, run.train, ctx);

  save_checkpoint(snapshot(state), run.out_dir / kFinalCheckpoint);
  if (!state.log.records.empty()) emit_convergence_csv(state.log, run.out_dir / kConvergenceCsv);
  if (!args.quiet) out << "wrote " << (run.out_dir / kFinalCheckpoint).string() << "\n";
  return 0;
}

int cmd_decode(const DecodeArgs& args, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  if (args.vocab) {
    const Vocabulary vocab = load_vocabulary(*args.vocab);
    if (!(vocab == ckpt.vocab)) {
      throw Error("vocabulary '" + args.vocab->string() + "' does not match the checkpoint vocabulary");
    }
  }
  const auto entries = load_features(args.features);
  std::vector<Transcript> hyps;
  hyps.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.features.cols() != ckpt.model.input_dim) {
      throw Error("utterance '" + e.id + "' has feature dimension " + std::to_string(e.features.cols()) +
                  ", checkpoint expects " + std::to_string(ckpt.model.input_dim));
    }
    const auto labels = decode(e.features, ckpt.state.params, ckpt.model.max_seg_len, args.mode);
    hyps.push_back({e.id, ckpt.vocab.decode(labels)});
  }
  write_transcripts(hyps, args.out);
  out << "decoded " << hyps.size() << " utterances (" << decode_mode_name(args.mode) << ") to "
      << args.out.string() << "\n";
  return 0;
}

int cmd_score(const ScoreArgs& args, std::ostream& out) {
  const auto refs = load_transcripts(args.ref);
  const auto hyps = load_transcripts(args.hyp);
  PhoneMapping mapping;
  if (args.mapping) {
    mapping = load_mapping(*args.mapping);
  } else {
    // identity over every symbol that appears
    std::map<std::string, std::string> table;
    for (const auto* side : {&refs, &hyps}) {
      for (const auto& t : *side) {
        for (const auto& s : t.symbols) table.emplace(s, s);
      }
    }
    mapping = PhoneMapping(std::move(table));
  }
  const CorpusScore score = score_corpus(refs, hyps, mapping);
  if (args.per_utterance) {
    for (const auto& [id, c] : score.utterances) {
      out << id << " sub " << c.substitutions << " ins " << c.insertions << " del " << c.deletions << " ref "
          << c.ref_length << "\n";
    }
  }
  const auto& t = score.total;
  out << "total sub " << t.substitutions << " ins " << t.insertions << " del " << t.deletions << " ref "
      << t.ref_length << "\n";
  out << "PER " << format_per(score.per()) << "\n";
  return 0;
}

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
  std::filesystem::create_directories(args.out_dir);
  SynthConfig train_cfg = args.synth;
  train_cfg.num_utterances = args.train_utterances;
  train_cfg.id_prefix = "train";
  SynthConfig valid_cfg = args.synth;
  valid_cfg.num_utterances = args.valid_utterances;
  valid_cfg.seed = mix_seed(args.synth.seed, 1);
  valid_cfg.id_prefix = "valid";

  const SynthData train_data = synth_generate(train_cfg);
  const SynthData valid_data = synth_generate(valid_cfg);
  const auto& dir = args.out_dir;
  write_vocabulary(train_data.vocab, dir / "vocab.txt");
  write_dataset(train_data.utterances, train_data.vocab, dir / "train.feats", dir / "train.labels");
  write_dataset(valid_data.utterances, valid_data.vocab, dir / "valid.feats", dir / "valid.labels");

  std::ofstream ini(dir / "train.ini");
  if (!ini) throw Error("cannot write '" + (dir / "train.ini").string() + "'");
  ini << "[data]\n"
         "train_features = train.feats\n"
         "train_labels = train.labels\n"
         "valid_features = valid.feats\n"
         "valid_labels = valid.labels\n"
         "vocab = vocab.txt\n"
         "\n"
         "[encoder]\n"
         "hidden_dim = 16\n"
         "layers = 2\n"
         "subsample = 4\n"
         "\n"
         "[scrf]\n"
         "max_seg_len = 6\n"
         "label_dim = 8\n"
         "feature_dim = 16\n"
         "\n"
         "[train]\n"
         "lambda = 0.5\n"
         "lr_init = 0.1\n"
         "dropout = 0.0\n"
         "epochs = 20\n"
         "seed = 1\n"
         "out_dir = run\n";
  out << "wrote " << train_data.utterances.size() << " train and " << valid_data.utterances.size()
      << " valid utterances to " << dir.string() << "\n";
  return 0;
}

int cmd_selfcheck(const SelfCheckOptions& options, std::ostream& out) {
  const SelfCheckReport report = run_selfcheck(options);
  print_report(report, out);
  return report.passed() ? 0 : 1;
}

}  // namespace segctc::cli
