#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "segctc/numerics.hpp"

namespace segctc {

using SymbolSequence = std::vector<std::string>;

/// Ordered label inventory with dense ids 0..size()-1.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(int id) const;
  int id(std::string_view symbol) const;
  bool contains(std::string_view symbol) const;

  LabelSequence encode(const SymbolSequence& symbols) const;
  SymbolSequence decode(const LabelSequence& labels) const;

  bool operator==(const Vocabulary& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

struct Utterance {
  std::string id;
  Matrix features;  // T x D
  LabelSequence labels;
};

using Dataset = std::vector<Utterance>;

/// One line of a label or hypothesis file.
struct Transcript {
  std::string id;
  SymbolSequence symbols;

  bool operator==(const Transcript&) const = default;
};

struct FeatureEntry {
  std::string id;
  Matrix features;
};

// Text formats (all '\n'-terminated, numbers printed in shortest
// round-trip form):
//   features:   "<id> <T> <D>" then T lines of D reals
//   labels:     "<id> <sym> <sym> ..."
//   vocabulary: one symbol per line
//   mapping:    "<source> <target>" per line

Vocabulary load_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

std::vector<FeatureEntry> load_features(const std::filesystem::path& path);
void write_features(const std::vector<FeatureEntry>& entries, const std::filesystem::path& path);

std::vector<Transcript> load_transcripts(const std::filesystem::path& path);
void write_transcripts(const std::vector<Transcript>& transcripts, const std::filesystem::path& path);

/// Joins features and labels by utterance id, in feature-file order.
Dataset load_dataset(const std::filesystem::path& features, const std::filesystem::path& labels,
                     const Vocabulary& vocab);
Dataset load_dataset(const std::filesystem::path& features, const std::filesystem::path& labels,
                     const std::filesystem::path& vocab);
void write_dataset(const Dataset& dataset, const Vocabulary& vocab,
                   const std::filesystem::path& features, const std::filesystem::path& labels);

/// Many-to-one symbol map applied before scoring (e.g. 48 -> 39 phones).
class PhoneMapping {
 public:
  PhoneMapping() = default;
  explicit PhoneMapping(std::map<std::string, std::string> table) : table_(std::move(table)) {}

  static PhoneMapping identity(const Vocabulary& vocab);

  const std::string& map(const std::string& symbol) const;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::string, std::string> table_;
};

PhoneMapping load_mapping(const std::filesystem::path& path);

/// Substitutes every symbol, then merges adjacent duplicates the mapping
/// created.
SymbolSequence map_labels(const SymbolSequence& symbols, const PhoneMapping& mapping);

struct SynthConfig {
  std::size_t num_utterances = 100;
  std::size_t vocab_size = 5;
  std::size_t feature_dim = 8;
  std::size_t min_seg_len = 8;   // raw frames per label
  std::size_t max_seg_len = 16;
  std::size_t min_labels = 3;
  std::size_t max_labels = 8;
  double noise_sigma = 0.3;
  std::uint64_t prototype_seed = 1;  // fixes the task: one prototype per label
  std::uint64_t seed = 1;            // fixes the sample
  std::string id_prefix = "utt";
};

struct SynthData {
  Vocabulary vocab;
  Matrix prototypes;  // |Y| x D
  Dataset utterances;
};

/// Random label sequences without adjacent repeats; each label emits a
/// segment of its prototype plus N(0, sigma^2) noise.
SynthData synth_generate(const SynthConfig& config);

}  // namespace segctc
