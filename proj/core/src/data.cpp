#include "segctc/data.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace segctc {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  return os;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

double parse_real(const std::string& tok, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(where(path, line) + "cannot parse '" + tok + "' as a real");
  }
  return v;
}

std::size_t parse_count(const std::string& tok, const std::filesystem::path& path, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(where(path, line) + "cannot parse '" + tok + "' as a count");
  }
  return v;
}

void append_real(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw Error("vocabulary: empty symbol");
    if (!ids_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw Error("vocabulary: duplicate symbol '" + symbols_[i] + "'");
    }
  }
}

const std::string& Vocabulary::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw Error("label id " + std::to_string(id) + " not in vocabulary");
  }
  return symbols_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  if (it == ids_.end()) throw Error("unknown symbol '" + std::string(symbol) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view symbol) const {
  return ids_.count(std::string(symbol)) > 0;
}

LabelSequence Vocabulary::encode(const SymbolSequence& symbols) const {
  LabelSequence out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back(id(s));
  return out;
}

SymbolSequence Vocabulary::decode(const LabelSequence& labels) const {
  SymbolSequence out;
  out.reserve(labels.size());
  for (int y : labels) out.push_back(symbol(y));
  return out;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<std::string> symbols;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (blank(line)) continue;
    auto toks = split(line);
    if (toks.size() != 1) throw Error(where(path, n) + "expected one symbol per line");
    symbols.push_back(toks[0]);
  }
  try {
    return Vocabulary(std::move(symbols));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  auto os = open_out(path);
  for (const auto& s : vocab.symbols()) os << s << '\n';
}

std::vector<FeatureEntry> load_features(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<FeatureEntry> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++n;
    if (blank(line)) continue;
    auto header = split(line);
    if (header.size() != 3) throw Error(where(path, n) + "expected header '<id> <T> <D>'");
    const std::string& id = header[0];
    const std::size_t frames = parse_count(header[1], path, n);
    const std::size_t d = parse_count(header[2], path, n);
    if (frames == 0) throw Error(where(path, n) + "utterance '" + id + "' has no frames");
    if (d == 0) throw Error(where(path, n) + "utterance '" + id + "' has zero dimension");
    if (!out.empty() && d != dim) {
      throw Error(where(path, n) + "ragged dimensions: utterance '" + id + "' declares D=" +
                  std::to_string(d) + ", earlier utterances D=" + std::to_string(dim));
    }
    dim = d;
    if (!seen.insert(id).second) throw Error(where(path, n) + "duplicate utterance id '" + id + "'");
    Matrix m(frames, d);
    for (std::size_t t = 0; t < frames; ++t) {
      if (!std::getline(is, line)) {
        throw Error(where(path, n) + "utterance '" + id + "' ends after " + std::to_string(t) +
                    " of " + std::to_string(frames) + " rows");
      }
      ++n;
      auto vals = split(line);
      if (vals.size() != d) {
        throw Error(where(path, n) + "row " + std::to_string(t) + " of utterance '" + id + "' has " +
                    std::to_string(vals.size()) + " values, header says " + std::to_string(d));
      }
      for (std::size_t k = 0; k < d; ++k) m(t, k) = parse_real(vals[k], path, n);
    }
    out.push_back({id, std::move(m)});
  }
  return out;
}

void write_features(const std::vector<FeatureEntry>& entries, const std::filesystem::path& path) {
  auto os = open_out(path);
  std::string buf;
  for (const auto& e : entries) {
    buf.clear();
    buf += e.id + ' ' + std::to_string(e.features.rows()) + ' ' + std::to_string(e.features.cols()) + '\n';
    for (std::size_t t = 0; t < e.features.rows(); ++t) {
      for (std::size_t k = 0; k < e.features.cols(); ++k) {
        if (k) buf += ' ';
        append_real(buf, e.features(t, k));
      }
      buf += '\n';
    }
    os << buf;
  }
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<Transcript> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (blank(line)) continue;
    auto toks = split(line);
    Transcript tr{toks[0], SymbolSequence(toks.begin() + 1, toks.end())};
    if (!seen.insert(tr.id).second) throw Error(where(path, n) + "duplicate utterance id '" + tr.id + "'");
    out.push_back(std::move(tr));
  }
  return out;
}

void write_transcripts(const std::vector<Transcript>& transcripts, const std::filesystem::path& path) {
  auto os = open_out(path);
  for (const auto& tr : transcripts) {
    os << tr.id;
    for (const auto& s : tr.symbols) os << ' ' << s;
    os << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& features, const std::filesystem::path& labels,
                     const Vocabulary& vocab) {
  auto feats = load_features(features);
  auto trans = load_transcripts(labels);
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < trans.size(); ++i) by_id.emplace(trans[i].id, i);

  Dataset out;
  out.reserve(feats.size());
  std::size_t matched = 0;
  for (auto& f : feats) {
    auto it = by_id.find(f.id);
    if (it == by_id.end()) {
      throw Error(labels.string() + ": no labels for utterance '" + f.id + "'");
    }
    ++matched;
    LabelSequence ids;
    for (const auto& s : trans[it->second].symbols) {
      if (!vocab.contains(s)) {
        throw Error(labels.string() + ": utterance '" + f.id + "': unknown symbol '" + s + "'");
      }
      ids.push_back(vocab.id(s));
    }
    out.push_back({std::move(f.id), std::move(f.features), std::move(ids)});
  }
  if (matched != trans.size()) {
    std::set<std::string> have;
    for (const auto& u : out) have.insert(u.id);
    for (const auto& t : trans) {
      if (!have.count(t.id)) {
        throw Error(features.string() + ": no features for utterance '" + t.id + "'");
      }
    }
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& features, const std::filesystem::path& labels,
                     const std::filesystem::path& vocab) {
  return load_dataset(features, labels, load_vocabulary(vocab));
}

void write_dataset(const Dataset& dataset, const Vocabulary& vocab,
                   const std::filesystem::path& features, const std::filesystem::path& labels) {
  std::vector<FeatureEntry> feats;
  std::vector<Transcript> trans;
  for (const auto& u : dataset) {
    feats.push_back({u.id, u.features});
    trans.push_back({u.id, vocab.decode(u.labels)});
  }
  write_features(feats, features);
  write_transcripts(trans, labels);
}

PhoneMapping PhoneMapping::identity(const Vocabulary& vocab) {
  std::map<std::string, std::string> t;
  for (const auto& s : vocab.symbols()) t.emplace(s, s);
  return PhoneMapping(std::move(t));
}

const std::string& PhoneMapping::map(const std::string& symbol) const {
  auto it = table_.find(symbol);
  if (it == table_.end()) throw Error("unmapped symbol '" + symbol + "'");
  return it->second;
}

PhoneMapping load_mapping(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::map<std::string, std::string> table;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (blank(line)) continue;
    auto toks = split(line);
    if (toks.size() != 2) throw Error(where(path, n) + "expected '<source> <target>'");
    if (!table.emplace(toks[0], toks[1]).second) {
      throw Error(where(path, n) + "symbol '" + toks[0] + "' mapped twice");
    }
  }
  return PhoneMapping(std::move(table));
}

SymbolSequence map_labels(const SymbolSequence& symbols, const PhoneMapping& mapping) {
  SymbolSequence out;
  for (const auto& s : symbols) {
    const std::string& m = mapping.map(s);
    if (out.empty() || out.back() != m) out.push_back(m);
  }
  return out;
}

SynthData synth_generate(const SynthConfig& c) {
  if (c.vocab_size == 0 || c.feature_dim == 0) throw Error("synth: vocab_size and feature_dim must be >= 1");
  if (c.min_seg_len == 0 || c.min_seg_len > c.max_seg_len) throw Error("synth: bad segment length range");
  if (c.min_labels == 0 || c.min_labels > c.max_labels) throw Error("synth: bad label count range");
  if (c.vocab_size == 1 && c.max_labels > 1) {
    throw Error("synth: a single-symbol vocabulary cannot avoid adjacent repeats");
  }
  if (c.noise_sigma < 0) throw Error("synth: noise sigma must be >= 0");

  SynthData out;
  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < c.vocab_size; ++i) symbols.push_back("s" + std::to_string(i));
  out.vocab = Vocabulary(std::move(symbols));

  Rng proto_rng(mix_seed(c.prototype_seed, 0x70726f746fULL));
  out.prototypes = Matrix(c.vocab_size, c.feature_dim);
  for (double& v : out.prototypes.values()) v = proto_rng.normal();

  Rng rng(mix_seed(c.seed, 0x73616d706c65ULL));
  const std::size_t width = std::to_string(c.num_utterances).size();
  for (std::size_t u = 0; u < c.num_utterances; ++u) {
    const std::size_t count = c.min_labels + rng.below(c.max_labels - c.min_labels + 1);
    LabelSequence labels;
    std::vector<std::size_t> lengths;
    std::size_t frames = 0;
    for (std::size_t j = 0; j < count; ++j) {
      int y;
      if (labels.empty()) {
        y = static_cast<int>(rng.below(c.vocab_size));
      } else {
        // draw from the other |Y|-1 labels
        y = static_cast<int>(rng.below(c.vocab_size - 1));
        if (y >= labels.back()) ++y;
      }
      labels.push_back(y);
      lengths.push_back(c.min_seg_len + rng.below(c.max_seg_len - c.min_seg_len + 1));
      frames += lengths.back();
    }
    Matrix feats(frames, c.feature_dim);
    std::size_t t = 0;
    for (std::size_t j = 0; j < count; ++j) {
      auto proto = out.prototypes.row(static_cast<std::size_t>(labels[j]));
      for (std::size_t k = 0; k < lengths[j]; ++k, ++t) {
        for (std::size_t d = 0; d < c.feature_dim; ++d) {
          feats(t, d) = proto[d] + (c.noise_sigma > 0 ? c.noise_sigma * rng.normal() : 0.0);
        }
      }
    }
    std::string id = std::to_string(u);
    id = c.id_prefix + std::string(width - id.size(), '0') + id;
    out.utterances.push_back({std::move(id), std::move(feats), std::move(labels)});
  }
  return out;
}

}  // namespace segctc
