#include "segctc/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace segctc {
namespace {

template <class T>
ErrorCounts levenshtein(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  ErrorCounts c;
  c.ref_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

std::string real_str(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_real(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("cannot parse '" + s + "' as a real");
  return v;
}

}  // namespace

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  ref_length += o.ref_length;
  return *this;
}

ErrorCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  return levenshtein(ref, hyp);
}

ErrorCounts edit_distance(std::span<const int> ref, std::span<const int> hyp) {
  return levenshtein(ref, hyp);
}

double CorpusScore::per() const {
  if (total.ref_length == 0) {
    return total.errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return 100.0 * static_cast<double>(total.errors()) / static_cast<double>(total.ref_length);
}

CorpusScore score_corpus(const std::vector<Transcript>& refs, const std::vector<Transcript>& hyps,
                         const PhoneMapping& mapping) {
  if (refs.size() != hyps.size()) {
    throw Error("score: " + std::to_string(refs.size()) + " references but " +
                std::to_string(hyps.size()) + " hypotheses");
  }
  std::unordered_map<std::string, const Transcript*> by_id;
  for (const auto& h : hyps) by_id.emplace(h.id, &h);
  CorpusScore score;
  for (const auto& r : refs) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error("score: no hypothesis for utterance '" + r.id + "'");
    const auto ref = map_labels(r.symbols, mapping);
    const auto hyp = map_labels(it->second->symbols, mapping);
    const ErrorCounts c = edit_distance(std::span<const std::string>(ref), std::span<const std::string>(hyp));
    score.total += c;
    score.utterances.emplace_back(r.id, c);
  }
  return score;
}

double corpus_per(const std::vector<Transcript>& refs, const std::vector<Transcript>& hyps,
                  const PhoneMapping& mapping) {
  return score_corpus(refs, hyps, mapping).per();
}

std::string_view phase_name(Phase p) { return p == Phase::kPretrain ? "pretrain" : "joint"; }

Phase parse_phase(std::string_view name) {
  if (name == "pretrain") return Phase::kPretrain;
  if (name == "joint") return Phase::kJoint;
  throw Error("unknown phase '" + std::string(name) + "'");
}

std::string format_convergence_csv(const ConvergenceLog& log) {
  std::string out(kConvergenceHeader);
  out += '\n';
  for (const auto& r : log.records) {
    out += std::to_string(r.epoch) + ',' + real_str(r.lr) + ',' + real_str(r.loss_total) + ',' +
           real_str(r.loss_ctc) + ',' + real_str(r.loss_scrf) + ',' + real_str(r.valid_per) + ',' +
           std::string(phase_name(r.phase)) + '\n';
  }
  return out;
}

void emit_convergence_csv(const ConvergenceLog& log, const std::filesystem::path& path) {
  if (log.records.empty()) throw Error("convergence log is empty");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << format_convergence_csv(log);
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

ConvergenceLog read_convergence_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(is, line) || line != kConvergenceHeader) {
    throw Error(path.string() + ": missing convergence header");
  }
  ConvergenceLog log;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw Error(path.string() + ":" + std::to_string(n) + ": expected 7 fields");
    EpochRecord r;
    r.epoch = std::stoi(f[0]);
    r.lr = parse_real(f[1]);
    r.loss_total = parse_real(f[2]);
    r.loss_ctc = parse_real(f[3]);
    r.loss_scrf = parse_real(f[4]);
    r.valid_per = parse_real(f[5]);
    r.phase = parse_phase(f[6]);
    log.records.push_back(r);
  }
  return log;
}

std::string format_per(double per) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", per);
  return buf;
}

}  // namespace segctc
