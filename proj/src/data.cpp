#include "bglm/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace bglm {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

}  // namespace

// ---- Vocab ------------------------------------------------------------------

Vocab::Vocab() {
  insert(std::string(kUnkToken));
  insert(std::string(kEosToken));
}

Vocab::Vocab(const std::vector<std::string>& tokens) : Vocab() {
  for (const auto& t : tokens) {
    if (id_of_.count(t)) throw DataError("vocab: duplicate token '" + t + "'");
    insert(t);
  }
}

void Vocab::insert(const std::string& token) {
  id_of_.emplace(token, static_cast<Id>(token_of_.size()));
  token_of_.push_back(token);
}

Id Vocab::id_of(const std::string& token) const {
  auto it = id_of_.find(token);
  return it == id_of_.end() ? unk_id() : it->second;
}

const std::string& Vocab::token_of(Id id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= token_of_.size()) {
    throw IndexError("vocab: id " + std::to_string(id) + " out of range");
  }
  return token_of_[static_cast<std::size_t>(id)];
}

std::vector<Id> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<Id> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id_of(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const Id> ids) const {
  std::vector<std::string> toks;
  toks.reserve(ids.size());
  for (Id id : ids) toks.push_back(token_of(id));
  return toks;
}

Digest Vocab::hash() const {
  std::string joined;
  for (const auto& t : token_of_) {
    joined += t;
    joined += '\n';
  }
  return sha256(joined);
}

Vocab build_vocab(std::span<const std::string> stream, std::size_t min_count, std::size_t max_size) {
  if (stream.empty()) throw DataError("build_vocab: empty token stream");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : stream) {
    if (t == kUnkToken || t == kEosToken) continue;
    ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  // counts is already lexicographic, so a stable sort on frequency keeps ties ordered.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size > 0 && kept.size() > max_size) kept.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, _] : kept) tokens.push_back(tok);
  return Vocab(tokens);
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

// ---- Corpus -----------------------------------------------------------------

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

std::vector<Id> Corpus::stream() const {
  std::vector<Id> out;
  out.reserve(token_count());
  for (const auto& s : sequences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

void Corpus::validate(std::size_t vocab) const {
  if (!labels.empty() && labels.size() != sequences.size()) {
    throw DataError("corpus: " + std::to_string(labels.size()) + " label rows for " +
                    std::to_string(sequences.size()) + " sequences");
  }
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    for (Id id : sequences[i]) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
        throw DataError("corpus: sequence " + std::to_string(i) + " holds id " +
                        std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
      }
    }
  }
}

// ---- files ------------------------------------------------------------------

std::vector<std::vector<std::string>> load_lines(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_ws(line);
    toks.emplace_back(kEosToken);
    lines.push_back(std::move(toks));
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return lines;
}

std::vector<std::string> load_ptb_format(const std::filesystem::path& path) {
  std::vector<std::string> stream;
  for (auto& line : load_lines(path)) {
    stream.insert(stream.end(), std::make_move_iterator(line.begin()),
                  std::make_move_iterator(line.end()));
  }
  return stream;
}

std::vector<BehaviorLabels> load_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<BehaviorLabels> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.size() != kNumBehaviors) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(kNumBehaviors) + " labels, found " +
                      std::to_string(toks.size()));
    }
    BehaviorLabels row{};
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      if (toks[k] != "0" && toks[k] != "1") {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": label '" + toks[k] +
                        "' is not 0 or 1");
      }
      row[k] = toks[k] == "1" ? 1.0 : 0.0;
    }
    labels.push_back(row);
  }
  return labels;
}

void save_labels(const std::filesystem::path& path, std::span<const BehaviorLabels> labels) {
  auto out = open_out(path);
  for (const auto& row : labels) {
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      if (k) out << ' ';
      out << (row[k] >= 0.5 ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

Vocab load_vocab(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  if (tokens.size() < 2 || tokens[0] != kUnkToken || tokens[1] != kEosToken) {
    throw DataError(path.string() + ": vocab file must start with " + std::string(kUnkToken) +
                    " and " + std::string(kEosToken));
  }
  return Vocab(std::vector<std::string>(tokens.begin() + 2, tokens.end()));
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  auto out = open_out(path);
  for (const auto& t : vocab.tokens()) out << t << '\n';
  if (!out) throw IoError("write failure on " + path.string());
}

void save_corpus_text(const std::filesystem::path& path, const Corpus& corpus, const Vocab& vocab) {
  auto out = open_out(path);
  for (const auto& seq : corpus.sequences) {
    std::size_t n = seq.size();
    if (n > 0 && seq.back() == vocab.eos_id()) --n;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out << ' ';
      out << vocab.token_of(seq[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

Corpus load_corpus(const std::filesystem::path& text, const Vocab& vocab,
                   const std::optional<std::filesystem::path>& labels, Split split) {
  Corpus c;
  c.split = split;
  for (const auto& line : load_lines(text)) c.sequences.push_back(vocab.encode(line));
  if (labels) {
    c.labels = load_labels(*labels);
    if (c.labels.size() != c.sequences.size()) {
      throw DataError(labels->string() + ": " + std::to_string(c.labels.size()) +
                      " label rows for " + std::to_string(c.sequences.size()) + " lines in " +
                      text.string());
    }
  }
  c.validate(vocab.size());
  return c;
}

// ---- batching ---------------------------------------------------------------

std::vector<Batch> batchify(std::span<const Id> stream, std::size_t batch_size, std::size_t bptt) {
  if (batch_size == 0 || bptt == 0) throw ConfigError("batchify: batch size and bptt must be positive");
  if (stream.size() < batch_size * (bptt + 1)) {
    throw DataError("batchify: stream of " + std::to_string(stream.size()) +
                    " tokens is shorter than B*(T+1) = " + std::to_string(batch_size * (bptt + 1)));
  }
  const std::size_t lane = stream.size() / batch_size;
  const std::size_t windows = (lane - 1) / bptt;
  std::vector<Batch> out;
  out.reserve(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    Batch b{IdMatrix(batch_size, bptt), IdMatrix(batch_size, bptt)};
    for (std::size_t r = 0; r < batch_size; ++r) {
      const std::size_t base = r * lane + w * bptt;
      for (std::size_t t = 0; t < bptt; ++t) {
        b.input(r, t) = stream[base + t];
        b.target(r, t) = stream[base + t + 1];
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace bglm
