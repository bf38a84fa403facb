#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bglm/behavior_labels.hpp"
#include "bglm/checksum.hpp"
#include "bglm/matrix.hpp"

namespace bglm {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

/// Token <-> id map. Ids are dense in [0, V); the two specials come first
/// (<unk> = 0, <eos> = 1).
class Vocab {
 public:
  Vocab();
  /// Specials followed by `tokens` in the given order. Tokens must be unique
  /// and must not repeat a special.
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const { return token_of_.size(); }
  Id unk_id() const { return 0; }
  Id eos_id() const { return 1; }
  Id id_of(const std::string& token) const;  // unknown -> unk_id
  bool contains(const std::string& token) const { return id_of_.count(token) != 0; }
  const std::string& token_of(Id id) const;
  const std::vector<std::string>& tokens() const { return token_of_; }

  std::vector<Id> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const Id> ids) const;

  /// SHA-256 over the tokens joined by '\n'; recorded in checkpoints.
  Digest hash() const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.token_of_ == b.token_of_; }

 private:
  void insert(const std::string& token);

  std::unordered_map<std::string, Id> id_of_;
  std::vector<std::string> token_of_;
};

/// Keeps tokens seen at least `min_count` times, most frequent first, ties
/// in lexicographic order, at most `max_size` regular tokens (0 = no cap).
/// Special tokens in the stream are not counted.
Vocab build_vocab(std::span<const std::string> stream, std::size_t min_count = 1,
                  std::size_t max_size = 0);

enum class Split { Train, Valid, Test };
std::string_view split_name(Split s);

/// Encoded sequences (each ending in eos) with optional per-sequence labels.
struct Corpus {
  std::vector<std::vector<Id>> sequences;
  std::vector<BehaviorLabels> labels;  // empty, or one per sequence
  Split split = Split::Train;

  bool has_labels() const { return !labels.empty(); }
  std::size_t token_count() const;
  /// Sequences concatenated in order: the stream the language model sees.
  std::vector<Id> stream() const;
  /// Throws DataError when an id is outside [0, vocab) or labels are partial.
  void validate(std::size_t vocab) const;
};

/// One whitespace-tokenized sentence per line, eos appended to each line.
std::vector<std::vector<std::string>> load_lines(const std::filesystem::path& path);
/// Flattened form of load_lines.
std::vector<std::string> load_ptb_format(const std::filesystem::path& path);

/// Label sidecar: one line per sequence, five {0,1} digits separated by spaces.
std::vector<BehaviorLabels> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, std::span<const BehaviorLabels> labels);

/// Vocab file: one token per line, line number = id, specials first.
Vocab load_vocab(const std::filesystem::path& path);
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);

/// Text form of a corpus split: one sequence per line without its eos.
void save_corpus_text(const std::filesystem::path& path, const Corpus& corpus, const Vocab& vocab);
Corpus load_corpus(const std::filesystem::path& text, const Vocab& vocab,
                   const std::optional<std::filesystem::path>& labels, Split split);

struct Batch {
  IdMatrix input;   // [B×T]
  IdMatrix target;  // input shifted one position along each lane
};

/// Cuts the stream into B contiguous lanes of floor(N/B) tokens; window w
/// covers lane offsets [wT, wT+T) with targets one further. Incomplete
/// trailing windows are dropped.
std::vector<Batch> batchify(std::span<const Id> stream, std::size_t batch_size, std::size_t bptt);

// ---- synthetic behavior-labeled corpus --------------------------------------

enum class SynthMode { Unigram, Bigram };

struct SynthConfig {
  std::size_t shared_vocab = 15;
  std::size_t group_size = 5;
  double beta = 2.0;
  double p_active = 0.3;
  std::size_t seq_len = 40;
  std::size_t n_sequences = 2500;
  double train_frac = 0.8;
  double valid_frac = 0.1;
  std::uint64_t seed = 1;
  SynthMode mode = SynthMode::Unigram;

  void validate() const;
  std::size_t content_words() const { return shared_vocab + kNumBehaviors * group_size; }
  std::array<std::size_t, 3> split_sizes() const;
};

struct SynthCorpus {
  Vocab vocab;
  Corpus train, valid, test;
};

/// Words are indexed 0..W-1 (shared words first, then one block of
/// group_size per behavior); word w has vocab id w + 2.
class SynthModel {
 public:
  explicit SynthModel(const SynthConfig& cfg);

  const SynthConfig& config() const { return cfg_; }
  std::size_t words() const { return words_; }
  /// Group of word w, or -1 for shared words.
  int group_of(std::size_t w) const;
  /// P(w | labels, prev) over words; prev == words() is the start state
  /// (ignored in unigram mode).
  std::vector<double> distribution(unsigned label_mask, std::size_t prev) const;
  double label_prior(unsigned label_mask) const;
  Vocab vocab() const;

 private:
  SynthConfig cfg_;
  std::size_t words_;
  std::vector<double> base_;  // (W+1)×W bigram base weights, rows normalized
};

SynthCorpus synth_generate(const SynthConfig& cfg);

struct EntropyBounds {
  double h_given_B = 0.0;  // nats per word token
  double ppl_bound_conditional = 0.0;
  double h_marginal = 0.0;
  double ppl_bound_marginal = 0.0;
};

/// Exact entropies of the generator by enumeration of all 2^5 label vectors.
/// Unigram: H(W|B) and H of the label-marginal mixture. Bigram: position-
/// averaged H(W_t | W_{t-1}, B) and H(W_t | W_{t-1}).
EntropyBounds entropy_oracle(const SynthConfig& cfg);

}  // namespace bglm
