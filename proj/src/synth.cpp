#include <cmath>
#include <numeric>

#include "bglm/data.hpp"
#include "bglm/rng.hpp"

namespace bglm {

namespace {

constexpr std::array<std::string_view, kNumBehaviors> kGroupPrefix = {"acc", "bla", "neg", "pos",
                                                                     "sad"};
constexpr unsigned kLabelStates = 1u << kNumBehaviors;

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<double> to_cdf(std::vector<double> w) {
  std::partial_sum(w.begin(), w.end(), w.begin());
  return w;
}

}  // namespace

void SynthConfig::validate() const {
  if (shared_vocab + group_size == 0) throw ConfigError("synth: empty vocabulary");
  if (group_size == 0) throw ConfigError("synth: group_size must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("synth: beta must be >= 0");
  if (!(p_active >= 0.0 && p_active <= 1.0)) throw ConfigError("synth: p_active must lie in [0,1]");
  if (seq_len == 0) throw ConfigError("synth: seq_len must be positive");
  if (!(train_frac > 0.0 && valid_frac >= 0.0 && train_frac + valid_frac <= 1.0)) {
    throw ConfigError("synth: split fractions must satisfy train>0, valid>=0, train+valid<=1");
  }
  const auto sizes = split_sizes();
  if (sizes[0] == 0) throw ConfigError("synth: n_sequences leaves the train split empty");
}

std::array<std::size_t, 3> SynthConfig::split_sizes() const {
  const auto n = static_cast<double>(n_sequences);
  const auto train = static_cast<std::size_t>(std::floor(n * train_frac + 1e-9));
  const auto valid = static_cast<std::size_t>(std::floor(n * valid_frac + 1e-9));
  const std::size_t test = n_sequences >= train + valid ? n_sequences - train - valid : 0;
  return {train, valid, test};
}

SynthModel::SynthModel(const SynthConfig& cfg) : cfg_(cfg), words_(cfg.content_words()) {
  cfg_.validate();
  if (cfg_.mode == SynthMode::Bigram) {
    Rng rng(mix_seed(cfg_.seed, 0xB16A));
    base_.resize((words_ + 1) * words_);
    for (std::size_t prev = 0; prev <= words_; ++prev) {
      double z = 0.0;
      for (std::size_t w = 0; w < words_; ++w) {
        const double v = std::exp(0.5 * rng.normal());
        base_[prev * words_ + w] = v;
        z += v;
      }
      for (std::size_t w = 0; w < words_; ++w) base_[prev * words_ + w] /= z;
    }
  }
}

int SynthModel::group_of(std::size_t w) const {
  if (w < cfg_.shared_vocab) return -1;
  return static_cast<int>((w - cfg_.shared_vocab) / cfg_.group_size);
}

std::vector<double> SynthModel::distribution(unsigned label_mask, std::size_t prev) const {
  std::vector<double> p(words_);
  double z = 0.0;
  for (std::size_t w = 0; w < words_; ++w) {
    const int g = group_of(w);
    const bool active = g >= 0 && ((label_mask >> g) & 1u);
    double v = std::exp(active ? cfg_.beta : 0.0);
    if (cfg_.mode == SynthMode::Bigram) v *= base_[prev * words_ + w];
    p[w] = v;
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

double SynthModel::label_prior(unsigned label_mask) const {
  double p = 1.0;
  for (std::size_t k = 0; k < kNumBehaviors; ++k) {
    p *= ((label_mask >> k) & 1u) ? cfg_.p_active : 1.0 - cfg_.p_active;
  }
  return p;
}

Vocab SynthModel::vocab() const {
  std::vector<std::string> tokens;
  for (std::size_t w = 0; w < cfg_.shared_vocab; ++w) tokens.push_back("s" + std::to_string(w));
  for (std::size_t k = 0; k < kNumBehaviors; ++k) {
    for (std::size_t j = 0; j < cfg_.group_size; ++j) {
      tokens.push_back(std::string(kGroupPrefix[k]) + std::to_string(j));
    }
  }
  return Vocab(tokens);
}

SynthCorpus synth_generate(const SynthConfig& cfg) {
  const SynthModel model(cfg);
  const std::size_t words = model.words();
  const bool bigram = cfg.mode == SynthMode::Bigram;

  // cdf[mask][prev] (prev collapses to one row in unigram mode)
  const std::size_t prev_states = bigram ? words + 1 : 1;
  std::vector<std::vector<std::vector<double>>> cdf(kLabelStates);
  for (unsigned m = 0; m < kLabelStates; ++m) {
    cdf[m].resize(prev_states);
    for (std::size_t prev = 0; prev < prev_states; ++prev) {
      cdf[m][prev] = to_cdf(model.distribution(m, bigram ? prev : words));
    }
  }

  SynthCorpus out{model.vocab(), {}, {}, {}};
  const Id eos = out.vocab.eos_id();
  Rng rng(mix_seed(cfg.seed, 1));
  const auto sizes = cfg.split_sizes();
  Corpus* splits[3] = {&out.train, &out.valid, &out.test};
  const Split kinds[3] = {Split::Train, Split::Valid, Split::Test};
  for (int s = 0; s < 3; ++s) {
    Corpus& c = *splits[s];
    c.split = kinds[s];
    c.sequences.reserve(sizes[s]);
    c.labels.reserve(sizes[s]);
    for (std::size_t n = 0; n < sizes[s]; ++n) {
      unsigned mask = 0;
      BehaviorLabels labels{};
      for (std::size_t k = 0; k < kNumBehaviors; ++k) {
        if (rng.bernoulli(cfg.p_active)) {
          mask |= 1u << k;
          labels[k] = 1.0;
        }
      }
      std::vector<Id> seq;
      seq.reserve(cfg.seq_len + 1);
      std::size_t prev = words;
      for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        const std::size_t w = rng.categorical_cdf(cdf[mask][bigram ? prev : 0]);
        seq.push_back(static_cast<Id>(w + 2));
        prev = w;
      }
      seq.push_back(eos);
      c.sequences.push_back(std::move(seq));
      c.labels.push_back(labels);
    }
  }
  return out;
}

EntropyBounds entropy_oracle(const SynthConfig& cfg) {
  const SynthModel model(cfg);
  const std::size_t words = model.words();
  EntropyBounds b;

  if (cfg.mode == SynthMode::Unigram) {
    std::vector<double> mixture(words, 0.0);
    for (unsigned m = 0; m < kLabelStates; ++m) {
      const double pm = model.label_prior(m);
      const auto p = model.distribution(m, words);
      b.h_given_B += pm * entropy(p);
      for (std::size_t w = 0; w < words; ++w) mixture[w] += pm * p[w];
    }
    b.h_marginal = entropy(mixture);
  } else {
    // State occupancy per label vector, propagated exactly from the start state.
    std::vector<std::vector<double>> occupancy(kLabelStates, std::vector<double>(words + 1, 0.0));
    for (auto& occ : occupancy) occ[words] = 1.0;
    std::vector<std::vector<std::vector<double>>> trans(kLabelStates);
    for (unsigned m = 0; m < kLabelStates; ++m) {
      for (std::size_t prev = 0; prev <= words; ++prev) trans[m].push_back(model.distribution(m, prev));
    }
    double h_cond = 0.0, h_marg = 0.0;
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      // joint[prev][w] = sum_m P(m) occ_m(prev) P(w | prev, m)
      std::vector<double> joint((words + 1) * words, 0.0);
      for (unsigned m = 0; m < kLabelStates; ++m) {
        const double pm = model.label_prior(m);
        std::vector<double> next(words + 1, 0.0);
        for (std::size_t prev = 0; prev <= words; ++prev) {
          const double occ = occupancy[m][prev];
          if (occ == 0.0) continue;
          const auto& p = trans[m][prev];
          h_cond += pm * occ * entropy(p);
          for (std::size_t w = 0; w < words; ++w) {
            next[w] += occ * p[w];
            joint[prev * words + w] += pm * occ * p[w];
          }
        }
        occupancy[m] = std::move(next);
      }
      for (std::size_t prev = 0; prev <= words; ++prev) {
        std::span<double> row(joint.data() + prev * words, words);
        const double mass = std::accumulate(row.begin(), row.end(), 0.0);
        if (mass <= 0.0) continue;
        for (double& v : row) v /= mass;
        h_marg += mass * entropy(row);
      }
    }
    b.h_given_B = h_cond / static_cast<double>(cfg.seq_len);
    b.h_marginal = h_marg / static_cast<double>(cfg.seq_len);
  }
  b.ppl_bound_conditional = std::exp(b.h_given_B);
  b.ppl_bound_marginal = std::exp(b.h_marginal);
  return b;
}

}  // namespace bglm
