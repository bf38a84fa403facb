#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bglm/behavior.hpp"
#include "bglm/data.hpp"
#include "bglm/gated_lm.hpp"
#include "bglm/param_store.hpp"

namespace bglm {

// Binary checkpoint layout, all integers and reals little-endian:
//
//   "BGLM"                 4 bytes magic
//   version                u32 (= kCheckpointVersion)
//   metadata length        u32, then the metadata block:
//     kind u8 (0 behavior, 1 language model), mode u8 (0 hidden, 1 posterior),
//     gating u8, behavior_branch u8,
//     vocab embed hidden layers gate_hidden beh_embed beh_hidden eval_batch eval_bptt  (u32 each)
//     vocab hash           32 bytes (SHA-256 of the vocab tokens)
//   parameter count        u32, then per parameter in name order:
//     name length u32, name bytes, rank u32 (= 2), dims u64 × rank,
//     rows·cols f64 values row-major, trainable u8

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind : std::uint8_t { Behavior = 0, LanguageModel = 1 };

struct CheckpointMeta {
  ModelKind kind = ModelKind::LanguageModel;
  GateSource mode = GateSource::Hidden;
  bool gating_enabled = false;
  bool behavior_branch = false;
  std::uint32_t vocab = 0, embed = 0, hidden = 0, layers = 0, gate_hidden = 0;
  std::uint32_t beh_embed = 0, beh_hidden = 0;
  std::uint32_t eval_batch = 20, eval_bptt = 20;  // batching that produced the logged perplexities
  Digest vocab_hash{};
};

struct Checkpoint {
  CheckpointMeta meta;
  ParamStore params;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws LoadError on a malformed file, or when `expected_vocab` is given and
/// the recorded vocab hash differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<Digest>& expected_vocab = std::nullopt);

Checkpoint make_checkpoint(const BehaviorNet& net, const Vocab& vocab);
Checkpoint make_checkpoint(const GatedLm& model, const Vocab& vocab, std::size_t eval_batch,
                           std::size_t eval_bptt);

BehaviorNet behavior_from_checkpoint(Checkpoint ckpt);
GatedLm lm_from_checkpoint(Checkpoint ckpt);

}  // namespace bglm
