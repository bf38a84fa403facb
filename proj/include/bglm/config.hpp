#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bglm/behavior.hpp"
#include "bglm/data.hpp"
#include "bglm/training.hpp"

namespace bglm {

// Config files are UTF-8 `key = value` lines. '#' starts a comment, blank
// lines are ignored, and every key must be known (unknown keys are an error).
//
//   synthetic corpus : shared_vocab group_size beta p_active seq_len n_sequences
//                      train_frac valid_frac synth_seed synth_mode
//   behavior model   : beh_embed_dim beh_hidden_dim beh_epochs beh_batch_size beh_lr
//                      beh_lr_decay beh_decay_start_epoch beh_clip_norm beh_init_range beh_seed
//   language model   : epochs batch_size bptt_len lr_initial lr_decay decay_start_epoch
//                      clip_norm dropout_p init_range seed mode gating_enabled
//                      embed_dim hidden_dim layers gate_dim
//   grid files only  : max_runs; language-model values may be comma-separated lists

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source);

struct PipelineConfig {
  SynthConfig synth;
  BehaviorTrainConfig behavior;
  std::size_t beh_embed_dim = 50;
  std::size_t beh_hidden_dim = 50;
  TrainConfig train;
};

PipelineConfig parse_config(std::string_view text, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

GridSpec parse_grid(std::string_view text, const std::string& source = "<grid>");
GridSpec load_grid(const std::filesystem::path& path);

/// Sets one language-model key; returns false if `key` is not one.
bool apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Language-model keys and their values, formatted so that parsing them back
/// reproduces `cfg` exactly.
std::vector<std::pair<std::string, std::string>> train_config_items(const TrainConfig& cfg);

std::string format_double(double v);

}  // namespace bglm
