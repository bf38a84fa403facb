#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bglm/data.hpp"

namespace bglm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad flags or config
inline constexpr int kExitData = 2;   // missing/malformed data, I/O, checkpoint load
inline constexpr int kExitNumeric = 3;

/// Runs one `bglm` subcommand; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A corpus directory holds train.txt, valid.txt, test.txt, optional
/// <split>.labels sidecars and vocab.txt (built from train.txt when absent).
struct CorpusDir {
  Vocab vocab;
  Corpus train, valid, test;
};

CorpusDir load_corpus_dir(const std::filesystem::path& dir, bool require_labels);

}  // namespace bglm
