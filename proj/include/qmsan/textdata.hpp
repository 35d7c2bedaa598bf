#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qmsan/rng.hpp"

// Dataset ingestion for the text-classification harness: TSV loading,
// whitespace tokenization, first-occurrence vocabulary, the trainable word
// embedding table, and deterministic stratified splits.
namespace qmsan::textdata {

struct Sample {
  std::vector<std::string> tokens;
  int label = 0;  // 0 or 1
};

struct Corpus {
  std::string name;
  std::vector<Sample> samples;
  std::map<std::string, int> vocab;  // token -> index, ordered by first occurrence

  std::size_t vocab_size() const { return vocab.size(); }
  std::string vocab_json() const;
};

// lowercase, split on whitespace, strip ASCII punctuation; an empty result
// is an error
std::vector<std::string> tokenize(const std::string& sentence);

// lines of `sentence<TAB>{0|1}`; malformed lines report their line number
Corpus load_tsv(const std::string& path, const std::string& name = "");

std::vector<std::string> truncate(const std::vector<std::string>& tokens, int max_len);

// Trainable word->vector table, one row per vocab entry plus a trailing UNK
// row used for out-of-vocabulary tokens at inference.
struct EmbeddingTable {
  std::size_t rows = 0;  // vocab_size + 1 (UNK)
  std::size_t cols = 0;  // n_qubits

  std::size_t unk_row() const { return rows - 1; }
};

// row index for a token, falling back to UNK; the vocab may come from a
// corpus or from a checkpoint
int lookup_row(const std::map<std::string, int>& vocab, const EmbeddingTable& table,
               const std::string& token);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// stratified holdout split, deterministic given the seed
Split split_holdout(const Corpus& corpus, double train_fraction, std::uint64_t seed);

// stratified k folds; fold i serves as the test set of split i
std::vector<Split> split_kfold(const Corpus& corpus, int folds, std::uint64_t seed);

}  // namespace qmsan::textdata
