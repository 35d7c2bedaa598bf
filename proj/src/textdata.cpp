#include "qmsan/textdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qmsan::textdata {

namespace {

// deterministic Fisher-Yates
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<std::vector<std::size_t>> by_label(const Corpus& corpus) {
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < corpus.samples.size(); ++i)
    groups[corpus.samples[i].label].push_back(i);
  return groups;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char ch : sentence) {
    if (std::isspace(ch)) {
      flush();
    } else if (!std::ispunct(ch)) {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  if (tokens.empty()) throw std::invalid_argument("sentence has no tokens after cleanup");
  return tokens;
}

Corpus load_tsv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  Corpus corpus;
  corpus.name = name.empty() ? path : name;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing tab separator");
    const std::string text = line.substr(0, tab);
    const std::string label_str = line.substr(tab + 1);
    if (label_str != "0" && label_str != "1")
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": label must be 0 or 1, got '" + label_str + "'");
    Sample sample;
    try {
      sample.tokens = tokenize(text);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty sentence");
    }
    sample.label = label_str == "1" ? 1 : 0;
    for (const auto& tok : sample.tokens)
      if (corpus.vocab.find(tok) == corpus.vocab.end())
        corpus.vocab.emplace(tok, static_cast<int>(corpus.vocab.size()));
    corpus.samples.push_back(std::move(sample));
  }
  if (corpus.samples.empty()) throw std::runtime_error("dataset is empty: " + path);
  return corpus;
}

std::string Corpus::vocab_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [tok, idx] : vocab) j[tok] = idx;
  return j.dump(2);
}

std::vector<std::string> truncate(const std::vector<std::string>& tokens, int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (static_cast<int>(tokens.size()) <= max_len) return tokens;
  return {tokens.begin(), tokens.begin() + max_len};
}

int lookup_row(const std::map<std::string, int>& vocab, const EmbeddingTable& table,
               const std::string& token) {
  const auto it = vocab.find(token);
  if (it == vocab.end()) return static_cast<int>(table.unk_row());
  return it->second;
}

Split split_holdout(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  Rng rng(seed);
  Split split;
  for (auto& group : by_label(corpus)) {
    shuffle_indices(group, rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i)
      (i < n_train ? split.train : split.test).push_back(group[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  if (split.train.empty() || split.test.empty())
    throw std::invalid_argument("split produced an empty train or test set");
  return split;
}

std::vector<Split> split_kfold(const Corpus& corpus, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("k-fold split needs at least 2 folds");
  const auto groups = by_label(corpus);
  for (const auto& g : groups)
    if (!g.empty() && static_cast<int>(g.size()) < folds)
      throw std::invalid_argument("fold count exceeds the size of a label class");

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> fold_members(folds);
  for (auto group : groups) {
    shuffle_indices(group, rng);
    for (std::size_t i = 0; i < group.size(); ++i)
      fold_members[i % folds].push_back(group[i]);
  }

  std::vector<Split> splits(folds);
  for (int f = 0; f < folds; ++f) {
    for (int g = 0; g < folds; ++g) {
      auto& dst = (g == f) ? splits[f].test : splits[f].train;
      dst.insert(dst.end(), fold_members[g].begin(), fold_members[g].end());
    }
    std::sort(splits[f].train.begin(), splits[f].train.end());
    std::sort(splits[f].test.begin(), splits[f].test.end());
  }
  return splits;
}

}  // namespace qmsan::textdata
