#pragma once

#include <string>
#include <vector>

#include "swan/common.hpp"

namespace swan {

// Documents are raw bytes; token ids are byte values. Ids >= 256 are reserved
// for specials; make_batches joins documents with this in-band separator.
inline constexpr int kDocSeparator = 0;

struct Corpus {
  std::string id;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> heldout;
};

// Deterministic word-salad documents over a fixed invented lexicon, seasoned
// with repeated "the magic number for <key> is <value>" facts so retrieval
// over long ranges is learnable in-distribution.
struct SyntheticSpec {
  int64_t train_docs = 160;
  int64_t validation_docs = 24;
  int64_t heldout_docs = 8;
  int64_t doc_len = 8192;
  uint64_t seed = 1234;
};

Corpus synthetic_corpus(const SyntheticSpec& spec);

// Reads every regular file under dir (sorted by name) as one document and
// splits deterministically by index.
Corpus load_corpus_dir(const std::string& dir);

std::vector<int> doc_tokens(const std::string& doc);

// Deterministic stream of shuffled seq_len token blocks over the train split.
class BatchStream {
 public:
  BatchStream(const Corpus& corpus, int64_t seq_len, int64_t batch_size, uint64_t seed);

  std::vector<std::vector<int>> next();
  int64_t blocks_per_epoch() const { return static_cast<int64_t>(order_.size()); }

 private:
  void reshuffle();

  std::vector<int> stream_;
  std::vector<int64_t> order_;
  int64_t seq_len_ = 0;
  int64_t batch_size_ = 0;
  int64_t cursor_ = 0;
  int64_t epoch_ = 0;
  uint64_t seed_ = 0;
};

}  // namespace swan
