#include "swan/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "swan/io.hpp"

namespace swan {

namespace {

// The invented language is fixed; corpus seeds only pick documents.
const std::vector<std::string>& lexicon() {
  static const std::vector<std::string> words = [] {
    Rng rng(0x5357414e);
    std::vector<std::string> out;
    std::set<std::string> seen;
    while (out.size() < 512) {
      std::string w;
      const int64_t len = rng.randint(3, 8);
      for (int64_t i = 0; i < len; ++i)
        w += static_cast<char>('a' + rng.randint(0, 25));
      if (seen.insert(w).second) out.push_back(std::move(w));
    }
    return out;
  }();
  return words;
}

// zipf-ish cumulative weights over lexicon ranks
const std::vector<double>& lexicon_cdf() {
  static const std::vector<double> cdf = [] {
    const auto& words = lexicon();
    std::vector<double> c(words.size());
    double acc = 0;
    for (size_t r = 0; r < words.size(); ++r) {
      acc += 1.0 / (static_cast<double>(r) + 2.7);
      c[r] = acc;
    }
    for (double& v : c) v /= acc;
    return c;
  }();
  return cdf;
}

const std::string& sample_word(Rng& rng) {
  const auto& cdf = lexicon_cdf();
  double u = rng.uniform();
  size_t idx = static_cast<size_t>(
      std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  if (idx >= cdf.size()) idx = cdf.size() - 1;
  return lexicon()[idx];
}

std::string fresh_key(Rng& rng) {
  std::string w;
  const int64_t len = rng.randint(4, 7);
  for (int64_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.randint(0, 25));
  return w;
}

std::string make_doc(Rng& rng, int64_t target_len) {
  // small per-document topic vocabulary drives within-document repetition
  const int64_t n_topic = rng.randint(20, 36);
  std::vector<std::string> topic;
  for (int64_t i = 0; i < n_topic; ++i) topic.push_back(sample_word(rng));

  const int64_t n_facts = rng.randint(3, 7);
  std::vector<std::pair<std::string, std::string>> facts;
  for (int64_t i = 0; i < n_facts; ++i) {
    std::string value;
    for (int j = 0; j < 4; ++j) value += static_cast<char>('0' + rng.randint(0, 9));
    facts.emplace_back(fresh_key(rng), value);
  }

  std::string out;
  size_t next_first_mention = 0;
  int64_t sentences = 0;
  while (static_cast<int64_t>(out.size()) < target_len) {
    if (rng.uniform() < 0.13) {
      size_t idx;
      if (next_first_mention < facts.size()) {
        idx = next_first_mention++;
      } else {
        idx = static_cast<size_t>(rng.randint(0, static_cast<int64_t>(facts.size()) - 1));
      }
      out += "the magic number for " + facts[idx].first + " is " + facts[idx].second + ". ";
    } else {
      const int64_t n_words = rng.randint(4, 9);
      for (int64_t w = 0; w < n_words; ++w) {
        if (w) out += ' ';
        if (!topic.empty() && rng.uniform() < 0.8) {
          out += topic[static_cast<size_t>(rng.randint(0, n_topic - 1))];
        } else {
          out += sample_word(rng);
        }
      }
      out += ". ";
    }
    if (++sentences % 6 == 0) out += '\n';
  }
  out.resize(static_cast<size_t>(target_len));
  return out;
}

}  // namespace

Corpus synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.doc_len < 64) fail("synthetic_corpus: doc_len must be >= 64, got ", spec.doc_len);
  Corpus c;
  c.id = "synthetic-" + std::to_string(spec.seed) + "-" + std::to_string(spec.train_docs) +
         "x" + std::to_string(spec.doc_len);
  auto fill = [&](std::vector<std::string>& split, int64_t count, uint64_t stream) {
    for (int64_t i = 0; i < count; ++i) {
      Rng rng(spec.seed * 1000003 + stream * 777767777 + static_cast<uint64_t>(i));
      split.push_back(make_doc(rng, spec.doc_len));
    }
  };
  fill(c.train, spec.train_docs, 1);
  fill(c.validation, spec.validation_docs, 2);
  fill(c.heldout, spec.heldout_docs, 3);
  return c;
}

Corpus load_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail("corpus dir '", dir, "' does not exist");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) fail("corpus dir '", dir, "' has no files");
  Corpus c;
  c.id = "dir-" + fs::path(dir).filename().string();
  for (size_t i = 0; i < paths.size(); ++i) {
    std::string doc = read_file(paths[i]);
    if (doc.empty()) fail("corpus document '", paths[i], "' is empty");
    if (paths.size() >= 10 && i % 10 == 9) {
      c.validation.push_back(std::move(doc));
    } else if (paths.size() >= 25 && i % 25 == 4) {
      c.heldout.push_back(std::move(doc));
    } else {
      c.train.push_back(std::move(doc));
    }
  }
  return c;
}

std::vector<int> doc_tokens(const std::string& doc) {
  std::vector<int> out;
  out.reserve(doc.size());
  for (unsigned char b : doc) out.push_back(static_cast<int>(b));
  return out;
}

BatchStream::BatchStream(const Corpus& corpus, int64_t seq_len, int64_t batch_size,
                         uint64_t seed)
    : seq_len_(seq_len), batch_size_(batch_size), seed_(seed) {
  if (corpus.train.empty()) fail("make_batches: corpus train split is empty");
  if (seq_len < 2) fail("make_batches: seq_len must be >= 2");
  if (batch_size < 1) fail("make_batches: batch_size must be >= 1");
  for (size_t d = 0; d < corpus.train.size(); ++d) {
    if (d) stream_.push_back(kDocSeparator);
    for (unsigned char b : corpus.train[d]) stream_.push_back(static_cast<int>(b));
  }
  const int64_t n_blocks = static_cast<int64_t>(stream_.size()) / seq_len_;
  if (n_blocks < 1)
    fail("make_batches: corpus has ", stream_.size(), " tokens, shorter than one ", seq_len_,
         "-token block");
  order_.resize(static_cast<size_t>(n_blocks));
  reshuffle();
}

void BatchStream::reshuffle() {
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int64_t>(i);
  Rng rng(seed_ + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch_));
  rng.shuffle(order_);
  cursor_ = 0;
}

std::vector<std::vector<int>> BatchStream::next() {
  std::vector<std::vector<int>> batch;
  batch.reserve(static_cast<size_t>(batch_size_));
  for (int64_t b = 0; b < batch_size_; ++b) {
    if (cursor_ >= static_cast<int64_t>(order_.size())) {
      ++epoch_;
      reshuffle();
    }
    const int64_t block = order_[static_cast<size_t>(cursor_++)];
    auto begin = stream_.begin() + block * seq_len_;
    batch.emplace_back(begin, begin + seq_len_);
  }
  return batch;
}

}  // namespace swan
