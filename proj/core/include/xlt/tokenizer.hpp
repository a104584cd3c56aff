#pragma once

#include "xlt/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xlt {

/// Shared subword vocabulary. Ids are dense; the five special tokens occupy
/// ids 0..4. Word-continuation pieces carry the "##" marker.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecial = 5;
  static constexpr std::string_view kContinuation = "##";

  Vocab();
  /// Validates specials at ids 0..4 and token uniqueness.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::optional<int> id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  /// One token per line; the line number is the id.
  std::string serialize() const;
  static Vocab deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::size_t max_piece_chars_ = 1;

  friend std::vector<int> tokenize(const Vocab&, std::string_view);
};

struct Encoding {
  std::vector<int> ids;
  std::vector<std::uint8_t> attention_mask;
  // Empty for single-sentence inputs; 0/1 per position for sentence pairs.
  std::vector<std::uint8_t> segment_ids;

  std::size_t length() const { return ids.size(); }
  std::size_t n_real() const;
  bool is_pair() const { return !segment_ids.empty(); }
};

/// Splits text into words: whitespace-separated runs for alphabetic scripts,
/// one word per CJK character, one word per punctuation character.
std::vector<std::string> pre_tokenize(std::string_view text);

/// Frequency-ranked WordPiece-style vocabulary. Every observed character is
/// included both bare and as a "##" continuation (when it occurs inside a
/// word); the remaining room is filled with the most frequent multi-character
/// pieces. Throws ConfigError when target_size cannot hold specials and all
/// single-character units, DataError on empty corpora.
Vocab train_vocab(std::span<const Dataset> corpora, std::size_t target_size);
Vocab train_vocab_from_texts(std::span<const std::string> texts, std::size_t target_size);

/// Greedy longest-match token ids of the text, without specials or truncation.
std::vector<int> tokenize(const Vocab& vocab, std::string_view text);

/// [CLS] tokens [SEP] [PAD]...; tokens are truncated to max_len - 2.
Encoding encode(const Vocab& vocab, std::string_view text, std::size_t max_len);
/// [CLS] a [SEP] b [SEP] with segment ids; the longer side is truncated first.
Encoding encode_pair(const Vocab& vocab, std::string_view first, std::string_view second,
                     std::size_t max_len);

/// Joins pieces back into space-separated words, dropping PAD/CLS/SEP.
std::string decode(const Vocab& vocab, std::span<const int> ids);

/// Jaccard index of the non-special token types used by the two corpora.
double token_overlap(const Dataset& a, const Dataset& b, const Vocab& vocab);

}  // namespace xlt
