#include "xlt/tokenizer.hpp"

#include "unicode.hpp"
#include "xlt/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace xlt {

namespace {

constexpr std::array<std::string_view, Vocab::kNumSpecial> kSpecialTokens{
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
constexpr std::size_t kMaxPieceChars = 24;
constexpr std::size_t kMaxWordChars = 100;

std::size_t piece_chars(std::string_view token) {
  if (token.substr(0, Vocab::kContinuation.size()) == Vocab::kContinuation) {
    token.remove_prefix(Vocab::kContinuation.size());
  }
  return unicode::decode(token).size();
}

}  // namespace

Vocab::Vocab() : Vocab(std::vector<std::string>(kSpecialTokens.begin(), kSpecialTokens.end())) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecial) throw DataError("vocabulary is missing special tokens");
  for (int i = 0; i < kNumSpecial; ++i) {
    if (tokens_[static_cast<std::size_t>(i)] != kSpecialTokens[static_cast<std::size_t>(i)]) {
      throw DataError("vocabulary id " + std::to_string(i) + " must be " +
                      std::string(kSpecialTokens[static_cast<std::size_t>(i)]));
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("invalid vocabulary token at id " + std::to_string(i));
    }
    if (!index_.emplace(t, static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary token '" + t + "'");
    }
    if (i >= kNumSpecial) max_piece_chars_ = std::max(max_piece_chars_, piece_chars(t));
  }
}

std::optional<int> Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab Vocab::deserialize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    tokens.emplace_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write vocabulary: " + path.string());
  out << serialize();
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

std::size_t Encoding::n_real() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

std::vector<std::string> pre_tokenize(std::string_view text) {
  const auto cps = unicode::decode(text);
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };
  for (char32_t cp : cps) {
    if (unicode::is_space(cp)) {
      flush();
    } else if (unicode::is_cjk(cp) || unicode::is_punctuation(cp)) {
      flush();
      std::string single;
      unicode::append_utf8(single, cp);
      words.push_back(std::move(single));
    } else {
      unicode::append_utf8(current, cp);
    }
  }
  flush();
  return words;
}

Vocab train_vocab_from_texts(std::span<const std::string> texts, std::size_t target_size) {
  if (texts.empty()) throw DataError("cannot train a vocabulary on empty corpora");

  std::map<std::string, std::size_t> word_freq;
  for (const auto& text : texts) {
    for (auto& w : pre_tokenize(text)) ++word_freq[std::move(w)];
  }
  if (word_freq.empty()) throw DataError("corpora contain no tokens");

  std::map<std::string, std::size_t> singles;  // bare and "##" single characters
  std::map<std::string, std::size_t> pieces;   // multi-character candidates
  const std::string marker(Vocab::kContinuation);
  for (const auto& [word, freq] : word_freq) {
    const auto cps = unicode::decode(word);
    if (cps.size() > kMaxWordChars) continue;
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const auto ch = unicode::encode(cps, i, i + 1);
      singles[ch] += (i == 0) ? freq : 0;
      if (i > 0) singles[marker + ch] += freq;
      for (std::size_t j = i + 2; j <= std::min(cps.size(), i + kMaxPieceChars); ++j) {
        auto sub = unicode::encode(cps, i, j);
        pieces[i == 0 ? sub : marker + sub] += freq;
      }
    }
  }

  if (target_size < Vocab::kNumSpecial + singles.size()) {
    throw ConfigError("target vocabulary size " + std::to_string(target_size) +
                      " cannot hold the " + std::to_string(Vocab::kNumSpecial) +
                      " special tokens and " + std::to_string(singles.size()) +
                      " single-character units");
  }

  using Ranked = std::pair<std::string, std::size_t>;
  auto by_frequency = [](const Ranked& a, const Ranked& b) {
    if (a.second != b.second) return a.second > b.second;
    const auto la = piece_chars(a.first);
    const auto lb = piece_chars(b.first);
    if (la != lb) return la > lb;
    return a.first < b.first;
  };

  std::vector<Ranked> ranked_singles(singles.begin(), singles.end());
  std::sort(ranked_singles.begin(), ranked_singles.end(), by_frequency);
  std::vector<Ranked> ranked_pieces(pieces.begin(), pieces.end());
  const std::size_t room = target_size - Vocab::kNumSpecial - singles.size();
  const std::size_t keep = std::min(room, ranked_pieces.size());
  std::partial_sort(ranked_pieces.begin(), ranked_pieces.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked_pieces.end(), by_frequency);

  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  tokens.reserve(Vocab::kNumSpecial + singles.size() + keep);
  for (auto& [t, f] : ranked_singles) tokens.push_back(t);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked_pieces[i].first);
  return Vocab(std::move(tokens));
}

Vocab train_vocab(std::span<const Dataset> corpora, std::size_t target_size) {
  std::vector<std::string> texts;
  for (const auto& d : corpora) {
    for (const auto& e : d) texts.push_back(e.text);
  }
  return train_vocab_from_texts(texts, target_size);
}

std::vector<int> tokenize(const Vocab& vocab, std::string_view text) {
  std::vector<int> ids;
  std::string candidate;
  for (const auto& word : pre_tokenize(text)) {
    const auto cps = unicode::decode(word);
    if (cps.size() > kMaxWordChars) {
      ids.push_back(Vocab::kUnk);
      continue;
    }
    std::vector<int> word_ids;
    std::size_t pos = 0;
    bool unknown = false;
    while (pos < cps.size()) {
      const std::size_t longest = std::min(cps.size(), pos + vocab.max_piece_chars_);
      int found = -1;
      std::size_t found_end = pos;
      for (std::size_t end = longest; end > pos; --end) {
        candidate.clear();
        if (pos > 0) candidate += Vocab::kContinuation;
        for (std::size_t k = pos; k < end; ++k) unicode::append_utf8(candidate, cps[k]);
        auto it = vocab.index_.find(candidate);
        if (it != vocab.index_.end() && !Vocab::is_special(it->second)) {
          found = it->second;
          found_end = end;
          break;
        }
      }
      if (found < 0) {
        unknown = true;
        break;
      }
      word_ids.push_back(found);
      pos = found_end;
    }
    if (unknown) {
      ids.push_back(Vocab::kUnk);
    } else {
      ids.insert(ids.end(), word_ids.begin(), word_ids.end());
    }
  }
  return ids;
}

Encoding encode(const Vocab& vocab, std::string_view text, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  auto tokens = tokenize(vocab, text);
  if (tokens.size() > max_len - 2) tokens.resize(max_len - 2);

  Encoding enc;
  enc.ids.assign(max_len, Vocab::kPad);
  enc.attention_mask.assign(max_len, 0);
  enc.ids[0] = Vocab::kCls;
  std::copy(tokens.begin(), tokens.end(), enc.ids.begin() + 1);
  enc.ids[tokens.size() + 1] = Vocab::kSep;
  std::fill_n(enc.attention_mask.begin(), tokens.size() + 2, std::uint8_t{1});
  return enc;
}

Encoding encode_pair(const Vocab& vocab, std::string_view first, std::string_view second,
                     std::size_t max_len) {
  if (max_len < 3) throw ConfigError("max_len must be at least 3 for sentence pairs");
  auto a = tokenize(vocab, first);
  auto b = tokenize(vocab, second);
  while (a.size() + b.size() > max_len - 3) {
    if (a.size() >= b.size()) {
      a.pop_back();
    } else {
      b.pop_back();
    }
  }
  Encoding enc;
  enc.ids.assign(max_len, Vocab::kPad);
  enc.attention_mask.assign(max_len, 0);
  enc.segment_ids.assign(max_len, 0);
  std::size_t pos = 0;
  enc.ids[pos++] = Vocab::kCls;
  for (int id : a) enc.ids[pos++] = id;
  enc.ids[pos++] = Vocab::kSep;
  const std::size_t second_start = pos;
  for (int id : b) enc.ids[pos++] = id;
  enc.ids[pos++] = Vocab::kSep;
  std::fill_n(enc.attention_mask.begin(), pos, std::uint8_t{1});
  std::fill(enc.segment_ids.begin() + static_cast<std::ptrdiff_t>(second_start),
            enc.segment_ids.begin() + static_cast<std::ptrdiff_t>(pos), std::uint8_t{1});
  return enc;
}

std::string decode(const Vocab& vocab, std::span<const int> ids) {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep) continue;
    const auto& tok = vocab.token(id);
    const bool continuation = !Vocab::is_special(id) &&
                              tok.size() > Vocab::kContinuation.size() &&
                              std::string_view(tok).substr(0, 2) == Vocab::kContinuation;
    if (continuation && !words.empty()) {
      words.back() += tok.substr(Vocab::kContinuation.size());
    } else if (continuation) {
      words.push_back(tok.substr(Vocab::kContinuation.size()));
    } else {
      words.push_back(tok);
    }
  }
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

double token_overlap(const Dataset& a, const Dataset& b, const Vocab& vocab) {
  auto types = [&vocab](const Dataset& d) {
    std::set<int> out;
    for (const auto& e : d) {
      for (int id : tokenize(vocab, e.text)) {
        if (!Vocab::is_special(id)) out.insert(id);
      }
    }
    return out;
  };
  const auto ta = types(a);
  const auto tb = types(b);
  if (ta.empty() || tb.empty()) {
    throw DataError("token overlap is undefined: a corpus tokenizes to special tokens only");
  }
  std::size_t inter = 0;
  for (int id : ta) inter += tb.count(id);
  const std::size_t uni = ta.size() + tb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace xlt
