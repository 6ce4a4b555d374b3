#include "vitask/data/vocabulary.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vitask::data {

namespace {

constexpr std::array<std::string_view, special::kCount> kSpecials = {
    kPadToken, kUserToken, kAssistantToken, kImageToken, kExemplarToken, kEosToken};

bool is_split_punct(char c) { return c == '.' || c == ',' || c == ':' || c == ';' || c == '?' || c == '!'; }

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (std::string_view sp : kSpecials) {
      if (text.substr(i, sp.size()) == sp) {
        flush();
        out.emplace_back(sp);
        i += sp.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    ++i;
  }
  flush();
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const std::string& w : split_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < special::kCount) throw std::invalid_argument("vocabulary is missing reserved tokens");
  for (std::size_t i = 0; i < special::kCount; ++i) {
    if (tokens_[i] != kSpecials[i]) {
      throw std::invalid_argument("vocabulary id " + std::to_string(i) + " must be " + std::string(kSpecials[i]) +
                                  ", found '" + tokens_[i] + "'");
    }
  }
  std::string joined;
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    const std::string& t = tokens_[id];
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("invalid vocabulary token at id " + std::to_string(id));
    }
    if (!index_.emplace(t, id).second) throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
    joined += t;
    joined += '\n';
  }
  hash_ = fnv1a(joined);
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  std::set<std::string> words;
  for (const std::string& text : corpus) {
    for (std::string& w : split_words(text)) words.insert(std::move(w));
  }
  std::vector<std::string> tokens(kSpecials.begin(), kSpecials.end());
  for (const std::string& w : words) {
    if (std::find(kSpecials.begin(), kSpecials.end(), w) == kSpecials.end()) tokens.push_back(w);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) { return Vocabulary(std::move(tokens)); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw std::out_of_range("unknown token '" + std::string(token) + "'");
  return it->second;
}

TokenIds Vocabulary::tokenize(std::string_view text) const {
  TokenIds ids;
  for (const std::string& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace vitask::data
