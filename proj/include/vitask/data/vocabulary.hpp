#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vitask::data {

using TokenId = std::size_t;
using TokenIds = std::vector<TokenId>;

/// Reserved ids; every vocabulary starts with these six tokens in this order.
namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUser = 1;
inline constexpr TokenId kAssistant = 2;
inline constexpr TokenId kImage = 3;
inline constexpr TokenId kExemplar = 4;
inline constexpr TokenId kEos = 5;
inline constexpr std::size_t kCount = 6;
}  // namespace special

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUserToken = "<|user|>";
inline constexpr std::string_view kAssistantToken = "<|assistant|>";
inline constexpr std::string_view kImageToken = "<image>";
inline constexpr std::string_view kExemplarToken = "<exemplar>";
inline constexpr std::string_view kEosToken = "<eos>";

/// Splits text into word-level tokens: lower-cased, special markers kept
/// whole, punctuation (. , : ; ? !) split off, whitespace collapsed.
std::vector<std::string> split_words(std::string_view text);

/// Canonical form of `text`: its tokens joined by single spaces.
std::string normalize_text(std::string_view text);

/// Closed word-level vocabulary with the reserved specials at fixed ids.
class Vocabulary {
 public:
  /// Specials followed by the sorted, de-duplicated words of `corpus`.
  static Vocabulary build(std::span<const std::string> corpus);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  TokenId id(std::string_view token) const;

  TokenIds tokenize(std::string_view text) const;
  std::string detokenize(std::span<const TokenId> ids) const;

  /// FNV-1a over the vocabulary file contents; stored in checkpoints.
  std::uint64_t hash() const noexcept { return hash_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace vitask::data
