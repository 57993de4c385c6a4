#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stylo {

using TokenId = std::int32_t;

// Deterministic text -> token-id encoder. encode() must always produce the
// same ids for the same input, and every emitted id must be < vocab_size().
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual TokenId vocab_size() const = 0;
  virtual TokenId separator_id() const = 0;
  virtual TokenId pad_id() const = 0;
  virtual std::string name() const = 0;
};

// Byte-level tokenizer: ids 0-255 are raw UTF-8 bytes, 256 is padding,
// 257 is the document separator. Dependency-free and fully deterministic.
class ByteTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kPad = 256;
  static constexpr TokenId kSeparator = 257;

  std::vector<TokenId> encode(std::string_view text) const override {
    std::vector<TokenId> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<TokenId>(c));
    return ids;
  }

  TokenId vocab_size() const override { return 258; }
  TokenId separator_id() const override { return kSeparator; }
  TokenId pad_id() const override { return kPad; }
  std::string name() const override { return "byte"; }
};

inline std::unique_ptr<Tokenizer> make_tokenizer(const std::string& name) {
  if (name == "byte") return std::make_unique<ByteTokenizer>();
  throw std::invalid_argument("unknown tokenizer: " + name);
}

}  // namespace stylo
