#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stylo/rng.hpp"
#include "stylo/tokenizer.hpp"

namespace stylo {

enum class Profile { books, blogs, mails };

inline std::string to_string(Profile p) {
  switch (p) {
    case Profile::books: return "books";
    case Profile::blogs: return "blogs";
    case Profile::mails: return "mails";
  }
  throw std::logic_error("unreachable profile");
}

inline Profile parse_profile(std::string_view s) {
  if (s == "books") return Profile::books;
  if (s == "blogs") return Profile::blogs;
  if (s == "mails") return Profile::mails;
  throw std::invalid_argument("unknown profile: " + std::string(s));
}

struct Document {
  std::string author_id;
  std::string doc_id;
  std::string text;
  std::map<std::string, std::string> meta;
};

// An author's admitted token chunks; the unit of contrastive sampling.
// Admitted pools always hold >= 2 chunks, each of length <= seq_len.
struct AuthorPool {
  std::string author_id;
  std::vector<std::vector<TokenId>> chunks;
  std::map<std::string, std::string> meta;
};

struct CorpusSplit {
  std::vector<AuthorPool> train_pools;
  std::vector<AuthorPool> test_pools;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Manifest ingestion (one JSON record per line).

inline std::vector<Document> ingest_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);

  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("malformed record at line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    if (!rec.is_object()) {
      throw std::runtime_error("malformed record at line " + std::to_string(line_no) +
                               ": not a JSON object");
    }

    Document doc;
    for (const char* field : {"author_id", "doc_id", "text"}) {
      if (!rec.contains(field) || !rec[field].is_string()) {
        throw std::runtime_error("missing field " + std::string(field) + " at line " +
                                 std::to_string(line_no));
      }
    }
    doc.author_id = rec["author_id"].get<std::string>();
    doc.doc_id = rec["doc_id"].get<std::string>();
    doc.text = rec["text"].get<std::string>();
    if (doc.author_id.empty()) {
      throw std::runtime_error("missing field author_id at line " + std::to_string(line_no));
    }
    if (rec.contains("meta")) {
      if (!rec["meta"].is_object()) {
        throw std::runtime_error("malformed record at line " + std::to_string(line_no) +
                                 ": meta is not an object");
      }
      for (const auto& [key, value] : rec["meta"].items()) {
        doc.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Document cleaning.

// An ordered list of pattern rules. "drop_line" removes matching lines,
// "drop_tail" removes the matching line and everything after it.
struct CleaningRule {
  std::string name;
  std::string pattern;
  bool ignore_case = true;
  enum class Action { drop_line, drop_tail } action = Action::drop_line;
};

class CleaningRules {
 public:
  explicit CleaningRules(std::vector<CleaningRule> rules) : rules_(std::move(rules)) {
    for (const auto& rule : rules_) {
      auto flags = std::regex::ECMAScript;
      if (rule.ignore_case) flags |= std::regex::icase;
      compiled_.emplace_back(rule.pattern, flags);
    }
  }

  // Defaults for the mails profile; mirrors configs/mail_cleaning_rules.json.
  static CleaningRules mail_defaults() {
    return CleaningRules({
        {"header-fields",
         R"(^\s*(from|to|cc|bcc|subject|date|sent|sent by|reply-to|message-id|mime-version|content-type|content-transfer-encoding|importance|x-[a-z0-9-]+)\s*:)",
         true, CleaningRule::Action::drop_line},
        {"forwarded-delimiter", R"(^\s*-{2,}\s*(original message|forwarded by).*$)", true,
         CleaningRule::Action::drop_line},
        {"signature-delimiter", R"(^\s*--\s*$)", false, CleaningRule::Action::drop_tail},
    });
  }

  static CleaningRules from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cleaning rules: " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.value("format", "") != "stylo-cleaning-rules") {
      throw std::runtime_error("not a cleaning-rules file: " + path);
    }
    std::vector<CleaningRule> rules;
    for (const auto& entry : doc.at("rules")) {
      CleaningRule rule;
      rule.name = entry.value("name", "");
      rule.pattern = entry.at("pattern").get<std::string>();
      rule.ignore_case = entry.value("ignore_case", true);
      const std::string action = entry.at("action").get<std::string>();
      if (action == "drop_line") {
        rule.action = CleaningRule::Action::drop_line;
      } else if (action == "drop_tail") {
        rule.action = CleaningRule::Action::drop_tail;
      } else {
        throw std::runtime_error("unknown cleaning action: " + action);
      }
      rules.push_back(std::move(rule));
    }
    return CleaningRules(std::move(rules));
  }

  std::string apply(const std::string& text) const {
    std::vector<std::string> kept;
    std::istringstream stream(text);
    std::string line;
    bool truncated = false;
    while (!truncated && std::getline(stream, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      bool drop = false;
      for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (!std::regex_search(line, compiled_[i])) continue;
        if (rules_[i].action == CleaningRule::Action::drop_tail) truncated = true;
        drop = true;
        break;
      }
      if (!drop && !truncated) kept.push_back(line);
    }
    // Trim blank edges so reapplication is a no-op.
    std::size_t first = 0, last = kept.size();
    auto blank = [](const std::string& s) {
      return s.find_first_not_of(" \t") == std::string::npos;
    };
    while (first < last && blank(kept[first])) ++first;
    while (last > first && blank(kept[last - 1])) --last;
    std::string out;
    for (std::size_t i = first; i < last; ++i) {
      if (i > first) out += '\n';
      out += kept[i];
    }
    return out;
  }

 private:
  std::vector<CleaningRule> rules_;
  std::vector<std::regex> compiled_;
};

// Returns nullopt (with a warning) when nothing survives cleaning.
inline std::optional<Document> clean_document(const Document& doc, Profile profile,
                                              const CleaningRules* mail_rules = nullptr) {
  Document out = doc;
  if (profile == Profile::mails) {
    static const CleaningRules defaults = CleaningRules::mail_defaults();
    out.text = (mail_rules ? *mail_rules : defaults).apply(doc.text);
  }
  if (out.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    std::cerr << "warning: document " << doc.doc_id << " (author " << doc.author_id
              << ") is empty after cleaning, discarded\n";
    return std::nullopt;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chunking.

namespace detail {

// Consecutive chunks of exactly `len` tokens; a shorter final remainder is
// kept only when 4 * remainder >= len.
inline std::vector<std::vector<TokenId>> split_stream(const std::vector<TokenId>& stream,
                                                      std::size_t len) {
  std::vector<std::vector<TokenId>> chunks;
  std::size_t pos = 0;
  while (pos + len <= stream.size()) {
    chunks.emplace_back(stream.begin() + pos, stream.begin() + pos + len);
    pos += len;
  }
  const std::size_t remainder = stream.size() - pos;
  if (remainder > 0 && 4 * remainder >= len) {
    chunks.emplace_back(stream.begin() + pos, stream.end());
  }
  return chunks;
}

// For the books profile: cut one book into L-sized chunks (short tail
// included), drop the first and last, and return the middle as a stream.
inline std::vector<TokenId> middle_of_book(const std::vector<TokenId>& stream,
                                           std::size_t len) {
  const std::size_t n_chunks = (stream.size() + len - 1) / len;
  if (n_chunks <= 2) return {};
  const std::size_t last_start = (n_chunks - 1) * len;
  return {stream.begin() + static_cast<std::ptrdiff_t>(len),
          stream.begin() + static_cast<std::ptrdiff_t>(last_start)};
}

}  // namespace detail

// Merge one author's documents into a separator-joined token stream and cut
// it into chunks of exactly seq_len tokens. Returns nullopt when fewer than
// two chunks survive.
inline std::optional<AuthorPool> chunk_author(const std::vector<Document>& docs,
                                              const Tokenizer& tok, std::size_t seq_len,
                                              Profile profile) {
  if (docs.empty()) throw std::invalid_argument("chunk_author: no documents");
  if (seq_len < 2) throw std::invalid_argument("chunk_author: seq_len must be >= 2");
  for (const auto& doc : docs) {
    if (doc.author_id != docs.front().author_id) {
      throw std::invalid_argument("chunk_author: documents span multiple authors");
    }
  }

  std::vector<TokenId> merged;
  bool first_stream = true;
  for (const auto& doc : docs) {
    std::vector<TokenId> stream = tok.encode(doc.text);
    if (profile == Profile::books) stream = detail::middle_of_book(stream, seq_len);
    if (stream.empty()) continue;
    if (!first_stream) merged.push_back(tok.separator_id());
    merged.insert(merged.end(), stream.begin(), stream.end());
    first_stream = false;
  }

  auto chunks = detail::split_stream(merged, seq_len);
  if (chunks.size() < 2) return std::nullopt;

  AuthorPool pool;
  pool.author_id = docs.front().author_id;
  pool.chunks = std::move(chunks);
  for (const auto& doc : docs) {
    for (const auto& [key, value] : doc.meta) pool.meta.emplace(key, value);
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Author-level train/test split.

inline CorpusSplit split_authors(const std::vector<AuthorPool>& pools, double fraction,
                                 std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split_authors: fraction must be in (0,1)");
  }
  if (pools.size() < 2) throw std::invalid_argument("split_authors: need at least 2 pools");

  const std::size_t n = pools.size();
  std::size_t n_test = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  if (n_test < 1) n_test = 1;
  if (n_test > n - 1) n_test = n - 1;

  Rng rng(derive_seed(seed, "author_split"));
  const auto picked = rng.sample_indices(n, n_test);
  std::vector<bool> is_test(n, false);
  for (std::size_t idx : picked) is_test[idx] = true;

  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? split.test_pools : split.train_pools).push_back(pools[i]);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Author-pool store (line-delimited JSON with a header record).

struct PoolStoreHeader {
  std::string tokenizer = "byte";
  TokenId vocab_size = 258;
  TokenId pad_id = ByteTokenizer::kPad;
  TokenId separator_id = ByteTokenizer::kSeparator;
  std::size_t seq_len = 512;
  std::string profile = "blogs";
};

struct PoolSet {
  PoolStoreHeader header;
  std::vector<AuthorPool> pools;
};

inline void save_pools(const std::string& path, const PoolSet& set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write pool store: " + path);
  nlohmann::json header = {
      {"format", "stylo-pools"},        {"version", 1},
      {"tokenizer", set.header.tokenizer}, {"vocab_size", set.header.vocab_size},
      {"pad_id", set.header.pad_id},    {"separator_id", set.header.separator_id},
      {"seq_len", set.header.seq_len},  {"profile", set.header.profile},
  };
  out << header.dump() << '\n';
  for (const auto& pool : set.pools) {
    nlohmann::json rec = {
        {"author_id", pool.author_id}, {"meta", pool.meta}, {"chunks", pool.chunks}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing pool store: " + path);
}

inline PoolSet load_pools(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pool store: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty pool store: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "stylo-pools") {
    throw std::runtime_error("not a pool store: " + path);
  }
  if (header.value("version", 0) != 1) {
    throw std::runtime_error("pool store version mismatch in " + path + ": file has " +
                             std::to_string(header.value("version", 0)) +
                             ", reader expects 1");
  }

  PoolSet set;
  set.header.tokenizer = header.value("tokenizer", "byte");
  set.header.vocab_size = header.value("vocab_size", 258);
  set.header.pad_id = header.value("pad_id", static_cast<TokenId>(ByteTokenizer::kPad));
  set.header.separator_id =
      header.value("separator_id", static_cast<TokenId>(ByteTokenizer::kSeparator));
  set.header.seq_len = header.value("seq_len", std::size_t{512});
  set.header.profile = header.value("profile", "blogs");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("malformed pool record at line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    AuthorPool pool;
    pool.author_id = rec.at("author_id").get<std::string>();
    if (rec.contains("meta")) {
      for (const auto& [key, value] : rec["meta"].items()) {
        pool.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    pool.chunks = rec.at("chunks").get<std::vector<std::vector<TokenId>>>();
    set.pools.push_back(std::move(pool));
  }
  return set;
}

}  // namespace stylo
