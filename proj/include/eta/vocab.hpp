#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "eta/corpus.hpp"

namespace eta {

// Word-level token table. Ids 0..3 are reserved; corpus tokens follow in
// first-appearance order. Lookup lowercases, matching the uncased setting.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens_in_id_order);

  static Vocabulary build(const std::vector<GroundingInstance>& data);

  int add(const std::string& token);           // idempotent
  int id(const std::string& token) const;      // kUnk when absent
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace eta
