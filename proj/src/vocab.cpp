#include "eta/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "eta/errors.hpp"

namespace eta {

namespace {
std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}
}  // namespace

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) add(t);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens_in_id_order) {
  if (tokens_in_id_order.size() < 4 || tokens_in_id_order[kPad] != "[PAD]" ||
      tokens_in_id_order[kUnk] != "[UNK]" || tokens_in_id_order[kCls] != "[CLS]" ||
      tokens_in_id_order[kSep] != "[SEP]")
    throw ValidationError("vocabulary: reserved tokens [PAD],[UNK],[CLS],[SEP] must occupy ids 0..3");
  for (const auto& t : tokens_in_id_order) add(t);
}

Vocabulary Vocabulary::build(const std::vector<GroundingInstance>& data) {
  Vocabulary v;
  for (const auto& inst : data) {
    for (const auto& t : inst.question_tokens) v.add(lower(t));
    for (const auto& c : inst.concepts)
      for (const auto& t : c.tokens) v.add(lower(t));
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  std::string key = token.size() > 1 && token.front() == '[' ? token : lower(token);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(key, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  std::string key = token.size() > 1 && token.front() == '[' ? token : lower(token);
  auto it = ids_.find(key);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  std::string key = token.size() > 1 && token.front() == '[' ? token : lower(token);
  return ids_.count(key) > 0;
}

}  // namespace eta
