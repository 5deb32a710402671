#include "ffad/template_miner.hpp"

#include <cctype>
#include <sstream>

#include <json.hpp>

#include "ffad/common.hpp"

namespace ffad::miner {

namespace {

constexpr const char* k_wild = "<*>";

bool has_digit(const std::string& s) {
  for (char c : s)
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
  return false;
}

bool is_hex_char(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f') ||
         (c >= 'A' && c <= 'F');
}

bool match_ipv4(const std::string& s) {
  // a.b.c.d with octets 0..255, optional :port
  size_t i = 0;
  int octets = 0;
  while (octets < 4) {
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    int v = 0;
    size_t digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) && digits < 4) {
      v = v * 10 + (s[i] - '0');
      ++i;
      ++digits;
    }
    if (digits == 0 || digits > 3 || v > 255) return false;
    ++octets;
    if (octets < 4) {
      if (i >= s.size() || s[i] != '.') return false;
      ++i;
    }
  }
  if (i == s.size()) return true;
  if (s[i] != ':') return false;
  ++i;
  if (i == s.size()) return false;
  while (i < s.size()) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    ++i;
  }
  return true;
}

bool match_uuid(const std::string& s) {
  // 8-4-4-4-12 hex groups
  static constexpr size_t lens[] = {8, 4, 4, 4, 12};
  size_t i = 0;
  for (size_t g = 0; g < 5; ++g) {
    for (size_t k = 0; k < lens[g]; ++k, ++i)
      if (i >= s.size() || !is_hex_char(s[i])) return false;
    if (g < 4) {
      if (i >= s.size() || s[i] != '-') return false;
      ++i;
    }
  }
  return i == s.size();
}

bool match_hex_id(const std::string& s) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    for (size_t i = 2; i < s.size(); ++i)
      if (!is_hex_char(s[i])) return false;
    return true;
  }
  // bare hex ids: long enough not to be prose, and carrying a digit
  if (s.size() < 8) return false;
  bool digit = false;
  for (char c : s) {
    if (!is_hex_char(c)) return false;
    digit |= std::isdigit(static_cast<unsigned char>(c)) != 0;
  }
  return digit;
}

}  // namespace

std::vector<mask_rule> default_mask_rules() {
  return {
      {"ipv4", rule_kind::ipv4},
      {"uuid", rule_kind::uuid},
      {"hex-id", rule_kind::hex_id},
      {"number", rule_kind::digit_bearing},
  };
}

bool rule_matches(rule_kind kind, const std::string& token) {
  switch (kind) {
    case rule_kind::ipv4:
      return match_ipv4(token);
    case rule_kind::uuid:
      return match_uuid(token);
    case rule_kind::hex_id:
      return match_hex_id(token);
    case rule_kind::digit_bearing:
      return has_digit(token);
  }
  return false;
}

std::vector<std::string> mask_tokens(const std::string& text,
                                     const std::vector<mask_rule>& rules) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    for (const auto& rule : rules) {
      if (rule_matches(rule.kind, tok)) {
        tok = k_wild;
        break;
      }
    }
    out.push_back(std::move(tok));
    tok.clear();
  }
  return out;
}

template_miner::template_miner(miner_config cfg) : cfg_(std::move(cfg)) {
  if (cfg_.depth < 3) throw config_error("miner depth must be >= 3");
  if (!(cfg_.sim_threshold > 0.0 && cfg_.sim_threshold <= 1.0))
    throw config_error("miner sim_threshold must be in (0, 1]");
  if (cfg_.max_children == 0) throw config_error("miner max_children must be positive");
}

template_miner::tree_node& template_miner::descend_or_create(
    const std::vector<std::string>& tokens) {
  tree_node* node = &by_length_[tokens.size()];
  const size_t levels = std::min(cfg_.depth - 2, tokens.size());
  for (size_t i = 0; i < levels; ++i) {
    const std::string& tok = tokens[i];
    // digit-bearing tokens share the wildcard branch; so does overflow
    std::string key = has_digit(tok) ? k_wild : tok;
    if (key != k_wild && node->children.find(key) == node->children.end() &&
        node->children.size() >= cfg_.max_children) {
      key = k_wild;
    }
    node = &node->children[key];
  }
  return *node;
}

const template_miner::tree_node* template_miner::find_leaf(
    const std::vector<std::string>& tokens) const {
  auto it = by_length_.find(tokens.size());
  if (it == by_length_.end()) return nullptr;
  const tree_node* node = &it->second;
  const size_t levels = std::min(cfg_.depth - 2, tokens.size());
  for (size_t i = 0; i < levels; ++i) {
    const std::string& tok = tokens[i];
    const std::string key = has_digit(tok) ? k_wild : tok;
    auto child = node->children.find(key);
    if (child == node->children.end() && key != k_wild)
      child = node->children.find(k_wild);  // overflow branch
    if (child == node->children.end()) return nullptr;
    node = &child->second;
  }
  return node;
}

std::pair<int, double> template_miner::best_match(
    const std::vector<int>& candidates, const std::vector<std::string>& tokens) const {
  int best_id = -1;
  double best_sim = -1.0;
  for (int id : candidates) {
    const auto& tmpl = templates_[id].tokens;
    if (tmpl.size() != tokens.size()) continue;  // leaves group by length already
    size_t equal = 0;
    for (size_t i = 0; i < tokens.size(); ++i)
      if (tmpl[i] == tokens[i]) ++equal;
    const double sim = static_cast<double>(equal) / static_cast<double>(tokens.size());
    if (sim > best_sim) {  // strict: ties keep the lowest id seen first
      best_sim = sim;
      best_id = id;
    }
  }
  return {best_id, best_sim};
}

int template_miner::match_or_create(const std::string& text) {
  auto tokens = mask_tokens(text, cfg_.rules);
  if (tokens.empty()) throw data_error("cannot mine an empty log message");
  tree_node& leaf = descend_or_create(tokens);
  auto [best_id, best_sim] = best_match(leaf.templates, tokens);
  if (best_id >= 0 && best_sim >= cfg_.sim_threshold) {
    auto& tmpl = templates_[best_id];
    for (size_t i = 0; i < tokens.size(); ++i)
      if (tmpl.tokens[i] != tokens[i]) tmpl.tokens[i] = k_wild;
    ++tmpl.count;
    return best_id;
  }
  log_template t;
  t.id = static_cast<int>(templates_.size());
  t.tokens = std::move(tokens);
  t.count = 1;
  templates_.push_back(std::move(t));
  leaf.templates.push_back(templates_.back().id);
  return templates_.back().id;
}

int template_miner::match_frozen(const std::string& text) const {
  auto tokens = mask_tokens(text, cfg_.rules);
  if (tokens.empty()) return -1;
  const tree_node* leaf = find_leaf(tokens);
  if (!leaf) return -1;
  auto [best_id, best_sim] = best_match(leaf->templates, tokens);
  if (best_id >= 0 && best_sim >= cfg_.sim_threshold) return best_id;
  return -1;
}

std::string template_miner::to_jsonl() const {
  std::string out;
  for (const auto& t : templates_) {
    nlohmann::json j;
    j["id"] = t.id;
    j["tokens"] = t.tokens;
    j["count"] = t.count;
    out += j.dump();
    out += '\n';
  }
  return out;
}

template_miner template_miner::from_jsonl(const std::string& text, miner_config cfg) {
  template_miner m(std::move(cfg));
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("tokens"))
      throw data_error("malformed template line: " + line);
    log_template t;
    t.id = j["id"].get<int>();
    t.tokens = j["tokens"].get<std::vector<std::string>>();
    t.count = j.value("count", size_t{0});
    if (t.id != static_cast<int>(m.templates_.size()))
      throw data_error("template ids must be dense and ordered");
    m.templates_.push_back(t);
    m.descend_or_create(t.tokens).templates.push_back(t.id);
  }
  return m;
}

parse_result parse_corpus(const std::vector<std::string>& lines, const miner_config& cfg) {
  template_miner m(cfg);
  parse_result out;
  out.line_ids.reserve(lines.size());
  for (const auto& line : lines) out.line_ids.push_back(m.match_or_create(line));
  out.templates = m.templates();
  return out;
}

}  // namespace ffad::miner
