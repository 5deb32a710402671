#pragma once

#include <map>
#include <string>
#include <vector>

// Drain-style log template mining: a fixed-depth parse tree splits first on
// token count, then on the first depth-2 tokens, and leaves hold template
// groups matched by positional similarity. Parameters (numbers, addresses,
// ids) are masked to "<*>" before the tree ever sees a token, so stable
// ids come out of noisy text deterministically.

namespace ffad::miner {

enum class rule_kind { ipv4, uuid, hex_id, digit_bearing };

struct mask_rule {
  std::string name;
  rule_kind kind;
};

// Order matters: first matching rule wins (all rewrite the token to <*>).
std::vector<mask_rule> default_mask_rules();

bool rule_matches(rule_kind kind, const std::string& token);

// whitespace-split then masked
std::vector<std::string> mask_tokens(const std::string& text,
                                     const std::vector<mask_rule>& rules);

struct log_template {
  int id = 0;
  std::vector<std::string> tokens;  // may contain <*>
  size_t count = 0;                 // lines merged into this template
};

struct miner_config {
  size_t depth = 4;            // tree depth; depth-2 token levels below the length split
  double sim_threshold = 0.4;  // st: minimum simSeq to join a template
  size_t max_children = 100;   // per internal node; overflow routes to <*>
  std::vector<mask_rule> rules = default_mask_rules();
};

class template_miner {
 public:
  template_miner() : template_miner(miner_config{}) {}
  explicit template_miner(miner_config cfg);

  // Mask, descend, then merge into the most similar leaf template
  // (simSeq >= st, ties to the lowest id) or create a new one.
  int match_or_create(const std::string& text);

  // Read-only matching once ids are frozen; returns -1 for unseen shapes.
  int match_frozen(const std::string& text) const;

  const std::vector<log_template>& templates() const { return templates_; }
  const miner_config& config() const { return cfg_; }

  std::string to_jsonl() const;
  static template_miner from_jsonl(const std::string& text, miner_config cfg = {});

 private:
  struct tree_node {
    std::map<std::string, tree_node> children;
    std::vector<int> templates;  // leaf payload
  };

  const tree_node* find_leaf(const std::vector<std::string>& tokens) const;
  tree_node& descend_or_create(const std::vector<std::string>& tokens);
  // best (id, simSeq) among candidates of equal length; ties keep lowest id
  std::pair<int, double> best_match(const std::vector<int>& candidates,
                                    const std::vector<std::string>& tokens) const;

  miner_config cfg_;
  std::map<size_t, tree_node> by_length_;
  std::vector<log_template> templates_;
};

struct parse_result {
  std::vector<log_template> templates;
  std::vector<int> line_ids;  // template id per input line, input order
};

parse_result parse_corpus(const std::vector<std::string>& lines,
                          const miner_config& cfg = {});

}  // namespace ffad::miner
