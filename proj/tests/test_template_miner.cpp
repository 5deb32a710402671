#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ffad/common.hpp"
#include "ffad/ingest.hpp"
#include "ffad/template_miner.hpp"

using namespace ffad::miner;

namespace {

std::vector<std::string> fixture_lines() {
  auto lf = ffad::ingest::read_logs(std::string(FFAD_FIXTURE_DIR) + "/logs_20.txt",
                                    "epoch");
  std::vector<std::string> lines;
  for (const auto& l : lf.lines) lines.push_back(l.text);
  return lines;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("miner") {

TEST_CASE("mask rules rewrite parameters to wildcards") {
  auto rules = default_mask_rules();
  auto toks = mask_tokens("Connected to 10.0.0.1 port 8080", rules);
  CHECK(toks == std::vector<std::string>{"Connected", "to", "<*>", "port", "<*>"});

  CHECK(rule_matches(rule_kind::ipv4, "10.0.0.1"));
  CHECK(rule_matches(rule_kind::ipv4, "192.168.1.3:8080"));
  CHECK_FALSE(rule_matches(rule_kind::ipv4, "999.0.0.1"));
  CHECK_FALSE(rule_matches(rule_kind::ipv4, "10.0.0"));
  CHECK(rule_matches(rule_kind::uuid, "123e4567-e89b-12d3-a456-426614174000"));
  CHECK_FALSE(rule_matches(rule_kind::uuid, "123e4567-e89b-12d3-a456"));
  CHECK(rule_matches(rule_kind::hex_id, "0xdeadbeef"));
  CHECK(rule_matches(rule_kind::hex_id, "a3f9c2e814"));
  CHECK_FALSE(rule_matches(rule_kind::hex_id, "deadbeef"));  // no digit: could be prose
  CHECK(rule_matches(rule_kind::digit_bearing, "worker7"));
  CHECK_FALSE(rule_matches(rule_kind::digit_bearing, "worker"));
}

TEST_CASE("identical masked lines share one template") {
  template_miner m;
  int a = m.match_or_create("Connection failed to 10.0.0.1");
  int b = m.match_or_create("Connection failed to 10.0.0.2");
  CHECK(a == b);
  REQUIRE(m.templates().size() == 1);
  CHECK(m.templates()[0].count == 2);
  CHECK(m.templates()[0].tokens ==
        std::vector<std::string>{"Connection", "failed", "to", "<*>"});
}

TEST_CASE("merge wildcards differing positions") {
  template_miner m;
  int a = m.match_or_create("Accepted password for alice");
  int b = m.match_or_create("Accepted password for bob");  // simSeq 3/4
  CHECK(a == b);
  CHECK(m.templates()[a].tokens ==
        std::vector<std::string>{"Accepted", "password", "for", "<*>"});
}

TEST_CASE("below-threshold similarity creates a new template") {
  template_miner m;  // st = 0.4
  int a = m.match_or_create("user login failed for account alice");
  int b = m.match_or_create("user login session expired token refresh");
  // same length and path, simSeq 2/6 = 0.33 < 0.4
  CHECK(a != b);
  CHECK(m.templates().size() == 2);
}

TEST_CASE("20-line fixture reproduces the hand-derived template set") {
  auto lines = fixture_lines();
  REQUIRE(lines.size() == 20);
  auto res = parse_corpus(lines);

  auto expected_text = slurp(std::string(FFAD_FIXTURE_DIR) + "/logs_20_expected.jsonl");
  std::vector<log_template> expected;
  std::istringstream ss(expected_text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    expected.push_back({j["id"].get<int>(), j["tokens"].get<std::vector<std::string>>(),
                        j["count"].get<size_t>()});
  }

  REQUIRE(res.templates.size() == expected.size());
  for (size_t i = 0; i < expected.size(); ++i) {
    CHECK(res.templates[i].id == expected[i].id);
    CHECK(res.templates[i].tokens == expected[i].tokens);
    CHECK(res.templates[i].count == expected[i].count);
  }

  // completeness: every line consumed exactly once
  size_t total = 0;
  for (const auto& t : res.templates) total += t.count;
  CHECK(total == lines.size());
}

TEST_CASE("parsing is deterministic") {
  auto lines = fixture_lines();
  auto a = parse_corpus(lines);
  auto b = parse_corpus(lines);
  CHECK(a.line_ids == b.line_ids);
  REQUIRE(a.templates.size() == b.templates.size());
  for (size_t i = 0; i < a.templates.size(); ++i)
    CHECK(a.templates[i].tokens == b.templates[i].tokens);
}

TEST_CASE("wildcard positions only grow") {
  template_miner m;
  m.match_or_create("job 12 finished in 300 ms");
  auto before = m.templates()[0].tokens;
  m.match_or_create("job 13 finished in 250 ms");
  m.match_or_create("job 14 finished in 910 ms");
  const auto& after = m.templates()[0].tokens;
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i)
    if (before[i] == "<*>") CHECK(after[i] == "<*>");
}

TEST_CASE("max_children overflow routes to the wildcard branch") {
  miner_config cfg;
  cfg.max_children = 1;
  template_miner m(cfg);
  int a = m.match_or_create("alpha start now");
  int b = m.match_or_create("beta start now");  // level-1 overflow -> <*> branch
  CHECK(a != b);  // separate leaves, no merge
  CHECK(m.templates().size() == 2);
  // frozen matching must route through the same overflow path
  CHECK(m.match_frozen("alpha start now") == a);
  CHECK(m.match_frozen("beta start now") == b);
  CHECK(m.match_frozen("gamma start now") == b);  // lands in the wildcard branch
}

TEST_CASE("frozen matching never mutates the table") {
  auto lines = fixture_lines();
  template_miner m;
  for (const auto& l : lines) m.match_or_create(l);
  const auto counts_before = m.templates();

  CHECK(m.match_frozen("Accepted password for dave") == 1);
  CHECK(m.match_frozen("Worker 99 heartbeat ok") == 4);
  CHECK(m.match_frozen("totally novel message shape here") == -1);
  CHECK(m.match_frozen("Reboot sequence initiated") == -1);  // unseen length-3 path

  REQUIRE(m.templates().size() == counts_before.size());
  for (size_t i = 0; i < counts_before.size(); ++i)
    CHECK(m.templates()[i].count == counts_before[i].count);
}

TEST_CASE("jsonl round trip preserves templates and matching") {
  auto lines = fixture_lines();
  template_miner m;
  for (const auto& l : lines) m.match_or_create(l);

  auto text = m.to_jsonl();
  auto m2 = template_miner::from_jsonl(text);
  REQUIRE(m2.templates().size() == m.templates().size());
  for (size_t i = 0; i < m.templates().size(); ++i) {
    CHECK(m2.templates()[i].tokens == m.templates()[i].tokens);
    CHECK(m2.templates()[i].count == m.templates()[i].count);
  }
  for (const auto& l : lines) CHECK(m2.match_frozen(l) == m.match_frozen(l));
}

TEST_CASE("empty message is rejected") {
  template_miner m;
  CHECK_THROWS_AS(m.match_or_create("   "), ffad::data_error);
}

}  // TEST_SUITE
