#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ffad/common.hpp"
#include "ffad/ingest.hpp"

namespace fs = std::filesystem;
using namespace ffad::ingest;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("read_metrics parses rows and keeps file order") {
  auto p = write_temp("ffad_m1.csv",
                      "timestamp,cpu,mem\n"
                      "100,0.5,0.7\n"
                      "110,0.6,0.8\n"
                      "120,0.7,0.9\n");
  auto mf = read_metrics(p.string());
  REQUIRE(mf.samples.size() == 3);
  CHECK(mf.names == std::vector<std::string>{"cpu", "mem"});
  CHECK(mf.samples[0].timestamp == 100);
  CHECK(mf.samples[2].values[1] == doctest::Approx(0.9));
  CHECK(mf.bad_cells == 0);
  CHECK(mf.bad_rows == 0);
}

TEST_CASE("read_metrics rejects schema mismatches and empty files") {
  auto p = write_temp("ffad_m2.csv", "timestamp,cpu\n100,1\n");
  CHECK_THROWS_AS(read_metrics(p.string(), {"cpu", "mem"}), ffad::data_error);

  auto bad_header = write_temp("ffad_m3.csv", "time,cpu\n100,1\n");
  CHECK_THROWS_AS(read_metrics(bad_header.string()), ffad::data_error);

  auto empty = write_temp("ffad_m4.csv", "");
  CHECK_THROWS_AS(read_metrics(empty.string()), ffad::data_error);

  auto header_only = write_temp("ffad_m5.csv", "timestamp,cpu\n");
  CHECK_THROWS_AS(read_metrics(header_only.string()), ffad::data_error);
}

TEST_CASE("read_metrics records bad cells as gaps, never zeros") {
  auto p = write_temp("ffad_m6.csv",
                      "timestamp,cpu\n"
                      "100,oops\n"
                      "110,2.0\n");
  auto mf = read_metrics(p.string());
  REQUIRE(mf.samples.size() == 2);
  CHECK(std::isnan(mf.samples[0].values[0]));
  CHECK(mf.bad_cells == 1);
}

TEST_CASE("millisecond timestamps are truncated to seconds") {
  std::int64_t out = 0;
  CHECK(parse_epoch_seconds("1700000000500", out));  // ms input
  CHECK(out == 1700000000);
  CHECK(parse_epoch_seconds("123.9", out));  // sub-second precision truncated
  CHECK(out == 123);
  CHECK_FALSE(parse_epoch_seconds("not-a-time", out));
  CHECK_FALSE(parse_epoch_seconds("12x", out));
}

TEST_CASE("block_of floors into fixed blocks") {
  time_block_index idx{.t0 = 100, .dt = 10, .count = 5};
  CHECK(idx.block_of(100) == 0);
  CHECK(idx.block_of(109) == 0);
  CHECK(idx.block_of(110) == 1);   // boundary belongs to the next block
  CHECK(idx.block_of(149) == 4);
  CHECK(idx.block_of(150) == time_block_index::npos);  // past the end
  CHECK(idx.block_of(99) == time_block_index::npos);   // before t0
}

TEST_CASE("bucket conservation: every item lands in a block or is dropped") {
  time_block_index idx{.t0 = 0, .dt = 7, .count = 40};
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int64_t> ts(-50, 400);
  std::vector<raw_log_line> items;
  for (int i = 0; i < 1000; ++i) items.push_back({ts(rng), "x"});

  auto res = bucket(items, idx);
  size_t in_blocks = 0;
  for (const auto& [b, v] : res.blocks) {
    CHECK(b < idx.count);
    in_blocks += v.size();
    // brute-force recount of this block
    size_t expected = 0;
    for (const auto& item : items) {
      const std::int64_t lo = idx.t0 + static_cast<std::int64_t>(b) * idx.dt;
      if (item.timestamp >= lo && item.timestamp < lo + idx.dt) ++expected;
    }
    CHECK(v.size() == expected);
  }
  CHECK(in_blocks + res.dropped == items.size());
}

TEST_CASE("assemble averages within blocks and forward-fills gaps") {
  auto p = write_temp("ffad_m7.csv",
                      "timestamp,cpu\n"
                      "100,1.0\n"
                      "105,3.0\n"   // same block as 100 -> average 2.0
                      "120,,\n"     // 3 cells for a 2-column schema: dropped row
                      "130,5.0\n");
  // blocks 1 and 2 end up with no usable sample and are forward-filled
  auto mf = read_metrics(p.string());
  time_block_index idx{.t0 = 100, .dt = 10, .count = 4};
  auto mm = assemble_metric_matrix(mf, idx);
  CHECK(mm.values.at(0, 0) == doctest::Approx(2.0));  // mean of 1 and 3
  CHECK(mm.values.at(1, 0) == doctest::Approx(2.0));  // forward fill
  CHECK(mm.values.at(2, 0) == doctest::Approx(2.0));  // forward fill
  CHECK(mm.values.at(3, 0) == doctest::Approx(5.0));
  CHECK(mm.filled_cells == 2);
}

TEST_CASE("leading gap takes the first observed value") {
  auto p = write_temp("ffad_m8.csv",
                      "timestamp,cpu\n"
                      "120,7.0\n");
  auto mf = read_metrics(p.string());
  time_block_index idx{.t0 = 100, .dt = 10, .count = 3};
  auto mm = assemble_metric_matrix(mf, idx);
  CHECK(mm.values.at(0, 0) == doctest::Approx(7.0));
  CHECK(mm.values.at(1, 0) == doctest::Approx(7.0));
  CHECK(mm.values.at(2, 0) == doctest::Approx(7.0));
  CHECK(mm.leading_fills == 2);
}

TEST_CASE("read_logs epoch format, rejects bad lines with a count") {
  auto p = write_temp("ffad_l1.txt",
                      "1000 service started\n"
                      "oops no timestamp\n"
                      "1010 worker 3 ready\n"
                      "1020\n"          // timestamp but empty message
                      "1030   \n"       // whitespace-only message
                      "1040 shutdown\n");
  auto lf = read_logs(p.string(), "epoch");
  REQUIRE(lf.lines.size() == 3);
  CHECK(lf.rejected == 3);
  CHECK(lf.lines[0].timestamp == 1000);
  CHECK(lf.lines[0].text == "service started");
  CHECK(lf.lines[1].text == "worker 3 ready");
  CHECK(lf.lines[2].timestamp == 1040);
}

TEST_CASE("read_logs strftime format parses as UTC") {
  auto p = write_temp("ffad_l2.txt",
                      "2023-11-14 22:13:20 cache flushed\n");
  auto lf = read_logs(p.string(), "%Y-%m-%d %H:%M:%S");
  REQUIRE(lf.lines.size() == 1);
  CHECK(lf.lines[0].timestamp == 1700000000);
  CHECK(lf.lines[0].text == "cache flushed");
}

TEST_CASE("read_labels") {
  auto p = write_temp("ffad_lb1.csv", "block,label\n0,0\n5,1\n7,0\n");
  auto lf = read_labels(p.string());
  REQUIRE(lf.entries.size() == 3);
  CHECK(lf.entries[1] == std::pair<size_t, int>{5, 1});

  auto bad = write_temp("ffad_lb2.csv", "block,label\n3,2\n");
  CHECK_THROWS_AS(read_labels(bad.string()), ffad::data_error);
}

TEST_CASE("metric with no observations at all is fatal") {
  auto p = write_temp("ffad_m9.csv",
                      "timestamp,cpu,mem\n"
                      "100,1.0,nope\n");
  auto mf = read_metrics(p.string());
  CHECK(mf.bad_cells == 1);
  time_block_index idx{.t0 = 100, .dt = 10, .count = 1};
  CHECK_THROWS_AS(assemble_metric_matrix(mf, idx), ffad::data_error);
}

}  // TEST_SUITE
