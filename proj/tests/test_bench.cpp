#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gen.hpp"
#include "ncio/bench.hpp"
#include "ncio/error.hpp"
#include "oracles.hpp"

using namespace ncio;
using namespace ncio::bench;
using Segs = std::vector<Segment>;

namespace {

std::vector<Segs> all_ranks(const PatternSpec& spec) {
  std::vector<Segs> out;
  for (int r = 0; r < spec.nprocs; ++r) out.push_back(spec.rank_pattern(r).filetype.flat().segments);
  return out;
}

PatternSpec small(PatternId id, std::vector<std::int64_t> dims, int nprocs, std::int64_t elem, std::uint64_t seed = 0) {
  PatternSpec s = PatternSpec::defaults(id);
  s.dims = std::move(dims);
  s.nprocs = nprocs;
  s.elem_size = elem;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("dist3d examples") {
  const std::vector<std::int64_t> d{4, 4}, g{2, 2}, one{1, 1};
  CHECK(gen_dist3d(d, g, 0, 1).filetype.flat().segments == Segs{{0, 2}, {4, 2}});
  CHECK(gen_dist3d(d, one, 0, 1).filetype.flat().segments == Segs{{0, 16}});
  CHECK_THROWS_AS(gen_dist3d(d, std::vector<std::int64_t>{2}, 0, 1), Error);
}

TEST_CASE("balanced grids") {
  CHECK(balanced_grid(8, 3) == std::vector<std::int64_t>{2, 2, 2});
  CHECK(balanced_grid(12, 3) == std::vector<std::int64_t>{3, 2, 2});
  CHECK(balanced_grid(1, 3) == std::vector<std::int64_t>{1, 1, 1});
  CHECK(balanced_grid(7, 2) == std::vector<std::int64_t>{7, 1});
}

TEST_CASE("every generator covers the file exactly once") {
  gen::Rng rng(31);
  for (int iter = 0; iter < 40; ++iter) {
    const int p = static_cast<int>(gen::uniform(rng, 1, 8));
    std::vector<std::int64_t> dims{gen::uniform(rng, 2, 9), gen::uniform(rng, 2, 9), gen::uniform(rng, 2, 9)};
    const auto grid = balanced_grid(p, 3);
    bool fits = true;
    for (int d = 0; d < 3; ++d) fits = fits && dims[d] >= grid[d];
    if (!fits) continue;
    const auto spec = small(PatternId::dist3d, dims, p, gen::uniform(rng, 1, 4));
    CHECK(oracle::covers_exactly_once(all_ranks(spec), spec.file_size()));
  }
  for (int q = 1; q <= 4; ++q) {
    for (std::int64_t n : {std::int64_t{q}, std::int64_t{7}, std::int64_t{10}}) {
      if (n < q) continue;
      const auto spec = small(PatternId::btio, {n}, q * q, 2);
      CHECK(oracle::covers_exactly_once(all_ranks(spec), spec.file_size()));
    }
  }
  for (int p : {1, 2, 4, 8}) {
    for (std::uint64_t seed : {0, 1, 99}) {
      const auto spec = small(PatternId::unstruc, {256}, p, 8, seed);
      CHECK(oracle::covers_exactly_once(all_ranks(spec), spec.file_size()));
    }
  }
}

TEST_CASE("level-0 rows are the filetype bytes, unmerged") {
  for (PatternId id : {PatternId::dist3d, PatternId::btio, PatternId::unstruc}) {
    PatternSpec spec = PatternSpec::defaults(id);
    if (id == PatternId::unstruc) spec.dims = {4096};
    for (int r = 0; r < spec.nprocs; ++r) {
      const RankPattern p = spec.rank_pattern(r);
      Segs merged;
      for (const Segment& s : p.rows) append_merged(merged, s);
      CHECK(merged == p.filetype.flat().segments);
    }
  }
  // 64^3 over 2x2x2: 32 x 32 rows per rank
  const PatternSpec d = PatternSpec::defaults(PatternId::dist3d);
  CHECK(d.rank_pattern(5).rows.size() == 1024);
}

TEST_CASE("btio geometry") {
  const auto one = gen_btio(6, 1, 0, 8);
  CHECK(one.filetype.flat().segments == Segs{{0, 6 * 6 * 6 * 5 * 8}});
  CHECK(one.filetype.node().children.size() == 1);
  const auto four = gen_btio(6, 4, 3, 8);
  CHECK(four.filetype.node().children.size() == 2);
  CHECK_THROWS_AS(gen_btio(6, 3, 0, 8), Error);
  CHECK_THROWS_AS(gen_btio(6, 4, 4, 8), Error);

  // 5 x 18^3 doubles over 9 ranks: holes average more than 5x the segments
  const PatternSpec spec = PatternSpec::defaults(PatternId::btio);
  double worst = 1e300;
  for (int r = 0; r < spec.nprocs; ++r) {
    worst = std::min(worst, hole_segment_ratio(spec.rank_pattern(r).filetype.flat().segments));
  }
  CHECK(worst > 5.0);
}

TEST_CASE("unstruc mapping") {
  const auto ident = gen_unstruc(64, 4, 2, 64, 0);
  CHECK(ident.filetype.flat().segments == Segs{{32 * 64, 16 * 64}});
  CHECK(PatternSpec::defaults(PatternId::unstruc).elem_size == 64);
  CHECK(unstruc_permutation(1000, 7) == unstruc_permutation(1000, 7));
  CHECK(unstruc_permutation(1000, 7) != unstruc_permutation(1000, 8));
  CHECK_THROWS_AS(gen_unstruc(64, 3, 0, 64, 1), Error);
  const auto a = gen_unstruc(512, 2, 0, 4, 5).filetype.flat().segments;
  const auto b = gen_unstruc(512, 2, 1, 4, 5).filetype.flat().segments;
  CHECK(oracle::covers_exactly_once({a, b}, 2048));
  CHECK(a.size() > 1);
}

TEST_CASE("hole ratio") {
  CHECK(hole_segment_ratio(Segs{{0, 10}}) == 0.0);
  CHECK(hole_segment_ratio(Segs{{0, 2}, {12, 2}, {24, 2}}) == doctest::Approx(5.0));
}

TEST_CASE("infeasible levels are skipped, not failed") {
  PatternSpec spec = small(PatternId::unstruc, {1024}, 4, 16, 3);
  spec.levels = {0, 1, 2, 3};
  const auto rows = run_bench(spec, {});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].skipped);
  CHECK(rows[1].skipped);
  CHECK(rows[2].verified);
  CHECK(rows[3].verified);
}

TEST_CASE("reports are deterministic apart from seconds") {
  PatternSpec spec = small(PatternId::dist3d, {16, 16, 16}, 8, 4);
  spec.directions = {Direction::read, Direction::write};
  BenchOptions opts;
  opts.group.schedule = Schedule::deterministic;
  opts.group.seed = 4;
  opts.hints.set("cb_buffer_size", "2048");
  const auto a = run_bench(spec, opts);
  const auto b = run_bench(spec, opts);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].stats == b[i].stats);
    CHECK(a[i].per_rank == b[i].per_rank);
  }
}

TEST_CASE("dist3d read calls fall with level") {
  PatternSpec spec = small(PatternId::dist3d, {32, 32, 32}, 8, 4);
  spec.levels = {0, 2, 3};
  const auto rows = run_bench(spec, {});
  CHECK(rows[2].stats.read_calls <= rows[1].stats.read_calls);
  CHECK(rows[1].stats.read_calls <= rows[0].stats.read_calls);
}

TEST_CASE("output formats") {
  PatternSpec spec = small(PatternId::unstruc, {256}, 2, 8, 1);
  const auto rows = run_bench(spec, {});
  std::ostringstream js, csv, table;
  print_json(js, rows);
  print_csv(csv, rows);
  print_table(table, rows);
  const auto j = nlohmann::json::parse(js.str());
  REQUIRE(j.is_array());
  CHECK(j.size() == rows.size());
  CHECK(j[0]["pattern"] == "unstruc");
  CHECK(j[0]["stats"].size() == 9);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header.rfind("pattern,level,dir,status,read_calls", 0) == 0);
  CHECK(table.str().find("unstruc") != std::string::npos);
}

TEST_CASE("trace dumps per-rank segments") {
  PatternSpec spec = small(PatternId::dist3d, {4, 4}, 4, 1);
  spec.levels = {2};
  std::ostringstream os;
  BenchOptions opts;
  opts.trace = &os;
  run_bench(spec, opts);
  CHECK(os.str().find("# rank 0\n0 2\n4 2\n") != std::string::npos);
}

TEST_CASE("bad specs") {
  PatternSpec s = PatternSpec::defaults(PatternId::btio);
  s.nprocs = 8;
  CHECK_THROWS_AS(run_bench(s, {}), Error);
  s = PatternSpec::defaults(PatternId::dist3d);
  s.levels = {4};
  CHECK_THROWS_AS(run_bench(s, {}), Error);
  CHECK_THROWS_AS(parse_pattern("astro"), Error);
}
