#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncio/backend.hpp"
#include "ncio/fabric.hpp"
#include "ncio/file.hpp"
#include "ncio/patterns.hpp"

namespace ncio::bench {

enum class Direction { read, write };

std::string_view to_string(Direction d);

struct PatternSpec {
  PatternId id = PatternId::dist3d;
  /// dist3d: array dims; btio: {N} (an N^3 grid); unstruc: {n_elements}.
  std::vector<std::int64_t> dims;
  std::int64_t elem_size = 0;
  int nprocs = 0;
  std::uint64_t seed = 0;
  std::vector<int> levels{0, 1, 2, 3};
  std::vector<Direction> directions{Direction::read};

  /// Desk-scale defaults for a pattern.
  static PatternSpec defaults(PatternId id);
  void validate() const;
  std::int64_t file_size() const;
  RankPattern rank_pattern(int rank) const;
};

struct BenchOptions {
  Hints hints;
  std::string backend = "mem";
  bool nolock = false;
  GroupOptions group;
  /// When set, each rank's flattened filetype is dumped here before running.
  std::ostream* trace = nullptr;
};

struct ReportRow {
  std::string pattern;
  int level = 0;
  Direction dir = Direction::read;
  bool skipped = false;
  bool verified = false;
  IoStats stats;                     // summed over ranks
  std::vector<IoStats> per_rank;
  std::int64_t max_ntimes = 0;       // level 3 only
  double seconds = 0.0;
};

/// Runs every requested (level, direction) pair on a fresh file and checks
/// the result bytes against the expected image. A mismatch throws.
std::vector<ReportRow> run_bench(const PatternSpec& spec, const BenchOptions& opts);

/// Expected content of file byte `offset` for every pattern.
std::byte image_byte(std::int64_t offset);

void print_table(std::ostream& os, const std::vector<ReportRow>& rows);
void print_json(std::ostream& os, const std::vector<ReportRow>& rows);
void print_csv(std::ostream& os, const std::vector<ReportRow>& rows);

}  // namespace ncio::bench
