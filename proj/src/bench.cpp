#include "ncio/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ncio/error.hpp"

namespace ncio::bench {

std::string_view to_string(Direction d) { return d == Direction::read ? "read" : "write"; }

PatternSpec PatternSpec::defaults(PatternId id) {
  PatternSpec s;
  s.id = id;
  switch (id) {
    case PatternId::dist3d:
      s.dims = {64, 64, 64};
      s.elem_size = 4;
      s.nprocs = 8;
      break;
    case PatternId::btio:
      s.dims = {18};
      s.elem_size = 8;
      s.nprocs = 9;  // q = 3 gives a hole/segment ratio well above 5 at N = 18
      break;
    case PatternId::unstruc:
      s.dims = {1 << 16};
      s.elem_size = 64;
      s.nprocs = 8;
      s.seed = 1;
      s.levels = {2, 3};
      break;
  }
  return s;
}

void PatternSpec::validate() const {
  if (nprocs < 1) throw Error(Errc::invalid_argument, "nprocs must be positive");
  if (elem_size < 1) throw Error(Errc::invalid_argument, "element size must be positive");
  if (dims.empty()) throw Error(Errc::invalid_argument, "no dims given");
  for (std::int64_t d : dims) {
    if (d < 1) throw Error(Errc::invalid_argument, "dims must be positive");
  }
  if (id == PatternId::btio && dims.size() != 1) {
    const bool cube = std::all_of(dims.begin(), dims.end(), [&](std::int64_t d) { return d == dims[0]; });
    if (!cube || dims.size() != 3) throw Error(Errc::invalid_argument, "btio needs a cubic grid");
  }
  if (id == PatternId::unstruc && dims.size() != 1) {
    throw Error(Errc::invalid_argument, "unstruc takes a single element count");
  }
  for (int l : levels) {
    if (l < 0 || l > 3) throw Error(Errc::invalid_argument, "levels are 0..3");
  }
}

std::int64_t PatternSpec::file_size() const {
  std::int64_t n = elem_size;
  switch (id) {
    case PatternId::dist3d:
      for (std::int64_t d : dims) n *= d;
      return n;
    case PatternId::btio:
      return n * dims[0] * dims[0] * dims[0] * kBtioComponents;
    case PatternId::unstruc:
      return n * dims[0];
  }
  return 0;
}

RankPattern PatternSpec::rank_pattern(int rank) const {
  switch (id) {
    case PatternId::dist3d: {
      const std::vector<std::int64_t> grid = balanced_grid(nprocs, static_cast<int>(dims.size()));
      return gen_dist3d(dims, grid, rank, elem_size);
    }
    case PatternId::btio:
      return gen_btio(dims[0], nprocs, rank, elem_size);
    case PatternId::unstruc:
      return gen_unstruc(dims[0], nprocs, rank, elem_size, seed);
  }
  throw Error(Errc::invalid_argument, "unknown pattern");
}

std::byte image_byte(std::int64_t offset) {
  auto x = static_cast<std::uint64_t>(offset) * 0x9E3779B97F4A7C15ull;
  return static_cast<std::byte>(x >> 56);
}

namespace {

std::vector<std::byte> stream_for(const FlatRepr& flat) {
  std::vector<std::byte> out;
  out.reserve(static_cast<std::size_t>(flat.size));
  for (const Segment& s : flat.segments) {
    for (std::int64_t o = s.offset; o < s.end(); ++o) out.push_back(image_byte(o));
  }
  return out;
}

bool feasible(PatternId id, int level) { return !(id == PatternId::unstruc && level < 2); }

struct RankOutcome {
  IoStats stats;
  bool ok = false;
  std::int64_t max_ntimes = 0;
};

RankOutcome run_rank(Communicator& comm, const PatternSpec& spec, const BenchOptions& opts,
                     std::shared_ptr<StorageFile> storage, int level, Direction dir) {
  const RankPattern pat = spec.rank_pattern(comm.rank());
  const FlatRepr& flat = pat.filetype.flat();
  const std::vector<std::byte> expected = stream_for(flat);
  std::vector<std::byte> buf = dir == Direction::read ? std::vector<std::byte>(expected.size()) : expected;

  File f = File::open(comm, std::move(storage), opts.hints);
  RankOutcome out;
  auto issue = [&](bool coll, std::int64_t at, std::span<std::byte> span) {
    if (dir == Direction::read) {
      const MutableBuffer m(span);
      out.stats += coll ? f.read_coll(at, m) : f.read_indep(at, m);
    } else {
      const ConstBuffer c{std::span<const std::byte>(span)};
      out.stats += coll ? f.write_coll(at, c) : f.write_indep(at, c);
    }
  };

  if (level < 2) {
    const bool coll = level == 1;
    // Collective calls need the same count on every rank.
    const std::int64_t calls = coll ? comm.global_max(static_cast<std::int64_t>(pat.rows.size()))
                                    : static_cast<std::int64_t>(pat.rows.size());
    std::size_t pos = 0;
    for (std::int64_t k = 0; k < calls; ++k) {
      if (k < static_cast<std::int64_t>(pat.rows.size())) {
        const Segment& r = pat.rows[static_cast<std::size_t>(k)];
        issue(coll, r.offset, std::span(buf).subspan(pos, static_cast<std::size_t>(r.length)));
        pos += static_cast<std::size_t>(r.length);
      } else {
        issue(coll, 0, {});
      }
    }
  } else {
    f.set_view(0, pat.filetype);
    issue(level == 3, 0, buf);
    if (level == 3) out.max_ntimes = f.last_collective().max_ntimes;
  }
  out.ok = dir == Direction::write || buf == expected;
  return out;
}

}  // namespace

std::vector<ReportRow> run_bench(const PatternSpec& spec, const BenchOptions& opts) {
  spec.validate();
  if (opts.trace) {
    for (int r = 0; r < spec.nprocs; ++r) {
      *opts.trace << "# rank " << r << "\n";
      dump(*opts.trace, spec.rank_pattern(r).filetype.flat());
    }
  }

  std::vector<ReportRow> rows;
  for (Direction dir : spec.directions) {
    for (int level : spec.levels) {
      ReportRow row;
      row.pattern = std::string(to_string(spec.id));
      row.level = level;
      row.dir = dir;
      if (!feasible(spec.id, level)) {
        row.skipped = true;
        rows.push_back(std::move(row));
        continue;
      }

      auto storage = StorageFile::open(opts.backend, StorageFile::Options{!opts.nolock});
      if (dir == Direction::read) {
        std::vector<std::byte> image(static_cast<std::size_t>(spec.file_size()));
        for (std::size_t o = 0; o < image.size(); ++o) image[o] = image_byte(static_cast<std::int64_t>(o));
        storage->write_contig(0, image);
      }

      const auto t0 = std::chrono::steady_clock::now();
      std::vector<RankOutcome> outs = run_collective(
          spec.nprocs, [&](Communicator& c) { return run_rank(c, spec, opts, storage, level, dir); }, opts.group);
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      bool ok = true;
      for (const RankOutcome& o : outs) {
        row.per_rank.push_back(o.stats);
        row.stats += o.stats;
        row.max_ntimes = std::max(row.max_ntimes, o.max_ntimes);
        ok = ok && o.ok;
      }
      if (dir == Direction::write) {
        std::vector<std::byte> got(static_cast<std::size_t>(spec.file_size()));
        const ReadResult rr = storage->read_contig(0, got);
        ok = ok && rr.missing == 0 && storage->size() == spec.file_size();
        for (std::size_t o = 0; ok && o < got.size(); ++o) ok = got[o] == image_byte(static_cast<std::int64_t>(o));
      }
      if (!ok) {
        throw Error(Errc::io_error, row.pattern + " level " + std::to_string(level) + " " +
                                        std::string(to_string(dir)) + ": content differs from the expected image");
      }
      row.verified = true;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

const char* const kStatNames[] = {"read_calls",   "write_calls",          "bytes_read",
                                  "bytes_written", "useful_bytes_read",    "useful_bytes_written",
                                  "lock_acquisitions", "msgs_sent",        "msg_bytes"};

std::vector<std::int64_t> stat_values(const IoStats& s) {
  return {s.read_calls,          s.write_calls,          s.bytes_read,
          s.bytes_written,       s.useful_bytes_read,    s.useful_bytes_written,
          s.lock_acquisitions,   s.msgs_sent,            s.msg_bytes};
}

std::string fmt_seconds(double s) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6f", s);
  return b;
}

}  // namespace

void print_table(std::ostream& os, const std::vector<ReportRow>& rows) {
  std::vector<std::string> header{"pattern", "level", "dir", "status"};
  for (const char* n : kStatNames) header.emplace_back(n);
  header.emplace_back("seconds");

  std::vector<std::vector<std::string>> cells{header};
  for (const ReportRow& r : rows) {
    std::vector<std::string> line{r.pattern, std::to_string(r.level), std::string(to_string(r.dir)),
                                  r.skipped ? "skipped" : "ok"};
    for (std::int64_t v : stat_values(r.stats)) line.push_back(r.skipped ? "-" : std::to_string(v));
    line.push_back(r.skipped ? "-" : fmt_seconds(r.seconds));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) os << "  ";
      if (c < 4) {
        os << std::left << std::setw(static_cast<int>(width[c])) << line[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << line[c];
      }
    }
    os << std::left << "\n";
  }
}

void print_json(std::ostream& os, const std::vector<ReportRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ReportRow& r : rows) {
    nlohmann::ordered_json j;
    j["pattern"] = r.pattern;
    j["level"] = r.level;
    j["dir"] = to_string(r.dir);
    j["status"] = r.skipped ? "skipped" : "ok";
    if (!r.skipped) {
      j["stats"] = nlohmann::ordered_json::parse(to_json_string(r.stats));
      j["max_ntimes"] = r.max_ntimes;
      j["seconds"] = r.seconds;
    }
    arr.push_back(std::move(j));
  }
  os << arr.dump(2) << "\n";
}

void print_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << "pattern,level,dir,status";
  for (const char* n : kStatNames) os << ',' << n;
  os << ",seconds\n";
  for (const ReportRow& r : rows) {
    os << r.pattern << ',' << r.level << ',' << to_string(r.dir) << ',' << (r.skipped ? "skipped" : "ok");
    for (std::int64_t v : stat_values(r.stats)) {
      os << ',';
      if (!r.skipped) os << v;
    }
    os << ',';
    if (!r.skipped) os << fmt_seconds(r.seconds);
    os << "\n";
  }
}

}  // namespace ncio::bench
