// bench: run the dist3d / btio / unstruc access patterns at levels 0-3 and
// report I/O counters.

#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncio/bench.hpp"
#include "ncio/error.hpp"

namespace {

std::vector<std::int64_t> parse_dims(const std::string& text) {
  std::vector<std::int64_t> dims;
  std::size_t at = 0;
  while (at <= text.size()) {
    const std::size_t x = std::min(text.find('x', at), text.size());
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(text.data() + at, text.data() + x, v);
    if (ec != std::errc() || p != text.data() + x || v < 1) {
      throw ncio::Error(ncio::Errc::invalid_argument, "bad --dims '" + text + "'");
    }
    dims.push_back(v);
    at = x + 1;
  }
  return dims;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noncontiguous I/O access-pattern benchmark"};

  std::string pattern = "dist3d";
  int nprocs = 0;
  std::vector<int> levels;
  std::string dir = "read";
  std::int64_t elem_size = 0;
  std::string dims;
  std::uint64_t seed = 1;
  std::vector<std::string> hints;
  std::string backend = "mem";
  bool nolock = false;
  bool json = false;
  bool csv = false;
  bool trace = false;
  bool deterministic = false;

  app.add_option("--pattern", pattern, "dist3d, btio or unstruc")
      ->check(CLI::IsMember({"dist3d", "btio", "unstruc"}));
  app.add_option("--nprocs", nprocs, "Rank count (pattern default if omitted)");
  app.add_option("--levels", levels, "Comma-separated levels 0..3")->delimiter(',');
  app.add_option("--dir", dir, "read, write or both")->check(CLI::IsMember({"read", "write", "both"}));
  app.add_option("--elem-size", elem_size, "Element size in bytes");
  app.add_option("--dims", dims, "Global dims AxBxC (btio: N, unstruc: element count)");
  app.add_option("--seed", seed, "Permutation seed for unstruc (0 = identity)");
  app.add_option("--hint", hints, "key=value, repeatable");
  app.add_option("--backend", backend, "mem or file:PATH");
  app.add_flag("--nolock", nolock, "Backend without byte-range locks");
  app.add_flag("--deterministic", deterministic, "Run ranks one at a time in seeded order");
  auto* json_flag = app.add_flag("--json", json, "JSON array output");
  app.add_flag("--csv", csv, "CSV output")->excludes(json_flag);
  app.add_flag("--trace", trace, "Dump each rank's flattened filetype to stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    const ncio::bench::PatternId id = ncio::bench::parse_pattern(pattern);
    ncio::bench::PatternSpec spec = ncio::bench::PatternSpec::defaults(id);
    if (nprocs > 0) spec.nprocs = nprocs;
    if (!levels.empty()) spec.levels = levels;
    if (elem_size > 0) spec.elem_size = elem_size;
    if (!dims.empty()) spec.dims = parse_dims(dims);
    if (id == ncio::bench::PatternId::unstruc) spec.seed = seed;
    if (dir == "write") {
      spec.directions = {ncio::bench::Direction::write};
    } else if (dir == "both") {
      spec.directions = {ncio::bench::Direction::read, ncio::bench::Direction::write};
    }

    ncio::bench::BenchOptions opts;
    for (const std::string& h : hints) {
      const auto eq = h.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "bench: --hint expects key=value, got '" << h << "'\n";
        return 2;
      }
      opts.hints.set(h.substr(0, eq), h.substr(eq + 1));
    }
    opts.backend = backend;
    opts.nolock = nolock;
    if (deterministic) {
      opts.group.schedule = ncio::Schedule::deterministic;
      opts.group.seed = seed;
    }
    if (trace) opts.trace = &std::cerr;

    const auto rows = ncio::bench::run_bench(spec, opts);
    if (json) {
      ncio::bench::print_json(std::cout, rows);
    } else if (csv) {
      ncio::bench::print_csv(std::cout, rows);
    } else {
      ncio::bench::print_table(std::cout, rows);
    }
  } catch (const ncio::Error& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
