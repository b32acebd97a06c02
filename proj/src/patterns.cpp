#include "ncio/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ncio/error.hpp"

namespace ncio::bench {

std::string_view to_string(PatternId id) {
  switch (id) {
    case PatternId::dist3d: return "dist3d";
    case PatternId::btio: return "btio";
    case PatternId::unstruc: return "unstruc";
  }
  return "?";
}

PatternId parse_pattern(std::string_view name) {
  if (name == "dist3d") return PatternId::dist3d;
  if (name == "btio") return PatternId::btio;
  if (name == "unstruc") return PatternId::unstruc;
  throw Error(Errc::invalid_argument, "unknown pattern '" + std::string(name) + "'");
}

std::vector<std::int64_t> balanced_grid(int nprocs, int ndims) {
  if (nprocs < 1 || ndims < 1) throw Error(Errc::invalid_argument, "grid needs positive ranks and dims");
  std::vector<std::int64_t> grid(static_cast<std::size_t>(ndims), 1);
  // Hand out prime factors, largest first, to the currently smallest dim.
  std::vector<std::int64_t> primes;
  int n = nprocs;
  for (int f = 2; f * f <= n; ++f) {
    while (n % f == 0) {
      primes.push_back(f);
      n /= f;
    }
  }
  if (n > 1) primes.push_back(n);
  std::sort(primes.rbegin(), primes.rend());
  for (std::int64_t p : primes) *std::min_element(grid.begin(), grid.end()) *= p;
  std::sort(grid.rbegin(), grid.rend());
  return grid;
}

namespace {

// Unmerged innermost runs of a row-major subarray, in file order.
void subarray_rows(std::span<const std::int64_t> sizes, std::span<const std::int64_t> subsizes,
                   std::span<const std::int64_t> starts, std::int64_t elem, std::vector<Segment>& rows) {
  const std::size_t nd = sizes.size();
  std::vector<std::int64_t> stride(nd, 1);
  for (std::size_t d = nd - 1; d > 0; --d) stride[d - 1] = stride[d] * sizes[d];
  std::vector<std::int64_t> idx(nd, 0);
  const std::size_t fast = nd - 1;
  for (bool done = false; !done;) {
    std::int64_t e = starts[fast];
    for (std::size_t d = 0; d < fast; ++d) e += (starts[d] + idx[d]) * stride[d];
    rows.push_back({e * elem, subsizes[fast] * elem});
    done = true;
    for (std::size_t d = fast; d-- > 0;) {
      if (++idx[d] < subsizes[d]) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
  }
}

}  // namespace

RankPattern gen_dist3d(std::span<const std::int64_t> dims, std::span<const std::int64_t> proc_grid,
                       int rank, std::int64_t elem_size) {
  if (dims.size() != proc_grid.size()) throw Error(Errc::invalid_argument, "dims and process grid differ in rank");
  RankPattern p;
  p.filetype = make_darray_block(dims, proc_grid, rank, make_basic(elem_size), Order::row_major);
  const TypeNode& n = p.filetype.node();
  subarray_rows(n.sizes, n.subsizes, n.starts, elem_size, p.rows);
  return p;
}

RankPattern gen_btio(std::int64_t grid_size, int nprocs, int rank, std::int64_t elem_size) {
  const auto q = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(nprocs))));
  if (nprocs < 1 || q * q != nprocs) throw Error(Errc::invalid_argument, "btio needs a perfect-square rank count");
  if (rank < 0 || rank >= nprocs) throw Error(Errc::invalid_argument, "rank out of range");
  if (grid_size < q) throw Error(Errc::invalid_argument, "btio grid smaller than the cell grid");

  const std::int64_t i = rank / q;
  const std::int64_t j = rank % q;
  const std::int64_t N = grid_size;
  const Datatype elem = make_basic(elem_size);
  // Column-major (component, x, y, z) is row-major (z, y, x, component).
  const std::vector<std::int64_t> sizes{N, N, N, kBtioComponents};

  RankPattern p;
  std::vector<Datatype> cells;
  for (std::int64_t k = 0; k < q; ++k) {
    const Segment xs = block_range(N, q, (i + k) % q);
    const Segment ys = block_range(N, q, (j + k) % q);
    const Segment zs = block_range(N, q, k);
    const std::vector<std::int64_t> subsizes{zs.length, ys.length, xs.length, kBtioComponents};
    const std::vector<std::int64_t> starts{zs.offset, ys.offset, xs.offset, 0};
    cells.push_back(make_subarray(sizes, subsizes, starts, Order::row_major, elem));
    // Level-0 rows: one x-line of a cell, all components.
    const std::vector<std::int64_t> line_sizes{N, N, N * kBtioComponents};
    const std::vector<std::int64_t> line_sub{zs.length, ys.length, xs.length * kBtioComponents};
    const std::vector<std::int64_t> line_start{zs.offset, ys.offset, xs.offset * kBtioComponents};
    subarray_rows(line_sizes, line_sub, line_start, elem_size, p.rows);
  }
  const std::vector<std::int64_t> ones(cells.size(), 1);
  const std::vector<std::int64_t> zeros(cells.size(), 0);
  p.filetype = make_heterogeneous(ones, zeros, cells);
  std::sort(p.rows.begin(), p.rows.end(), [](const Segment& a, const Segment& b) { return a.offset < b.offset; });
  return p;
}

std::vector<std::int64_t> unstruc_permutation(std::int64_t n_elements, std::uint64_t seed) {
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n_elements));
  std::iota(perm.begin(), perm.end(), 0);
  if (seed == 0) return perm;
  // Fisher-Yates with a fixed engine and plain modulo so the mapping is the
  // same on every standard library.
  std::mt19937_64 rng(seed);
  for (std::size_t k = perm.size(); k > 1; --k) {
    std::swap(perm[k - 1], perm[rng() % k]);
  }
  return perm;
}

RankPattern gen_unstruc(std::int64_t n_elements, int nprocs, int rank, std::int64_t elem_size,
                        std::uint64_t seed) {
  if (nprocs < 1 || (nprocs & (nprocs - 1)) != 0) {
    throw Error(Errc::invalid_argument, "unstruc needs a power-of-two rank count");
  }
  if (rank < 0 || rank >= nprocs) throw Error(Errc::invalid_argument, "rank out of range");
  if (n_elements < nprocs) throw Error(Errc::invalid_argument, "fewer elements than ranks");

  const std::vector<std::int64_t> perm = unstruc_permutation(n_elements, seed);
  const Segment mine = block_range(n_elements, nprocs, rank);
  std::vector<std::int64_t> slots(perm.begin() + mine.offset, perm.begin() + mine.end());
  std::sort(slots.begin(), slots.end());

  RankPattern p;
  const std::vector<std::int64_t> ones(slots.size(), 1);
  p.filetype = make_indexed(ones, slots, make_basic(elem_size));
  p.rows.reserve(slots.size());
  for (std::int64_t s : slots) p.rows.push_back({s * elem_size, elem_size});
  return p;
}

double hole_segment_ratio(std::span<const Segment> segments) {
  if (segments.size() < 2) return 0.0;
  std::int64_t useful = 0;
  for (const Segment& s : segments) useful += s.length;
  const std::int64_t span = segments.back().end() - segments.front().offset;
  const double mean_hole = static_cast<double>(span - useful) / static_cast<double>(segments.size() - 1);
  const double mean_seg = static_cast<double>(useful) / static_cast<double>(segments.size());
  return mean_hole / mean_seg;
}

}  // namespace ncio::bench
