// Brute-force reference models used only by the tests. Nothing here calls
// into the library's flattening, sieving, or collective code.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "ncio/layout.hpp"

namespace oracle {

using ncio::Segment;
using ncio::TypeKind;
using ncio::TypeNode;

inline std::int64_t extent(const TypeNode& n);

inline std::int64_t child_extent(const TypeNode& n, std::size_t i) { return extent(n.children[i].node()); }

// Row-major block split written out longhand.
inline void block_bounds(std::int64_t n, std::int64_t p, std::int64_t b, std::int64_t& start, std::int64_t& len) {
  start = 0;
  for (std::int64_t k = 0; k < b; ++k) start += n / p + (k < n % p ? 1 : 0);
  len = n / p + (b < n % p ? 1 : 0);
}

inline std::int64_t extent(const TypeNode& n) {
  switch (n.kind) {
    case TypeKind::basic: return n.width;
    case TypeKind::contiguous: return n.count * child_extent(n, 0);
    case TypeKind::vector: return (n.count - 1) * n.stride_bytes + n.blocklen * child_extent(n, 0);
    case TypeKind::indexed:
    case TypeKind::heterogeneous: {
      std::int64_t e = 0;
      for (std::size_t i = 0; i < n.blocklens.size(); ++i) {
        const std::size_t c = n.kind == TypeKind::indexed ? 0 : i;
        e = std::max(e, n.displs_bytes[i] + n.blocklens[i] * child_extent(n, c));
      }
      return e;
    }
    case TypeKind::subarray:
    case TypeKind::darray_block: {
      std::int64_t e = child_extent(n, 0);
      for (std::int64_t s : n.sizes) e *= s;
      return e;
    }
  }
  return 0;
}

// Every byte offset the type touches, relative to `origin`, one entry per
// touch (duplicates mean overlap).
inline void enumerate(const TypeNode& n, std::int64_t origin, std::vector<std::int64_t>& out) {
  auto copies = [&](const TypeNode& child, std::int64_t at, std::int64_t k) {
    const std::int64_t ext = extent(child);
    for (std::int64_t c = 0; c < k; ++c) enumerate(child, at + c * ext, out);
  };
  switch (n.kind) {
    case TypeKind::basic:
      for (std::int64_t b = 0; b < n.width; ++b) out.push_back(origin + b);
      return;
    case TypeKind::contiguous:
      copies(n.children[0].node(), origin, n.count);
      return;
    case TypeKind::vector:
      for (std::int64_t b = 0; b < n.count; ++b) copies(n.children[0].node(), origin + b * n.stride_bytes, n.blocklen);
      return;
    case TypeKind::indexed:
    case TypeKind::heterogeneous:
      for (std::size_t i = 0; i < n.blocklens.size(); ++i) {
        const std::size_t c = n.kind == TypeKind::indexed ? 0 : i;
        copies(n.children[c].node(), origin + n.displs_bytes[i], n.blocklens[i]);
      }
      return;
    case TypeKind::subarray:
    case TypeKind::darray_block: {
      const std::size_t nd = n.sizes.size();
      std::vector<std::int64_t> sub(nd), st(nd);
      if (n.kind == TypeKind::subarray) {
        sub = n.subsizes;
        st = n.starts;
      } else {
        // Recompute the block from the grid rather than trusting the node.
        std::int64_t rest = n.rank;
        for (std::size_t d = nd; d-- > 0;) {
          const std::int64_t coord = rest % n.grid[d];
          rest /= n.grid[d];
          block_bounds(n.sizes[d], n.grid[d], coord, st[d], sub[d]);
        }
      }
      const TypeNode& child = n.children[0].node();
      const std::int64_t ext = extent(child);
      // Visit every element of the global array and keep those inside.
      std::int64_t total = 1;
      for (std::int64_t s : n.sizes) total *= s;
      for (std::int64_t lin = 0; lin < total; ++lin) {
        std::vector<std::int64_t> idx(nd);
        std::int64_t rest = lin;
        if (n.order == ncio::Order::row_major) {
          for (std::size_t d = nd; d-- > 0;) {
            idx[d] = rest % n.sizes[d];
            rest /= n.sizes[d];
          }
        } else {
          for (std::size_t d = 0; d < nd; ++d) {
            idx[d] = rest % n.sizes[d];
            rest /= n.sizes[d];
          }
        }
        bool inside = true;
        for (std::size_t d = 0; d < nd && inside; ++d) inside = idx[d] >= st[d] && idx[d] < st[d] + sub[d];
        if (inside) enumerate(child, origin + lin * ext, out);
      }
      return;
    }
  }
}

inline std::vector<std::int64_t> bytes_of(const ncio::Datatype& dt) {
  std::vector<std::int64_t> out;
  enumerate(dt.node(), 0, out);
  std::sort(out.begin(), out.end());
  return out;
}

inline bool has_duplicates(const std::vector<std::int64_t>& sorted) {
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

// Maximal runs of a sorted, duplicate-free byte list.
inline std::vector<Segment> runs(std::span<const std::int64_t> sorted) {
  std::vector<Segment> out;
  for (std::int64_t b : sorted) {
    if (!out.empty() && out.back().end() == b) {
      ++out.back().length;
    } else {
      out.push_back({b, 1});
    }
  }
  return out;
}

inline std::vector<std::int64_t> expand(std::span<const Segment> segs) {
  std::vector<std::int64_t> out;
  for (const Segment& s : segs) {
    for (std::int64_t b = s.offset; b < s.end(); ++b) out.push_back(b);
  }
  return out;
}

// Tile enumeration: absolute file bytes for visible bytes [start, start+n).
inline std::vector<std::int64_t> view_bytes(std::int64_t disp, const ncio::Datatype& ft, std::int64_t start,
                                            std::int64_t n) {
  const std::vector<std::int64_t> tile = bytes_of(ft);
  const std::int64_t ext = extent(ft.node());
  std::vector<std::int64_t> out;
  std::int64_t visible = 0;
  for (std::int64_t t = 0; static_cast<std::int64_t>(out.size()) < n; ++t) {
    for (std::int64_t b : tile) {
      if (visible >= start && visible < start + n) out.push_back(disp + t * ext + b);
      ++visible;
    }
  }
  return out;
}

// A file is a byte vector; reads past the end are absent.
using Image = std::vector<std::byte>;

inline std::vector<std::byte> naive_read(const Image& file, std::span<const Segment> segs) {
  std::vector<std::byte> out;
  for (const Segment& s : segs) {
    for (std::int64_t b = s.offset; b < s.end(); ++b) out.push_back(file.at(static_cast<std::size_t>(b)));
  }
  return out;
}

inline void naive_write(Image& file, std::span<const Segment> segs, std::span<const std::byte> data) {
  std::size_t k = 0;
  for (const Segment& s : segs) {
    if (static_cast<std::int64_t>(file.size()) < s.end()) file.resize(static_cast<std::size_t>(s.end()));
    for (std::int64_t b = s.offset; b < s.end(); ++b) file[static_cast<std::size_t>(b)] = data[k++];
  }
}

// Window walk over individual bytes: each window opens at the first requested
// byte not yet served and closes after the last requested byte below
// start + limit.
struct SimWindow {
  std::int64_t lo, hi, useful;
};

inline std::vector<SimWindow> simulate_windows(std::span<const Segment> segs, std::int64_t limit) {
  const std::vector<std::int64_t> bytes = expand(segs);
  std::vector<SimWindow> out;
  std::size_t i = 0;
  while (i < bytes.size()) {
    SimWindow w{bytes[i], bytes[i] + 1, 0};
    while (i < bytes.size() && bytes[i] < w.lo + limit) {
      w.hi = bytes[i] + 1;
      ++w.useful;
      ++i;
    }
    out.push_back(w);
  }
  return out;
}

// Per-rank byte sets are pairwise disjoint and cover [0, total) exactly.
inline bool covers_exactly_once(const std::vector<std::vector<Segment>>& per_rank, std::int64_t total) {
  std::vector<int> hits(static_cast<std::size_t>(total), 0);
  for (const auto& segs : per_rank) {
    for (std::int64_t b : expand(segs)) {
      if (b < 0 || b >= total) return false;
      ++hits[static_cast<std::size_t>(b)];
    }
  }
  return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

}  // namespace oracle
