#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncio/layout.hpp"

namespace ncio::bench {

enum class PatternId { dist3d, btio, unstruc };

std::string_view to_string(PatternId id);
PatternId parse_pattern(std::string_view name);

/// One rank's share of an access pattern.
struct RankPattern {
  /// Filetype for a view at displacement 0 (levels 2 and 3).
  Datatype filetype;
  /// Contiguous file pieces one at a time, unmerged, in file order, as an
  /// application without file views would issue them (levels 0 and 1).
  std::vector<Segment> rows;
};

/// Balanced factorization of nprocs over ndims, largest factor first.
std::vector<std::int64_t> balanced_grid(int nprocs, int ndims);

/// Block-distributed array stored in row-major order.
RankPattern gen_dist3d(std::span<const std::int64_t> dims, std::span<const std::int64_t> proc_grid,
                       int rank, std::int64_t elem_size);

/// Number of solution components per grid point in the BTIO layout.
inline constexpr std::int64_t kBtioComponents = 5;

/// Multipartition of a grid_size^3 grid of 5-component points, file in
/// column-major order (component fastest, then x, y, z). With q = sqrt(nprocs),
/// rank r = i*q + j owns cells (x=(i+k)%q, y=(j+k)%q, z=k) for k in [0, q).
RankPattern gen_btio(std::int64_t grid_size, int nprocs, int rank, std::int64_t elem_size);

/// Seeded random scatter of n_elements into a global array; rank r owns the
/// block_range(r) slice of the permutation. Seed 0 is the identity.
RankPattern gen_unstruc(std::int64_t n_elements, int nprocs, int rank, std::int64_t elem_size,
                        std::uint64_t seed);

/// Global element index for each permutation slot; deterministic per seed.
std::vector<std::int64_t> unstruc_permutation(std::int64_t n_elements, std::uint64_t seed);

/// Mean hole length divided by mean segment length over a canonical list.
/// Zero when there are fewer than two segments.
double hole_segment_ratio(std::span<const Segment> segments);

}  // namespace ncio::bench
