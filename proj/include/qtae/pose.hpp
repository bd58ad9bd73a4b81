#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qtae/lattice.hpp"

namespace qtae {

/// Inclusive offset range searched along one factor.
struct SearchRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::size_t width() const { return static_cast<std::size_t>(hi - lo + 1); }
};

/// Periodic factors: one full cycle of signed offsets, [-(d/2), (d-1)/2].
/// Aperiodic factors: [-(d-1), d-1].
std::vector<SearchRange> default_search_ranges(const LatticeSpec& spec);

struct PoseScore {
  LatticeOffset offset;
  double score;
};

struct PoseEstimate {
  LatticeOffset best;
  double best_score = 0.0;
  /// One entry per searched offset, first factor slowest.
  std::vector<PoseScore> scores;
};

struct PoseOptions {
  /// Normalise over the cells that stay inside the lattice after the shift,
  /// instead of over the full tensors.
  bool overlap_only = false;
};

/// argmax_v cos(shift(y1, v), y2). Ties go to the smallest L1 offset, then
/// the lexicographically smallest one.
PoseEstimate estimate_offset(const EmbeddingTensor& y1, const EmbeddingTensor& y2,
                             const std::vector<SearchRange>& ranges, const PoseOptions& options = {});
PoseEstimate estimate_offset(const EmbeddingTensor& y1, const EmbeddingTensor& y2);

/// Per-factor absolute error in bins, circular for periodic factors.
std::vector<std::int64_t> bin_error(const LatticeOffset& estimate, const LatticeOffset& truth, const LatticeSpec& spec);

/// Signed representative of a periodic offset nearest zero, in [-(d/2), (d-1)/2].
std::int64_t wrap_signed(std::int64_t u, std::size_t extent);

/// Header u_<factor>..., score; one row per searched offset.
void write_score_csv(const std::filesystem::path& path, const PoseEstimate& estimate, const LatticeSpec& spec);

}  // namespace qtae
