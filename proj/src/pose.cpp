#include "qtae/pose.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace qtae {

std::int64_t wrap_signed(std::int64_t u, std::size_t extent) {
  const auto d = static_cast<std::int64_t>(extent);
  std::int64_t r = u % d;
  if (r < 0) r += d;
  return r <= (d - 1) / 2 ? r : r - d;
}

std::vector<SearchRange> default_search_ranges(const LatticeSpec& spec) {
  std::vector<SearchRange> out;
  for (const auto& f : spec.factors) {
    const auto d = static_cast<std::int64_t>(f.extent);
    if (f.periodic)
      out.push_back({-(d / 2), (d - 1) / 2});
    else
      out.push_back({-(d - 1), d - 1});
  }
  return out;
}

namespace {

bool better(const PoseScore& a, const PoseScore& b) {
  if (a.score != b.score) return a.score > b.score;
  std::int64_t la = 0, lb = 0;
  for (std::size_t i = 0; i < a.offset.size(); ++i) {
    la += std::abs(a.offset[i]);
    lb += std::abs(b.offset[i]);
  }
  if (la != lb) return la < lb;
  return a.offset.components < b.offset.components;
}

}  // namespace

PoseEstimate estimate_offset(const EmbeddingTensor& y1, const EmbeddingTensor& y2,
                             const std::vector<SearchRange>& ranges, const PoseOptions& options) {
  const auto& spec = y1.spec();
  require(y2.spec() == spec, "estimate_offset: embeddings have different lattices");
  require(ranges.size() == spec.factor_count(), "estimate_offset: one search range per factor required");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto d = static_cast<std::int64_t>(spec.factors[i].extent);
    require(ranges[i].lo <= ranges[i].hi, "estimate_offset: empty search range");
    if (spec.factors[i].periodic)
      require(ranges[i].hi - ranges[i].lo < d, "estimate_offset: periodic range exceeds one cycle");
    else
      require(ranges[i].lo > -d && ranges[i].hi < d, "estimate_offset: aperiodic range exceeds the lattice");
  }
  const float* a = y1.tensor().ptr();
  const float* b = y2.tensor().ptr();
  const std::size_t n = y1.tensor().numel();
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  require(na > 0.0 && nb > 0.0, "estimate_offset: zero-norm embedding");

  std::size_t total = 1;
  for (const auto& r : ranges) total *= r.width();
  PoseEstimate est;
  est.scores.resize(total);
  const long count = static_cast<long>(total);
#pragma omp parallel for schedule(dynamic, 4)
  for (long k = 0; k < count; ++k) {
    LatticeOffset v = LatticeOffset::zeros(ranges.size());
    std::size_t rem = static_cast<std::size_t>(k);
    for (std::size_t i = ranges.size(); i-- > 0;) {
      v.components[i] = ranges[i].lo + static_cast<std::int64_t>(rem % ranges[i].width());
      rem /= ranges[i].width();
    }
    const IndexMap map = shift_index_map(spec, v);
    double dot = 0.0, ns = 0.0, nt = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (map[j] < 0) continue;
      const double s = a[map[j]];
      dot += s * b[j];
      ns += s * s;
      if (options.overlap_only) nt += static_cast<double>(b[j]) * b[j];
    }
    if (!options.overlap_only) nt = nb;
    const double denom = std::sqrt(ns) * std::sqrt(nt);
    est.scores[static_cast<std::size_t>(k)] = {v, denom > 0.0 ? dot / denom : 0.0};
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < total; ++k)
    if (better(est.scores[k], est.scores[best])) best = k;
  est.best = est.scores[best].offset;
  est.best_score = est.scores[best].score;
  return est;
}

PoseEstimate estimate_offset(const EmbeddingTensor& y1, const EmbeddingTensor& y2) {
  return estimate_offset(y1, y2, default_search_ranges(y1.spec()));
}

std::vector<std::int64_t> bin_error(const LatticeOffset& estimate, const LatticeOffset& truth, const LatticeSpec& spec) {
  require(estimate.size() == spec.factor_count() && truth.size() == spec.factor_count(), "bin_error: arity mismatch");
  std::vector<std::int64_t> err;
  for (std::size_t i = 0; i < spec.factor_count(); ++i) {
    const std::int64_t diff = estimate[i] - truth[i];
    err.push_back(spec.factors[i].periodic ? std::abs(wrap_signed(diff, spec.factors[i].extent)) : std::abs(diff));
  }
  return err;
}

void write_score_csv(const std::filesystem::path& path, const PoseEstimate& est, const LatticeSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& f : spec.factors) out << "u_" << f.name << ",";
  out << "score\n";
  char buf[32];
  for (const auto& s : est.scores) {
    for (auto c : s.offset.components) out << c << ",";
    std::snprintf(buf, sizeof buf, "%.6g", s.score);
    out << buf << "\n";
  }
}

}  // namespace qtae
