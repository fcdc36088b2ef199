#pragma once

#include "barrier_cert/box.hpp"
#include "barrier_cert/crown.hpp"
#include "barrier_cert/nn.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <vector>

namespace barrier_cert {

/// A box admitted into the certified decrease set, with the two bounds that
/// admitted it.
struct CertifiedBox {
  HyperRectangle box;
  double barrier_lower = 0.0;   // lower bound of nBF over the box
  double composed_upper = 0.0;  // upper bound of nBF(nf(.)) over the box
};

struct PartitionStats {
  std::size_t boxes_visited = 0;
  std::size_t boxes_split = 0;
  std::size_t boxes_dropped = 0;
};

struct PartitionResult {
  std::vector<HyperRectangle> boxes;
  double gamma = 0.0;
  bool gamma_valid = false;  // gamma > 0
  std::vector<double> per_box_ratios;
  std::vector<CertifiedBox> audit;
  PartitionStats stats;
};

struct PartitionOptions {
  double eps = 0.01;
  unsigned threads = 1;
};

namespace detail {

inline void neg_d_set_rec(const HyperRectangle& box, const NeuralNetwork& barrier, const NeuralNetwork& composed,
                          double eps, unsigned threads, std::vector<CertifiedBox>& out, PartitionStats& stats) {
  ++stats.boxes_visited;
  const double l_bf = get_fn_bd(barrier, box)(0, 0);
  const double u_f = get_fn_bd(composed, box)(0, 1);
  if (l_bf <= 0.0 && u_f <= 0.0) {
    out.push_back({box, l_bf, u_f});
    return;
  }
  const Matrix bds = get_extents(box);
  const double width = (bds.col(1) - bds.col(0)).cwiseAbs().maxCoeff();
  if (l_bf <= 0.0 && u_f > 0.0 && width > eps) {
    ++stats.boxes_split;
    auto children = box.split_midpoint();
    if (threads > 1) {
      std::vector<std::future<std::pair<std::vector<CertifiedBox>, PartitionStats>>> jobs;
      jobs.reserve(children.size());
      for (const auto& child : children) {
        jobs.push_back(std::async(std::launch::async, [&, child] {
          std::vector<CertifiedBox> part;
          PartitionStats st;
          neg_d_set_rec(child, barrier, composed, eps, 1, part, st);
          return std::make_pair(std::move(part), st);
        }));
      }
      for (auto& j : jobs) {
        auto [part, st] = j.get();
        out.insert(out.end(), part.begin(), part.end());
        stats.boxes_visited += st.boxes_visited;
        stats.boxes_split += st.boxes_split;
        stats.boxes_dropped += st.boxes_dropped;
      }
    } else {
      for (const auto& child : children) neg_d_set_rec(child, barrier, composed, eps, 1, out, stats);
    }
    return;
  }
  ++stats.boxes_dropped;
}

}  // namespace detail

/// Recursively splits `test_set` until each piece either satisfies
/// u_f <= 0 and l_BF <= 0 (kept) or is too small / has l_BF > 0 (dropped).
/// Output is sorted lexicographically by box corner.
inline std::vector<CertifiedBox> get_neg_d_set_audited(const HyperRectangle& test_set, const ShallowNN& barrier,
                                                       const NeuralNetwork& dynamics, const PartitionOptions& opts,
                                                       PartitionStats* stats = nullptr) {
  if (!(opts.eps > 0.0)) throw InputError("get_neg_d_set: eps must be positive");
  if (dynamics.in_dim() != dynamics.out_dim() || dynamics.in_dim() != barrier.in_dim() ||
      static_cast<Eigen::Index>(test_set.dim()) != barrier.in_dim()) {
    throw InputError("get_neg_d_set: dimension mismatch between test set, barrier and dynamics");
  }
  const NeuralNetwork barrier_net = barrier.network();
  const NeuralNetwork composed = compose(barrier_net, dynamics);
  std::vector<CertifiedBox> out;
  PartitionStats local;
  detail::neg_d_set_rec(test_set, barrier_net, composed, opts.eps, opts.threads, out, local);
  std::sort(out.begin(), out.end(), [](const CertifiedBox& a, const CertifiedBox& b) { return box_less(a.box, b.box); });
  if (stats) *stats = local;
  return out;
}

inline std::vector<HyperRectangle> get_neg_d_set(const HyperRectangle& test_set, const ShallowNN& barrier,
                                                 const NeuralNetwork& dynamics, double eps) {
  std::vector<HyperRectangle> boxes;
  for (auto& cb : get_neg_d_set_audited(test_set, barrier, dynamics, {eps, 1})) boxes.push_back(std::move(cb.box));
  return boxes;
}

/// Ratio u_f / l_BF for a box passing the decrease gate; 0 when l_BF = 0.
inline double box_gamma(double barrier_lower, double composed_upper) {
  if (barrier_lower < 0.0) return composed_upper / barrier_lower;
  return 0.0;
}

struct GammaResult {
  double gamma = 0.0;
  bool valid = false;
  std::vector<double> ratios;
};

/// gamma = min over boxes of the per-box ratio. Recomputes bounds so a
/// checker can rerun it on any box list.
inline GammaResult compute_gamma(const std::vector<HyperRectangle>& boxes, const ShallowNN& barrier,
                                 const NeuralNetwork& dynamics) {
  if (boxes.empty()) throw InputError("compute_gamma: empty box list (certified decrease set is empty)");
  const NeuralNetwork barrier_net = barrier.network();
  const NeuralNetwork composed = compose(barrier_net, dynamics);
  GammaResult r;
  r.gamma = std::numeric_limits<double>::infinity();
  for (const auto& b : boxes) {
    const double l_bf = get_fn_bd(barrier_net, b)(0, 0);
    const double u_f = get_fn_bd(composed, b)(0, 1);
    if (!(l_bf <= 0.0 && u_f <= 0.0)) {
      throw InputError("compute_gamma: box does not satisfy u_f <= 0 and l_BF <= 0");
    }
    r.ratios.push_back(box_gamma(l_bf, u_f));
    r.gamma = std::min(r.gamma, r.ratios.back());
  }
  r.valid = r.gamma > 0.0;
  return r;
}

inline PartitionResult partition_safe_set(const HyperRectangle& safe_set, const ShallowNN& barrier,
                                          const NeuralNetwork& dynamics, const PartitionOptions& opts) {
  PartitionResult res;
  res.audit = get_neg_d_set_audited(safe_set, barrier, dynamics, opts, &res.stats);
  res.gamma = std::numeric_limits<double>::infinity();
  for (const auto& cb : res.audit) {
    res.boxes.push_back(cb.box);
    res.per_box_ratios.push_back(box_gamma(cb.barrier_lower, cb.composed_upper));
    res.gamma = std::min(res.gamma, res.per_box_ratios.back());
  }
  if (res.boxes.empty()) res.gamma = 0.0;
  res.gamma_valid = !res.boxes.empty() && res.gamma > 0.0;
  return res;
}

}  // namespace barrier_cert
