#include "diffcal/ttopt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "diffcal/errors.hpp"
#include "diffcal/maxvol.hpp"

namespace diffcal {

void ParameterBox::validate() const {
  bounds.validate();
  for (std::size_t j = 0; j < bounds.dimension(); ++j) {
    if (!(bounds.lower[j] < bounds.upper[j])) {
      throw std::invalid_argument("grid discretization needs lower < upper per axis");
    }
  }
  if (n < 2) throw std::invalid_argument("box discretization needs n >= 2");
}

std::vector<std::vector<double>> discretize_box(const ParameterBox& box) {
  box.validate();
  std::vector<std::vector<double>> grids(box.dimension());
  for (std::size_t j = 0; j < grids.size(); ++j) {
    grids[j].resize(box.n);
    for (int i = 0; i < box.n; ++i) grids[j][i] = box.coordinate(j, i);
  }
  return grids;
}

double map_g(double J_val) {
  if (!(J_val >= 0.0)) {
    throw std::invalid_argument("map_g requires a non-negative misfit value");
  }
  return std::atan2(1.0, J_val);  // arccot on [0, inf) -> (0, pi/2]
}

void TTOptions::validate() const {
  if (r_max < 1) throw std::invalid_argument("r_max must be at least 1");
  if (n < 2) throw std::invalid_argument("n must be at least 2");
  if (n_sweeps < 1) throw std::invalid_argument("n_sweeps must be at least 1");
  if (maxvol_tol < 0.0) throw std::invalid_argument("maxvol_tol must be non-negative");
  if (max_evals < 0) throw std::invalid_argument("max_evals must be non-negative");
}

CachedEvaluator::CachedEvaluator(BatchObjective objective, const ParameterBox& box,
                                 int top_size, long max_evals)
    : objective_(std::move(objective)),
      grids_(discretize_box(box)),
      max_evals_(max_evals),
      top_size_(static_cast<std::size_t>(top_size)) {}

std::vector<double> CachedEvaluator::coordinates(const MultiIndex& idx) const {
  std::vector<double> q(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) q[j] = grids_[j][idx[j]];
  return q;
}

void CachedEvaluator::record(const MultiIndex& idx, double J) {
  if (!(J >= 0.0) || !std::isfinite(J)) {
    std::ostringstream msg;
    msg << "objective returned invalid value " << J << " at grid index (";
    for (std::size_t j = 0; j < idx.size(); ++j) msg << (j ? "," : "") << idx[j];
    msg << ")";
    throw evaluator_error(msg.str());
  }
  cache_.emplace(idx, std::make_pair(map_g(J), J));
  auto entry = std::make_pair(J, idx);
  auto pos = std::lower_bound(top_.begin(), top_.end(), entry);
  top_.insert(pos, std::move(entry));
  if (top_.size() > top_size_) top_.pop_back();
}

bool CachedEvaluator::ensure(const std::vector<MultiIndex>& indices) {
  std::vector<MultiIndex> misses;
  std::unordered_set<MultiIndex, MultiIndexHash> seen;
  for (const auto& idx : indices) {
    if (cache_.contains(idx)) continue;
    if (seen.insert(idx).second) misses.push_back(idx);
  }
  if (misses.empty()) return !exhausted_;

  bool fits = true;
  if (eval_count_ + static_cast<long>(misses.size()) > max_evals_) {
    misses.resize(static_cast<std::size_t>(std::max<long>(0, max_evals_ - eval_count_)));
    exhausted_ = true;
    fits = false;
  }
  if (misses.empty()) return false;

  std::vector<std::vector<double>> points;
  points.reserve(misses.size());
  for (const auto& idx : misses) points.push_back(coordinates(idx));

  std::vector<double> values;
  try {
    values = objective_(points);
  } catch (const std::exception&) {
    // Locate the offending point for the error report.
    for (std::size_t i = 0; i < misses.size(); ++i) {
      try {
        values.push_back(objective_({points[i]}).at(0));
      } catch (const std::exception& inner) {
        std::ostringstream msg;
        msg << "objective failed at grid index (";
        for (std::size_t j = 0; j < misses[i].size(); ++j) {
          msg << (j ? "," : "") << misses[i][j];
        }
        msg << "): " << inner.what();
        throw evaluator_error(msg.str());
      }
    }
  }
  if (values.size() != misses.size()) {
    throw evaluator_error("objective returned a batch of the wrong size");
  }
  for (std::size_t i = 0; i < misses.size(); ++i) record(misses[i], values[i]);
  eval_count_ += static_cast<long>(misses.size());
  return fits;
}

std::pair<double, double> CachedEvaluator::g_and_J(const MultiIndex& idx) const {
  auto it = cache_.find(idx);
  if (it == cache_.end()) throw std::logic_error("multi-index not evaluated");
  return it->second;
}

namespace {

// Sweep state: the per-interface row/column index sets plus the shared
// cached evaluator (cache, budget, best points).
struct TTState {
  const TTOptions& opt;
  std::size_t p;
  CachedEvaluator& eval;
  // left_sets[k]: prefixes over axes 0..k-1 (left_sets[0] = {()});
  // right_sets[k]: suffixes over axes k..p-1 (right_sets[p] = {()}).
  std::vector<std::vector<MultiIndex>> left_sets;
  std::vector<std::vector<MultiIndex>> right_sets;
  int sweep = 0;

  TTState(const TTOptions& o, std::size_t dim, CachedEvaluator& ev, std::mt19937_64& rng)
      : opt(o), p(dim), eval(ev), left_sets(p + 1), right_sets(p + 1) {
    left_sets[0] = {MultiIndex{}};
    right_sets[p] = {MultiIndex{}};
    auto random_tuple = [&](std::size_t len) {
      MultiIndex idx(len);
      for (auto& v : idx) v = static_cast<int>(rng() % static_cast<std::uint64_t>(opt.n));
      return idx;
    };
    for (std::size_t k = 1; k < p; ++k) {
      left_sets[k] = dedup_cap(make_random(random_tuple, k), 2 * opt.r_max);
      right_sets[k] = dedup_cap(make_random(random_tuple, p - k), 2 * opt.r_max);
    }
  }

  template <typename Fn>
  std::vector<MultiIndex> make_random(Fn&& random_tuple, std::size_t len) const {
    std::vector<MultiIndex> out;
    out.reserve(opt.r_max);
    for (int r = 0; r < opt.r_max; ++r) out.push_back(random_tuple(len));
    return out;
  }

  static std::vector<MultiIndex> dedup_cap(const std::vector<MultiIndex>& in, int cap) {
    std::vector<MultiIndex> out;
    std::unordered_set<MultiIndex, MultiIndexHash> seen;
    for (const auto& idx : in) {
      if (static_cast<int>(out.size()) >= cap) break;
      if (seen.insert(idx).second) out.push_back(idx);
    }
    return out;
  }

  static MultiIndex concat(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  // All (prefix, axis value) tuples, axis index appended.
  std::vector<MultiIndex> expand_left(const std::vector<MultiIndex>& prefixes) const {
    std::vector<MultiIndex> out;
    out.reserve(prefixes.size() * opt.n);
    for (const auto& pre : prefixes) {
      for (int i = 0; i < opt.n; ++i) {
        MultiIndex idx = pre;
        idx.push_back(i);
        out.push_back(std::move(idx));
      }
    }
    return out;
  }

  // All (axis value, suffix) tuples, axis index prepended.
  std::vector<MultiIndex> expand_right(const std::vector<MultiIndex>& suffixes) const {
    std::vector<MultiIndex> out;
    out.reserve(suffixes.size() * opt.n);
    for (int i = 0; i < opt.n; ++i) {
      for (const auto& suf : suffixes) {
        MultiIndex idx;
        idx.reserve(suf.size() + 1);
        idx.push_back(i);
        idx.insert(idx.end(), suf.begin(), suf.end());
        out.push_back(std::move(idx));
      }
    }
    return out;
  }

  bool evaluate_block(const std::vector<MultiIndex>& rows, const std::vector<MultiIndex>& cols,
                      bool rows_are_prefixes) {
    std::vector<MultiIndex> block;
    block.reserve(rows.size() * cols.size());
    for (const auto& r : rows) {
      for (const auto& c : cols) {
        block.push_back(rows_are_prefixes ? concat(r, c) : concat(c, r));
      }
    }
    return eval.ensure(block);
  }

  Eigen::MatrixXd block_matrix(const std::vector<MultiIndex>& rows,
                               const std::vector<MultiIndex>& cols) const {
    Eigen::MatrixXd M(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            eval.g_and_J(concat(rows[i], cols[j])).first;
      }
    }
    return M;
  }

  // maxvol row selection on the thin Q factor; rank capped at r_max.
  // Column pivoting keeps the leading Q columns meaningful when the
  // block is numerically low rank (constant objectives and the like).
  std::vector<Eigen::Index> select_rows(const Eigen::MatrixXd& M) const {
    const Eigen::Index r_hat =
        std::min<Eigen::Index>(opt.r_max, std::min(M.rows(), M.cols()));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd thin_q =
        qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), r_hat);
    return maxvol(thin_q, opt.maxvol_tol);
  }

  // Best two full indices of an evaluated block, ascending misfit.
  std::vector<MultiIndex> block_best(const std::vector<MultiIndex>& rows,
                                     const std::vector<MultiIndex>& cols,
                                     bool rows_are_prefixes) const {
    std::vector<std::pair<double, MultiIndex>> entries;
    entries.reserve(rows.size() * cols.size());
    for (const auto& r : rows) {
      for (const auto& c : cols) {
        MultiIndex idx = rows_are_prefixes ? concat(r, c) : concat(c, r);
        entries.emplace_back(eval.g_and_J(idx).second, std::move(idx));
      }
    }
    std::sort(entries.begin(), entries.end());
    std::vector<MultiIndex> out;
    for (std::size_t i = 0; i < entries.size() && i < 2; ++i) {
      out.push_back(entries[i].second);
    }
    return out;
  }

  // Coordinate-wise hill descent on the grid: +-1 per axis until no
  // move improves, capped at 2p accepted moves.
  bool hill_descent(MultiIndex start) {
    if (!eval.ensure({start})) return false;
    double J_cur = eval.g_and_J(start).second;
    MultiIndex cur = std::move(start);
    const int max_moves = static_cast<int>(2 * p);
    int moves = 0;
    bool improved = true;
    while (improved && moves < max_moves) {
      improved = false;
      for (std::size_t axis = 0; axis < p && moves < max_moves; ++axis) {
        std::vector<MultiIndex> cands;
        for (int delta : {-1, +1}) {
          const int v = cur[axis] + delta;
          if (v < 0 || v >= opt.n) continue;
          MultiIndex c = cur;
          c[axis] = v;
          cands.push_back(std::move(c));
        }
        if (cands.empty()) continue;
        if (!eval.ensure(cands)) return false;
        for (const auto& c : cands) {
          const double J_c = eval.g_and_J(c).second;
          if (J_c < J_cur) {
            J_cur = J_c;
            cur = c;
            ++moves;
            improved = true;
          }
        }
      }
    }
    return true;
  }

  // New interface set: maxvol cross pieces, the best points seen so
  // far, and the best points' neighbors along the axis at the
  // interface. The cap admits all three groups; the neighbors are what
  // lets the search walk along curved valleys that defeat pointwise
  // hill descent.
  std::vector<MultiIndex> enrich(std::vector<MultiIndex> selected, std::size_t piece_len,
                                 bool from_left) {
    auto piece_of = [&](const MultiIndex& full) {
      return from_left ? MultiIndex(full.begin(), full.begin() + piece_len)
                       : MultiIndex(full.end() - piece_len, full.end());
    };
    const auto& top = eval.top();
    for (const auto& [J, idx] : top) {
      (void)J;
      selected.push_back(piece_of(idx));
    }
    for (const auto& [J, idx] : top) {
      (void)J;
      MultiIndex piece = piece_of(idx);
      const std::size_t pos = from_left ? piece_len - 1 : 0;
      for (int delta : {-1, +1}) {
        const int v = piece[pos] + delta;
        if (v < 0 || v >= opt.n) continue;
        MultiIndex nb = piece;
        nb[pos] = v;
        selected.push_back(std::move(nb));
      }
    }
    return dedup_cap(selected, 4 * opt.r_max);
  }

  // Returns false when the evaluation budget ran out mid-sweep.
  bool sweep_ltr() {
    for (std::size_t k = 0; k < p; ++k) {
      const auto rows = expand_left(left_sets[k]);
      const auto& cols = right_sets[k + 1];
      if (!evaluate_block(rows, cols, true)) return false;
      for (const auto& s : block_best(rows, cols, true)) {
        if (!hill_descent(s)) return false;
      }
      if (k + 1 < p) {
        const Eigen::MatrixXd M = block_matrix(rows, cols);
        std::vector<MultiIndex> selected;
        for (Eigen::Index r : select_rows(M)) selected.push_back(rows[r]);
        left_sets[k + 1] = enrich(std::move(selected), k + 1, true);
      }
    }
    return true;
  }

  bool sweep_rtl() {
    for (std::size_t kk = p; kk-- > 0;) {
      const auto& rows = left_sets[kk];
      const auto cols = expand_right(right_sets[kk + 1]);
      if (!evaluate_block(cols, rows, false)) return false;
      for (const auto& s : block_best(cols, rows, false)) {
        if (!hill_descent(s)) return false;
      }
      if (kk > 0) {
        Eigen::MatrixXd M(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          for (std::size_t j = 0; j < cols.size(); ++j) {
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                eval.g_and_J(concat(rows[i], cols[j])).first;
          }
        }
        std::vector<MultiIndex> selected;
        for (Eigen::Index c : select_rows(M.transpose())) selected.push_back(cols[c]);
        right_sets[kk] = enrich(std::move(selected), p - kk, false);
      }
    }
    return true;
  }
};

}  // namespace

TTResult tt_minimize(const BatchObjective& objective, const ParameterBox& box,
                     const TTOptions& options) {
  box.validate();
  options.validate();
  if (options.n != box.n) {
    throw std::invalid_argument("options.n must match the box discretization");
  }
  const std::size_t p = box.dimension();

  TTOptions resolved = options;
  if (resolved.max_evals == 0) {
    resolved.max_evals = 4L * static_cast<long>(p) * options.n * options.r_max *
                         options.r_max * options.n_sweeps;
  }

  CachedEvaluator eval(objective, box, options.r_max, resolved.max_evals);
  TTResult result;
  result.options = resolved;

  if (p == 1) {
    std::vector<MultiIndex> all;
    for (int i = 0; i < options.n; ++i) all.push_back({i});
    result.budget_exhausted = !eval.ensure(all);
    result.trace.push_back({0, eval.eval_count(),
                            eval.has_best() ? eval.best().first
                                            : std::numeric_limits<double>::quiet_NaN()});
  } else {
    std::mt19937_64 rng(options.seed);
    TTState state(options, p, eval, rng);
    for (state.sweep = 0; state.sweep < options.n_sweeps; ++state.sweep) {
      const bool ok = (state.sweep % 2 == 0) ? state.sweep_ltr() : state.sweep_rtl();
      result.trace.push_back({state.sweep, eval.eval_count(),
                              eval.has_best() ? eval.best().first
                                              : std::numeric_limits<double>::quiet_NaN()});
      if (!ok) {
        result.budget_exhausted = true;
        break;
      }
    }
  }

  if (!eval.has_best()) {
    throw std::invalid_argument("evaluation budget too small to inspect any point");
  }
  result.J_best = eval.best().first;
  result.index_best = eval.best().second;
  result.q_best = eval.coordinates(result.index_best);
  result.eval_count = eval.eval_count();
  return result;
}

}  // namespace diffcal
