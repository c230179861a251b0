#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tasksel/errors.hpp"
#include "tasksel/prng.hpp"

namespace tasksel {

/// Source tasks are numbered 1..k. 0 is reserved for the target task and never
/// appears in a Subset.
using TaskId = int;

/// An unordered set of source-task ids. Members are kept strictly increasing.
class Subset {
 public:
  Subset() = default;

  /// Canonicalizes (sorts) the given ids. Throws on ids < 1 or duplicates.
  explicit Subset(std::vector<TaskId> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_[i] < 1)
        throw invalid_parameter_error("Subset: task ids must be >= 1, got " +
                                      std::to_string(members_[i]));
      if (i > 0 && members_[i] == members_[i - 1])
        throw invalid_parameter_error("Subset: duplicate task id " +
                                      std::to_string(members_[i]));
    }
  }

  int size() const { return static_cast<int>(members_.size()); }
  bool empty() const { return members_.empty(); }
  const std::vector<TaskId>& members() const { return members_; }

  bool contains(TaskId id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
  }

  TaskId max_id() const { return members_.empty() ? 0 : members_.back(); }

  friend bool operator==(const Subset& a, const Subset& b) {
    return a.members_ == b.members_;
  }
  friend bool operator!=(const Subset& a, const Subset& b) { return !(a == b); }
  friend bool operator<(const Subset& a, const Subset& b) {
    return a.members_ < b.members_;
  }

  std::string str() const {
    std::string s = "{";
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(members_[i]);
    }
    return s + "}";
  }

 private:
  std::vector<TaskId> members_;
};

/// One measured multitask-training outcome: the subset trained alongside the
/// target and the resulting target performance (lower is better).
struct PerformanceRecord {
  Subset subset;
  double value = 0.0;
  std::string oracle_id;
};

/// Binary membership matrix, one row per sampled subset, one column per task.
/// Rows are stored as sorted member lists; entry(i,j) is 1 iff task j+1 is in
/// row i's subset.
struct DesignMatrix {
  std::int64_t rows = 0;
  int cols = 0;
  std::vector<std::vector<TaskId>> row_members;

  int entry(std::int64_t i, int j) const {
    const auto& m = row_members[static_cast<std::size_t>(i)];
    return std::binary_search(m.begin(), m.end(), j + 1) ? 1 : 0;
  }

  int row_sum(std::int64_t i) const {
    return static_cast<int>(row_members[static_cast<std::size_t>(i)].size());
  }

  Subset row_subset(std::int64_t i) const {
    return Subset(row_members[static_cast<std::size_t>(i)]);
  }
};

/// C(k, a) in exact 64-bit arithmetic; throws invalid_parameter_error on
/// overflow rather than wrapping.
inline std::uint64_t binomial(int k, int a) {
  if (k < 0 || a < 0 || a > k)
    throw invalid_parameter_error("binomial: need 0 <= a <= k");
  if (a > k - a) a = k - a;
  std::uint64_t c = 1;
  for (int i = 1; i <= a; ++i) {
    const std::uint64_t num = static_cast<std::uint64_t>(k - a + i);
    if (c > std::numeric_limits<std::uint64_t>::max() / num)
      throw invalid_parameter_error("binomial: C(" + std::to_string(k) + "," +
                                    std::to_string(a) + ") overflows 64 bits");
    c = c * num / static_cast<std::uint64_t>(i);  // exact: product of i consecutive ints divisible by i!
  }
  return c;
}

namespace detail {

/// Floyd's algorithm: exactly uniform alpha-subset of {1..k} given unbiased
/// integer draws.
inline Subset draw_alpha_subset(int k, int alpha, Prng& g) {
  std::vector<TaskId> chosen;
  chosen.reserve(static_cast<std::size_t>(alpha));
  for (int j = k - alpha + 1; j <= k; ++j) {
    const TaskId t = static_cast<TaskId>(g.uniform_int(1, j));
    if (std::find(chosen.begin(), chosen.end(), t) != chosen.end())
      chosen.push_back(j);
    else
      chosen.push_back(t);
  }
  return Subset(std::move(chosen));
}

inline void check_k_alpha(int k, int alpha) {
  if (k < 1) throw invalid_parameter_error("k must be >= 1, got " + std::to_string(k));
  if (alpha < 1 || alpha > k)
    throw invalid_parameter_error("alpha must be in [1, k]; alpha=" +
                                  std::to_string(alpha) + ", k=" + std::to_string(k));
}

}  // namespace detail

/// n independent uniform draws from the alpha-subsets of {1..k}. Draw i is a
/// pure function of (seed, i); repeats across draws are kept.
inline std::vector<Subset> sample_subsets(int k, int alpha, std::int64_t n,
                                          std::uint64_t seed,
                                          StreamTag tag = StreamTag::subset_draw) {
  detail::check_k_alpha(k, alpha);
  if (n < 1) throw invalid_parameter_error("n must be >= 1, got " + std::to_string(n));
  std::vector<Subset> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Prng g = Prng::stream(seed, tag, static_cast<std::uint64_t>(i));
    out.push_back(detail::draw_alpha_subset(k, alpha, g));
  }
  return out;
}

/// Stacks subsets into the binary design matrix with k columns.
inline DesignMatrix indicator_matrix(const std::vector<Subset>& subsets, int k) {
  if (k < 0) throw invalid_parameter_error("indicator_matrix: k must be >= 0");
  DesignMatrix d;
  d.rows = static_cast<std::int64_t>(subsets.size());
  d.cols = k;
  d.row_members.reserve(subsets.size());
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    if (subsets[i].max_id() > k)
      throw invalid_parameter_error("indicator_matrix: row " + std::to_string(i) +
                                    " contains task id " +
                                    std::to_string(subsets[i].max_id()) +
                                    " > k=" + std::to_string(k));
    d.row_members.push_back(subsets[i].members());
  }
  return d;
}

/// All alpha-subsets of {1..k} in lexicographic member order.
inline std::vector<Subset> enumerate_all_subsets(int k, int alpha) {
  if (k < 0) throw invalid_parameter_error("enumerate_all_subsets: k must be >= 0");
  if (alpha < 0 || alpha > k)
    throw invalid_parameter_error("enumerate_all_subsets: need 0 <= alpha <= k");
  std::vector<Subset> out;
  out.reserve(static_cast<std::size_t>(binomial(k, alpha)));
  std::vector<TaskId> cur(static_cast<std::size_t>(alpha));
  for (int i = 0; i < alpha; ++i) cur[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    out.push_back(Subset(cur));
    // advance to the next combination; rightmost incrementable position
    int pos = alpha - 1;
    while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == k - (alpha - 1 - pos)) --pos;
    if (pos < 0) break;
    ++cur[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < alpha; ++j)
      cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

}  // namespace tasksel
