#include "splitlab/symmetry_diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "splitlab/samplers.hpp"

namespace splitlab {

std::vector<int> solve_assignment_min(const Eigen::MatrixXd& cost,
                                      std::pair<Eigen::VectorXd, Eigen::VectorXd>* duals) {
  if (cost.rows() != cost.cols() || cost.rows() < 1)
    throw std::invalid_argument("solve_assignment_min: square nonempty matrix required");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();

  // Jonker-Volgenant with row-by-row augmentation over 1-indexed arrays.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> rowsol(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) rowsol[p[j] - 1] = j - 1;
  if (duals) {
    duals->first.resize(n);
    duals->second.resize(n);
    for (int i = 1; i <= n; ++i) duals->first(i - 1) = u[i];
    for (int j = 1; j <= n; ++j) duals->second(j - 1) = v[j];
  }
  return rowsol;
}

namespace {

// Kuhn augmenting path on the tight-edge graph.
bool try_augment(int row, const std::vector<std::vector<int>>& adj,
                 const std::vector<char>& col_banned, std::vector<int>& col_to_row,
                 std::vector<char>& visited) {
  for (int col : adj[row]) {
    if (col_banned[col] || visited[col]) continue;
    visited[col] = 1;
    if (col_to_row[col] < 0 ||
        try_augment(col_to_row[col], adj, col_banned, col_to_row, visited)) {
      col_to_row[col] = row;
      return true;
    }
  }
  return false;
}

// Do rows [first_row, n) admit a perfect matching into non-banned columns?
bool feasible(int first_row, int n, const std::vector<std::vector<int>>& adj,
              const std::vector<char>& col_banned) {
  std::vector<int> col_to_row(n, -1);
  for (int i = first_row; i < n; ++i) {
    std::vector<char> visited(n, 0);
    if (!try_augment(i, adj, col_banned, col_to_row, visited)) return false;
  }
  return true;
}

// Lexicographically smallest perfect matching supported on tight edges.
// Any optimal assignment uses only edges tight under the optimal duals, so
// searching this subgraph enumerates exactly the optima.
std::vector<int> lexicographic_optimum(const Eigen::MatrixXd& cost,
                                       const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                       const std::vector<int>& fallback) {
  const int n = static_cast<int>(cost.rows());
  const double tol = 1e-9;
  std::vector<std::vector<int>> adj(n);
  bool any_tie = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (cost(i, j) - u(i) - v(j) <= tol) adj[i].push_back(j);
    if (adj[i].size() > 1) any_tie = true;
  }
  if (!any_tie) return fallback;

  std::vector<char> banned(n, 0);
  std::vector<int> perm(n, -1);
  for (int i = 0; i < n; ++i) {
    bool fixed = false;
    for (int j : adj[i]) {
      if (banned[j]) continue;
      banned[j] = 1;
      if (feasible(i + 1, n, adj, banned)) {
        perm[i] = j;
        fixed = true;
        break;
      }
      banned[j] = 0;
    }
    if (!fixed) return fallback;  // tolerance artifact; keep the exact optimum
  }
  return perm;
}

}  // namespace

AlignmentResult align(const Eigen::MatrixXd& first_layer_a, const Eigen::MatrixXd& first_layer_b) {
  if (first_layer_a.rows() != first_layer_b.rows() ||
      first_layer_a.cols() != first_layer_b.cols())
    throw std::invalid_argument("align: matrices must share dimensions");
  const int M = static_cast<int>(first_layer_a.rows());

  Eigen::VectorXd norm_a = first_layer_a.rowwise().norm();
  Eigen::VectorXd norm_b = first_layer_b.rowwise().norm();
  Eigen::MatrixXd S = (first_layer_a * first_layer_b.transpose()).cwiseAbs();
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) {
      if (norm_a(i) == 0.0 || norm_b(j) == 0.0) {
        S(i, j) = 0.0;
      } else {
        S(i, j) = std::min(1.0, S(i, j) / (norm_a(i) * norm_b(j)));
      }
    }
  }

  std::pair<Eigen::VectorXd, Eigen::VectorXd> duals;
  const std::vector<int> base = solve_assignment_min(-S, &duals);
  AlignmentResult result;
  result.permutation = lexicographic_optimum(-S, duals.first, duals.second, base);
  result.similarity = S;

  result.row_margins.resize(M);
  for (int i = 0; i < M; ++i) {
    double best = 0.0, second = 0.0;
    for (int j = 0; j < M; ++j) {
      if (S(i, j) > best) {
        second = best;
        best = S(i, j);
      } else if (S(i, j) > second) {
        second = S(i, j);
      }
    }
    result.row_margins(i) = best - second;
  }
  result.min_margin = M > 0 ? result.row_margins.minCoeff() : 0.0;

  double value = 0.0;
  for (int i = 0; i < M; ++i) value += S(i, result.permutation[i]);
  result.objective_value = value;
  return result;
}

ChainPermutationRecord track_chain(const SampleTrace& trace) {
  if (trace.draws.rows() < 1) throw std::invalid_argument("track_chain: empty trace");
  const int T = static_cast<int>(trace.draws.rows()) - 1;
  const int M = trace.width;
  const int p = trace.input_dim;

  ChainPermutationRecord record;
  record.transitions = T;
  std::vector<int> identity(M);
  for (int m = 0; m < M; ++m) identity[m] = m;
  record.cumulative.push_back(identity);
  if (T == 0) return record;

  int switches = 0;
  double margin_sum = 0.0;
  NetworkParams prev = NetworkParams::from_flat(trace.draws.row(0).transpose(), M, p);
  for (int t = 1; t <= T; ++t) {
    NetworkParams cur = NetworkParams::from_flat(trace.draws.row(t).transpose(), M, p);
    AlignmentResult alignment = align(cur.first_layer, prev.first_layer);
    margin_sum += alignment.min_margin;

    const std::vector<int>& before = record.cumulative.back();
    std::vector<int> cumulative(M);
    bool moved = false;
    for (int m = 0; m < M; ++m) {
      cumulative[m] = before[alignment.permutation[m]];
      if (alignment.permutation[m] != m) moved = true;
    }
    if (moved) ++switches;
    record.local_perms.push_back(alignment.permutation);
    record.cumulative.push_back(std::move(cumulative));
    prev = std::move(cur);
  }
  record.switch_rate = static_cast<double>(switches) / T;
  record.mean_min_margin = margin_sum / T;
  return record;
}

std::vector<SwitchRateCell> switch_rate_summary(const std::vector<ChainDiagEntry>& entries) {
  if (entries.empty()) throw std::invalid_argument("switch_rate_summary: no records");
  std::map<std::pair<int, int>, SwitchRateCell> cells;
  for (const ChainDiagEntry& entry : entries) {
    SwitchRateCell& cell = cells[{entry.n, entry.width}];
    cell.n = entry.n;
    cell.width = entry.width;
    ++cell.chains;
    cell.mean_switch_rate += entry.record.switch_rate;
    cell.mean_expected_switches += entry.record.switch_rate * entry.record.transitions;
    cell.mean_min_margin += entry.record.mean_min_margin;
  }
  std::vector<SwitchRateCell> out;
  out.reserve(cells.size());
  for (auto& [key, cell] : cells) {
    cell.mean_switch_rate /= cell.chains;
    cell.mean_expected_switches /= cell.chains;
    cell.mean_min_margin /= cell.chains;
    out.push_back(cell);
  }
  return out;
}

}  // namespace splitlab
