#pragma once

#include <cmath>
#include <vector>

#include "opera/hypothesis.hpp"
#include "opera/mdp.hpp"
#include "opera/random.hpp"

namespace opera::testing {

// Deterministic chain: action 0 moves s -> s+1 (capped), action 1 stays.
// Reward 1 only for (H-1, H-1, 0).
inline TabularMdp chain(int horizon) {
  const int S = horizon;
  const int A = 2;
  std::vector<Matrix> P(horizon, Matrix::Zero(S * A, S));
  std::vector<Matrix> r(horizon, Matrix::Zero(S, A));
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < S; ++s) {
      P[h](s * A + 0, std::min(s + 1, S - 1)) = 1.0;
      P[h](s * A + 1, s) = 1.0;
    }
  }
  r[horizon - 1](horizon - 1, 0) = 1.0;
  return TabularMdp(horizon, S, A, std::move(P), std::move(r), 0);
}

inline Vector random_simplex(int n, Rng& rng) {
  Vector p(n);
  for (int i = 0; i < n; ++i) p(i) = -std::log(1.0 - rng.uniform());
  return p / p.sum();
}

// Random kernels and rewards in [0, 1/H].
inline TabularMdp random_mdp(int S, int A, int H, Rng& rng) {
  std::vector<Matrix> P(H, Matrix::Zero(S * A, S));
  std::vector<Matrix> r(H, Matrix::Zero(S, A));
  for (int h = 0; h < H; ++h) {
    for (int c = 0; c < S * A; ++c) P[h].row(c) = random_simplex(S, rng).transpose();
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) r[h](s, a) = rng.uniform() / H;
  }
  return TabularMdp(H, S, A, std::move(P), std::move(r), 0);
}

inline std::vector<Matrix> random_q(int S, int A, int H, Rng& rng) {
  std::vector<Matrix> q(H, Matrix::Zero(S, A));
  for (auto& m : q)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) m(s, a) = rng.uniform();
  return q;
}

// Every deterministic policy of an S-state, A-action, H-step problem.
inline std::vector<std::vector<std::vector<int>>> all_deterministic(int S, int A, int H) {
  std::vector<std::vector<std::vector<int>>> out;
  const int slots = S * H;
  long long total = 1;
  for (int i = 0; i < slots; ++i) total *= A;
  for (long long code = 0; code < total; ++code) {
    std::vector<std::vector<int>> actions(H, std::vector<int>(S));
    long long c = code;
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        actions[h][s] = static_cast<int>(c % A);
        c /= A;
      }
    out.push_back(actions);
  }
  return out;
}

}  // namespace opera::testing
