#pragma once

// Test-side oracles computed independently of the library under test:
// literal loop counting, exact rational comparison and long-double scalar
// attention with a plain (unshifted) softmax. Nothing here shares code with
// the implementation beyond primitive types.

#include <cstdint>
#include <vector>

namespace oracles {

// MAC count of an [m,k] x [k,n] GEMM by literal loop counting.
inline std::uint64_t counted_macs(std::uint64_t m, std::uint64_t k, std::uint64_t n) {
  std::uint64_t c = 0;
  for (std::uint64_t i = 0; i < m; ++i)
    for (std::uint64_t j = 0; j < k; ++j)
      for (std::uint64_t l = 0; l < n; ++l) ++c;
  return c;
}

// a1/b1 == a2/b2 as exact rationals.
inline bool same_ratio(std::uint64_t a1, std::uint64_t b1, std::uint64_t a2, std::uint64_t b2) {
  return static_cast<unsigned __int128>(a1) * b2 == static_cast<unsigned __int128>(a2) * b1;
}

// a1/b1 < a2/b2 as exact rationals.
inline bool less_ratio(std::uint64_t a1, std::uint64_t b1, std::uint64_t a2, std::uint64_t b2) {
  return static_cast<unsigned __int128>(a1) * b2 < static_cast<unsigned __int128>(a2) * b1;
}

// Scalar attention over [b][h][i][j]-flattened buffers, long double
// accumulation, softmax without the max shift. Safe for |q|,|k| <= 1 and
// dk small enough that exp(dk) fits comfortably in long double.
inline std::vector<double> scalar_attention(const std::vector<double>& q,
                                            const std::vector<double>& k,
                                            const std::vector<double>& v, std::uint64_t B,
                                            std::uint64_t H, std::uint64_t N, std::uint64_t dk,
                                            long double* worst_row_err = nullptr) {
  std::vector<double> out(B * H * N * dk, 0.0);
  std::vector<long double> logits(N), probs(N);
  long double worst = 0.0L;
  auto at = [&](const std::vector<double>& t, std::uint64_t b, std::uint64_t h, std::uint64_t i,
                std::uint64_t j, std::uint64_t last) {
    return t[((b * H + h) * N + i) * last + j];
  };
  for (std::uint64_t b = 0; b < B; ++b)
    for (std::uint64_t h = 0; h < H; ++h)
      for (std::uint64_t i = 0; i < N; ++i) {
        for (std::uint64_t jn = 0; jn < N; ++jn) {
          long double acc = 0.0L;
          for (std::uint64_t d = 0; d < dk; ++d)
            acc += static_cast<long double>(at(q, b, h, i, d, dk)) *
                   static_cast<long double>(at(k, b, h, jn, d, dk));
          logits[jn] = acc;
        }
        long double denom = 0.0L;
        for (std::uint64_t jn = 0; jn < N; ++jn) {
          probs[jn] = expl(logits[jn]);
          denom += probs[jn];
        }
        long double sum = 0.0L;
        for (std::uint64_t jn = 0; jn < N; ++jn) {
          probs[jn] /= denom;
          sum += probs[jn];
        }
        const long double err = sum > 1.0L ? sum - 1.0L : 1.0L - sum;
        if (err > worst) worst = err;
        for (std::uint64_t d = 0; d < dk; ++d) {
          long double acc = 0.0L;
          for (std::uint64_t jn = 0; jn < N; ++jn)
            acc += probs[jn] * static_cast<long double>(at(v, b, h, jn, d, dk));
          out[((b * H + h) * N + i) * dk + d] = static_cast<double>(acc);
        }
      }
  if (worst_row_err) *worst_row_err = worst;
  return out;
}

}  // namespace oracles
