// Copyright 2026 The twm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher.

#include "twm/kernels/kernels.hpp"

#include <immintrin.h>

namespace twm::kernels::avx2
{
namespace
{
struct F32
{
  using scalar = float;
  using vec = __m256;
  static constexpr std::size_t lanes = 8;
  static vec zero() { return _mm256_setzero_ps(); }
  static vec load(const float * p) { return _mm256_loadu_ps(p); }
  static void store(float * p, vec v) { _mm256_storeu_ps(p, v); }
  static vec set1(float x) { return _mm256_set1_ps(x); }
  static vec fmadd(vec a, vec b, vec c) { return _mm256_fmadd_ps(a, b, c); }
  static vec add(vec a, vec b) { return _mm256_add_ps(a, b); }
  static float hsum(vec v)
  {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

struct F64
{
  using scalar = double;
  using vec = __m256d;
  static constexpr std::size_t lanes = 4;
  static vec zero() { return _mm256_setzero_pd(); }
  static vec load(const double * p) { return _mm256_loadu_pd(p); }
  static void store(double * p, vec v) { _mm256_storeu_pd(p, v); }
  static vec set1(double x) { return _mm256_set1_pd(x); }
  static vec fmadd(vec a, vec b, vec c) { return _mm256_fmadd_pd(a, b, c); }
  static vec add(vec a, vec b) { return _mm256_add_pd(a, b); }
  static double hsum(vec v)
  {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

template <typename V>
typename V::scalar dot_impl(
  const typename V::scalar * a, const typename V::scalar * b, std::size_t n)
{
  constexpr std::size_t w = V::lanes;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
    acc1 = V::fmadd(V::load(a + i + w), V::load(b + i + w), acc1);
  }
  for (; i + w <= n; i += w) {
    acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
  }
  typename V::scalar acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

template <typename V>
void axpy_impl(
  typename V::scalar alpha, const typename V::scalar * x, typename V::scalar * y, std::size_t n)
{
  constexpr std::size_t w = V::lanes;
  const auto va = V::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) {
    V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
  }
  for (; i < n; ++i) {
    y[i] += alpha * x[i];
  }
}

// Register block: 4 rows of C by two vectors of columns.
template <typename V>
void gemm_nn_impl(
  std::size_t m, std::size_t n, std::size_t k, const typename V::scalar * a,
  const typename V::scalar * b, typename V::scalar * c)
{
  using T = typename V::scalar;
  constexpr std::size_t w = V::lanes;
  constexpr std::size_t nb = 2 * w;
  const std::size_t n_full = n - n % nb;

  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T * a0 = a + (i + 0) * k;
    const T * a1 = a + (i + 1) * k;
    const T * a2 = a + (i + 2) * k;
    const T * a3 = a + (i + 3) * k;
    T * c0 = c + (i + 0) * n;
    T * c1 = c + (i + 1) * n;
    T * c2 = c + (i + 2) * n;
    T * c3 = c + (i + 3) * n;
    for (std::size_t j = 0; j < n_full; j += nb) {
      auto r00 = V::load(c0 + j), r01 = V::load(c0 + j + w);
      auto r10 = V::load(c1 + j), r11 = V::load(c1 + j + w);
      auto r20 = V::load(c2 + j), r21 = V::load(c2 + j + w);
      auto r30 = V::load(c3 + j), r31 = V::load(c3 + j + w);
      for (std::size_t p = 0; p < k; ++p) {
        const T * brow = b + p * n + j;
        const auto b0 = V::load(brow);
        const auto b1 = V::load(brow + w);
        auto av = V::set1(a0[p]);
        r00 = V::fmadd(av, b0, r00);
        r01 = V::fmadd(av, b1, r01);
        av = V::set1(a1[p]);
        r10 = V::fmadd(av, b0, r10);
        r11 = V::fmadd(av, b1, r11);
        av = V::set1(a2[p]);
        r20 = V::fmadd(av, b0, r20);
        r21 = V::fmadd(av, b1, r21);
        av = V::set1(a3[p]);
        r30 = V::fmadd(av, b0, r30);
        r31 = V::fmadd(av, b1, r31);
      }
      V::store(c0 + j, r00);
      V::store(c0 + j + w, r01);
      V::store(c1 + j, r10);
      V::store(c1 + j + w, r11);
      V::store(c2 + j, r20);
      V::store(c2 + j + w, r21);
      V::store(c3 + j, r30);
      V::store(c3 + j + w, r31);
    }
    if (n_full < n) {
      for (std::size_t r = 0; r < 4; ++r) {
        const T * arow = a + (i + r) * k;
        T * crow = c + (i + r) * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = arow[p];
          const T * brow = b + p * n;
          std::size_t j = n_full;
          for (; j + w <= n; j += w) {
            V::store(crow + j, V::fmadd(V::set1(aip), V::load(brow + j), V::load(crow + j)));
          }
          for (; j < n; ++j) {
            crow[j] += aip * brow[j];
          }
        }
      }
    }
  }
  for (; i < m; ++i) {
    const T * arow = a + i * k;
    T * crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      axpy_impl<V>(arow[p], b + p * n, crow, n);
    }
  }
}
}  // namespace

float dot(const float * a, const float * b, std::size_t n) { return dot_impl<F32>(a, b, n); }
double dot(const double * a, const double * b, std::size_t n) { return dot_impl<F64>(a, b, n); }
void axpy(float alpha, const float * x, float * y, std::size_t n)
{
  axpy_impl<F32>(alpha, x, y, n);
}
void axpy(double alpha, const double * x, double * y, std::size_t n)
{
  axpy_impl<F64>(alpha, x, y, n);
}
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c)
{
  gemm_nn_impl<F32>(m, n, k, a, b, c);
}
void gemm_nn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c)
{
  gemm_nn_impl<F64>(m, n, k, a, b, c);
}

}  // namespace twm::kernels::avx2
