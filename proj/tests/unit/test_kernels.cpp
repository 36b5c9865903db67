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

#include "twm/kernels/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace k = twm::kernels;

namespace
{

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64 & rng)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto & x : v) {
    x = static_cast<T>(u(rng));
  }
  return v;
}

template <typename T>
void naive_gemm(std::size_t m, std::size_t n, std::size_t kk, const T * a, const T * b, T * c)
{
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double acc = 0;
      for (std::size_t p = 0; p < kk; ++p) {
        acc += static_cast<long double>(a[i * kk + p]) * b[p * n + j];
      }
      c[i * n + j] += static_cast<T>(acc);
    }
  }
}

struct IsaGuard
{
  k::Isa saved = k::active_isa();
  ~IsaGuard() { k::set_isa(saved); }
};

}  // namespace

TEST_CASE("scalar gemm_nn matches a naive triple loop")
{
  std::mt19937_64 rng(1);
  for (auto [m, n, kk] : {std::array<std::size_t, 3>{1, 1, 1}, {5, 7, 3}, {17, 33, 9}, {64, 48, 32}}) {
    auto a = random_vec<double>(m * kk, rng);
    auto b = random_vec<double>(kk * n, rng);
    std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
    k::scalar::gemm_nn(m, n, kk, a.data(), b.data(), c1.data());
    naive_gemm(m, n, kk, a.data(), b.data(), c2.data());
    for (std::size_t i = 0; i < c1.size(); ++i) {
      CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));
    }
  }
}

#if defined(TWM_HAVE_AVX2)
TEST_CASE("avx2 kernels agree with scalar kernels")
{
  if (!k::avx2_available()) {
    MESSAGE("AVX2 not supported on this CPU; skipping");
    return;
  }
  std::mt19937_64 rng(2);
  SUBCASE("dot and axpy, all tail lengths")
  {
    for (std::size_t n = 0; n < 70; ++n) {
      auto af = random_vec<float>(n, rng);
      auto bf = random_vec<float>(n, rng);
      CHECK(k::avx2::dot(af.data(), bf.data(), n) ==
            doctest::Approx(k::scalar::dot(af.data(), bf.data(), n)).epsilon(1e-5));
      auto ad = random_vec<double>(n, rng);
      auto bd = random_vec<double>(n, rng);
      CHECK(k::avx2::dot(ad.data(), bd.data(), n) ==
            doctest::Approx(k::scalar::dot(ad.data(), bd.data(), n)).epsilon(1e-13));
      auto y1 = bd;
      auto y2 = bd;
      k::avx2::axpy(0.37, ad.data(), y1.data(), n);
      k::scalar::axpy(0.37, ad.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
      }
    }
  }
  SUBCASE("gemm_nn over ragged shapes")
  {
    for (std::size_t m : {1, 3, 4, 5, 13}) {
      for (std::size_t n : {1, 7, 8, 16, 17, 40}) {
        for (std::size_t kk : {1, 2, 9, 32}) {
          auto a = random_vec<float>(m * kk, rng);
          auto b = random_vec<float>(kk * n, rng);
          std::vector<float> c1(m * n, 1.0f), c2(m * n, 1.0f);
          k::avx2::gemm_nn(m, n, kk, a.data(), b.data(), c1.data());
          k::scalar::gemm_nn(m, n, kk, a.data(), b.data(), c2.data());
          for (std::size_t i = 0; i < c1.size(); ++i) {
            CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-5));
          }
          auto ad = random_vec<double>(m * kk, rng);
          auto bd = random_vec<double>(kk * n, rng);
          std::vector<double> d1(m * n, 0.0), d2(m * n, 0.0);
          k::avx2::gemm_nn(m, n, kk, ad.data(), bd.data(), d1.data());
          k::scalar::gemm_nn(m, n, kk, ad.data(), bd.data(), d2.data());
          for (std::size_t i = 0; i < d1.size(); ++i) {
            CHECK(d1[i] == doctest::Approx(d2[i]).epsilon(1e-13));
          }
        }
      }
    }
  }
}
#endif

TEST_CASE("transposed gemms agree with explicit transposes under every ISA")
{
  IsaGuard guard;
  std::vector<k::Isa> isas{k::Isa::Scalar};
  if (k::avx2_available()) {
    isas.push_back(k::Isa::Avx2);
  }
  std::mt19937_64 rng(3);
  const std::size_t m = 6, n = 11, kk = 5;
  auto a = random_vec<double>(m * kk, rng);
  auto bt = random_vec<double>(n * kk, rng);
  auto at = random_vec<double>(kk * m, rng);
  auto b = random_vec<double>(kk * n, rng);
  for (auto isa : isas) {
    k::set_isa(isa);
    CAPTURE(k::isa_name(isa));
    std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0);
    k::gemm_nt(m, n, kk, a.data(), bt.data(), c1.data());
    std::vector<double> b_plain(kk * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < kk; ++p) {
        b_plain[p * n + i] = bt[i * kk + p];
      }
    }
    naive_gemm(m, n, kk, a.data(), b_plain.data(), c2.data());
    for (std::size_t i = 0; i < c1.size(); ++i) {
      CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));
    }
    std::vector<double> c3(m * n, 0.0), c4(m * n, 0.0);
    k::gemm_tn(m, n, kk, at.data(), b.data(), c3.data());
    std::vector<double> a_plain(m * kk);
    for (std::size_t p = 0; p < kk; ++p) {
      for (std::size_t i = 0; i < m; ++i) {
        a_plain[i * kk + p] = at[p * m + i];
      }
    }
    naive_gemm(m, n, kk, a_plain.data(), b.data(), c4.data());
    for (std::size_t i = 0; i < c3.size(); ++i) {
      CHECK(c3[i] == doctest::Approx(c4[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("dispatching dot rejects length mismatch")
{
  std::vector<double> a(3), b(4);
  CHECK_THROWS_AS(k::dot(std::span<const double>(a), std::span<const double>(b)), std::invalid_argument);
}
