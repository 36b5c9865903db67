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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace twm::kernels
{
namespace
{
Isa detect_default()
{
  if (const char * env = std::getenv("TWM_SIMD")) {
    const std::string v(env);
    if (v == "scalar") {
      return Isa::Scalar;
    }
    if (v == "avx2" && avx2_available()) {
      return Isa::Avx2;
    }
  }
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa> & current()
{
  static std::atomic<Isa> isa{detect_default()};
  return isa;
}

template <typename T>
std::vector<T> & scratch()
{
  thread_local std::vector<T> buf;
  return buf;
}

// dst(cols x rows) = src(rows x cols)^T
template <typename T>
void transpose_into(const T * src, std::size_t rows, std::size_t cols, std::vector<T> & dst)
{
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c * rows + r] = src[r * cols + c];
    }
  }
}

template <typename T>
void gemm_nn_dispatch(std::size_t m, std::size_t n, std::size_t k, const T * a, const T * b, T * c)
{
#if defined(TWM_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    avx2::gemm_nn(m, n, k, a, b, c);
    return;
  }
#endif
  scalar::gemm_nn(m, n, k, a, b, c);
}

template <typename T>
void gemm_nt_impl(std::size_t m, std::size_t n, std::size_t k, const T * a, const T * b, T * c)
{
  auto & bt = scratch<T>();
  transpose_into(b, n, k, bt);
  gemm_nn_dispatch(m, n, k, a, bt.data(), c);
}

template <typename T>
void gemm_tn_impl(std::size_t m, std::size_t n, std::size_t k, const T * a, const T * b, T * c)
{
  auto & at = scratch<T>();
  transpose_into(a, k, m, at);
  gemm_nn_dispatch(m, n, k, at.data(), b, c);
}

template <typename T>
T dot_impl(std::span<const T> a, std::span<const T> b)
{
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
#if defined(TWM_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    return avx2::dot(a.data(), b.data(), a.size());
  }
#endif
  return scalar::dot(a.data(), b.data(), a.size());
}

template <typename T>
void axpy_impl(T alpha, std::span<const T> x, std::span<T> y)
{
  if (x.size() != y.size()) {
    throw std::invalid_argument("axpy: length mismatch");
  }
#if defined(TWM_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    avx2::axpy(alpha, x.data(), y.data(), x.size());
    return;
  }
#endif
  scalar::axpy(alpha, x.data(), y.data(), x.size());
}
}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool avx2_available()
{
#if defined(TWM_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa)
{
  if (isa == Isa::Avx2 && !avx2_available()) {
    throw std::runtime_error("AVX2 kernels are not available on this build/CPU");
  }
  current().store(isa, std::memory_order_relaxed);
}

float dot(std::span<const float> a, std::span<const float> b) { return dot_impl(a, b); }
double dot(std::span<const double> a, std::span<const double> b) { return dot_impl(a, b); }
void axpy(float alpha, std::span<const float> x, std::span<float> y) { axpy_impl(alpha, x, y); }
void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
  axpy_impl(alpha, x, y);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c)
{
  gemm_nn_dispatch(m, n, k, a, b, c);
}
void gemm_nn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c)
{
  gemm_nn_dispatch(m, n, k, a, b, c);
}
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c)
{
  gemm_nt_impl(m, n, k, a, b, c);
}
void gemm_nt(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c)
{
  gemm_nt_impl(m, n, k, a, b, c);
}
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c)
{
  gemm_tn_impl(m, n, k, a, b, c);
}
void gemm_tn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c)
{
  gemm_tn_impl(m, n, k, a, b, c);
}

}  // namespace twm::kernels
