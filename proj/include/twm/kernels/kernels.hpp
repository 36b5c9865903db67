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

#ifndef TWM__KERNELS__KERNELS_HPP_
#define TWM__KERNELS__KERNELS_HPP_

#include <cstddef>
#include <span>
#include <string_view>

// Dense arithmetic kernels behind the denoiser. Every routine has a portable
// scalar reference and, on x86-64, an AVX2/FMA variant. The variant is picked
// once at startup from CPUID (override with TWM_SIMD=scalar|avx2) and can be
// switched at runtime for equivalence testing.
//
// All matrices are dense row-major with the leading dimension equal to the
// column count. Every gemm accumulates into C.

namespace twm::kernels
{

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// True when this build carries the AVX2 variant and the CPU supports it.
bool avx2_available();

/// ISA currently used by the dispatching front-end.
Isa active_isa();

/// Select the ISA. Requesting Avx2 where it is unavailable throws std::runtime_error.
void set_isa(Isa isa);

// Dispatching front-end.

float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// C(m x n) += A(m x k) * B(k x n)
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c);
void gemm_nn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c);

// C(m x n) += A(m x k) * B(n x k)^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c);
void gemm_nt(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c);

// C(m x n) += A(k x m)^T * B(k x n)
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c);
void gemm_tn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c);

// Per-ISA entry points, used by the equivalence tests.

namespace scalar
{
float dot(const float * a, const float * b, std::size_t n);
double dot(const double * a, const double * b, std::size_t n);
void axpy(float alpha, const float * x, float * y, std::size_t n);
void axpy(double alpha, const double * x, double * y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c);
void gemm_nn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c);
}  // namespace scalar

#if defined(TWM_HAVE_AVX2)
namespace avx2
{
float dot(const float * a, const float * b, std::size_t n);
double dot(const double * a, const double * b, std::size_t n);
void axpy(float alpha, const float * x, float * y, std::size_t n);
void axpy(double alpha, const double * x, double * y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c);
void gemm_nn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c);
}  // namespace avx2
#endif

}  // namespace twm::kernels

#endif  // TWM__KERNELS__KERNELS_HPP_
