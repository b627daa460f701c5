#pragma once

// Dense inner-loop kernels. Every kernel has a scalar reference version and,
// on x86-64, an AVX2+FMA version. The active set is chosen once at startup
// from CPUID and may be overridden with AGEDG_SIMD=scalar|avx2 or set_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace agedg::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
Isa active_isa() noexcept;
/// Throws ConfigError if the requested ISA is not supported on this CPU.
void set_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double squared_distance(std::span<const double> a, std::span<const double> b);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace agedg::kernels
