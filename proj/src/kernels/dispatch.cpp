#include <atomic>
#include <cstdlib>
#include <string>

#include "agedg/error.hpp"
#include "agedg/kernels.hpp"

namespace agedg::kernels {

namespace {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
  double (*squared_distance)(const double*, const double*, std::size_t) noexcept;
};

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::axpy, &scalar::squared_distance};
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::axpy, &avx2::squared_distance};

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() noexcept {
  if (const char* env = std::getenv("AGEDG_SIMD")) {
    const std::string value(env);
    if (value == "scalar") return Isa::scalar;
    if (value == "avx2" && cpu_has_avx2()) return Isa::avx2;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const KernelTable& table() noexcept {
  return current().load(std::memory_order_relaxed) == Isa::avx2 ? kAvx2Table : kScalarTable;
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ShapeError("kernel operands differ in length: " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) noexcept { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("SIMD instruction set '" + std::string(isa_name(isa)) +
                      "' is not supported on this CPU");
  }
  current().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size());
  table().axpy(alpha, x.data(), y.data(), x.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return table().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace agedg::kernels
