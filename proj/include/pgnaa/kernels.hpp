#pragma once

// Dense double-precision kernels behind a runtime-selected dispatch table.
//
// Every kernel has a scalar reference implementation; vector variants
// (AVX2+FMA on x86-64, NEON on aarch64) are chosen once at startup from the
// CPU feature bits. Vector variants reassociate sums, so results agree with
// the scalar path to rounding, not bit-for-bit. On a given machine the
// selected path is fixed, which keeps runs reproducible.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace pgnaa::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
};

// Tables for the ISAs compiled into this binary and supported by this CPU.
std::vector<Isa> available_isas();
const KernelTable& table_for(Isa isa);

Isa active_isa();
// Overrides the active table. Throws if `isa` is not available.
void set_active_isa(Isa isa);

const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(),
                                   a.size() < b.size() ? a.size() : b.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

namespace detail {
const KernelTable& scalar_table();
#if defined(PGNAA_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(PGNAA_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace pgnaa::kernels
