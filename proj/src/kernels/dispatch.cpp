#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "pgnaa/kernels.hpp"

namespace pgnaa::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(PGNAA_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(PGNAA_HAVE_NEON)
      return true;  // mandatory on aarch64
#else
      return false;
#endif
  }
  return false;
}

Isa detect_best() {
  // PGNAA_ISA=scalar pins the reference path (useful when comparing machines).
  if (const char* env = std::getenv("PGNAA_ISA"); env != nullptr && std::string(env) == "scalar") {
    return Isa::Scalar;
  }
  if (cpu_supports(Isa::Avx2)) return Isa::Avx2;
  if (cpu_supports(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{detect_best()};
  return slot;
}

std::atomic<const KernelTable*>& table_slot() {
  static std::atomic<const KernelTable*> slot{&table_for(active_slot().load())};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& table_for(Isa isa) {
  if (!cpu_supports(isa)) {
    throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(PGNAA_HAVE_AVX2)
    case Isa::Avx2:
      return detail::avx2_table();
#endif
#if defined(PGNAA_HAVE_NEON)
    case Isa::Neon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  const KernelTable& table = table_for(isa);
  active_slot().store(isa, std::memory_order_relaxed);
  table_slot().store(&table, std::memory_order_relaxed);
}

const KernelTable& active() { return *table_slot().load(std::memory_order_relaxed); }

}  // namespace pgnaa::kernels
