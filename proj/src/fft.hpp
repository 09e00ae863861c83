#pragma once

#include <complex>
#include <cstddef>

namespace toa::detail {

// In-place unnormalised DFT of length n (sign -1 forward, +1 backward).
// Plans are created once per (n, sign) and reused.
void dft(std::complex<double>* data, std::size_t n, int sign);

}  // namespace toa::detail
