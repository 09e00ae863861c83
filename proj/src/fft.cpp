#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace toa::detail {

namespace {

std::mutex plan_lock;
std::map<std::pair<std::size_t, int>, fftw_plan> plans;

fftw_plan plan_for(std::size_t n, int sign)
{
    std::lock_guard<std::mutex> guard(plan_lock);
    auto key = std::make_pair(n, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    // Planning overwrites its buffers, so plan on scratch memory.
    std::vector<std::complex<double>> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign == -1 ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(key, p);
    return p;
}

}  // namespace

void dft(std::complex<double>* data, std::size_t n, int sign)
{
    fftw_plan p = plan_for(n, sign);
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, buf, buf);
}

}  // namespace toa::detail
