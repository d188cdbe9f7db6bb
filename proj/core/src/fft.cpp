#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "v2tex/error.hpp"

namespace v2tex::detail {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are cached per (height, width, direction) for the life of
// the process.
class PlanCache {
 public:
  fftw_plan get(int height, int width, bool inverse) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(height, width, inverse);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* scratch = fftw_alloc_complex(static_cast<std::size_t>(height) * width);
    fftw_plan plan = fftw_plan_dft_2d(height, width, scratch, scratch,
                                      inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    if (plan == nullptr) throw Error("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void fft2d(std::span<Complex> field, int height, int width, bool inverse) {
  if (field.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ValidationError("fft2d: field size does not match dimensions");
  }
  fftw_plan plan = cache().get(height, width, inverse);
  auto* data = reinterpret_cast<fftw_complex*>(field.data());
  fftw_execute_dft(plan, data, data);
}

}  // namespace v2tex::detail
