#include "hdrsynth/tensor.hpp"

#include <cmath>

namespace hdrsynth {

bool Tensor::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace hdrsynth
