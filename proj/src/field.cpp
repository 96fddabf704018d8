#include "diffassim/field.hpp"

#include <cmath>

namespace diffassim {

bool Field::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Field Field::shifted(int shift) const {
    Field out(levels_, points_);
    if (points_ == 0) return out;
    const int s = ((shift % points_) + points_) % points_;
    for (int l = 0; l < levels_; ++l) {
        for (int k = 0; k < points_; ++k) out(l, (k + s) % points_) = (*this)(l, k);
    }
    return out;
}

}  // namespace diffassim
