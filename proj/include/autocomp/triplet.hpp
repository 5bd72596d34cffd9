#pragma once

#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"

namespace autocomp {

// Training/evaluation sample: foreground, background, target composite, and
// the mask used when compositing.
struct Triplet {
  Image fg;
  Image bg;
  Image target;
  SoftMask fg_mask;

  void validate() const {
    if (!fg.same_size(bg) || !fg.same_size(target) || !fg_mask.same_size(fg))
      throw DataError("triplet images and mask must share dimensions");
    if (fg.channels() != 3 || bg.channels() != 3 || target.channels() != 3)
      throw DataError("triplet images must be RGB");
  }
};

}  // namespace autocomp
