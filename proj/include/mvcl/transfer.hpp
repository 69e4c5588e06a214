#pragma once

#include "mvcl/model.hpp"

namespace mvcl {

// Copies every feature-extractor and classifier parameter of the two
// single-view models into the matching multiview branch (name mapping
// `<view>.<layer>` -> `<branch>.<layer>`). Merge-branch parameters are left
// untouched and everything stays trainable.
//
// All-or-nothing: every mapped parameter is shape-checked before anything is
// written, and a mismatch raises ConfigError naming the offending layer
// (e.g. `frontal.classifier.0`).
void transfer_weights(MultiviewModel& target, SingleViewModel& frontal_src,
                      SingleViewModel& lateral_src);

} // namespace mvcl
