// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cvtassd/inference.hpp"
#include "cvtassd/tensor.hpp"

namespace cvtassd {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Entry point behind the `cvt_assd` binary; argv[0] is the program name.
int run(std::span<const std::string> argv, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Draws 1-pixel box outlines into a copy of a (3, H, W) image.
Tensor draw_detections(const Tensor& image, std::span<const Detection> dets);

}  // namespace cvtassd
