#pragma once

#include <string>

#include "seqcomm/nets.hpp"

namespace seqcomm::cli {

// Text checkpoint, format "seqcomm-ckpt-v1": a header line, a parameter
// count, then per parameter one line "name dims d0 [d1]" followed by the
// values in row-major order with full double precision.
void save_checkpoint(nn::Networks& nets, const std::string& path);

// Loads into an existing network; names and shapes must match exactly.
void load_checkpoint(nn::Networks& nets, const std::string& path);

}  // namespace seqcomm::cli
