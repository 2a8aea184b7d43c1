#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "gsa/tensor.hpp"

namespace gsa {

/// Raised for unreadable or malformed GSAT streams.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * GSAT tensor files:
 *
 *   offset 0   "GSAT"
 *   offset 4   u8 version (1)
 *   offset 5   u8 dtype (0 = float64, 1 = float32)
 *   offset 6   u8 rank
 *   offset 7   rank x u64 little-endian extents
 *   then       row-major little-endian data
 *
 * The tensor's dtype() selects the on-disk precision.
 */
void write_gsat(std::ostream& os, const Tensor& t);
Tensor read_gsat(std::istream& is);

void save_gsat(const std::filesystem::path& path, const Tensor& t);
Tensor load_gsat(const std::filesystem::path& path);

}  // namespace gsa
