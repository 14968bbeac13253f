#pragma once

#include <string>
#include <vector>

#include "flushlab/field.hpp"

namespace flushlab::io {

// Binary layout (little endian): 8-byte magic "FLUSHF2D", int32 nx, int32 ny, f64 x_min, f64 x_max,
// f64 L, int32 ncomp, f64 time, then ncomp blocks of (ny+1)*nx f64 samples, row-major in (y, x).
void write_field(const std::string& path, const field::Field2D& u);
field::Field2D read_field(const std::string& path);

// CSV with columns x, y, c0[, c1].
void write_field_csv(const std::string& path, const field::Field2D& u);

// Columnar CSV with a fixed %.17g format so reruns are byte-identical.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

std::string format_number(double v);

}  // namespace flushlab::io
