#pragma once

#include <string>
#include <vector>

#include "nlsfam/grid.hpp"

namespace nlsfam {

// Binary dump: interleaved little-endian float64 (re, im) pairs, plus a JSON
// sidecar <path>.json holding {L, M, t}. Round-trips bit-identically.
void save_field(const std::string& path, const ComplexField& f, double t);
ComplexField load_field(const std::string& path, double* t_out = nullptr);

// CSV with a header row; values at 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Deterministic text formatting used by all writers.
std::string format_g17(double v);

// 64-bit FNV-1a of a byte string, as fixed-width hex.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace nlsfam
