#pragma once

#include "bmd/matrix.hpp"

#include <map>
#include <string>
#include <vector>

namespace bmd {

/// Parses "row,col,value" lines. Indices are 1-based when both minima are at least 1,
/// otherwise 0-based. Later duplicates win; one warning per duplicate goes to `warnings`
/// (or to stderr when null).
MaskedMatrix load_triplets(const std::string &path, std::vector<std::string> *warnings = nullptr);
/// Whitespace-separated rows; "NA" marks an unobserved cell.
MaskedMatrix load_dense(const std::string &path);

/// Writes observed cells as 0-based triplets.
void write_triplets(const std::string &path, const MaskedMatrix &A);
/// Writes values with full round-trip precision; unobserved cells as NA.
void write_dense(const std::string &path, const MaskedMatrix &A);
void write_matrix(const std::string &path, const Mat &X);
/// Reads a fully observed dense matrix.
Mat read_matrix(const std::string &path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

/// Flat key=value file; blank lines and lines starting with '#' are skipped.
std::map<std::string, std::string> read_key_values(const std::string &path);

/// Reads a two-column "iteration,mse" CSV with a header line.
std::vector<std::pair<int, double>> read_trace(const std::string &path);

} // namespace bmd
