#include "bmd/io.hpp"

#include "bmd/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <tuple>

namespace bmd {

namespace {

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw InputError("cannot write " + path);
  return out;
}

bool parse_double(const std::string &tok, double &v) {
  const char *b = tok.data();
  const char *e = b + tok.size();
  if (b != e && *b == '+')
    ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && p == e;
}

bool parse_index(const std::string &tok, long long &v) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc() && p == tok.data() + tok.size();
}

} // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc())
    throw InputError("number formatting failed");
  return std::string(buf, p);
}

MaskedMatrix load_triplets(const std::string &path, std::vector<std::string> *warnings) {
  auto in = open_in(path);
  std::vector<std::tuple<long long, long long, double, std::size_t>> cells;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string p;
    while (std::getline(ss, p, ','))
      parts.push_back(trim(p));
    long long r, c;
    double v;
    if (parts.size() != 3 || !parse_index(parts[0], r) || !parse_index(parts[1], c) ||
        !parse_double(parts[2], v) || r < 0 || c < 0)
      throw ParseError("line " + std::to_string(lineno) + ": expected row,col,value");
    cells.emplace_back(r, c, v, lineno);
  }
  if (cells.empty())
    throw EmptyMaskError("no triplets in " + path);
  long long min_r = std::get<0>(cells.front()), min_c = std::get<1>(cells.front());
  long long max_r = 0, max_c = 0;
  for (auto &[r, c, v, l] : cells) {
    min_r = std::min(min_r, r);
    min_c = std::min(min_c, c);
    max_r = std::max(max_r, r);
    max_c = std::max(max_c, c);
  }
  long long base = (min_r >= 1 && min_c >= 1) ? 1 : 0;
  Index M = static_cast<Index>(max_r - base + 1), N = static_cast<Index>(max_c - base + 1);
  MaskedMatrix A(Mat::Zero(M, N), Mask::Constant(M, N, false));
  for (auto &[r, c, v, l] : cells) {
    Index i = static_cast<Index>(r - base), j = static_cast<Index>(c - base);
    if (A.mask(i, j)) {
      std::string msg = "line " + std::to_string(l) + ": duplicate cell (" + std::to_string(r) + "," +
                        std::to_string(c) + "), keeping the later value";
      if (warnings)
        warnings->push_back(msg);
      else
        std::cerr << "warning: " << msg << "\n";
    }
    A.values(i, j) = v;
    A.mask(i, j) = true;
  }
  return A;
}

MaskedMatrix load_dense(const std::string &path) {
  auto in = open_in(path);
  std::vector<std::vector<std::pair<double, bool>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    std::stringstream ss(t);
    std::string tok;
    std::vector<std::pair<double, bool>> row;
    while (ss >> tok) {
      if (tok == "NA") {
        row.emplace_back(0.0, false);
        continue;
      }
      double v;
      if (!parse_double(tok, v))
        throw ParseError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      row.emplace_back(v, true);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DimensionError("line " + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw EmptyMaskError("no rows in " + path);
  Index M = static_cast<Index>(rows.size()), N = static_cast<Index>(rows.front().size());
  MaskedMatrix A(Mat::Zero(M, N), Mask::Constant(M, N, false));
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < N; ++j) {
      auto [v, obs] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      A.values(i, j) = v;
      A.mask(i, j) = obs;
    }
  return A;
}

void write_triplets(const std::string &path, const MaskedMatrix &A) {
  auto out = open_out(path);
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j))
        out << i << "," << j << "," << format_double(A.values(i, j)) << "\n";
}

void write_dense(const std::string &path, const MaskedMatrix &A) {
  auto out = open_out(path);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      if (j)
        out << " ";
      out << (A.mask(i, j) ? format_double(A.values(i, j)) : std::string("NA"));
    }
    out << "\n";
  }
}

void write_matrix(const std::string &path, const Mat &X) { write_dense(path, MaskedMatrix(X)); }

Mat read_matrix(const std::string &path) {
  MaskedMatrix A = load_dense(path);
  if (!A.fully_observed())
    throw InputError(path + " contains NA entries");
  return A.values;
}

std::map<std::string, std::string> read_key_values(const std::string &path) {
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected key=value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

std::vector<std::pair<int, double>> read_trace(const std::string &path) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::pair<int, double>> out;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (lineno == 1 || t.empty())
      continue;
    auto comma = t.find(',');
    long long it;
    double v;
    if (comma == std::string::npos || !parse_index(t.substr(0, comma), it) ||
        !parse_double(t.substr(comma + 1), v))
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected iteration,mse");
    out.emplace_back(static_cast<int>(it), v);
  }
  return out;
}

} // namespace bmd
