#ifndef APLICUR_MATRIX_MARKET_HPP
#define APLICUR_MATRIX_MARKET_HPP

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"

namespace aplicur {

/// Write a matrix in Matrix Market format: coordinate for sparse storage,
/// array for dense. Values use %.17g so a read-back is bit-exact.
inline void write_matrix_market(const Matrix& a, std::ostream& out) {
  char buf[64];
  if (a.is_sparse()) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = a.col_ptr()[static_cast<std::size_t>(j)]; k < a.col_ptr()[static_cast<std::size_t>(j) + 1]; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", a.values()[static_cast<std::size_t>(k)]);
        out << (a.row_idx()[static_cast<std::size_t>(k)] + 1) << " " << (j + 1) << " " << buf << "\n";
      }
  } else {
    out << "%%MatrixMarket matrix array real general\n";
    out << a.rows() << " " << a.cols() << "\n";
    for (double v : a.dense_data()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << "\n";
    }
  }
}

inline void write_matrix_market(const Matrix& a, const std::string& path) {
  std::ofstream f(path);
  detail::require(f.good(), ErrorKind::io, "cannot open for writing: " + path);
  write_matrix_market(a, f);
  detail::require(f.good(), ErrorKind::io, "write failed: " + path);
}

inline Matrix read_matrix_market(std::istream& in) {
  std::string header;
  if (!std::getline(in, header))
    detail::fail(ErrorKind::io, "matrix market: empty stream");
  std::istringstream hs(header);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  detail::require(banner == "%%MatrixMarket" && object == "matrix", ErrorKind::io,
                  "matrix market: bad header: " + header);
  detail::require(format == "coordinate" || format == "array", ErrorKind::io,
                  "matrix market: unsupported format: " + format);
  detail::require(field == "real" || field == "integer", ErrorKind::io,
                  "matrix market: unsupported field: " + field);
  detail::require(symmetry == "general", ErrorKind::io,
                  "matrix market: only general symmetry supported");

  std::string line;
  auto next_content = [&]() {
    while (std::getline(in, line)) {
      std::size_t i = 0;
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i == line.size() || line[i] == '%') continue;
      return true;
    }
    return false;
  };
  detail::require(next_content(), ErrorKind::io, "matrix market: missing size line");

  if (format == "coordinate") {
    Index m, n, nz;
    {
      std::istringstream ls(line);
      detail::require(static_cast<bool>(ls >> m >> n >> nz), ErrorKind::io,
                      "matrix market: bad size line");
    }
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(nz));
    for (Index k = 0; k < nz; ++k) {
      detail::require(next_content(), ErrorKind::io, "matrix market: truncated entries");
      std::istringstream ls(line);
      Index i, j;
      double v;
      detail::require(static_cast<bool>(ls >> i >> j >> v), ErrorKind::io,
                      "matrix market: bad entry line");
      trips.push_back({i - 1, j - 1, v});
    }
    return Matrix::sparse(m, n, std::move(trips));
  }

  Index m, n;
  {
    std::istringstream ls(line);
    detail::require(static_cast<bool>(ls >> m >> n), ErrorKind::io, "matrix market: bad size line");
  }
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(m * n));
  while (static_cast<Index>(vals.size()) < m * n) {
    detail::require(next_content(), ErrorKind::io, "matrix market: truncated array");
    std::istringstream ls(line);
    double v;
    while (ls >> v) vals.push_back(v);
  }
  detail::require(static_cast<Index>(vals.size()) == m * n, ErrorKind::io,
                  "matrix market: too many array values");
  return Matrix::dense(m, n, std::move(vals));
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream f(path);
  detail::require(f.good(), ErrorKind::io, "cannot open for reading: " + path);
  return read_matrix_market(f);
}

} // namespace aplicur

#endif
