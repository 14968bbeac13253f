#include "flushlab/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "flushlab/errors.hpp"

namespace flushlab::io {

namespace {
constexpr char kMagic[8] = {'F', 'L', 'U', 'S', 'H', 'F', '2', 'D'};

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw NumericError("truncated field file");
  return v;
}
}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field(const std::string& path, const field::Field2D& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  const auto& g = u.grid();
  os.write(kMagic, 8);
  put<std::int32_t>(os, g.nx);
  put<std::int32_t>(os, g.ny);
  put<double>(os, g.x_min);
  put<double>(os, g.x_max);
  put<double>(os, g.L);
  put<std::int32_t>(os, u.ncomp());
  put<double>(os, u.time());
  for (int c = 0; c < u.ncomp(); ++c)
    os.write(reinterpret_cast<const char*>(u.comp(c).data()), static_cast<std::streamsize>(u.comp(c).size() * sizeof(double)));
}

field::Field2D read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path + " is not a field file");
  const int nx = get<std::int32_t>(is);
  const int ny = get<std::int32_t>(is);
  const double x_min = get<double>(is);
  const double x_max = get<double>(is);
  const double L = get<double>(is);
  const int ncomp = get<std::int32_t>(is);
  const double t = get<double>(is);
  field::Grid g = field::make_grid(nx, ny, x_min, x_max, L);
  field::Field2D u(g, ncomp, t);
  for (int c = 0; c < ncomp; ++c) {
    is.read(reinterpret_cast<char*>(u.comp(c).data()), static_cast<std::streamsize>(u.comp(c).size() * sizeof(double)));
    if (!is) throw NumericError("truncated field file");
  }
  return u;
}

void write_field_csv(const std::string& path, const field::Field2D& u) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  const auto& g = u.grid();
  os << "x,y";
  for (int c = 0; c < u.ncomp(); ++c) os << ",c" << c;
  os << '\n';
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      os << format_number(g.x(i)) << ',' << format_number(g.y(j));
      for (int c = 0; c < u.ncomp(); ++c) os << ',' << format_number(u.at(c, j, i));
      os << '\n';
    }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  std::size_t rows = 0;
  for (const auto& col : columns) rows = std::max(rows, col.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) os << ',';
      if (r < columns[c].size()) os << format_number(columns[c][r]);
    }
    os << '\n';
  }
}

}  // namespace flushlab::io
