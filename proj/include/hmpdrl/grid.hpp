#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hmpdrl/config.hpp"
#include "hmpdrl/error.hpp"
#include "hmpdrl/geometry.hpp"

namespace hmpdrl {

struct Cell {
  int x = 0;
  int y = 0;
  constexpr bool operator==(const Cell&) const = default;
};

/// Binary traversability raster. `origin` is the world position of the
/// lower-left corner of cell (0, 0); cell (x, y) covers
/// [origin + x*res, origin + (x+1)*res) on each axis.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int width, int height, double resolution, Vec2 origin = {})
      : width_(width), height_(height), resolution_(resolution), origin_(origin),
        cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    if (width < 1 || height < 1) throw ConfigError("grid dimensions must be positive");
    if (!(resolution > 0.0)) throw ConfigError("grid resolution must be > 0");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  std::size_t size() const { return cells_.size(); }

  double world_width() const { return width_ * resolution_; }
  double world_height() const { return height_ * resolution_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(Cell c) const { return in_bounds(c.x, c.y); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  std::size_t index(Cell c) const { return index(c.x, c.y); }
  Cell cell_of(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(width_)),
            static_cast<int>(idx / static_cast<std::size_t>(width_))};
  }

  bool occupied(int x, int y) const { return cells_[index(x, y)] != 0; }
  bool occupied(Cell c) const { return occupied(c.x, c.y); }
  /// Out-of-bounds cells count as free (open world around the map).
  bool occupied_or_free(int x, int y) const { return in_bounds(x, y) && occupied(x, y); }

  void set(int x, int y, bool occ) { cells_[index(x, y)] = occ ? 1 : 0; }
  void set(Cell c, bool occ) { set(c.x, c.y, occ); }

  Vec2 cell_center(Cell c) const {
    return {origin_.x + (c.x + 0.5) * resolution_, origin_.y + (c.y + 0.5) * resolution_};
  }
  Cell world_to_cell(Vec2 p) const {
    return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
            static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
  }

  std::size_t occupied_count() const {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }
  double occupied_fraction() const {
    return static_cast<double>(occupied_count()) / static_cast<double>(cells_.size());
  }

  const std::vector<std::uint8_t>& raw() const { return cells_; }

  bool operator==(const OccupancyGrid& o) const {
    return width_ == o.width_ && height_ == o.height_ && resolution_ == o.resolution_ &&
           origin_ == o.origin_ && cells_ == o.cells_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_{};
  std::vector<std::uint8_t> cells_;
};

/// Class-id raster with a class -> occupied table.
struct SemanticRaster {
  int width = 0;
  int height = 0;
  double resolution = 1.0;
  Vec2 origin{};
  std::vector<int> cells;  // row-major, y * width + x
  std::map<int, bool> class_table;  // true = occupied

  int at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
};

// ---------------------------------------------------------------------------
// Text formats. Rows are written top (y = height-1) to bottom (y = 0) so the
// file reads like a map with +y up.

namespace detail {

inline void write_header(std::ostream& out, const char* tag, int w, int h, double res, Vec2 origin) {
  out << tag << ' ' << w << ' ' << h << ' ' << format_double(res) << ' ' << format_double(origin.x)
      << ' ' << format_double(origin.y) << '\n';
}

struct Header {
  int width, height;
  double resolution;
  Vec2 origin;
};

inline Header read_header(std::istream& in, const std::string& tag) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing '" + tag + "' header line");
  std::istringstream hs(line);
  std::string word, w, h, r, ox, oy, extra;
  if (!(hs >> word >> w >> h >> r >> ox >> oy) || word != tag || (hs >> extra))
    throw FormatError("malformed header, expected '" + tag + " <width> <height> <resolution_m> <origin_x> <origin_y>'");
  Header hd{static_cast<int>(parse_int(w, "width")), static_cast<int>(parse_int(h, "height")),
            parse_double(r, "resolution"), {parse_double(ox, "origin_x"), parse_double(oy, "origin_y")}};
  if (hd.width < 1 || hd.height < 1) throw FormatError("grid dimensions must be positive");
  if (!(hd.resolution > 0.0)) throw FormatError("resolution must be > 0");
  return hd;
}

}  // namespace detail

inline void write_grid(std::ostream& out, const OccupancyGrid& g) {
  detail::write_header(out, "occupancy", g.width(), g.height(), g.resolution(), g.origin());
  std::string row(static_cast<std::size_t>(g.width()), '.');
  for (int y = g.height() - 1; y >= 0; --y) {
    for (int x = 0; x < g.width(); ++x) row[static_cast<std::size_t>(x)] = g.occupied(x, y) ? '#' : '.';
    out << row << '\n';
  }
}

inline OccupancyGrid read_grid(std::istream& in) {
  const auto hd = detail::read_header(in, "occupancy");
  OccupancyGrid g(hd.width, hd.height, hd.resolution, hd.origin);
  std::string row;
  for (int y = hd.height - 1; y >= 0; --y) {
    if (!std::getline(in, row)) throw FormatError("grid truncated: expected " + std::to_string(hd.height) + " rows");
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (static_cast<int>(row.size()) != hd.width)
      throw FormatError("grid row " + std::to_string(hd.height - 1 - y) + " has width " +
                        std::to_string(row.size()) + ", expected " + std::to_string(hd.width));
    for (int x = 0; x < hd.width; ++x) {
      const char c = row[static_cast<std::size_t>(x)];
      if (c != '#' && c != '.') throw FormatError(std::string("unexpected grid character '") + c + "'");
      g.set(x, y, c == '#');
    }
  }
  return g;
}

inline void save_grid(const std::string& path, const OccupancyGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_grid(out, g);
}

inline OccupancyGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_grid(in);
}

inline void write_raster(std::ostream& out, const SemanticRaster& r) {
  detail::write_header(out, "semantic", r.width, r.height, r.resolution, r.origin);
  for (int y = r.height - 1; y >= 0; --y) {
    for (int x = 0; x < r.width; ++x) {
      if (x) out << ' ';
      out << r.at(x, y);
    }
    out << '\n';
  }
}

inline void write_class_table(std::ostream& out, const SemanticRaster& r) {
  for (const auto& [id, occ] : r.class_table) out << id << ' ' << (occ ? "occupied" : "free") << '\n';
}

inline std::map<int, bool> read_class_table(std::istream& in) {
  std::map<int, bool> table;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls(t);
    std::string id, kind;
    if (!(ls >> id >> kind)) throw FormatError("malformed class table line: '" + t + "'");
    if (kind != "occupied" && kind != "free")
      throw FormatError("class table entry must be 'occupied' or 'free', got '" + kind + "'");
    table[static_cast<int>(parse_int(id, "class id"))] = kind == "occupied";
  }
  return table;
}

/// Reads a raster body; the class table is supplied separately (sidecar file).
inline SemanticRaster read_raster(std::istream& in, std::map<int, bool> class_table) {
  const auto hd = detail::read_header(in, "semantic");
  SemanticRaster r{hd.width, hd.height, hd.resolution, hd.origin,
                   std::vector<int>(static_cast<std::size_t>(hd.width) * hd.height, 0), std::move(class_table)};
  std::string line;
  for (int y = hd.height - 1; y >= 0; --y) {
    if (!std::getline(in, line)) throw FormatError("raster truncated");
    std::istringstream ls(line);
    std::string tok;
    for (int x = 0; x < hd.width; ++x) {
      if (!(ls >> tok)) throw FormatError("raster row too short");
      r.cells[static_cast<std::size_t>(y) * hd.width + x] = static_cast<int>(parse_int(tok, "class id"));
    }
    if (ls >> tok) throw FormatError("raster row too long");
  }
  return r;
}

}  // namespace hmpdrl
