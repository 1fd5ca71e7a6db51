#pragma once

#include <cstdlib>
#include <vector>

#include "crme/core/grid.hpp"
#include "crme/core/types.hpp"

namespace crme::propagation {

/// Visits every cell whose closed square touches the segment joining the
/// centres of `from` and `to` (supercover), endpoints included. When the
/// segment passes exactly through a lattice corner both side cells are
/// visited once each, which keeps the visited set invariant under quarter
/// turns and mirrors. Pure integer arithmetic.
template <class Visit>
void for_each_supercover_cell(Cell from, Cell to, Visit&& visit) {
  const int nx = std::abs(to.x - from.x);
  const int ny = std::abs(to.y - from.y);
  const int sx = to.x > from.x ? 1 : -1;
  const int sy = to.y > from.y ? 1 : -1;
  Cell c = from;
  visit(c);
  for (int ix = 0, iy = 0; ix < nx || iy < ny;) {
    // Compare the parameters of the next vertical and horizontal boundary
    // crossings, (ix + 1/2) / nx against (iy + 1/2) / ny.
    const long long decision =
        static_cast<long long>(1 + 2 * ix) * ny - static_cast<long long>(1 + 2 * iy) * nx;
    if (decision == 0) {
      visit(Cell{c.x + sx, c.y});
      visit(Cell{c.x, c.y + sy});
      c.x += sx;
      c.y += sy;
      ++ix;
      ++iy;
    } else if (decision < 0) {
      c.x += sx;
      ++ix;
    } else {
      c.y += sy;
      ++iy;
    }
    visit(c);
  }
}

inline std::vector<Cell> supercover_cells(Cell from, Cell to) {
  std::vector<Cell> out;
  for_each_supercover_cell(from, to, [&](Cell c) { out.push_back(c); });
  return out;
}

/// Number of building cells on the supercover of the tx-rx segment.
inline int count_wall_cells(Cell from, Cell to, const GeoMap& geo) {
  int walls = 0;
  for_each_supercover_cell(from, to, [&](Cell c) { walls += geo.is_building(c) ? 1 : 0; });
  return walls;
}

}  // namespace crme::propagation
