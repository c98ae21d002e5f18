#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

namespace topopt {

enum class DomainShape { rectangle, l_bracket };
enum class BcPreset { carrier, lbracket };

// Structured grid of square bilinear elements.
// Element (ex, ey), ey = 0 at the bottom, index e = ey*nx + ex.
// Node (ix, iy), id = iy*(nx+1) + ix; DOFs (2*id, 2*id+1) = (ux, uy).
// Element corner nodes are ordered counterclockwise from the bottom-left.
struct Mesh {
  int nx = 0, ny = 0;
  double element_size = 1.0;
  DomainShape shape = DomainShape::rectangle;

  std::vector<std::uint8_t> active;  // per element; false on void (non-design) region
  std::vector<std::uint8_t> solid;   // per element; frozen at rho_bar = 1
  std::vector<std::uint8_t> dof_fixed;
  std::vector<int> fixed_dofs;       // sorted

  std::vector<int> active_elems;     // global element ids, ascending
  std::vector<int> active_index;     // global id -> slot in active_elems, -1 if passive
  std::vector<int> design_slots;     // active slots that are not solid (the OC variables)

  int node_count() const { return (nx + 1) * (ny + 1); }
  int dof_count() const { return 2 * node_count(); }
  int elem_count() const { return nx * ny; }
  int n_active() const { return static_cast<int>(active_elems.size()); }

  int node_id(int ix, int iy) const { return iy * (nx + 1) + ix; }

  std::array<int, 8> elem_dofs(int e) const {
    int ex = e % nx, ey = e / nx;
    int n0 = node_id(ex, ey), n1 = node_id(ex + 1, ey);
    int n2 = node_id(ex + 1, ey + 1), n3 = node_id(ex, ey + 1);
    return {2 * n0, 2 * n0 + 1, 2 * n1, 2 * n1 + 1,
            2 * n2, 2 * n2 + 1, 2 * n3, 2 * n3 + 1};
  }

  Eigen::Vector2d centroid(int e) const {  // physical coordinates
    int ex = e % nx, ey = e / nx;
    return {(ex + 0.5) * element_size, (ey + 0.5) * element_size};
  }
  Eigen::Vector2d node_coord(int id) const {
    int ix = id % (nx + 1), iy = id / (nx + 1);
    return {ix * element_size, iy * element_size};
  }
  // Coordinates mapped to the unit square; random fields live in these units
  // so that all resolutions of one domain see the same field.
  Eigen::Vector2d centroid_unit(int e) const {
    int ex = e % nx, ey = e / nx;
    return {(ex + 0.5) / nx, (ey + 0.5) / ny};
  }

  std::vector<int> top_edge_nodes() const {  // ix = 0..nx at iy = ny
    std::vector<int> ids(nx + 1);
    for (int ix = 0; ix <= nx; ++ix) ids[ix] = node_id(ix, ny);
    return ids;
  }
};

// Presets: carrier = rectangle, both bottom corners pinned, top one/two element
// rows solid (two for ny >= 20); lbracket requires nx == ny divisible by 5,
// voids the upper-right 2/5 x 2/5 block, clamps the top edge of the left limb.
Mesh build_mesh(int nx, int ny, DomainShape shape, BcPreset bc, double element_size = 1.0);

}  // namespace topopt
