#include "topopt/mesh.hpp"

#include <algorithm>

#include "topopt/errors.hpp"

namespace topopt {

namespace {

void fix_dof(Mesh& m, int dof) { m.dof_fixed[dof] = 1; }

void fix_node(Mesh& m, int node) {
  fix_dof(m, 2 * node);
  fix_dof(m, 2 * node + 1);
}

}  // namespace

Mesh build_mesh(int nx, int ny, DomainShape shape, BcPreset bc, double element_size) {
  if (nx < 1 || ny < 1) throw ConfigError("build_mesh: nx, ny must be >= 1");
  if (element_size <= 0) throw ConfigError("build_mesh: element_size must be > 0");
  if (shape == DomainShape::l_bracket) {
    if (bc != BcPreset::lbracket)
      throw ConfigError("build_mesh: l_bracket shape requires the lbracket preset");
    if (nx != ny || nx % 5 != 0)
      throw ConfigError("build_mesh: l_bracket needs nx == ny divisible by 5");
  } else if (bc != BcPreset::carrier) {
    throw ConfigError("build_mesh: rectangle shape requires the carrier preset");
  }

  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.element_size = element_size;
  m.shape = shape;
  m.active.assign(nx * ny, 1);
  m.solid.assign(nx * ny, 0);
  m.dof_fixed.assign(m.dof_count(), 0);

  if (shape == DomainShape::l_bracket) {
    int cx = 3 * nx / 5, cy = 3 * ny / 5;  // void block: ex >= cx and ey >= cy
    for (int ey = cy; ey < ny; ++ey)
      for (int ex = cx; ex < nx; ++ex) m.active[ey * nx + ex] = 0;
    // clamp the top edge of the left limb
    for (int ix = 0; ix <= cx; ++ix) fix_node(m, m.node_id(ix, ny));
    // nodes supported only by void elements carry no stiffness; constrain them
    for (int iy = 0; iy <= ny; ++iy)
      for (int ix = 0; ix <= nx; ++ix) {
        bool any_active = false;
        for (int ey = std::max(iy - 1, 0); ey <= std::min(iy, ny - 1) && !any_active; ++ey)
          for (int ex = std::max(ix - 1, 0); ex <= std::min(ix, nx - 1); ++ex)
            if (m.active[ey * nx + ex]) { any_active = true; break; }
        if (!any_active) fix_node(m, m.node_id(ix, iy));
      }
  } else {  // carrier plate: pin both bottom corners, freeze top layer(s) solid
    fix_node(m, m.node_id(0, 0));
    fix_node(m, m.node_id(nx, 0));
    int solid_rows = ny >= 20 ? 2 : 1;
    for (int ey = ny - solid_rows; ey < ny; ++ey)
      for (int ex = 0; ex < nx; ++ex) m.solid[ey * nx + ex] = 1;
  }

  m.active_index.assign(nx * ny, -1);
  for (int e = 0; e < nx * ny; ++e)
    if (m.active[e]) {
      m.active_index[e] = static_cast<int>(m.active_elems.size());
      m.active_elems.push_back(e);
    }
  for (int k = 0; k < m.n_active(); ++k)
    if (!m.solid[m.active_elems[k]]) m.design_slots.push_back(k);

  for (int d = 0; d < m.dof_count(); ++d)
    if (m.dof_fixed[d]) m.fixed_dofs.push_back(d);
  if (m.fixed_dofs.empty()) throw ConfigError("build_mesh: preset produced no fixed DOFs");
  return m;
}

}  // namespace topopt
