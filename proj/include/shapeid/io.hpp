#pragma once

// Legacy ASCII VTK and CSV exchange formats.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shapeid/fem.hpp"
#include "shapeid/mesh.hpp"
#include "shapeid/pde.hpp"
#include "shapeid/shape_calculus.hpp"

namespace shapeid {

class IoError : public Error {
 public:
  using Error::Error;
};

/// Optional nodal data attached to a VTK export.
struct PointData {
  std::vector<std::pair<std::string, std::span<const double>>> scalars;
  std::vector<std::pair<std::string, std::span<const Vec2>>> vectors;
};

namespace detail {

inline void check_vtk_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
    throw IoError("VTK array names must be non-empty and free of whitespace");
}

inline std::ofstream open_for_writing(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

/// UNSTRUCTURED_GRID with cell data `subdomain` and, when given, `k`.
inline void write_vtk(std::ostream& out, const TriangleMesh& mesh, const CellField* k = nullptr,
                      const PointData& point_data = {}) {
  const auto prec = out.precision(17);
  out << "# vtk DataFile Version 3.0\n"
      << "interface mesh\n"
      << "ASCII\n"
      << "DATASET UNSTRUCTURED_GRID\n"
      << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes()) out << p.x << ' ' << p.y << " 0\n";
  out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) out << "5\n";

  out << "CELL_DATA " << mesh.num_triangles() << '\n' << "SCALARS subdomain int 1\nLOOKUP_TABLE default\n";
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) out << mesh.subdomain(t) << '\n';
  if (k) {
    if (k->values.size() != mesh.num_triangles()) throw IoError("cell field does not match the mesh");
    out << "SCALARS k double 1\nLOOKUP_TABLE default\n";
    for (double v : k->values) out << v << '\n';
  }

  if (!point_data.scalars.empty() || !point_data.vectors.empty()) {
    out << "POINT_DATA " << mesh.num_nodes() << '\n';
    for (const auto& [name, values] : point_data.scalars) {
      detail::check_vtk_name(name);
      if (values.size() != mesh.num_nodes()) throw IoError("point field '" + name + "' does not match the mesh");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << v << '\n';
    }
    for (const auto& [name, values] : point_data.vectors) {
      detail::check_vtk_name(name);
      if (values.size() != mesh.num_nodes()) throw IoError("point field '" + name + "' does not match the mesh");
      out << "VECTORS " << name << " double\n";
      for (const auto& v : values) out << v.x << ' ' << v.y << " 0\n";
    }
  }
  out.precision(prec);
}

inline void write_vtk(const std::filesystem::path& path, const TriangleMesh& mesh, const CellField* k = nullptr,
                      const PointData& point_data = {}) {
  auto out = detail::open_for_writing(path);
  write_vtk(out, mesh, k, point_data);
  if (!out) throw IoError("failed writing " + path.string());
}

/// Reads an UNSTRUCTURED_GRID made only of triangles (cell type 5) with an
/// integer cell array `subdomain`. Other arrays are skipped; z is ignored.
inline TriangleMesh read_vtk(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) throw IoError("not a legacy VTK file");
  std::getline(in, line);  // title
  std::string word;
  if (!(in >> word) || word != "ASCII") throw IoError("only ASCII VTK files are supported");
  if (!(in >> word >> line) || word != "DATASET" || line != "UNSTRUCTURED_GRID")
    throw IoError("only UNSTRUCTURED_GRID datasets are supported");

  std::vector<Vec2> nodes;
  std::vector<Triangle> cells;
  std::vector<int> subdomain;
  std::size_t n_cells = 0;
  std::string section;
  while (in >> word) {
    if (word == "POINTS") {
      std::size_t n;
      in >> n >> word;
      nodes.resize(n);
      double z;
      for (auto& p : nodes) in >> p.x >> p.y >> z;
    } else if (word == "CELLS") {
      std::size_t size;
      in >> n_cells >> size;
      cells.resize(n_cells);
      for (auto& c : cells) {
        int nv;
        in >> nv;
        if (nv != 3) throw IoError("only triangular cells are supported");
        in >> c[0] >> c[1] >> c[2];
      }
    } else if (word == "CELL_TYPES") {
      std::size_t n;
      in >> n;
      for (std::size_t i = 0; i < n; ++i) {
        int type;
        in >> type;
        if (type != 5) throw IoError("only triangular cells are supported");
      }
    } else if (word == "CELL_DATA" || word == "POINT_DATA") {
      std::size_t n;
      in >> n;
      section = word;
    } else if (word == "SCALARS") {
      std::string name, type;
      in >> name >> type;
      std::getline(in, line);  // optional component count
      in >> word >> line;      // LOOKUP_TABLE name
      const std::size_t count = section == "CELL_DATA" ? n_cells : nodes.size();
      if (section == "CELL_DATA" && name == "subdomain") {
        subdomain.resize(count);
        for (auto& s : subdomain) {
          double v;
          in >> v;
          s = static_cast<int>(v);
        }
      } else {
        double skip;
        for (std::size_t i = 0; i < count; ++i) in >> skip;
      }
    } else if (word == "VECTORS") {
      std::string name, type;
      in >> name >> type;
      const std::size_t count = section == "CELL_DATA" ? n_cells : nodes.size();
      double skip;
      for (std::size_t i = 0; i < 3 * count; ++i) in >> skip;
    } else {
      throw IoError("unsupported VTK section '" + word + "'");
    }
    if (in.fail()) throw IoError("malformed VTK section '" + word + "'");
  }
  if (nodes.empty() || cells.empty()) throw IoError("VTK file has no points or cells");
  if (subdomain.size() != cells.size()) throw IoError("VTK file lacks the cell array 'subdomain'");
  for (const auto& c : cells)
    for (int v : c)
      if (v < 0 || static_cast<std::size_t>(v) >= nodes.size()) throw IoError("cell references a missing point");
  return TriangleMesh::from_cells(std::move(nodes), std::move(cells), std::move(subdomain));
}

inline TriangleMesh read_vtk(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_vtk(in);
}

/// One VTK file per selected level (`<stem>_<level>.vtk`, point array `name`)
/// plus `<stem>_manifest.csv` with columns level,time,file. Empty `levels`
/// selects all.
inline void write_time_series(const std::filesystem::path& dir, const std::string& stem, const TriangleMesh& mesh,
                              const TimeSeriesField& field, const std::string& name = "y",
                              std::vector<std::size_t> levels = {}) {
  if (levels.empty())
    for (std::size_t j = 0; j < field.num_levels(); ++j) levels.push_back(j);
  auto manifest = detail::open_for_writing(dir / (stem + "_manifest.csv"));
  manifest << "level,time,file\n";
  for (std::size_t j : levels) {
    if (j >= field.num_levels()) throw IoError("time level out of range");
    std::ostringstream file;
    file << stem << '_' << std::setw(4) << std::setfill('0') << j << ".vtk";
    PointData pd;
    pd.scalars.emplace_back(name, field[j]);
    write_vtk(dir / file.str(), mesh, nullptr, pd);
    manifest << j << ',' << (field.steps > 0 ? field.time(static_cast<int>(j)) : 0.0) << ',' << file.str() << '\n';
  }
}

/// Columns node,arclength,gamma,kappa,gamma_tilde; `node` is the mesh node index.
inline void write_gradient_csv(std::ostream& out, const InterfaceCurve& curve, const GradientDensity& gamma,
                               std::span<const double> kappa, const TangentVector& gamma_tilde) {
  if (gamma.size() != curve.size() || kappa.size() != curve.size() || gamma_tilde.size() != curve.size())
    throw IoError("gradient data does not match the curve");
  const auto s = curve.arclength();
  const auto prec = out.precision(17);
  out << "node,arclength,gamma,kappa,gamma_tilde\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << curve.nodes[i] << ',' << s[i] << ',' << gamma[i] << ',' << kappa[i] << ',' << gamma_tilde[i] << '\n';
  out.precision(prec);
}

/// Columns node,x,y in traversal order.
inline void write_shape_csv(std::ostream& out, const InterfaceCurve& curve) {
  const auto prec = out.precision(17);
  out << "node,x,y\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << curve.nodes[i] << ',' << curve.points[i].x << ',' << curve.points[i].y << '\n';
  out.precision(prec);
}

inline void write_shape_csv(const std::filesystem::path& path, const InterfaceCurve& curve) {
  auto out = detail::open_for_writing(path);
  write_shape_csv(out, curve);
}

/// Reads a node,x,y polyline written by write_shape_csv.
inline InterfaceCurve read_shape_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("node,x,y", 0) != 0) throw IoError("expected header node,x,y");
  std::vector<Vec2> pts;
  std::vector<int> ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
      throw IoError("malformed shape row: " + line);
    ids.push_back(std::stoi(a));
    pts.push_back({std::stod(b), std::stod(c)});
  }
  return InterfaceCurve::from_polyline(std::move(pts), std::move(ids));
}

}  // namespace shapeid
