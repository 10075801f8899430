#include "plateau/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plateau/errors.hpp"

namespace plateau::io {

namespace fs = std::filesystem;
using geom::EmbeddedMesh;
using geom::PointN;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

MeshFormat format_from_path(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".csv") return MeshFormat::Csv;
  throw ConfigError("unknown mesh format for '" + path + "' (expected .off, .obj or .csv)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

/// Lines with comments stripped; blank lines kept as empty strings.
std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    out.push_back(line);
  }
  return out;
}

double to_double(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + tok + "' is not a number");
  }
}

long to_index(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + tok + "' is not an integer");
  }
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

/// Shared assembly: simplices of one dimension only.
void add_face(EmbeddedMesh& mesh, int& dim, const std::vector<std::uint32_t>& idx, const std::string& where) {
  if (idx.size() < 2) throw ConfigError(where + ": faces need at least two vertices");
  const int d = idx.size() == 2 ? 1 : 2;
  if (dim == 0) dim = d;
  if (d != dim) throw ConfigError(where + ": mixed segment and polygon records");
  for (auto i : idx)
    if (i >= mesh.vertices.size()) throw ConfigError(where + ": vertex index out of range");
  if (d == 1) {
    mesh.simplices.push_back({idx[0], idx[1], 0});
    return;
  }
  for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.simplices.push_back({idx[0], idx[k], idx[k + 1]});
}

EmbeddedMesh parse_off(const std::string& text) {
  const auto lines = lines_of(text);
  std::vector<std::string> toks;
  for (const auto& l : lines)
    for (auto& t : tokens(l)) toks.push_back(t);
  std::size_t p = 0;
  auto next = [&](const char* what) -> const std::string& {
    if (p >= toks.size()) throw ConfigError(std::string("OFF: missing ") + what);
    return toks[p++];
  };
  const std::string head = next("header");
  int ambient = 3;
  if (head == "nOFF") {
    ambient = static_cast<int>(to_index(next("dimension"), "OFF dimension"));
    if (ambient < 1 || ambient > geom::kMaxDim) throw ConfigError("OFF: unsupported dimension");
  } else if (head != "OFF") {
    throw ConfigError("OFF: header must be OFF or nOFF");
  }
  const long nv = to_index(next("vertex count"), "OFF counts");
  const long nf = to_index(next("face count"), "OFF counts");
  to_index(next("edge count"), "OFF counts");
  if (nv < 0 || nf < 0) throw ConfigError("OFF: negative counts");
  EmbeddedMesh mesh(2, ambient);
  for (long v = 0; v < nv; ++v) {
    PointN q(ambient);
    for (int i = 0; i < ambient; ++i) q[i] = to_double(next("coordinate"), "OFF vertex " + std::to_string(v));
    mesh.vertices.push_back(q);
  }
  int dim = 0;
  for (long f = 0; f < nf; ++f) {
    const std::string where = "OFF face " + std::to_string(f);
    const long k = to_index(next("face size"), where);
    if (k < 2) throw ConfigError(where + ": faces need at least two vertices");
    std::vector<std::uint32_t> idx;
    for (long j = 0; j < k; ++j) {
      const long i = to_index(next("face index"), where);
      if (i < 0) throw ConfigError(where + ": negative index");
      idx.push_back(static_cast<std::uint32_t>(i));
    }
    add_face(mesh, dim, idx, where);
  }
  mesh.dim = dim == 0 ? 2 : dim;
  return mesh;
}

EmbeddedMesh parse_obj(const std::string& text) {
  const auto lines = lines_of(text);
  EmbeddedMesh mesh(2, 3);
  int dim = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto t = tokens(lines[ln]);
    if (t.empty()) continue;
    const std::string where = "OBJ line " + std::to_string(ln + 1);
    if (t[0] == "v") {
      if (t.size() < 4) throw ConfigError(where + ": vertices need three coordinates");
      mesh.vertices.push_back(PointN{to_double(t[1], where), to_double(t[2], where), to_double(t[3], where)});
    } else if (t[0] == "f" || t[0] == "l") {
      std::vector<std::uint32_t> idx;
      for (std::size_t k = 1; k < t.size(); ++k) {
        const std::string head = t[k].substr(0, t[k].find('/'));
        long i = to_index(head, where);
        if (i < 0) i += static_cast<long>(mesh.vertices.size()) + 1;
        if (i < 1) throw ConfigError(where + ": bad vertex index");
        idx.push_back(static_cast<std::uint32_t>(i - 1));
      }
      if (t[0] == "l") {
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) add_face(mesh, dim, {idx[k], idx[k + 1]}, where);
      } else {
        add_face(mesh, dim, idx, where);
      }
    }
  }
  mesh.dim = dim == 0 ? 2 : dim;
  return mesh;
}

EmbeddedMesh parse_csv(const std::string& text) {
  const auto lines = lines_of(text);
  EmbeddedMesh mesh(1, 0);
  bool first = true, have_prev = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line = lines[ln];
    std::replace(line.begin(), line.end(), ',', ' ');
    const auto t = tokens(line);
    if (t.empty()) {
      have_prev = false;
      continue;
    }
    const std::string where = "CSV line " + std::to_string(ln + 1);
    if (first) {
      first = false;
      bool numeric = true;
      try {
        to_double(t[0], where);
      } catch (const ConfigError&) {
        numeric = false;
      }
      if (!numeric) continue;  // header
    }
    PointN q(static_cast<int>(t.size()));
    if (t.size() < 2 || t.size() > static_cast<std::size_t>(geom::kMaxDim))
      throw ConfigError(where + ": rows need 2 to 6 coordinates");
    for (std::size_t i = 0; i < t.size(); ++i) q[static_cast<int>(i)] = to_double(t[i], where);
    if (mesh.ambient == 0) mesh.ambient = q.dim();
    if (q.dim() != mesh.ambient) throw ConfigError(where + ": inconsistent coordinate count");
    const auto v = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(q);
    if (have_prev) mesh.simplices.push_back({v - 1, v, 0});
    have_prev = true;
  }
  if (mesh.ambient == 0) mesh.ambient = 2;
  return mesh;
}

}  // namespace

EmbeddedMesh parse_mesh(const std::string& text, MeshFormat format) {
  EmbeddedMesh mesh = format == MeshFormat::Off ? parse_off(text) : format == MeshFormat::Obj ? parse_obj(text)
                                                                                                : parse_csv(text);
  geom::validate(mesh);
  return mesh;
}

EmbeddedMesh read_mesh(const std::string& path) { return parse_mesh(read_file(path), format_from_path(path)); }

std::string write_off(const EmbeddedMesh& mesh) {
  std::string out;
  if (mesh.ambient == 3) {
    out += "OFF\n";
  } else {
    out += "nOFF\n" + std::to_string(mesh.ambient) + "\n";
  }
  out += std::to_string(mesh.vertices.size()) + " " + std::to_string(mesh.size()) + " 0\n";
  for (const auto& v : mesh.vertices) {
    for (int i = 0; i < mesh.ambient; ++i) out += (i ? " " : "") + format_double(v[i]);
    out += "\n";
  }
  for (const auto& s : mesh.simplices) {
    out += std::to_string(mesh.dim + 1);
    for (int k = 0; k <= mesh.dim; ++k) out += " " + std::to_string(s[static_cast<std::size_t>(k)]);
    out += "\n";
  }
  return out;
}

std::string write_obj(const EmbeddedMesh& mesh) {
  if (mesh.ambient != 3) throw ConfigError("OBJ output needs ambient dimension 3");
  std::string out;
  for (const auto& v : mesh.vertices)
    out += "v " + format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]) + "\n";
  for (const auto& s : mesh.simplices) {
    out += mesh.dim == 1 ? "l" : "f";
    for (int k = 0; k <= mesh.dim; ++k) out += " " + std::to_string(s[static_cast<std::size_t>(k)] + 1);
    out += "\n";
  }
  return out;
}

std::string write_csv(const EmbeddedMesh& mesh) {
  if (mesh.dim != 1) throw ConfigError("CSV output holds curves (d = 1) only");
  std::string out;
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    if (s) out += "\n";
    for (int k = 0; k < 2; ++k) {
      const auto& v = mesh.vertices[mesh.simplices[s][static_cast<std::size_t>(k)]];
      for (int i = 0; i < mesh.ambient; ++i) out += (i ? "," : "") + format_double(v[i]);
      out += "\n";
    }
  }
  return out;
}

std::string write_mesh(const EmbeddedMesh& mesh, MeshFormat format) {
  switch (format) {
    case MeshFormat::Off: return write_off(mesh);
    case MeshFormat::Obj: return write_obj(mesh);
    case MeshFormat::Csv: return write_csv(mesh);
  }
  return {};
}

void write_atomically(const std::vector<Artifact>& artifacts) {
  std::vector<fs::path> temps, renamed;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& t : temps) fs::remove(t, ec);
    for (const auto& t : renamed) fs::remove(t, ec);
  };
  try {
    for (const auto& a : artifacts) {
      const fs::path target(a.path);
      if (target.has_parent_path()) fs::create_directories(target.parent_path());
      fs::path tmp = target;
      tmp += ".tmp";
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << a.content;
      out.close();
      if (!out) throw ConfigError("cannot write '" + a.path + "'");
    }
    for (const auto& a : artifacts)
      if (fs::is_directory(a.path)) throw ConfigError("cannot write '" + a.path + "': it is a directory");
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      fs::rename(temps[i], artifacts[i].path);
      renamed.push_back(artifacts[i].path);
    }
  } catch (const fs::filesystem_error& e) {
    cleanup();
    throw ConfigError(std::string("cannot write artifacts: ") + e.what());
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace plateau::io
