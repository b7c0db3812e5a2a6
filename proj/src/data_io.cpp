#include "grover/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace grover {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Non-empty, non-comment lines.
std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void check_finite(const Matrix& m, const std::string& what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        throw ValidationError(what + ": non-finite entry at row " + std::to_string(i) + ", column " +
                              std::to_string(j));
}

// Reorder `table` rows to follow `order`; every id must be present exactly once.
Matrix align_rows(const std::vector<std::string>& order, const DenseTable& table, const std::string& source) {
  if (table.row_ids.size() != order.size())
    throw AlignmentError(source + ": has " + std::to_string(table.row_ids.size()) + " spots, expected " +
                         std::to_string(order.size()));
  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t r = 0; r < table.row_ids.size(); ++r) {
    if (!index.emplace(table.row_ids[r], static_cast<Eigen::Index>(r)).second)
      throw AlignmentError(source + ": duplicate spot id '" + table.row_ids[r] + "'");
  }
  Matrix out(static_cast<Eigen::Index>(order.size()), table.values.cols());
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto it = index.find(order[r]);
    if (it == index.end()) throw AlignmentError(source + ": missing spot id '" + order[r] + "'");
    out.row(static_cast<Eigen::Index>(r)) = table.values.row(it->second);
  }
  return out;
}

}  // namespace

const Modality& SpotDataset::modality(const std::string& name) const {
  for (const auto& m : modalities)
    if (m.name == name) return m;
  throw ArgumentError("unknown modality '" + name + "'");
}

std::vector<std::string> SpotDataset::modality_names() const {
  std::vector<std::string> names;
  for (const auto& m : modalities) names.push_back(m.name);
  return names;
}

void SpotDataset::validate() const {
  const Eigen::Index n = size();
  if (coords.rows() != n || coords.cols() != 2)
    throw ValidationError("coords must be N x 2 with N = number of spot ids");
  check_finite(coords, "coords");
  std::set<std::string> ids(spot_ids.begin(), spot_ids.end());
  if (static_cast<Eigen::Index>(ids.size()) != n) throw ValidationError("duplicate spot ids");
  std::set<std::string> names;
  for (const auto& m : modalities) {
    if (!names.insert(m.name).second) throw ValidationError("duplicate modality name '" + m.name + "'");
    if (m.features.rows() != n)
      throw ValidationError("modality '" + m.name + "' has " + std::to_string(m.features.rows()) + " rows, expected " +
                            std::to_string(n));
    if (m.features.cols() < 1) throw ValidationError("modality '" + m.name + "' has no features");
    check_finite(m.features, "modality '" + m.name + "'");
  }
  if (labels && static_cast<Eigen::Index>(labels->size()) != n)
    throw ValidationError("label count does not match spot count");
}

SpotDataset SpotDataset::permuted(const std::vector<Eigen::Index>& perm) const {
  SpotDataset out;
  const auto n = static_cast<Eigen::Index>(perm.size());
  if (n != size()) throw ArgumentError("permutation size mismatch");
  out.coords.resize(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    out.spot_ids.push_back(spot_ids[perm[r]]);
    out.coords.row(r) = coords.row(perm[r]);
  }
  for (const auto& m : modalities) {
    Modality pm{m.name, Matrix(n, m.features.cols())};
    for (Eigen::Index r = 0; r < n; ++r) pm.features.row(r) = m.features.row(perm[r]);
    out.modalities.push_back(std::move(pm));
  }
  if (labels) {
    std::vector<int> l;
    for (Eigen::Index r = 0; r < n; ++r) l.push_back((*labels)[perm[r]]);
    out.labels = std::move(l);
  }
  return out;
}

std::string serialize(const SpotDataset& ds) {
  std::ostringstream os;
  os << "spots " << ds.size() << "\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    os << ds.spot_ids[i] << ',' << format_double(ds.coords(i, 0)) << ',' << format_double(ds.coords(i, 1)) << "\n";
  for (const auto& m : ds.modalities) {
    os << "modality " << m.name << ' ' << m.features.cols() << "\n";
    for (Eigen::Index i = 0; i < m.features.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.features.cols(); ++j) os << (j ? "," : "") << format_double(m.features(i, j));
      os << "\n";
    }
  }
  if (ds.labels) {
    os << "labels\n";
    for (int l : *ds.labels) os << l << "\n";
  }
  return os.str();
}

DenseTable read_dense_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError(path.string() + ": empty file");
  auto header = split(lines[0], ',');
  if (header.size() < 2) throw ValidationError(path.string() + ": header needs an id column and at least one value column");
  DenseTable t;
  for (std::size_t c = 1; c < header.size(); ++c) t.column_names.push_back(strip(header[c]));
  const auto cols = static_cast<Eigen::Index>(t.column_names.size());
  t.values.resize(static_cast<Eigen::Index>(lines.size() - 1), cols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split(lines[r], ',');
    if (static_cast<Eigen::Index>(fields.size()) != cols + 1)
      throw ValidationError(path.string() + ": row " + std::to_string(r - 1) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(cols + 1));
    t.row_ids.push_back(strip(fields[0]));
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      try {
        v = parse_double(fields[static_cast<std::size_t>(c) + 1]);
      } catch (const ValidationError&) {
        throw ValidationError(path.string() + ": unparsable value at row " + std::to_string(r - 1) + ", column " +
                              std::to_string(c));
      }
      if (!std::isfinite(v))
        throw ValidationError(path.string() + ": non-finite entry at row " + std::to_string(r - 1) + ", column " +
                              std::to_string(c));
      t.values(static_cast<Eigen::Index>(r - 1), c) = v;
    }
  }
  return t;
}

void write_dense_csv(const fs::path& path, const std::string& id_header, const std::vector<std::string>& column_names,
                     const std::vector<std::string>& row_ids, const Matrix& values, const std::string& comment) {
  if (static_cast<Eigen::Index>(row_ids.size()) != values.rows() ||
      static_cast<Eigen::Index>(column_names.size()) != values.cols())
    throw ArgumentError("write_dense_csv: shape mismatch for '" + path.string() + "'");
  auto out = open_out(path);
  if (!comment.empty()) out << "# " << comment << "\n";
  out << id_header;
  for (const auto& c : column_names) out << ',' << c;
  out << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << row_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << format_double(values(i, j));
    out << "\n";
  }
}

namespace {

fs::path sidecar_path(const fs::path& mtx_path) {
  fs::path p = mtx_path;
  p.replace_extension(".spots.txt");
  return p;
}

}  // namespace

DenseTable read_matrix_market(const fs::path& mtx_path) {
  std::ifstream in(mtx_path);
  if (!in) throw IoError("cannot open '" + mtx_path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw ValidationError(mtx_path.string() + ": missing %%MatrixMarket banner");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (object != "matrix" || format != "coordinate")
    throw ValidationError(mtx_path.string() + ": only 'matrix coordinate' is supported");
  if (field != "real" && field != "integer" && field != "pattern")
    throw ValidationError(mtx_path.string() + ": unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw ValidationError(mtx_path.string() + ": unsupported symmetry '" + symmetry + "'");
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream size_line(line);
  long long rows = 0, cols = 0, nnz = 0;
  if (!(size_line >> rows >> cols >> nnz)) throw ValidationError(mtx_path.string() + ": bad size line");
  DenseTable t;
  t.values = Matrix::Zero(rows, cols);
  for (long long k = 0; k < nnz; ++k) {
    if (!std::getline(in, line)) throw ValidationError(mtx_path.string() + ": truncated entry list");
    std::istringstream es(line);
    long long r = 0, c = 0;
    std::string vtok = "1";
    if (!(es >> r >> c)) throw ValidationError(mtx_path.string() + ": bad entry line " + std::to_string(k));
    if (field != "pattern") es >> vtok;
    if (r < 1 || r > rows || c < 1 || c > cols)
      throw ValidationError(mtx_path.string() + ": entry index out of range at entry " + std::to_string(k));
    const double v = parse_double(vtok);
    if (!std::isfinite(v))
      throw ValidationError(mtx_path.string() + ": non-finite entry at row " + std::to_string(r - 1) + ", column " +
                            std::to_string(c - 1));
    t.values(r - 1, c - 1) += v;
    if (symmetry == "symmetric" && r != c) t.values(c - 1, r - 1) += v;
  }
  for (long long c = 0; c < cols; ++c) t.column_names.push_back("f" + std::to_string(c + 1));
  for (const auto& l : read_lines(sidecar_path(mtx_path))) t.row_ids.push_back(strip(l));
  if (static_cast<long long>(t.row_ids.size()) != rows)
    throw AlignmentError(sidecar_path(mtx_path).string() + ": lists " + std::to_string(t.row_ids.size()) +
                         " spots, matrix has " + std::to_string(rows) + " rows");
  return t;
}

void write_matrix_market(const fs::path& mtx_path, const std::vector<std::string>& row_ids, const Matrix& values) {
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> nz;
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      if (values(i, j) != 0.0) nz.emplace_back(i, j, values(i, j));
  {
    auto out = open_out(mtx_path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << values.rows() << ' ' << values.cols() << ' ' << nz.size() << "\n";
    for (auto& [i, j, v] : nz) out << i + 1 << ' ' << j + 1 << ' ' << format_double(v) << "\n";
  }
  auto side = open_out(sidecar_path(mtx_path));
  for (const auto& id : row_ids) side << id << "\n";
}

std::vector<int> read_labels_csv(const fs::path& path, std::vector<std::string>* ids) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError(path.string() + ": empty labels file");
  std::vector<int> labels;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto f = split(lines[r], ',');
    if (f.size() != 2) throw ValidationError(path.string() + ": row " + std::to_string(r - 1) + " needs spot_id,label");
    if (ids) ids->push_back(strip(f[0]));
    labels.push_back(static_cast<int>(parse_int(f[1])));
  }
  return labels;
}

SpotDataset load_dataset(const fs::path& coords_path,
                         const std::vector<std::pair<std::string, fs::path>>& modality_paths,
                         const std::optional<fs::path>& labels_path) {
  SpotDataset ds;
  {
    auto lines = read_lines(coords_path);
    if (lines.empty()) throw ValidationError(coords_path.string() + ": empty coordinate file");
    auto header = split(lines[0], ',');
    if (header.size() != 3 || strip(header[0]) != "spot_id" || strip(header[1]) != "x" || strip(header[2]) != "y")
      throw ValidationError(coords_path.string() + ": header must be 'spot_id,x,y'");
    auto t = read_dense_csv(coords_path);
    ds.spot_ids = t.row_ids;
    ds.coords = t.values;
  }
  for (const auto& [name, path] : modality_paths) {
    DenseTable t = path.extension() == ".mtx" ? read_matrix_market(path) : read_dense_csv(path);
    ds.modalities.push_back({name, align_rows(ds.spot_ids, t, path.string())});
  }
  if (labels_path) {
    std::vector<std::string> ids;
    auto raw = read_labels_csv(*labels_path, &ids);
    DenseTable t;
    t.row_ids = ids;
    t.values.resize(static_cast<Eigen::Index>(raw.size()), 1);
    for (std::size_t i = 0; i < raw.size(); ++i) t.values(static_cast<Eigen::Index>(i), 0) = raw[i];
    Matrix aligned = align_rows(ds.spot_ids, t, labels_path->string());
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < aligned.rows(); ++i) labels.push_back(static_cast<int>(aligned(i, 0)));
    ds.labels = std::move(labels);
  }
  ds.validate();
  return ds;
}

SpotDataset load_dataset_dir(const fs::path& dir) {
  const fs::path index = dir / "dataset.txt";
  std::optional<fs::path> coords, labels;
  std::vector<std::pair<std::string, fs::path>> mods;
  for (const auto& line : read_lines(index)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(index.string() + ": expected key=value, got '" + line + "'");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "coords") {
      coords = dir / value;
    } else if (key == "labels") {
      labels = dir / value;
    } else if (key == "modality") {
      auto colon = value.find(':');
      if (colon == std::string::npos) throw ValidationError(index.string() + ": modality needs name:file");
      mods.emplace_back(value.substr(0, colon), dir / value.substr(colon + 1));
    } else {
      throw ValidationError(index.string() + ": unknown key '" + key + "'");
    }
  }
  if (!coords) throw ValidationError(index.string() + ": no coords entry");
  return load_dataset(*coords, mods, labels);
}

void save_dataset(const SpotDataset& ds, const fs::path& dir, const std::string& comment) {
  ds.validate();
  fs::create_directories(dir);
  write_dense_csv(dir / "coords.csv", "spot_id", {"x", "y"}, ds.spot_ids, ds.coords, comment);
  std::ostringstream index;
  if (!comment.empty()) index << "# " << comment << "\n";
  index << "coords=coords.csv\n";
  for (const auto& m : ds.modalities) {
    std::vector<std::string> cols;
    for (Eigen::Index j = 0; j < m.features.cols(); ++j) cols.push_back("f" + std::to_string(j + 1));
    write_dense_csv(dir / (m.name + ".csv"), "spot_id", cols, ds.spot_ids, m.features, comment);
    index << "modality=" << m.name << ':' << m.name << ".csv\n";
  }
  if (ds.labels) {
    auto out = open_out(dir / "labels.csv");
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "spot_id,label\n";
    for (Eigen::Index i = 0; i < ds.size(); ++i) out << ds.spot_ids[i] << ',' << (*ds.labels)[i] << "\n";
    index << "labels=labels.csv\n";
  }
  auto out = open_out(dir / "dataset.txt");
  out << index.str();
}

Matrix pca_reduce(const Matrix& features, Eigen::Index k) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (k < 1 || k > std::min(n, d))
    throw ArgumentError("pca_reduce: k=" + std::to_string(k) + " outside [1, " + std::to_string(std::min(n, d)) + "]");
  const Matrix centered = features.rowwise() - features.colwise().mean();
  const Matrix cov = (centered.transpose() * centered) / std::max<Eigen::Index>(n - 1, 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("pca_reduce: eigendecomposition failed");
  // Eigenvalues ascend; take the trailing k columns in reverse.
  Matrix loadings(d, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Vector v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    loadings.col(c) = v;
  }
  return centered * loadings;
}

void SyntheticSpec::validate() const {
  if (n_spots < 1 || n_domains < 1 || grid_side < 1) throw ArgumentError("synthetic: sizes must be positive");
  if (n_spots > grid_side * grid_side)
    throw ArgumentError("synthetic: n_spots=" + std::to_string(n_spots) + " exceeds grid_side^2=" +
                        std::to_string(grid_side * grid_side));
  if (dims.empty()) throw ArgumentError("synthetic: at least one modality required");
  for (const auto& [name, d] : dims)
    if (d < 1) throw ArgumentError("synthetic: modality '" + name + "' needs dimension >= 1");
  if (noise_sigma < 0) throw ArgumentError("synthetic: noise_sigma must be nonnegative");
  for (const auto& c : corruption) {
    if (c.fraction < 0 || c.fraction > 1) throw ArgumentError("synthetic: corruption fraction outside [0,1]");
    if (c.sigma < noise_sigma) throw ArgumentError("synthetic: corruption sigma below noise sigma");
    bool known = std::any_of(dims.begin(), dims.end(), [&](const auto& p) { return p.first == c.modality; });
    if (!known) throw ArgumentError("synthetic: corruption names unknown modality '" + c.modality + "'");
  }
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Eigen::Index n = spec.n_spots;
  const double center = 0.5 * static_cast<double>(spec.grid_side - 1);

  SyntheticDataset out;
  SpotDataset& ds = out.dataset;
  ds.coords.resize(n, 2);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i % spec.grid_side);
    const double y = static_cast<double>(i / spec.grid_side);
    ds.spot_ids.push_back("spot" + std::to_string(i));
    ds.coords(i, 0) = x;
    ds.coords(i, 1) = y;
    const double angle = std::atan2(y - center, x - center);  // [-pi, pi]
    int sector = static_cast<int>(std::floor((angle + M_PI) / (2.0 * M_PI) * spec.n_domains));
    labels[static_cast<std::size_t>(i)] = std::clamp(sector, 0, spec.n_domains - 1);
  }

  const double min_separation = 4.0 * spec.noise_sigma;
  for (std::size_t m = 0; m < spec.dims.size(); ++m) {
    const auto& [name, d] = spec.dims[m];
    Rng mean_rng(Rng::derive(seed, 2 * m + 1));
    Matrix means = random_normal(spec.n_domains, d, 1.0, mean_rng);
    double closest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < spec.n_domains; ++a)
      for (int b = a + 1; b < spec.n_domains; ++b) closest = std::min(closest, (means.row(a) - means.row(b)).norm());
    if (std::isfinite(closest) && closest < min_separation) means *= 1.05 * min_separation / closest;

    Rng noise_rng(Rng::derive(seed, 2 * m + 2));
    Matrix f(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      f.row(i) = means.row(labels[static_cast<std::size_t>(i)]);
      if (spec.noise_sigma > 0)
        for (Eigen::Index j = 0; j < d; ++j) f(i, j) += spec.noise_sigma * noise_rng.normal();
    }
    ds.modalities.push_back({name, std::move(f)});
  }

  for (std::size_t c = 0; c < spec.corruption.size(); ++c) {
    const auto& cs = spec.corruption[c];
    Rng rng(Rng::derive(seed, 1000 + c));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const auto count = static_cast<std::size_t>(std::floor(cs.fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < count; ++i) {
      auto j = i + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n) - i));
      std::swap(order[i], order[j]);
    }
    std::vector<Eigen::Index> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(picked.begin(), picked.end());
    Matrix* f = nullptr;
    for (auto& m : ds.modalities)
      if (m.name == cs.modality) f = &m.features;
    for (auto i : picked)
      for (Eigen::Index j = 0; j < f->cols(); ++j) (*f)(i, j) = cs.sigma * rng.normal();
    out.corrupted_spots.emplace_back(cs.modality, std::move(picked));
  }
  ds.labels = std::move(labels);
  ds.validate();
  return out;
}

}  // namespace grover
