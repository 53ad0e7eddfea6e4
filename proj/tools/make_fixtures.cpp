// Regenerates the bundled panels under data/. Usage: make_fixtures <data-dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sidemat/sidemat.hpp"

namespace fs = std::filesystem;
using namespace sidemat;

namespace {

Matrix normal_matrix(Index rows, Index cols, StreamRng& rng, double sd = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, sd);
  return m;
}

Matrix uniform_matrix(Index rows, Index cols, StreamRng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  for (int v : labels) out << v << '\n';
}

// 6 x 6 panel with one row and one column covariate.
void toy6(const fs::path& dir) {
  fs::create_directories(dir);
  StreamRng rng(6, Stream::covariates);
  const Matrix x = uniform_matrix(6, 1, rng);
  const Matrix z = uniform_matrix(6, 1, rng);
  const SieveSpec s{BasisFamily::polynomial, 2, true, false};
  const Matrix bx = expand_covariates(x, s).values;
  const Matrix bz = expand_covariates(z, s).values;
  Matrix m = bx * normal_matrix(3, 3, rng) * bz.transpose();
  m += normal_matrix(6, 1, rng) * normal_matrix(1, 6, rng);
  const Matrix y = m + normal_matrix(6, 6, rng, 0.1);
  write_csv_file((dir / "y.csv").string(), y);
  write_csv_file((dir / "x.csv").string(), x);
  write_csv_file((dir / "z.csv").string(), z);
}

// 40 x 40 noiseless rank-2 panel, bottom-right 20 x 20 block missing.
void mnar40(const fs::path& dir) {
  fs::create_directories(dir);
  StreamRng rng(40, Stream::factors);
  const Matrix m = normal_matrix(40, 2, rng) * normal_matrix(40, 2, rng).transpose();
  Matrix y = m;
  y.bottomRightCorner(20, 20).setConstant(std::numeric_limits<double>::quiet_NaN());
  write_csv_file((dir / "y.csv").string(), y);
  write_csv_file((dir / "truth.csv").string(), m);
  write_csv_file((dir / "x.csv").string(), uniform_matrix(40, 1, rng));
  write_csv_file((dir / "z.csv").string(), uniform_matrix(40, 1, rng));
}

// 38 units x 31 years (1970-2000), 8 treated units from 1989 on. The treated
// rows are scattered, so the label files are needed to recover the block.
void tobacco_like(const fs::path& dir) {
  fs::create_directories(dir);
  const Index n = 38, t = 31, t0 = 19;
  const std::vector<Index> treated_rows{2, 6, 11, 17, 21, 26, 30, 35};
  StreamRng rng(1989, Stream::coefficients);
  const Matrix x = uniform_matrix(n, 2, rng);
  Matrix z(t, 1);
  for (Index c = 0; c < t; ++c) z(c, 0) = -1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(t - 1);
  const SieveSpec s{BasisFamily::polynomial, 2, true, false};
  const Matrix bx = expand_covariates(x, s).values;
  const Matrix bz = expand_covariates(z, s).values;
  Matrix m = bx * normal_matrix(bx.cols(), bz.cols(), rng) * bz.transpose();
  m.array() += 10.0;
  m += normal_matrix(n, 1, rng) * normal_matrix(1, t, rng);
  const Matrix y_full = m + normal_matrix(n, t, rng, 0.05);

  std::vector<int> treated(static_cast<std::size_t>(n), 0), post(static_cast<std::size_t>(t), 0);
  for (Index i : treated_rows) treated[static_cast<std::size_t>(i)] = 1;
  for (Index c = t0; c < t; ++c) post[static_cast<std::size_t>(c)] = 1;
  Matrix y = y_full;
  for (Index i : treated_rows) y.row(i).tail(t - t0).setConstant(std::numeric_limits<double>::quiet_NaN());

  std::vector<std::string> header;
  for (Index c = 0; c < t; ++c) header.push_back("y" + std::to_string(1970 + c));
  write_csv_file((dir / "y.csv").string(), y, header);
  write_csv_file((dir / "truth.csv").string(), m, header);
  write_csv_file((dir / "x.csv").string(), x);
  write_csv_file((dir / "z.csv").string(), z);
  write_labels(dir / "treated.csv", treated);
  write_labels(dir / "post.csv", post);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <data-dir>\n";
    return 2;
  }
  const fs::path root(argv[1]);
  toy6(root / "toy6");
  mnar40(root / "mnar40");
  tobacco_like(root / "tobacco_like");
  return 0;
}
