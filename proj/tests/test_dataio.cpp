#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "ssfr/dataset.hpp"
#include "ssfr/error.hpp"
#include "ssfr/io.hpp"
#include "ssfr/rng.hpp"

using namespace ssfr;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    Rng rng(static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
    path_ = fs::temp_directory_path() / ("ssfr_dataio_" + std::to_string(rng.next_u64()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RowMatrix ramp(Index n, Index m, double offset) {
  RowMatrix x(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) x(i, j) = offset + 0.01 * static_cast<double>(i * m + j);
  return x;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

FunctionalDataset small_dataset(Index n, Index r, Index q) {
  return FunctionalDataset{{ramp(n, r, 0.0), ramp(n, r, 1.0)},
                           {make_uniform_grid(0.0, 1.0, static_cast<int>(r)),
                            make_uniform_grid(0.0, 1.0, static_cast<int>(r))},
                           ramp(n, q, -2.0),
                           make_uniform_grid(0.0, 1.0, static_cast<int>(q)),
                           {"x1", "x2"}};
}

}  // namespace

TEST(LoadCsv, ShapesFromFiles) {
  TempDir dir;
  io::atomic_write(dir.path() / "x1.csv", io::to_csv(ramp(10, 101, 0.0)));
  io::atomic_write(dir.path() / "x2.csv", io::to_csv(ramp(10, 101, 3.0)));
  io::atomic_write(dir.path() / "y.csv", io::to_csv(ramp(10, 101, -1.0)));
  write_text(dir.path() / "grids.json",
             R"({"predictors": {"lo": 0, "hi": 1, "count": 101}, "outcome": {"lo": 0, "hi": 1, "count": 101}})");
  const GridSpec spec = load_grid_spec(dir.path() / "grids.json", 2);
  const FunctionalDataset ds = load_csv({dir.path() / "x1.csv", dir.path() / "x2.csv"}, dir.path() / "y.csv", spec);
  EXPECT_EQ(ds.n(), 10);
  EXPECT_EQ(ds.num_predictors(), 2u);
  EXPECT_EQ(ds.predictors[0].cols(), 101);
  EXPECT_EQ(ds.outcome.cols(), 101);
  EXPECT_EQ(ds.predictors[1], ramp(10, 101, 3.0));
}

TEST(LoadCsv, RowCountMismatchNamesFile) {
  TempDir dir;
  io::atomic_write(dir.path() / "short.csv", io::to_csv(ramp(9, 5, 0.0)));
  io::atomic_write(dir.path() / "y.csv", io::to_csv(ramp(10, 5, 0.0)));
  GridSpec spec{{make_uniform_grid(0, 1, 5)}, make_uniform_grid(0, 1, 5)};
  try {
    load_csv({dir.path() / "short.csv"}, dir.path() / "y.csv", spec);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("short.csv"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, NanCellIsParseError) {
  TempDir dir;
  write_text(dir.path() / "x.csv", "1,2,3\n4,NaN,6\n");
  try {
    io::read_csv(dir.path() / "x.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 2u);
  }
  write_text(dir.path() / "y.csv", "1,2,3\n4,abc,6\n");
  EXPECT_THROW(io::read_csv(dir.path() / "y.csv"), ParseError);
}

TEST(LoadCsv, RaggedRowsAndHeader) {
  TempDir dir;
  write_text(dir.path() / "ragged.csv", "1,2,3\n4,5\n");
  EXPECT_THROW(io::read_csv(dir.path() / "ragged.csv"), FormatError);
  write_text(dir.path() / "head.csv", "a,b\n1,2\n3,4\n");
  const auto t = io::read_csv(dir.path() / "head.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.values.rows(), 2);
  EXPECT_EQ(t.values(1, 0), 3.0);
}

TEST(LoadCsv, MissingFileIsIoError) {
  EXPECT_THROW(io::read_text("/nonexistent/dir/file.csv"), IoError);
}

TEST(LoadCsv, GridLengthMismatch) {
  TempDir dir;
  io::atomic_write(dir.path() / "x.csv", io::to_csv(ramp(4, 5, 0.0)));
  io::atomic_write(dir.path() / "y.csv", io::to_csv(ramp(4, 6, 0.0)));
  GridSpec spec{{make_uniform_grid(0, 1, 5)}, make_uniform_grid(0, 1, 7)};
  EXPECT_ANY_THROW(load_csv({dir.path() / "x.csv"}, dir.path() / "y.csv", spec));
  GridSpec missing{{make_uniform_grid(0, 1, 5)}, std::nullopt};
  EXPECT_THROW(load_csv({dir.path() / "x.csv"}, dir.path() / "y.csv", missing), InvalidArgument);
}

TEST(GridSpecJson, PointsAndRanges) {
  const Grid a = grid_from_json_text(R"({"points": [0, 0.5, 2]})");
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(a.hi(), 2.0);
  const Grid b = grid_from_json_text(R"({"lo": -1, "hi": 1, "count": 5})");
  EXPECT_EQ(b.points()[1], -0.5);
  EXPECT_ANY_THROW(grid_from_json_text(R"({"lo": 0, "hi": 1})"));
  EXPECT_ANY_THROW(grid_from_json_text(R"({"points": [0, 0.5, 2], "spacing": 1})"));
}

TEST(SaveDataset, RoundTrip) {
  TempDir dir;
  const FunctionalDataset ds = small_dataset(6, 7, 5);
  save_dataset(ds, dir.path());
  const GridSpec spec = load_grid_spec(dir.path() / "grids.json", 2);
  const FunctionalDataset back = load_csv({dir.path() / "x1.csv", dir.path() / "x2.csv"}, dir.path() / "y.csv", spec);
  EXPECT_EQ(back.predictors[0], ds.predictors[0]);
  EXPECT_EQ(back.predictors[1], ds.predictors[1]);
  EXPECT_EQ(back.outcome, ds.outcome);
  EXPECT_TRUE(back.outcome_grid == ds.outcome_grid);
}

TEST(AtomicWrite, CreatesParentsAndReplaces) {
  TempDir dir;
  const fs::path p = dir.path() / "a" / "b" / "file.txt";
  io::atomic_write(p, "first");
  io::atomic_write(p, "second");
  EXPECT_EQ(io::read_text(p), "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(p.parent_path())) ++entries;
  EXPECT_EQ(entries, 1);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(std::stod(io::format_double(v)), v);
}

TEST(Standardizer, TwoCurveHandExample) {
  FunctionalDataset ds{{RowMatrix(2, 4)}, {make_uniform_grid(0, 1, 4)}, RowMatrix::Zero(2, 3),
                       make_uniform_grid(0, 1, 3), {}};
  ds.predictors[0].row(0).setZero();
  ds.predictors[0].row(1).setConstant(2.0);
  const Standardizer st = fit_standardizer(ds, {0, 1});
  EXPECT_LE((st.means[0].array() - 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_NEAR(st.scales[0], 1.0, 1e-15);
  const FunctionalDataset z = apply_standardizer(st, ds);
  EXPECT_LE((z.predictors[0].row(0).array() + 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(z.outcome, ds.outcome);
}

TEST(Standardizer, IdenticalRowsAreDegenerate) {
  FunctionalDataset ds{{RowMatrix(3, 4)}, {make_uniform_grid(0, 1, 4)}, RowMatrix::Zero(3, 3),
                       make_uniform_grid(0, 1, 3), {}};
  for (Index i = 0; i < 3; ++i) ds.predictors[0].row(i) << 0.5, 1.0, -1.0, 2.0;
  EXPECT_THROW(fit_standardizer(ds, {0, 1, 2}), DegenerateData);
}

TEST(Standardizer, IdentityAndRoundTrip) {
  const FunctionalDataset ds = small_dataset(8, 6, 4);
  Standardizer identity{{Vector::Zero(6), Vector::Zero(6)}, {1.0, 1.0}};
  EXPECT_EQ(apply_standardizer(identity, ds).predictors[1], ds.predictors[1]);

  const Standardizer st = fit_standardizer(ds, {0, 2, 4, 6});
  const FunctionalDataset back = invert_standardizer(st, apply_standardizer(st, ds));
  for (int j = 0; j < 2; ++j) EXPECT_LE((back.predictors[j] - ds.predictors[j]).cwiseAbs().maxCoeff(), 1e-12);

  const FunctionalDataset z = apply_standardizer(fit_standardizer(ds, {0, 1, 2, 3, 4, 5, 6, 7}), ds);
  const Standardizer again = fit_standardizer(z, {0, 1, 2, 3, 4, 5, 6, 7});
  EXPECT_LE(again.means[0].cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(again.scales[0], 1.0, 1e-12);
}

TEST(Standardizer, ShapeMismatch) {
  const FunctionalDataset ds = small_dataset(4, 6, 4);
  Standardizer wrong{{Vector::Zero(5), Vector::Zero(6)}, {1.0, 1.0}};
  EXPECT_THROW(apply_standardizer(wrong, ds), InvalidArgument);
}

TEST(Split, SizesDeterminismAndCover) {
  const SplitIndices a = split_indices(10, 0.2, 5);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.test.size(), 2u);
  const SplitIndices b = split_indices(10, 0.2, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto i : a.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.train.begin(), a.train.end()));

  const FunctionalDataset ds = small_dataset(10, 4, 3);
  const auto [tr, te] = split(ds, 0.2, 5);
  EXPECT_EQ(tr.n(), 8);
  EXPECT_EQ(te.n(), 2);
  EXPECT_EQ(te.outcome.row(0), ds.outcome.row(static_cast<Index>(a.test[0])));
  EXPECT_THROW(split_indices(10, 1.0, 5), InvalidArgument);
  EXPECT_THROW(split_indices(10, -0.1, 5), InvalidArgument);
}
