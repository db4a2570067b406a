#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rbc/features.hpp"

using namespace rbc;

namespace {

CellContour cell_from_mask(const BinaryImage& m, const RgbImage& img = {}) {
  auto cs = extract_contours(m, 1, img);
  REQUIRE(cs.size() == 1);
  return cs[0];
}

BinaryImage disc_mask(int w, int h, double cx, double cy, double r) {
  BinaryImage m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.at(x, y) = 1;
  return m;
}

BinaryImage rotate90(const BinaryImage& m) {
  BinaryImage r(m.height(), m.width(), 0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) r.at(m.height() - 1 - y, x) = m.at(x, y);
  return r;
}

BinaryImage scale2(const BinaryImage& m) {
  BinaryImage r(2 * m.width(), 2 * m.height(), 0);
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) r.at(x, y) = m.at(x / 2, y / 2);
  return r;
}

// Asymmetric blob: rotated ellipse plus an off-centre bump.
BinaryImage blob(int w, int h, int ox, int oy) {
  BinaryImage m(w, h, 0);
  const double c = std::cos(0.6), s = std::sin(0.6);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - ox, dy = y - oy;
      const double u = (dx * c + dy * s) / 18, v = (-dx * s + dy * c) / 9;
      const bool bump = (dx - 10) * (dx - 10) + (dy + 8) * (dy + 8) <= 36;
      if (u * u + v * v <= 1 || bump) m.at(x, y) = 1;
    }
  return m;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

std::size_t idx(const char* name) { return *FeatureCatalog::instance().index_of(name); }

// Ordered-pair enumeration: every pixel pair separated by +offset or -offset,
// both under the mask.
std::vector<double> glcm_oracle(const GrayImage& q, const BinaryImage& m, Point off, int levels) {
  std::vector<double> c(levels * levels, 0.0);
  double total = 0;
  for (int y1 = 0; y1 < q.height(); ++y1)
    for (int x1 = 0; x1 < q.width(); ++x1)
      for (int y2 = 0; y2 < q.height(); ++y2)
        for (int x2 = 0; x2 < q.width(); ++x2) {
          const int dx = x2 - x1, dy = y2 - y1;
          const bool fwd = dx == off.x && dy == off.y;
          const bool back = dx == -off.x && dy == -off.y;
          if (!(fwd || back) || !m.at(x1, y1) || !m.at(x2, y2)) continue;
          c[q.at(x1, y1) * levels + q.at(x2, y2)] += 1;
          total += 1;
        }
  for (auto& v : c) v /= total;
  return c;
}

}  // namespace

TEST_CASE("catalog has the fixed 121-name layout") {
  const auto& cat = FeatureCatalog::instance();
  REQUIRE(cat.names().size() == kFeatureCount);
  std::set<std::string> uniq(cat.names().begin(), cat.names().end());
  CHECK(uniq.size() == kFeatureCount);
  std::map<FeatureGroup, int> counts;
  for (std::size_t i = 0; i < kFeatureCount; ++i) ++counts[cat.group(i)];
  CHECK(counts[FeatureGroup::shape] == 41);
  CHECK(counts[FeatureGroup::color] == 18);
  CHECK(counts[FeatureGroup::texture] == 62);
  for (const char* n : {"Aspect ratio", "Elongation", "R factor", "HU1", "Roundness", "HU2", "Minor axis", "Shape",
                        "FD1", "Circularity", "Min feret", "HU7", "HU3", "Compactness", "Skewness",
                        "Area equivalent diameter", "Correlation1", "Homogeneity12", "Max R", "Major axis", "HU5",
                        "Energy9", "Homogeneity1", "Solidity", "Kurtosis", "Blue mean", "Contrast9", "L mean",
                        "FD10", "Eccentricity"})
    CHECK_MESSAGE(cat.index_of(n).has_value(), n);
  CHECK(cat.names().front() == "Area");
  CHECK(cat.names()[41] == "Red mean");
  CHECK(cat.names()[59] == "Skewness");
  CHECK(cat.names().back() == "Correlation12");
}

TEST_CASE("disc shape descriptors") {
  const auto cell = cell_from_mask(disc_mask(80, 80, 40, 40, 30));
  const auto f = shape_features(cell);
  CHECK(f[idx("Circularity")] >= 0.92);
  CHECK(f[idx("Circularity")] <= 1.0);
  CHECK(f[idx("Eccentricity")] >= 0.95);
  CHECK(f[idx("Solidity")] >= 0.98);
  CHECK(f[idx("Area")] == doctest::Approx(M_PI * 900).epsilon(0.01));
  CHECK(f[idx("Area equivalent diameter")] == doctest::Approx(60).epsilon(0.01));
  CHECK(f[idx("Major axis")] == doctest::Approx(60).epsilon(0.02));
  CHECK(f[idx("Max feret")] == doctest::Approx(61).epsilon(0.02));
  CHECK(f[idx("Aspect ratio")] == doctest::Approx(1.0).epsilon(0.03));
  CHECK(f[idx("R factor")] > 0.95);
  CHECK(f[idx("Perimeter")] == doctest::Approx(2 * M_PI * 30).epsilon(0.03));
  for (int k = 1; k <= 10; ++k) CHECK(f[idx(("FD" + std::to_string(k)).c_str())] < 0.02);
}

TEST_CASE("rectangle geometry") {
  BinaryImage m(80, 30, 0);
  for (int y = 9; y < 21; ++y)
    for (int x = 10; x < 70; ++x) m.at(x, y) = 1;
  const auto f = shape_features(cell_from_mask(m));
  CHECK(f[idx("Aspect ratio")] == doctest::Approx(5.0).epsilon(0.05));
  CHECK(std::abs(f[idx("Min feret")] - 12) <= 1);
  CHECK(std::abs(f[idx("Max feret")] - std::hypot(60, 12)) <= 1);
  CHECK(f[idx("Elongation")] == doctest::Approx(0.8).epsilon(0.02));
  CHECK(f[idx("Extent")] == doctest::Approx(1.0));
  CHECK(f[idx("Solidity")] == doctest::Approx(1.0));
  CHECK(f[idx("Area")] == 720);
  // Moment-equivalent ellipse of a 60x12 box: 4 sqrt(var), var = (n^2 - 1) / 12.
  CHECK(f[idx("Major axis")] == doctest::Approx(4 * std::sqrt((3600 - 1) / 12.0)));
  CHECK(f[idx("Minor axis")] == doctest::Approx(4 * std::sqrt((144 - 1) / 12.0)));
}

TEST_CASE("Hu moments are invariant to translation, rotation and scale") {
  const auto a = hu_moments(blob(80, 80, 40, 40));
  const auto t = hu_moments(blob(90, 85, 47, 43));
  const auto r = hu_moments(rotate90(blob(80, 80, 40, 40)));
  const auto rr = hu_moments(rotate90(rotate90(blob(80, 80, 40, 40))));
  const auto s = hu_moments(scale2(blob(80, 80, 40, 40)));
  for (int k = 0; k < 7; ++k) {
    CAPTURE(k);
    CHECK(rel(a[k], t[k]) < 1e-9);
    CHECK(rel(a[k], r[k]) < 1e-3);
    CHECK(rel(a[k], rr[k]) < 1e-3);
    CHECK(rel(a[k], s[k]) < 2e-2);
  }
  const auto c1 = shape_features(cell_from_mask(blob(80, 80, 40, 40)));
  const auto c2 = shape_features(cell_from_mask(rotate90(blob(80, 80, 40, 40))));
  CHECK(rel(c1[idx("Area")], c2[idx("Area")]) < 0.02);
  CHECK(rel(c1[idx("Perimeter")], c2[idx("Perimeter")]) < 0.02);
}

TEST_CASE("shape features are translation invariant") {
  const auto a = shape_features(cell_from_mask(blob(80, 80, 40, 40)));
  const auto b = shape_features(cell_from_mask(blob(100, 90, 55, 47)));
  for (std::size_t k = 0; k < kShapeFeatureCount; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-9));
}

TEST_CASE("colour conversions match reference values") {
  const Lab red = rgb_to_lab({255, 0, 0});
  CHECK(red.l == doctest::Approx(53.2408).epsilon(1e-4));
  CHECK(red.a == doctest::Approx(80.0925).epsilon(1e-4));
  CHECK(red.b == doctest::Approx(67.2032).epsilon(1e-4));
  const Lab white = rgb_to_lab({255, 255, 255});
  CHECK(white.l == doctest::Approx(100).epsilon(1e-4));
  CHECK(std::abs(white.a) < 1e-3);
  CHECK(std::abs(white.b) < 1e-3);
  const Lab grey = rgb_to_lab({119, 119, 119});
  CHECK(grey.l == doctest::Approx(50.0).epsilon(2e-3));
  const Hsv o = rgb_to_hsv({255, 128, 0});
  CHECK(o.h == doctest::Approx(30.1176).epsilon(1e-4));
  CHECK(o.s == doctest::Approx(1.0));
  CHECK(o.v == doctest::Approx(1.0));
  CHECK(rgb_to_hsv({0, 0, 255}).h == doctest::Approx(240));
  CHECK(rgb_to_hsv({255, 0, 128}).h == doctest::Approx(329.8824).epsilon(1e-4));
  CHECK(rgb_to_hsv({0, 0, 0}).s == 0);
}

TEST_CASE("colour statistics") {
  RgbImage red(4, 3, Rgb{255, 0, 0});
  BinaryImage all(4, 3, 1);
  auto f = color_features(red, all);
  CHECK(f[0] == 255);
  CHECK(f[1] == 0);
  CHECK(f[4] == 0);

  RgbImage two(2, 1);
  two.at(0, 0) = {100, 0, 0};
  two.at(1, 0) = {200, 0, 0};
  f = color_features(two, BinaryImage(2, 1, 1));
  CHECK(f[0] == doctest::Approx(150));
  CHECK(f[1] == doctest::Approx(70.7107).epsilon(1e-5));

  BinaryImage one(2, 1, 0);
  one.at(1, 0) = 1;
  f = color_features(two, one);
  CHECK(f[0] == 200);
  for (int k = 1; k < 18; k += 2) CHECK(f[k] == 0);

  std::mt19937 rng(29);
  RgbImage img(16, 16);
  BinaryImage m(16, 16, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      img.at(x, y) = {std::uint8_t(rng() % 256), std::uint8_t(rng() % 256), std::uint8_t(rng() % 256)};
      m.at(x, y) = rng() % 3 != 0;
    }
  f = color_features(img, m);
  // Direct summation of the two displayed formulas, pixels visited column-major.
  for (int ch = 0; ch < 9; ++ch) {
    auto value = [&](Rgb c) {
      const Hsv h = rgb_to_hsv(c);
      const Lab l = rgb_to_lab(c);
      const double v[9] = {double(c.r), double(c.g), double(c.b), h.h, h.s, h.v, l.l, l.a, l.b};
      return v[ch];
    };
    double n = 0, sum = 0;
    for (int x = 0; x < 16; ++x)
      for (int y = 0; y < 16; ++y)
        if (m.at(x, y)) {
          sum += value(img.at(x, y));
          n += 1;
        }
    const double mu = sum / n;
    double ss = 0;
    for (int x = 0; x < 16; ++x)
      for (int y = 0; y < 16; ++y)
        if (m.at(x, y)) ss += (value(img.at(x, y)) - mu) * (value(img.at(x, y)) - mu);
    CHECK(f[2 * ch] == doctest::Approx(mu).epsilon(1e-12));
    CHECK(f[2 * ch + 1] == doctest::Approx(std::sqrt(ss / (n - 1))).epsilon(1e-12));
  }
}

TEST_CASE("grey quantisation bins") {
  GrayImage g(4, 1);
  g.at(0, 0) = 0;
  g.at(1, 0) = 96;
  g.at(2, 0) = 255;
  g.at(3, 0) = 31;
  const auto q = quantize_gray(g, 8);
  CHECK(q.at(0, 0) == 0);
  CHECK(q.at(1, 0) == 3);
  CHECK(q.at(2, 0) == 7);
  CHECK(q.at(3, 0) == 0);
  CHECK(quantize_gray(g, 256) == g);
  CHECK_THROWS_AS(quantize_gray(g, 1), Error);
}

TEST_CASE("glcm hand cases") {
  const auto c = glcm(GrayImage(5, 5, 3), BinaryImage(5, 5, 1), 2, 1, 8);
  CHECK(c.at(3, 3) == 1.0);
  const auto fc = glcm_features(c);
  CHECK(fc.contrast == 0);
  CHECK(fc.dissimilarity == 0);
  CHECK(fc.homogeneity == 1);
  CHECK(fc.energy == 1);
  CHECK(fc.correlation == 1);

  GrayImage g(2, 2);
  g.at(0, 0) = 0;
  g.at(1, 0) = 1;
  g.at(0, 1) = 0;
  g.at(1, 1) = 1;
  const auto p = glcm(g, BinaryImage(2, 2, 1), 1, 0, 2);
  CHECK(p.at(0, 0) == 0);
  CHECK(p.at(0, 1) == 0.5);
  CHECK(p.at(1, 0) == 0.5);
  CHECK(p.at(1, 1) == 0);
  const auto fp = glcm_features(p);
  CHECK(fp.contrast == doctest::Approx(1.0));
  CHECK(fp.dissimilarity == doctest::Approx(1.0));
  CHECK(fp.homogeneity == doctest::Approx(0.5));
  CHECK(fp.energy == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(fp.correlation == doctest::Approx(-1.0));

  BinaryImage lone(3, 3, 0);
  lone.at(1, 1) = 1;
  CHECK_THROWS_AS(glcm(GrayImage(3, 3, 0), lone, 1, 0, 8), Error);
}

TEST_CASE("glcm equals pair enumeration on random patches") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    GrayImage g(8, 8);
    BinaryImage m(8, 8, 1);
    for (auto& v : g.pixels()) v = static_cast<std::uint8_t>(rng() % 256);
    if (trial % 2)
      for (auto& v : m.pixels()) v = rng() % 4 != 0;
    const auto q = quantize_gray(g, 8);
    for (int d = 1; d <= 3; ++d)
      for (int a = 0; a < 4; ++a) {
        const Point off = glcm_offset(d, a);
        const auto want = glcm_oracle(q, m, off, 8);
        const auto got = glcm(q, m, d, a, 8);
        double sum = 0;
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            CHECK(got.at(i, j) == doctest::Approx(want[i * 8 + j]).epsilon(1e-12));
            CHECK(got.at(i, j) == got.at(j, i));
            sum += got.at(i, j);
          }
        CHECK(std::abs(sum - 1) < 1e-9);
        // theta + pi: the opposite offset gives the same matrix.
        CHECK(glcm_oracle(q, m, {-off.x, -off.y}, 8) == want);
      }
  }
}

TEST_CASE("glcm features match a double-sum oracle and stay in bounds") {
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Glcm g;
    g.levels = 8;
    g.p.assign(64, 0);
    double total = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = i; j < 8; ++j) {
        const double v = trial % 3 == 0 && u(rng) < 0.6 ? 0.0 : u(rng);
        g.p[i * 8 + j] = g.p[j * 8 + i] = v;
        total += i == j ? v : 2 * v;
      }
    if (total == 0) continue;
    for (auto& v : g.p) v /= total;

    // Oracle via marginals rather than joint sums.
    std::vector<double> px(8, 0), py(8, 0);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        px[i] += g.at(i, j);
        py[j] += g.at(i, j);
      }
    double mx = 0, my = 0, sx = 0, sy = 0;
    for (int k = 0; k < 8; ++k) {
      mx += k * px[k];
      my += k * py[k];
    }
    for (int k = 0; k < 8; ++k) {
      sx += (k - mx) * (k - mx) * px[k];
      sy += (k - my) * (k - my) * py[k];
    }
    double con = 0, dis = 0, hom = 0, asm_ = 0, exy = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const double p = g.at(i, j);
        con += p * (i - j) * (i - j);
        dis += p * std::abs(i - j);
        hom += p / (1.0 + (i - j) * (i - j));
        asm_ += p * p;
        exy += i * j * p;
      }
    const auto f = glcm_features(g);
    CHECK(f.contrast == doctest::Approx(con).epsilon(1e-12));
    CHECK(f.dissimilarity == doctest::Approx(dis).epsilon(1e-12));
    CHECK(f.homogeneity == doctest::Approx(hom).epsilon(1e-12));
    CHECK(f.energy == doctest::Approx(std::sqrt(asm_)).epsilon(1e-12));
    CHECK(f.correlation == doctest::Approx((exy - mx * my) / std::sqrt(sx * sy)).epsilon(1e-10));
    CHECK(f.contrast >= 0);
    CHECK(f.dissimilarity >= 0);
    CHECK(f.homogeneity > 0);
    CHECK(f.homogeneity <= 1);
    CHECK(f.energy > 0);
    CHECK(f.energy <= 1);
    CHECK(f.correlation >= -1);
    CHECK(f.correlation <= 1);
  }
}

TEST_CASE("histogram skewness and kurtosis") {
  const std::vector<double> sym{1, 2, 3};
  CHECK(histogram_features(sym).skewness == doctest::Approx(0));
  const std::vector<double> v{0, 0, 0, 255};
  const auto h = histogram_features(v);
  // mu = 63.75, sigma^2 = 12192.1875; skew = (1/N) sum z^3.
  const double mu = 63.75, sd = std::sqrt((3 * mu * mu + (255 - mu) * (255 - mu)) / 4);
  const double z0 = -mu / sd, z1 = (255 - mu) / sd;
  CHECK(h.skewness == doctest::Approx((3 * z0 * z0 * z0 + z1 * z1 * z1) / 4));
  CHECK(h.kurtosis == doctest::Approx((3 * std::pow(z0, 4) + std::pow(z1, 4)) / 4 - 3));
  CHECK(h.skewness == doctest::Approx(2 / std::sqrt(3.0)));

  const std::vector<double> flat(10, 4.0);
  CHECK(histogram_features(flat).skewness == 0);
  CHECK(histogram_features(flat).kurtosis == 0);

  std::mt19937 rng(41);
  std::normal_distribution<double> n(100, 15);
  std::vector<double> big(200000);
  for (auto& x : big) x = n(rng);
  const auto g = histogram_features(big);
  CHECK(std::abs(g.skewness) < 0.1);
  CHECK(std::abs(g.kurtosis) < 0.2);
}

TEST_CASE("extract_all gives 121 finite values and is translation invariant") {
  RgbImage img(100, 90, Rgb{235, 228, 230});
  const auto m = disc_mask(100, 90, 45, 42, 25);
  for (int y = 0; y < 90; ++y)
    for (int x = 0; x < 100; ++x)
      if (m.at(x, y))
        img.at(x, y) = {std::uint8_t(150 + (x * 7 + y * 3) % 40), std::uint8_t(60 + (x * y) % 30), 100};
  const auto cell = cell_from_mask(m, img);
  const auto v = extract_all(cell);
  REQUIRE(v.size() == kFeatureCount);
  for (double x : v) CHECK(std::isfinite(x));
  CHECK(v[idx("Circularity")] >= 0.92);
  for (int k = 1; k <= 12; ++k) CHECK(v[idx(("Contrast" + std::to_string(k)).c_str())] >= 0);

  // Same pixels shifted by a multiple of the texture period.
  RgbImage img2(140, 120, Rgb{235, 228, 230});
  BinaryImage m2(140, 120, 0);
  for (int y = 0; y < 90; ++y)
    for (int x = 0; x < 100; ++x) {
      img2.at(x + 30, y + 20) = img.at(x, y);
      m2.at(x + 30, y + 20) = m.at(x, y);
    }
  const auto v2 = extract_all(cell_from_mask(m2, img2));
  for (std::size_t k = 0; k < kFeatureCount; ++k) CHECK(v2[k] == doctest::Approx(v[k]).epsilon(1e-9));

  CellContour bare = cell;
  bare.roi = RgbImage();
  CHECK_THROWS_AS(extract_all(bare), Error);
}

TEST_CASE("golden feature rows are byte-identical") {
  const std::filesystem::path dir = RBC_TEST_DATA;
  const auto img = read_image(dir / "golden_cells.png");
  const auto seg = segment_image(img, SegmentParams{});
  REQUIRE(seg.cells.size() == 2);
  std::ostringstream got;
  got << feature_csv_header() << '\n';
  for (std::size_t k = 0; k < seg.cells.size(); ++k) {
    FeatureRow row{"golden_cells.png", "golden_cells_cell" + std::to_string(k), "", extract_all(seg.cells[k])};
    got << feature_csv_line(row) << '\n';
  }
  std::ifstream in(dir / "golden_cells.csv", std::ios::binary);
  const std::string want((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (got.str() != want) {
    std::ofstream(std::filesystem::path(RBC_TEST_OUTPUT) / "golden_cells.actual.csv", std::ios::binary) << got.str();
  }
  CHECK(got.str() == want);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3, 1e-300, 123456789.0, -2.5, 0.0}) {
    const auto s = format_number(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(3.0) == "3");
}
