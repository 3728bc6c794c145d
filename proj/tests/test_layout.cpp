#include <doctest.h>

#include <algorithm>
#include <random>

#include "facadepv/layout.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace facadepv;
using facadepv::testing::data_path;
using facadepv::testing::error_kind_of;

namespace {

FacadeDescription wall_with(double w, double h, std::vector<BoundingBox> obstructions, double s = 0.01) {
  FacadeDescription f;
  f.building_id = "t";
  f.width_px = w;
  f.height_px = h;
  f.scale = compute_scale(w * s, w);
  f.components.push_back({ComponentClass::Wall, {0, 0, w, h}});
  for (const auto& o : obstructions) f.components.push_back({ComponentClass::Window, o});
  return f;
}

}  // namespace

TEST_SUITE("layout") {
  TEST_CASE("bare wall is one rectangle") {
    const auto f = wall_with(300, 200, {});
    CHECK(partition_free_wall(f) == std::vector<BoundingBox>{{0, 0, 300, 200}});
  }

  TEST_CASE("centred obstruction gives a frame") {
    const auto f = wall_with(100, 100, {{40, 40, 60, 60}});
    const auto rects = partition_free_wall(f);
    CHECK(rects == std::vector<BoundingBox>{{0, 0, 100, 40}, {0, 40, 40, 60}, {60, 40, 100, 60}, {0, 60, 100, 100}});
    CHECK(facadepv::testing::check_partition(f, rects).empty());
  }

  TEST_CASE("reference free area") {
    const auto f = load_facade(data_path("tianjin_lowrise.json"));
    const auto rects = partition_free_wall(f);
    CHECK(union_area(rects) == 728000.0);
    CHECK(area_of(rects, *f.scale) == doctest::Approx(54.6));
    CHECK(facadepv::testing::check_partition(f, rects).empty());
    CHECK(std::is_sorted(rects.begin(), rects.end(), [](const auto& a, const auto& b) {
      return a.y_min != b.y_min ? a.y_min < b.y_min : a.x_min < b.x_min;
    }));
    const auto layout = deterministic_layout(f, {});
    CHECK(layout.total_area_m2 <= 54.6 + 1e-9);
    CHECK(layout.total_area_m2 > 0.0);
    CHECK(layout.provenance == Provenance::Deterministic);
    CHECK(layout.modules_by_area == static_cast<long>(layout.total_area_m2 / 1.2));
  }

  TEST_CASE("fully obstructed wall") {
    const auto f = wall_with(100, 100, {{0, 0, 60, 100}, {50, 0, 100, 100}});
    CHECK(partition_free_wall(f).empty());
    const auto layout = deterministic_layout(f, {});
    CHECK(layout.rectangles.empty());
    CHECK(layout.total_area_m2 == 0.0);
    CHECK(layout.module_count == 0);
  }

  TEST_CASE("random instances against the grid oracle") {
    std::mt19937 rng(2024);
    for (int i = 0; i < 150; ++i) {
      const auto f = facadepv::testing::random_wall_instance(rng);
      const auto rects = partition_free_wall(f);
      const auto problem = facadepv::testing::check_partition(f, rects);
      CHECK_MESSAGE(problem.empty(), problem);
    }
  }

  TEST_CASE("partition is deterministic") {
    std::mt19937 rng(9);
    const auto f = facadepv::testing::random_wall_instance(rng);
    CHECK(partition_free_wall(f) == partition_free_wall(f));
  }

  TEST_CASE("edge margin shrinks the wall") {
    const auto f = load_facade(data_path("tianjin_lowrise.json"));
    const auto rects = partition_free_wall(f, 0.5);
    for (const auto& r : rects) {
      CHECK(r.x_min >= 50.0);
      CHECK(r.x_max <= 1150.0);
      CHECK(r.y_min >= 0.5 / 0.0075 - 1e-9);
      CHECK(r.y_max <= 800.0 - 0.5 / 0.0075 + 1e-9);
    }
    CHECK(union_area(rects) < 728000.0);
    CHECK(error_kind_of([&] { partition_free_wall(f, -1.0); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("merge") {
    const std::vector<BoundingBox> stacked{{0, 0, 100, 150}, {0, 150, 100, 450}};
    const auto merged = merge_rectangles(stacked);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0] == BoundingBox{0, 0, 100, 450});

    const std::vector<BoundingBox> side{{0, 0, 10, 10}, {10, 0, 30, 10}};
    CHECK(merge_rectangles(side) == std::vector<BoundingBox>{{0, 0, 30, 10}});

    const std::vector<BoundingBox> staggered{{0, 0, 10, 10}, {10, 5, 20, 15}};
    CHECK(merge_rectangles(staggered) == staggered);
  }

  TEST_CASE("merging guillotine splits") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<BoundingBox> pieces{{0, 0, 64, 64}};
      std::uniform_int_distribution<int> cuts(1, 12);
      const int n = cuts(rng);
      for (int c = 0; c < n; ++c) {
        std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
        const auto i = pick(rng);
        const auto b = pieces[i];
        const bool vertical = rng() % 2;
        const double lo = vertical ? b.x_min : b.y_min, hi = vertical ? b.x_max : b.y_max;
        if (hi - lo < 2) continue;
        std::uniform_int_distribution<int> at(static_cast<int>(lo) + 1, static_cast<int>(hi) - 1);
        const double cut = at(rng);
        if (vertical) {
          pieces[i] = {b.x_min, b.y_min, cut, b.y_max};
          pieces.push_back({cut, b.y_min, b.x_max, b.y_max});
        } else {
          pieces[i] = {b.x_min, b.y_min, b.x_max, cut};
          pieces.push_back({b.x_min, cut, b.x_max, b.y_max});
        }
      }
      const auto merged = merge_rectangles(pieces);
      CHECK(merged.size() <= pieces.size());
      CHECK(union_area(merged) == 4096.0);
      double sum = 0;
      for (const auto& r : merged) sum += r.area();
      CHECK(sum == 4096.0);
    }
  }

  TEST_CASE("qualify thresholds") {
    const auto scale = compute_scale(1.0, 100.0);  // 0.01 m/px
    const LayoutConstraints c;
    const std::vector<BoundingBox> thin{{0, 0, 90, 500}};
    CHECK(qualify(thin, scale, c).rectangles.empty());

    const std::vector<BoundingBox> exact{{0, 0, 100, 120}};
    const auto kept = qualify(exact, scale, c);
    CHECK(kept.rectangles.size() == 1);
    CHECK(kept.module_count == 1);

    const std::vector<BoundingBox> big{{0, 0, 200, 360}};
    const auto six = qualify(big, scale, c);
    CHECK(six.module_count == 6);
    CHECK(six.total_area_m2 == doctest::Approx(7.2));
    CHECK(six.modules_by_area == 6);

    const std::vector<BoundingBox> rotated{{0, 0, 360, 200}};
    CHECK(qualify(rotated, scale, c).module_count == 6);
  }

  TEST_CASE("packing counts") {
    const LayoutConstraints c;
    CHECK(packable_modules({2.0, 3.6}, c) == 6);
    CHECK(packable_modules({2.5, 2.5}, c) == 4);
    CHECK(packable_modules({1.2, 1.0}, c) == 1);
    CHECK(satisfies({1.0, 1.2}, c));
    CHECK(!satisfies({0.99, 5.0}, c));
    CHECK(!satisfies({1.1, 1.1}, c));
  }

  TEST_CASE("qualification monotonicity") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      const auto f = facadepv::testing::random_wall_instance(rng);
      const auto rects = partition_free_wall(f);
      LayoutConstraints strict;
      strict.min_short_edge_m = 2.0;
      strict.min_long_edge_m = 3.0;
      const auto a = qualify(rects, *f.scale, strict);
      const auto b = qualify(rects, *f.scale, {});
      for (const auto& r : a.rectangles) CHECK(std::find(b.rectangles.begin(), b.rectangles.end(), r) != b.rectangles.end());
      CHECK(b.total_area_m2 >= a.total_area_m2);
    }
  }

  TEST_CASE("area_of") {
    const auto f = load_facade(data_path("tianjin_lowrise.json"));
    CHECK(area_of({}, *f.scale) == 0.0);
    const std::vector<BoundingBox> wall{{0, 0, 1200, 800}};
    CHECK(area_of(wall, *f.scale) == doctest::Approx(72.0));
    const std::vector<BoundingBox> two{{0, 0, 100, 100}, {200, 0, 300, 100}};
    CHECK(area_of(two, *f.scale) == doctest::Approx(2 * 100 * 100 * 0.000075));
  }

  TEST_CASE("constraints validation") {
    LayoutConstraints c;
    c.min_short_edge_m = -1.0;
    CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
    c = {};
    c.min_long_edge_m = 0.5;
    CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("layout record") {
    const std::vector<BoundingBox> rects{{0, 0, 100, 450}, {120, 0, 200, 50}};
    const auto doc = layout_to_json(rects);
    CHECK(doc.dump() == R"({"installable_rectangles":[[0,0,100,450],[120,0,200,50]]})");
    CHECK(layout_from_json(doc) == rects);
    CHECK(layout_to_json({}).dump() == R"({"installable_rectangles":[]})");
    CHECK(error_kind_of([&] { layout_from_json(nlohmann::json::object()); }) == ErrorKind::SchemaViolation);
  }
}
