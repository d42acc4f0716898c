#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "generators.hpp"
#include "phagoq/aggregates/aggregates.hpp"
#include "phagoq/util/csv.hpp"
#include "tempdir.hpp"

using namespace phagoq;
using namespace phagoq::aggregates;

namespace {

RegionFeatures region(std::int32_t label, std::int64_t area, double x, double y) { return {label, area, {x, y}}; }

void paint_disc(Frame& f, double cx, double cy, double r, float v) {
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) f.at(x, y) = v;
    }
  }
}

FrameAggregates frame_of(int t, std::vector<RegionFeatures> r) { return {t, std::move(r)}; }

}  // namespace

TEST_SUITE("aggregates") {
  TEST_CASE("segment_aggregates examples") {
    CHECK(segment_aggregates(Frame(32, 32, 0.1f)).max_label == 0);

    Frame one(48, 48, 0.1f);
    paint_disc(one, 20.3, 22.7, 6.4, 0.9f);
    std::int64_t disc_px = 0;
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) disc_px += (x - 20.3) * (x - 20.3) + (y - 22.7) * (y - 22.7) <= 6.4 * 6.4;
    }
    const LabelMap l1 = segment_aggregates(one);
    REQUIRE(l1.max_label == 1);
    CHECK(region_features(l1)[0].area_px == disc_px);

    Frame two(64, 32, 0.1f);
    for (int x = 14; x < 50; ++x) {
      for (int y = 14; y < 18; ++y) two.at(x, y) = 0.4f;
    }
    paint_disc(two, 12, 16, 6, 0.9f);
    paint_disc(two, 52, 16, 6, 0.9f);
    CHECK(segment_aggregates(two).max_label == 2);
  }

  TEST_CASE("labeled area equals foreground pixel count") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const Frame f = testing::random_frame(23, 19, seed);
      const LabelMap l = segment_aggregates(f);
      std::int64_t fg = 0, labeled = 0;
      for (float v : f.pixels()) fg += v >= 0.5f;
      for (const auto& r : region_features(l)) labeled += r.area_px;
      CHECK(labeled == fg);
    }
  }

  TEST_CASE("min area drops small components and relabels densely") {
    Frame f(40, 40, 0.0f);
    f.at(2, 2) = 1.0f;
    paint_disc(f, 20, 20, 4, 1.0f);
    f.at(37, 37) = 1.0f;
    SegmentOptions o;
    o.min_area_px = 2;
    const LabelMap l = segment_aggregates(f, o);
    CHECK(l.max_label == 1);
    CHECK(l.labels.at(20, 20) == 1);
    CHECK(l.labels.at(2, 2) == 0);
    o.min_area_px = 0;
    CHECK_THROWS_AS(segment_aggregates(f, o), InvalidArgument);
  }

  TEST_CASE("matching examples") {
    const std::vector<RegionFeatures> a = {region(1, 50, 10, 10), region(2, 60, 50, 10), region(3, 70, 30, 40)};
    const Pairing id = match_aggregates(a, a);
    REQUIRE(id.pairs.size() == 3);
    for (const auto& p : id.pairs) CHECK(p.prev_label == p.curr_label);
    CHECK(id.unmatched_prev.empty());

    const Pairing none = match_aggregates({}, a);
    CHECK(none.pairs.empty());
    CHECK(none.unmatched_curr == std::vector<std::int32_t>{1, 2, 3});

    std::vector<RegionFeatures> b = a;
    b[1].centroid.x += 3.0;
    b[1].centroid.y += 4.0;
    const Pairing drift = match_aggregates(a, b);
    REQUIRE(drift.pairs.size() == 3);
    CHECK(drift.pairs[1].curr_label == 2);
    CHECK(drift.pairs[1].distance_px == doctest::Approx(5.0));

    b[1].centroid.x += 30.0;
    const Pairing far = match_aggregates(a, b);
    CHECK(far.pairs.size() == 2);
    CHECK(far.unmatched_prev == std::vector<std::int32_t>{2});
    CHECK(far.unmatched_curr == std::vector<std::int32_t>{2});
  }

  TEST_CASE("matching tie-break by distance then label") {
    // Two previous aggregates equidistant from one current aggregate.
    const std::vector<RegionFeatures> prev = {region(4, 10, 0, 0), region(2, 10, 10, 0)};
    const std::vector<RegionFeatures> curr = {region(1, 10, 5, 0)};
    const Pairing p = match_aggregates(prev, curr);
    REQUIRE(p.pairs.size() == 1);
    CHECK(p.pairs[0].prev_label == 2);
    CHECK(p.unmatched_prev == std::vector<std::int32_t>{4});
  }

  TEST_CASE("matching uses each label once on random inputs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 100);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<RegionFeatures> prev, curr;
      for (int i = 0; i < 8; ++i) prev.push_back(region(i + 1, 10, u(rng), u(rng)));
      for (int i = 0; i < 7; ++i) curr.push_back(region(i + 1, 10, u(rng), u(rng)));
      const Pairing p = match_aggregates(prev, curr);
      std::set<std::int32_t> ps, cs;
      for (const auto& m : p.pairs) {
        CHECK(ps.insert(m.prev_label).second);
        CHECK(cs.insert(m.curr_label).second);
        CHECK(m.distance_px <= kDefaultMatchDistancePx);
      }
      CHECK(p.pairs.size() + p.unmatched_prev.size() == prev.size());
      CHECK(p.pairs.size() + p.unmatched_curr.size() == curr.size());
    }
  }

  TEST_CASE("event rule examples") {
    const double pitch = 0.103;
    const std::vector<RegionFeatures> prev = {region(1, 100, 20, 20)};
    {
      const std::vector<RegionFeatures> curr = {region(1, 49, 28, 20)};
      const auto ev = detect_phagocytosis(prev, curr, match_aggregates(prev, curr), pitch, {}, 5);
      REQUIRE(ev.size() == 1);
      CHECK(ev[0].t == 5);
      CHECK(ev[0].area_before_px == 100);
      CHECK(ev[0].area_after_px == 49);
      CHECK(ev[0].displacement_um == doctest::Approx(0.824));
    }
    {
      const std::vector<RegionFeatures> curr = {region(1, 60, 30, 20)};
      CHECK(detect_phagocytosis(prev, curr, match_aggregates(prev, curr), pitch, {}, 5).empty());
      EventCriteria dis;
      dis.rule = EventRule::Disjunction;
      CHECK(detect_phagocytosis(prev, curr, match_aggregates(prev, curr), pitch, dis, 5).size() == 1);
    }
    {
      const std::vector<RegionFeatures> curr;
      const auto ev = detect_phagocytosis(prev, curr, match_aggregates(prev, curr), pitch, {}, 7);
      REQUIRE(ev.size() == 1);
      CHECK(ev[0].area_after_px == 0);
    }
    CHECK(parse_rule("disjunction") == EventRule::Disjunction);
    CHECK_THROWS_AS(parse_rule("or"), InvalidArgument);
  }

  TEST_CASE("conjunction events are a subset of disjunction events") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> pos(0, 60), jitter(-9, 9);
    std::uniform_int_distribution<int> area(1, 200);
    EventCriteria dis;
    dis.rule = EventRule::Disjunction;
    for (int rep = 0; rep < 300; ++rep) {
      std::vector<RegionFeatures> prev, curr;
      for (int i = 0; i < 6; ++i) {
        const double x = pos(rng), y = pos(rng);
        prev.push_back(region(i + 1, area(rng), x, y));
        if (rng() % 5) curr.push_back(region(static_cast<int>(curr.size()) + 1, area(rng), x + jitter(rng), y + jitter(rng)));
      }
      const Pairing p = match_aggregates(prev, curr);
      const auto c = detect_phagocytosis(prev, curr, p, 0.103, {}, 1);
      const auto d = detect_phagocytosis(prev, curr, p, 0.103, dis, 1);
      std::set<std::int32_t> dl;
      for (const auto& e : d) dl.insert(e.prev_label);
      for (const auto& e : c) CHECK(dl.count(e.prev_label) == 1);
    }
  }

  TEST_CASE("area eaten curve examples") {
    const double pitch = 0.1;
    std::vector<FrameAggregates> stat;
    for (int t = 0; t < 5; ++t) stat.push_back(frame_of(t, {region(1, 100, 10, 10), region(2, 40, 50, 50)}));
    for (const auto& c : analyze_aggregates(stat, pitch).curve) CHECK(c.eaten_px == 0);

    std::vector<FrameAggregates> vanish;
    for (int t = 0; t < 6; ++t) {
      std::vector<RegionFeatures> r = {region(1, 40, 50, 50)};
      if (t < 3) r.push_back(region(2, 100, 10, 10));
      vanish.push_back(frame_of(t, r));
    }
    const auto va = analyze_aggregates(vanish, pitch);
    std::vector<std::int64_t> eaten;
    for (const auto& c : va.curve) eaten.push_back(c.eaten_px);
    CHECK(eaten == std::vector<std::int64_t>{0, 0, 0, 100, 100, 100});
    CHECK(va.curve[3].eaten_um2 == doctest::Approx(1.0));
    REQUIRE(va.events.size() == 1);
    CHECK(va.events[0].t == 3);
    CHECK(va.curve[3].events_to_date == 1);

    const std::vector<FrameAggregates> shrink = {frame_of(0, {region(1, 100, 10, 10)}),
                                                 frame_of(1, {region(1, 50, 18, 10)}), frame_of(2, {})};
    const auto sh = analyze_aggregates(shrink, pitch);
    CHECK(sh.curve[0].eaten_px == 0);
    CHECK(sh.curve[1].eaten_px == 50);
    CHECK(sh.curve[2].eaten_px == 100);
    CHECK(sh.events.size() == 2);
    CHECK(sh.records[1].matched_prev == 1);
    CHECK_FALSE(sh.records[0].matched_prev.has_value());
  }

  TEST_CASE("eaten area is non-decreasing when aggregates only shrink or vanish") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<RegionFeatures> cur;
      for (int i = 0; i < 10; ++i) cur.push_back(region(i + 1, 50 + static_cast<int>(rng() % 100), 30.0 * i, 0));
      std::vector<FrameAggregates> seq;
      for (int t = 0; t < 20; ++t) {
        seq.push_back(frame_of(t, cur));
        std::vector<RegionFeatures> next;
        for (auto r : cur) {
          const auto roll = rng() % 10;
          if (roll == 0) continue;
          if (roll == 1) r.area_px = std::max<std::int64_t>(1, r.area_px / 2);
          next.push_back(r);
        }
        cur = next;
      }
      const auto an = analyze_aggregates(seq, 0.103);
      for (std::size_t i = 1; i < an.curve.size(); ++i) CHECK(an.curve[i].eaten_px >= an.curve[i - 1].eaten_px);
    }
  }

  TEST_CASE("analysis skips absent frames and rejects unsorted input") {
    const std::vector<FrameAggregates> gap = {frame_of(0, {region(1, 100, 10, 10)}), frame_of(3, {})};
    const auto an = analyze_aggregates(gap, 0.1);
    REQUIRE(an.events.size() == 1);
    CHECK(an.events[0].t == 3);
    const std::vector<FrameAggregates> bad = {frame_of(2, {}), frame_of(1, {})};
    CHECK_THROWS_AS(analyze_aggregates(bad, 0.1), InvalidArgument);
  }

  TEST_CASE("csv files") {
    testing::TempDir dir;
    const std::vector<FrameAggregates> shrink = {frame_of(0, {region(1, 100, 10, 10)}),
                                                 frame_of(1, {region(1, 50, 18, 10)}), frame_of(2, {})};
    const auto an = analyze_aggregates(shrink, 0.103);
    write_aggregates_csv(dir / "aggregates.csv", an.records);
    write_events_csv(dir / "events.csv", an.events);
    write_curve_csv(dir / "curve.csv", an.curve);
    const auto ev = read_events_csv(dir / "events.csv");
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].area_after_px == 50);
    CHECK(ev[0].displacement_um == doctest::Approx(0.824));
    const auto cv = read_curve_csv(dir / "curve.csv", 0.103);
    REQUIRE(cv.size() == 3);
    CHECK(cv[2].eaten_px == 100);
    const auto tab = csv::read(dir / "aggregates.csv");
    CHECK(tab.rows[0][tab.column("matched_prev")].empty());
    CHECK(tab.rows[1][tab.column("matched_prev")] == "1");
  }
}
