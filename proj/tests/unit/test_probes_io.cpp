// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "nerg/probes_io.hpp"

namespace nerg {
namespace {

TEST(GazeCsv, ParsesAndRejectsNonUnitRows) {
  const std::string text =
      "x,y,z,dx,dy,dz\n"
      "0,0,0,1,0,0\n"
      "1,2,3,0,0.5,0\n"
      "\n"
      "  4 , 5 , 6 , 0 , 0 , -1 \r\n";
  const GazeLoadResult r = parse_gaze_csv(text);
  ASSERT_EQ(r.rays.size(), 2u);
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].line, 3u);
  EXPECT_EQ(r.rays[1].position, (Vec3{4, 5, 6}));
  EXPECT_EQ(r.rays[1].direction.vec(), (Vec3{0, 0, -1}));
}

TEST(GazeCsv, MalformedRowsThrowWithLine) {
  try {
    parse_gaze_csv("x,y,z,dx,dy,dz\n0,0,0,1,0,0\n0,0,zero,1,0,0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_gaze_csv("x,y,z,dx,dy,dz\n0,0,0,1,0\n"), ParseError);
  EXPECT_THROW(parse_gaze_csv("x,y,z,dx,dy,dz\n0,0,0,1,0,0,7\n"), ParseError);
  EXPECT_THROW(parse_gaze_csv("a,b\n"), ParseError);
  EXPECT_THROW(parse_gaze_csv(""), ParseError);
  EXPECT_THROW(parse_gaze_csv("x,y,z,dx,dy,dz\nnan,0,0,1,0,0\n"), ParseError);
}

TEST(GazeCsv, TransformMapsBackToScene) {
  const auto t = WorldTransform::similarity(2.0, {0, 0, 1}, kPi / 2, {10, 0, 0});
  // (1, 0, 0) in scene is (10, 2, 0) in gaze coordinates; +x maps to +y
  const GazeLoadResult r = parse_gaze_csv("x,y,z,dx,dy,dz\n10,2,0,0,1,0\n", &t);
  ASSERT_EQ(r.rays.size(), 1u);
  EXPECT_NEAR(distance(r.rays[0].position, {1, 0, 0}), 0.0, 1e-12);
  EXPECT_NEAR(dot(r.rays[0].direction.vec(), {1, 0, 0}), 1.0, 1e-12);
}

TEST(GazeCsv, FormatRoundTrip) {
  std::vector<GazeRay> rays{{{0.1, 0.2, 0.3}, UnitDir::normalize({1, 2, 3})}, {{-1, 0, 5}, UnitDir::normalize({0, -1, 0})}};
  const GazeLoadResult r = parse_gaze_csv(format_gaze_csv(rays));
  ASSERT_EQ(r.rays.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(r.rays[i].position, rays[i].position);
    EXPECT_NEAR(dot(r.rays[i].direction.vec(), rays[i].direction.vec()), 1.0, 1e-15);
  }
}

TEST(ProbeFile, RoundTrip) {
  ProbeSet set;
  set.record.placement.kind = PlacementKind::Grid;
  set.record.placement.grid = {3, 2, 1};
  set.record.params.kappa = 30.0;
  set.record.seed = 99;
  set.probes.emplace_back(Vec3{1, 2, 3}, std::vector<Vec3>{normalized({1, 0, 0}), normalized({0, 1, 1})}, VmfKernel(30.0));
  set.probes.emplace_back(Vec3{-1, 0, 0.5}, std::vector<Vec3>{normalized({0, 0, 1})}, VmfKernel(30.0));
  const ProbeSet back = decode_probe_set(encode_probe_set(set));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.record.placement.kind, PlacementKind::Grid);
  EXPECT_EQ(back.record.placement.grid, set.record.placement.grid);
  EXPECT_EQ(back.record.seed, 99u);
  EXPECT_EQ(back.probes[1].kernel().kappa(), 30.0);
  EXPECT_EQ(back.probes[0].rays().size(), 2u);
  EXPECT_NEAR(back.probes[0].rays()[1].y, std::sqrt(0.5), 1e-7);
  // re-encoding f32 data is stable
  EXPECT_EQ(encode_probe_set(back), encode_probe_set(decode_probe_set(encode_probe_set(back))));
}

TEST(ProbeFile, RejectsCorruption) {
  ProbeSet set;
  set.probes.emplace_back(Vec3{0, 0, 0}, std::vector<Vec3>{{1, 0, 0}}, VmfKernel());
  auto bytes = encode_probe_set(set);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_probe_set(bad_magic), ParseError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_probe_set(truncated), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_probe_set(trailing), ParseError);
}

}  // namespace
}  // namespace nerg
